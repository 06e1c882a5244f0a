#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <set>
#include <sstream>

#include "hgr/dataset.hpp"
#include "hgr/rng.hpp"
#include "hgr/skeleton.hpp"
#include "hgr/synthetic.hpp"
#include "test_util.hpp"

using namespace hgr;

namespace {

// Line-by-line reference reader for the canonical format, written without the
// library's helpers: split on commas, count, convert with strtod.
std::vector<std::vector<double>> reference_rows(const std::string& text) {
    std::vector<std::vector<double>> rows;
    std::stringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) {
        if (line.empty() || line.rfind("frame", 0) == 0) continue;
        std::vector<double> row;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) row.push_back(cell.empty() ? NAN : std::strtod(cell.c_str(), nullptr));
        rows.push_back(row);
    }
    return rows;
}

std::string two_row_fixture() {
    std::string text = canonical_csv_header() + "\n";
    for (int r = 0; r < 2; ++r) {
        text += std::to_string(10 + r) + "," + std::to_string(0.01 * r);
        for (int c = 0; c < 138; ++c) text += "," + std::to_string(r * 1000 + c) + ".25";
        text += "\n";
    }
    return text;
}

FrameSequence random_sequence(Rng& rng, std::size_t n, bool timestamps) {
    FrameSequence seq;
    seq.source_id = "rec7";
    std::uint64_t index = rng.below(5);
    for (std::size_t i = 0; i < n; ++i) {
        Frame f;
        f.index = index;
        index += 1 + rng.below(3);
        if (timestamps) f.timestamp = static_cast<double>(f.index) / 90.0;
        for (std::size_t j = 0; j < kJointCount; ++j) {
            if (rng.uniform() < 0.1) {
                f.invalidate(JointId::from_index(j));
            } else {
                f.set(JointId::from_index(j), {rng.uniform(-300, 300), rng.uniform(0, 400), rng.uniform(-200, 200)});
            }
        }
        seq.frames.push_back(f);
    }
    return seq;
}

}  // namespace

TEST_CASE("joint universe has 46 ids in canonical order") {
    std::set<std::string> names;
    for (std::size_t i = 0; i < kJointCount; ++i) {
        const JointId id = JointId::from_index(i);
        CHECK(id.index() == i);
        names.insert(id.name());
    }
    CHECK(names.size() == kJointCount);
    CHECK(JointId::elbow(Hand::Left).index() == 0);
    CHECK(JointId::elbow(Hand::Right).index() == kJointsPerHand);
    CHECK(JointId::fingertip(Hand::Right, Finger::Pinky).index() == kJointCount - 1);
    CHECK_THROWS(JointId::from_index(kJointCount));

    std::size_t tips = 0;
    for (std::size_t i = 0; i < kJointCount; ++i) tips += JointId::from_index(i).is_fingertip();
    CHECK(tips == kFingertipCount);
    for (std::size_t s = 0; s < kFingertipCount; ++s) {
        const JointId t = fingertip_from_slot(s);
        CHECK(t.is_fingertip());
        CHECK(fingertip_slot(t.hand, t.finger) == s);
    }
}

TEST_CASE("frame flags non-finite joints as invalid") {
    Frame f;
    f.set(JointId::palm(Hand::Left), {1, 2, 3});
    f.set(JointId::palm(Hand::Right), {NAN, 2, 3});
    CHECK(f.is_valid(JointId::palm(Hand::Left)));
    CHECK_FALSE(f.is_valid(JointId::palm(Hand::Right)));
}

TEST_CASE("parse_frames on an empty file gives no frames") {
    CHECK(parse_frames("", FrameFormat::CanonicalCsv).frames.empty());
    CHECK(parse_frames("", FrameFormat::Lmdhg).frames.empty());
    CHECK(parse_frames(canonical_csv_header() + "\n", FrameFormat::CanonicalCsv).frames.empty());
}

TEST_CASE("two-row canonical fixture matches a reference reader") {
    const std::string text = two_row_fixture();
    const auto seq = parse_frames(text, "canonical-csv", "fixture");
    const auto ref = reference_rows(text);
    REQUIRE(seq.frames.size() == 2);
    REQUIRE(ref.size() == 2);
    for (std::size_t r = 0; r < 2; ++r) {
        const Frame& f = seq.frames[r];
        CHECK(f.index == static_cast<std::uint64_t>(ref[r][0]));
        CHECK(f.timestamp.value() == ref[r][1]);
        for (std::size_t j = 0; j < kJointCount; ++j) {
            CHECK(f.valid[j]);
            CHECK(f.positions[j].x == ref[r][2 + 3 * j]);
            CHECK(f.positions[j].y == ref[r][3 + 3 * j]);
            CHECK(f.positions[j].z == ref[r][4 + 3 * j]);
        }
    }
}

TEST_CASE("malformed rows report their line number") {
    std::string text = two_row_fixture();
    text += "12,0.5,1,2,3\n";
    try {
        parse_frames(text, FrameFormat::CanonicalCsv);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 4);
        CHECK_THAT(e.what(), Catch::Matchers::ContainsSubstring("columns"));
    }
    CHECK_THROWS_AS(parse_frames("1 2 3\n", FrameFormat::Lmdhg), ParseError);
    CHECK_THROWS_AS(parse_frame_format("bvh"), UsageError);
}

TEST_CASE("frames must be in index order") {
    std::string text = two_row_fixture();
    const auto pos = text.find("\n11,");
    text.replace(pos + 1, 2, "09");
    CHECK_THROWS_AS(parse_frames(text, FrameFormat::CanonicalCsv), ParseError);
}

TEST_CASE("canonical csv round trip is field-identical") {
    Rng rng(GENERATE(1u, 2u, 3u));
    const bool ts = rng.below(2) == 1;
    const auto seq = random_sequence(rng, 1 + rng.below(40), ts);
    const auto back = parse_frames(write_canonical_csv(seq), FrameFormat::CanonicalCsv, seq.source_id);
    REQUIRE(back.frames.size() == seq.frames.size());
    CHECK(back == seq);
    for (std::size_t i = 0; i < seq.frames.size(); ++i) {
        CHECK(back.frames[i].valid == seq.frames[i].valid);
        CHECK(back.frames[i].timestamp == seq.frames[i].timestamp);
    }
}

TEST_CASE("lmdhg adapter reads whitespace rows with and without frame numbers") {
    std::string with_index, without;
    for (int r = 0; r < 3; ++r) {
        with_index += std::to_string(r + 1);
        for (int c = 0; c < 138; ++c) {
            with_index += " " + std::to_string(c);
            without += (c ? "\t" : "") + std::to_string(c + r);
        }
        with_index += "\n";
        without += "\n";
    }
    const auto a = parse_frames("# comment\n" + with_index, FrameFormat::Lmdhg);
    const auto b = parse_frames(without, FrameFormat::Lmdhg);
    REQUIRE(a.frames.size() == 3);
    REQUIRE(b.frames.size() == 3);
    CHECK(a.frames[2].index == 3);
    CHECK(b.frames[2].index == 2);
    CHECK(a.frames[0].positions[45].z == 137);
    CHECK(b.frames[1].positions[0].x == 1);
}

TEST_CASE("annotations") {
    const ClassSet classes = ClassSet::lmdhg();
    CHECK(parse_annotations("", classes).intervals.empty());

    const auto one = parse_annotations("Rest,10,57\n", classes);
    REQUIRE(one.intervals.size() == 1);
    CHECK(one.intervals[0].class_name == "Rest");
    CHECK(one.intervals[0].length() == 48);

    const auto overlap = parse_annotations("class,start,end\nZoom,30,40\nCatch,0,35\n", classes);
    CHECK(overlap.intervals.size() == 2);
    CHECK(overlap.intervals[0].class_name == "Catch");
    CHECK(overlap.warnings.size() == 1);

    try {
        parse_annotations("Rest,0,5\nWave,6,9\n", classes);
        FAIL("expected an error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
        CHECK_THAT(e.what(), Catch::Matchers::ContainsSubstring("Shake with two hands"));
    }
    CHECK_THROWS_AS(parse_annotations("Rest,9,5\n", classes), ParseError);
}

TEST_CASE("class lookup tolerates spelling variants") {
    const ClassSet c = ClassSet::lmdhg();
    CHECK(c.size() == 14);
    CHECK(c.index_of("point to") == c.index_of("Point to"));
    CHECK(c.index_of("DRAW_LINE") == c.index_of("Draw Line"));
    CHECK(c.index_of("Point to with hand raised") == c.index_of("Point to with two hands"));
    CHECK_THROWS_AS(c.index_of("Wave"), std::invalid_argument);
    CHECK(ClassSet::extended().size() == 16);
    CHECK(ClassSet::from_spec("a, b,c").names() == std::vector<std::string>{"a", "b", "c"});
}

TEST_CASE("segment") {
    const ClassSet classes = ClassSet::lmdhg();
    Rng rng(5);
    const auto seq = random_sequence(rng, 30, true);

    CHECK(segment(seq, {}, classes).empty());

    const auto whole = segment(seq, {{"Zoom", seq.frames.front().index, seq.frames.back().index}}, classes);
    REQUIRE(whole.size() == 1);
    CHECK(whole[0].length() == seq.frames.size());
    CHECK(whole[0].recording == 7);
    CHECK(whole[0].sample_id == "rec7_000");
    CHECK(whole[0].label == classes.index_of("Zoom"));

    try {
        segment(seq, {{"Rest", 0, seq.frames.back().index + 1}}, classes);
        FAIL("expected out_of_range");
    } catch (const std::out_of_range& e) {
        CHECK_THAT(e.what(), Catch::Matchers::ContainsSubstring("Rest"));
    }
}

TEST_CASE("segment over exhaustive intervals reproduces the frame list") {
    const ClassSet classes = ClassSet::lmdhg();
    Rng rng(GENERATE(11u, 12u, 13u, 14u));
    const auto seq = random_sequence(rng, 20 + rng.below(40), false);
    std::vector<LabelInterval> ivs;
    std::size_t i = 0;
    while (i < seq.frames.size()) {
        const std::size_t len = 1 + rng.below(8);
        const std::size_t last = std::min(seq.frames.size() - 1, i + len - 1);
        ivs.push_back({classes.name(rng.below(classes.size())), seq.frames[i].index, seq.frames[last].index});
        i = last + 1;
    }
    std::vector<Frame> joined;
    for (const auto& s : segment(seq, ivs, classes)) {
        CHECK(s.length() >= 1);
        joined.insert(joined.end(), s.frames.begin(), s.frames.end());
    }
    CHECK(joined == seq.frames);
}

TEST_CASE("validate_sample") {
    const auto clean = synth::sinusoid_fixture();
    GestureSample all_valid = clean;
    for (auto& f : all_valid.frames) {
        for (std::size_t j = 0; j < kJointCount; ++j) f.set(JointId::from_index(j), {1, 2, 3});
    }
    const auto d0 = validate_sample(all_valid);
    CHECK(d0.clean());
    CHECK(d0.renderable);
    CHECK(d0.invalid_fingertip_overall == 0.0);

    GestureSample empty_hands = clean;
    for (auto& f : empty_hands.frames) {
        for (std::size_t j = 0; j < kJointCount; ++j) f.invalidate(JointId::from_index(j));
    }
    CHECK_FALSE(validate_sample(empty_hands).renderable);

    GestureSample ten;
    ten.frames.assign(all_valid.frames.begin(), all_valid.frames.begin() + 10);
    const JointId tip = JointId::fingertip(Hand::Left, Finger::Middle);
    for (int k : {1, 4, 8}) ten.frames[static_cast<std::size_t>(k)].set(tip, {INFINITY, 0, 0});
    const auto d = validate_sample(ten);
    CHECK(d.invalid_fingertip_fraction[fingertip_slot(Hand::Left, Finger::Middle)] == Catch::Approx(0.3));
    CHECK(d.frames_with_invalid_joints.size() == 3);
    CHECK(d.renderable);
}

TEST_CASE("dataset layout round trip") {
    const auto dir = test::temp_dir("dataset");
    const ClassSet classes = ClassSet::synthetic();
    Rng rng(3);
    std::vector<Recording> recs{synth::make_recording("synth2", 3, rng), synth::make_recording("synth10", 2, rng)};
    for (const auto& r : recs) save_recording(dir, r);
    const auto loaded = load_dataset(dir, classes);
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0].sequence.source_id == "synth2");  // natural order
    CHECK(loaded[0].sequence == recs[0].sequence);
    CHECK(loaded[1].intervals.size() == 2);
    const auto samples = segment_all(loaded, classes);
    CHECK(samples.size() == 5);
    CHECK(samples.back().recording == 10);
}

TEST_CASE("lmdhg import pairs data and label files") {
    const auto dir = test::temp_dir("lmdhg");
    const ClassSet classes = ClassSet::lmdhg();
    std::string frames;
    for (int r = 0; r < 6; ++r) {
        for (int c = 0; c < 138; ++c) frames += (c ? " " : "") + std::to_string(r + c);
        frames += "\n";
    }
    write_file(dir / "DataFile3.txt", frames);
    write_file(dir / "DataFile3_labels.txt", "Point to with hand raised,0,2\nRest,3,5\n");
    write_file(dir / "DataFile12.txt", frames);
    write_file(dir / "DataFile12_labels.txt", "Zoom,1,4\n");
    const auto recs = import_lmdhg(dir, classes);
    REQUIRE(recs.size() == 2);
    CHECK(recs[0].sequence.source_id == "DataFile3");
    const auto samples = segment_all(recs, classes);
    REQUIRE(samples.size() == 3);
    CHECK(samples[0].label == classes.index_of("Point to with two hands"));
    CHECK(samples[0].recording == 3);
    CHECK(samples[2].recording == 12);
}

TEST_CASE("natural ordering") {
    CHECK(natural_less("rec2", "rec10"));
    CHECK_FALSE(natural_less("rec10", "rec2"));
    CHECK(natural_less("a", "b"));
}
