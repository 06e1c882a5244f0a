#include "hgr/skeleton.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cctype>

namespace hgr {

namespace {

constexpr std::size_t kCoordColumns = kJointCount * 3;

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

// Splits text into lines, keeping 1-based line numbers; '\r' is dropped.
template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        std::string_view line = text.substr(pos, nl - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        ++line_no;
        fn(line_no, line);
        pos = nl + 1;
    }
}

std::vector<std::string_view> split(std::string_view line, std::string_view seps, bool collapse) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || seps.find(line[i]) != std::string_view::npos) {
            std::string_view field = line.substr(start, i - start);
            if (!collapse || !field.empty()) out.push_back(field);
            start = i + 1;
        }
    }
    return out;
}

double parse_double(std::string_view field, std::size_t line_no) {
    field = trim(field);
    if (field.empty()) return NAN;
    if (field.front() == '+') field.remove_prefix(1);
    double value = 0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc() || ptr != field.data() + field.size()) {
        // from_chars reports out-of-range values as errors; those are non-finite observations.
        if (ec == std::errc::result_out_of_range) return NAN;
        throw ParseError(line_no, "not a number: '" + std::string(field) + "'");
    }
    return value;
}

std::uint64_t parse_uint(std::string_view field, std::size_t line_no, const char* what) {
    field = trim(field);
    std::uint64_t value = 0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (field.empty() || ec != std::errc() || ptr != field.data() + field.size()) {
        throw ParseError(line_no, std::string("invalid ") + what + ": '" + std::string(field) + "'");
    }
    return value;
}

void fill_joints(Frame& frame, const std::vector<std::string_view>& fields, std::size_t offset, std::size_t line_no) {
    for (std::size_t j = 0; j < kJointCount; ++j) {
        Vec3 p{parse_double(fields[offset + 3 * j], line_no), parse_double(fields[offset + 3 * j + 1], line_no),
               parse_double(fields[offset + 3 * j + 2], line_no)};
        frame.positions[j] = p;
        frame.valid[j] = p.finite();
    }
}

void append_double(std::string& out, double v) {
    if (!std::isfinite(v)) {
        out += "nan";
        return;
    }
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, ptr);
}

void check_order(const Frame& prev, const Frame& cur, std::size_t line_no) {
    if (cur.index <= prev.index) {
        throw ParseError(line_no, "frame index " + std::to_string(cur.index) + " not greater than previous " +
                                      std::to_string(prev.index));
    }
    if (prev.timestamp && cur.timestamp && *cur.timestamp < *prev.timestamp) {
        throw ParseError(line_no, "timestamp decreases");
    }
}

FrameSequence parse_canonical(std::string_view text, std::string source_id) {
    FrameSequence seq;
    seq.source_id = std::move(source_id);
    bool first_content = true;
    for_each_line(text, [&](std::size_t line_no, std::string_view line) {
        if (trim(line).empty()) return;
        if (first_content) {
            first_content = false;
            if (trim(line).starts_with("frame")) return;  // header
        }
        auto fields = split(line, ",", false);
        if (fields.size() != kCoordColumns + 2) {
            throw ParseError(line_no, "expected " + std::to_string(kCoordColumns + 2) + " columns, found " +
                                          std::to_string(fields.size()));
        }
        Frame frame;
        frame.index = parse_uint(fields[0], line_no, "frame index");
        if (!trim(fields[1]).empty()) {
            double ts = parse_double(fields[1], line_no);
            if (!std::isfinite(ts)) throw ParseError(line_no, "non-finite timestamp");
            frame.timestamp = ts;
        }
        fill_joints(frame, fields, 2, line_no);
        if (!seq.frames.empty()) check_order(seq.frames.back(), frame, line_no);
        seq.frames.push_back(frame);
    });
    return seq;
}

// Text export of an LMDHG recording: one frame per line, 138 coordinates
// (46 joints x xyz, canonical joint order) separated by whitespace or commas,
// optionally preceded by a frame number. Lines starting with '#' are comments.
FrameSequence parse_lmdhg(std::string_view text, std::string source_id) {
    FrameSequence seq;
    seq.source_id = std::move(source_id);
    std::uint64_t ordinal = 0;
    for_each_line(text, [&](std::size_t line_no, std::string_view line) {
        std::string_view t = trim(line);
        if (t.empty() || t.front() == '#') return;
        auto fields = split(t, " \t,;", true);
        Frame frame;
        std::size_t offset = 0;
        if (fields.size() == kCoordColumns) {
            frame.index = ordinal;
        } else if (fields.size() == kCoordColumns + 1) {
            frame.index = parse_uint(fields[0], line_no, "frame index");
            offset = 1;
        } else {
            throw ParseError(line_no, "expected " + std::to_string(kCoordColumns) + " coordinates, found " +
                                          std::to_string(fields.size()));
        }
        fill_joints(frame, fields, offset, line_no);
        if (!seq.frames.empty()) check_order(seq.frames.back(), frame, line_no);
        seq.frames.push_back(frame);
        ++ordinal;
    });
    return seq;
}

}  // namespace

FrameFormat parse_frame_format(std::string_view tag) {
    if (tag == "lmdhg") return FrameFormat::Lmdhg;
    if (tag == "canonical-csv" || tag == "canonical" || tag == "csv") return FrameFormat::CanonicalCsv;
    throw UsageError("unknown frame format '" + std::string(tag) + "' (expected lmdhg or canonical-csv)");
}

FrameSequence parse_frames(std::string_view text, FrameFormat format, std::string source_id) {
    switch (format) {
        case FrameFormat::Lmdhg: return parse_lmdhg(text, std::move(source_id));
        case FrameFormat::CanonicalCsv: return parse_canonical(text, std::move(source_id));
    }
    throw UsageError("unsupported frame format");
}

FrameSequence parse_frames(std::string_view text, std::string_view format_tag, std::string source_id) {
    return parse_frames(text, parse_frame_format(format_tag), std::move(source_id));
}

std::string canonical_csv_header() {
    std::string out = "frame,timestamp";
    for (std::size_t j = 0; j < kJointCount; ++j) {
        const std::string n = JointId::from_index(j).name();
        out += "," + n + "_x," + n + "_y," + n + "_z";
    }
    return out;
}

std::string write_canonical_csv(const FrameSequence& seq) {
    std::string out = canonical_csv_header();
    out += '\n';
    for (const Frame& f : seq.frames) {
        out += std::to_string(f.index);
        out += ',';
        if (f.timestamp) append_double(out, *f.timestamp);
        for (std::size_t j = 0; j < kJointCount; ++j) {
            const Vec3& p = f.positions[j];
            const bool ok = f.valid[j];
            out += ',';
            append_double(out, ok ? p.x : NAN);
            out += ',';
            append_double(out, ok ? p.y : NAN);
            out += ',';
            append_double(out, ok ? p.z : NAN);
        }
        out += '\n';
    }
    return out;
}

AnnotationResult parse_annotations(std::string_view text, const ClassSet& classes) {
    AnnotationResult result;
    bool first_content = true;
    for_each_line(text, [&](std::size_t line_no, std::string_view line) {
        std::string_view t = trim(line);
        if (t.empty() || t.front() == '#') return;
        auto fields = split(t, ",;\t", false);
        if (fields.size() != 3) {
            throw ParseError(line_no, "expected 'class,start,end', found " + std::to_string(fields.size()) + " fields");
        }
        if (first_content) {
            first_content = false;
            std::string_view start = trim(fields[1]);
            if (!start.empty() && !std::isdigit(static_cast<unsigned char>(start.front()))) return;  // header
        }
        LabelInterval iv;
        auto cls = classes.find(trim(fields[0]));
        if (!cls) {
            throw ParseError(line_no, "unknown class name '" + std::string(trim(fields[0])) +
                                          "'; valid names: " + classes.joined());
        }
        iv.class_name = classes.name(*cls);
        iv.start_frame = parse_uint(fields[1], line_no, "start frame");
        iv.end_frame = parse_uint(fields[2], line_no, "end frame");
        if (iv.start_frame > iv.end_frame) {
            throw ParseError(line_no, "start frame " + std::to_string(iv.start_frame) + " after end frame " +
                                          std::to_string(iv.end_frame));
        }
        result.intervals.push_back(std::move(iv));
    });
    std::stable_sort(result.intervals.begin(), result.intervals.end(),
                     [](const LabelInterval& a, const LabelInterval& b) { return a.start_frame < b.start_frame; });
    for (std::size_t i = 1; i < result.intervals.size(); ++i) {
        const auto& a = result.intervals[i - 1];
        const auto& b = result.intervals[i];
        if (b.start_frame <= a.end_frame) {
            result.warnings.push_back("overlapping intervals: " + a.class_name + " [" + std::to_string(a.start_frame) +
                                      "," + std::to_string(a.end_frame) + "] and " + b.class_name + " [" +
                                      std::to_string(b.start_frame) + "," + std::to_string(b.end_frame) + "]");
        }
    }
    return result;
}

std::string write_annotations(const std::vector<LabelInterval>& intervals) {
    std::string out = "class,start,end\n";
    for (const auto& iv : intervals) {
        out += iv.class_name + "," + std::to_string(iv.start_frame) + "," + std::to_string(iv.end_frame) + "\n";
    }
    return out;
}

namespace {

std::optional<int> trailing_number(std::string_view id) {
    std::size_t end = id.size();
    std::size_t begin = end;
    while (begin > 0 && std::isdigit(static_cast<unsigned char>(id[begin - 1]))) --begin;
    if (begin == end || end - begin > 9) return std::nullopt;
    int value = 0;
    std::from_chars(id.data() + begin, id.data() + end, value);
    return value;
}

std::string pad3(std::size_t n) {
    std::string s = std::to_string(n);
    while (s.size() < 3) s.insert(s.begin(), '0');
    return s;
}

}  // namespace

std::vector<GestureSample> segment(const FrameSequence& sequence, const std::vector<LabelInterval>& intervals,
                                   const ClassSet& classes) {
    std::vector<GestureSample> samples;
    samples.reserve(intervals.size());
    const auto& frames = sequence.frames;
    const auto recording = trailing_number(sequence.source_id);
    for (std::size_t k = 0; k < intervals.size(); ++k) {
        const LabelInterval& iv = intervals[k];
        const std::string desc = iv.class_name + " [" + std::to_string(iv.start_frame) + "," +
                                 std::to_string(iv.end_frame) + "]";
        if (iv.start_frame > iv.end_frame) throw std::invalid_argument("interval " + desc + " has start after end");
        if (frames.empty() || iv.start_frame < frames.front().index || iv.end_frame > frames.back().index) {
            throw std::out_of_range("interval " + desc + " exceeds sequence '" + sequence.source_id + "' of " +
                                    std::to_string(frames.size()) + " frames");
        }
        auto lo = std::lower_bound(frames.begin(), frames.end(), iv.start_frame,
                                   [](const Frame& f, std::uint64_t i) { return f.index < i; });
        auto hi = std::upper_bound(frames.begin(), frames.end(), iv.end_frame,
                                   [](std::uint64_t i, const Frame& f) { return i < f.index; });
        GestureSample s;
        s.source_id = sequence.source_id;
        s.sample_id = (sequence.source_id.empty() ? std::string("sample") : sequence.source_id) + "_" + pad3(k);
        s.recording = recording;
        s.label = classes.index_of(iv.class_name);
        s.frames.assign(lo, hi);
        samples.push_back(std::move(s));
    }
    return samples;
}

SampleDiagnostics validate_sample(const GestureSample& sample) {
    SampleDiagnostics d;
    std::array<std::size_t, kFingertipCount> invalid_tips{};
    std::size_t invalid_total = 0;
    for (const Frame& f : sample.frames) {
        bool any_invalid = false;
        bool any_tip = false;
        for (std::size_t j = 0; j < kJointCount; ++j) any_invalid |= !f.valid[j];
        for (std::size_t slot = 0; slot < kFingertipCount; ++slot) {
            if (f.is_valid(fingertip_from_slot(slot))) {
                any_tip = true;
            } else {
                ++invalid_tips[slot];
                ++invalid_total;
            }
        }
        if (any_invalid) d.frames_with_invalid_joints.push_back(f.index);
        d.renderable |= any_tip;
    }
    if (!sample.frames.empty()) {
        const double n = static_cast<double>(sample.frames.size());
        for (std::size_t slot = 0; slot < kFingertipCount; ++slot) d.invalid_fingertip_fraction[slot] = invalid_tips[slot] / n;
        d.invalid_fingertip_overall = invalid_total / (n * kFingertipCount);
    }
    return d;
}

}  // namespace hgr
