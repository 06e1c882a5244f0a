#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "hgr/dataset.hpp"
#include "hgr/stream.hpp"
#include "hgr/synthetic.hpp"
#include "test_util.hpp"

using namespace hgr;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out, err;
};

Result hgr_run(std::vector<std::string> args, const std::string& input = "") {
    std::istringstream in(input);
    std::ostringstream out, err;
    args.insert(args.begin(), "hgr");
    const int code = cli::run(std::move(args), in, out, err);
    return {code, out.str(), err.str()};
}

nlohmann::json read_json(const fs::path& p) {
    std::ifstream in(p);
    return nlohmann::json::parse(in);
}

// Small imported and rendered synthetic set, shared by the tests below.
const fs::path& rendered_fixture() {
    static const fs::path root = [] {
        const auto dir = test::temp_dir("cli_fixture");
        const auto a = hgr_run({"import", "--format", "synthetic", "--per-class", "6", "--recordings", "2", "--seed", "3",
                                "--out", (dir / "ds").string()});
        REQUIRE(a.code == 0);
        const auto b = hgr_run({"render", "--dataset", (dir / "ds").string(), "--view", "top", "--res", "32x32", "--out",
                                (dir / "img").string()});
        REQUIRE(b.code == 0);
        return dir;
    }();
    return root;
}

std::vector<std::string> tiny_train(const fs::path& out) {
    return {"train", "--images", (rendered_fixture() / "img").string(), "--schedule", "16,32", "--epochs-frozen", "1",
            "--epochs-unfrozen", "1", "--widths", "4,4,4,4", "--lr", "0.01", "--batch", "4", "--seed", "7", "--quiet",
            "--out", out.string()};
}

}  // namespace

TEST_CASE("cli usage errors") {
    auto r = hgr_run({"render", "--no-such-flag"});
    CHECK(r.code == cli::kExitUsage);
    CHECK_THAT(r.err, Catch::Matchers::ContainsSubstring("Usage"));

    CHECK(hgr_run({}).code == cli::kExitUsage);
    CHECK(hgr_run({"--help"}).code == cli::kExitOk);
    CHECK(hgr_run({"train", "--help"}).code == cli::kExitOk);

    r = hgr_run({"render", "--dataset", "/definitely/not/here", "--out", test::temp_dir("x").string()});
    CHECK(r.code == cli::kExitUsage);
    CHECK_THAT(r.err, Catch::Matchers::ContainsSubstring("/definitely/not/here"));

    CHECK(hgr_run({"render", "--dataset", (rendered_fixture() / "ds").string(), "--res", "8x8", "--out",
                   test::temp_dir("small").string()})
              .code == cli::kExitUsage);
    CHECK(hgr_run({"train", "--images", (rendered_fixture() / "img").string(), "--schedule", "20", "--out",
                   test::temp_dir("sched").string()})
              .code == cli::kExitUsage);
}

TEST_CASE("cli render writes one png per sample and a manifest") {
    const auto img = rendered_fixture() / "img";
    const auto m = read_json(img / "manifest.json");
    REQUIRE(m["samples"].size() == 24);
    for (const auto& s : m["samples"]) {
        CHECK(fs::exists(img / s["file"].get<std::string>()));
        CHECK(s["file"].get<std::string>().ends_with("__top.png"));
    }
    CHECK(m["view"] == "top");
    CHECK(read_json(img / "run_manifest.json")["command"] == "render");
}

TEST_CASE("cli train is byte-reproducible") {
    const auto a = test::temp_dir("train_a"), b = test::temp_dir("train_b");
    REQUIRE(hgr_run(tiny_train(a)).code == 0);
    REQUIRE(hgr_run(tiny_train(b)).code == 0);
    for (const char* f : {"history.csv", "best_model.ckpt", "round0_a.ckpt", "round0_b.ckpt", "round1_a.ckpt", "round1_b.ckpt",
                          "split.json"}) {
        INFO(f);
        REQUIRE(fs::exists(a / f));
        CHECK(read_file(a / f) == read_file(b / f));
    }
    CHECK(read_file(a / "best.ckpt").find("best_model.ckpt") != std::string::npos);

    // Everything downstream works from that checkpoint.
    const auto ev = test::temp_dir("eval");
    REQUIRE(hgr_run({"eval", "--model", (a / "best.ckpt").string(), "--images", (rendered_fixture() / "img").string(),
                     "--out", ev.string()})
                .code == 0);
    const double acc = read_json(ev / "report.json")["accuracy"];
    CHECK(acc >= 0.0);
    CHECK(acc <= 1.0);
    CHECK(fs::exists(ev / "confusion.png"));

    const auto first_png = rendered_fixture() / "img" / read_json(rendered_fixture() / "img" / "manifest.json")["samples"][0]["file"].get<std::string>();
    auto p = hgr_run({"predict", "--model", (a / "best.ckpt").string(), "--image", first_png.string(), "--out",
                      test::temp_dir("pred").string()});
    REQUIRE(p.code == 0);
    const auto pj = nlohmann::json::parse(p.out);
    CHECK(pj["probabilities"].size() == 4);

    const auto rep = test::temp_dir("report");
    REQUIRE(hgr_run({"report", "--history", (a / "history.csv").string(), "--out", rep.string()}).code == 0);
    CHECK(fs::exists(rep / "curves.png"));

    // Stream NDJSON frames from stdin with a frame-count window.
    Rng rng(2);
    const auto rec = synth::make_recording("s", 3, rng);
    std::string ndjson;
    for (const auto& f : rec.sequence.frames) ndjson += stream::frame_to_json(f) + "\n";
    const auto st = hgr_run({"stream", "--model", (a / "best.ckpt").string(), "--window-frames", "50", "--input", "-"}, ndjson);
    REQUIRE(st.code == 0);
    std::istringstream lines(st.out);
    std::string line;
    std::size_t n = 0;
    while (std::getline(lines, line)) {
        if (line.empty()) continue;
        CHECK(nlohmann::json::parse(line).contains("probabilities"));
        ++n;
    }
    CHECK(n == rec.sequence.frames.size() / 50);
}

TEST_CASE("cli config file with flag precedence") {
    const auto dir = test::temp_dir("config");
    {
        std::ofstream cfg(dir / "train.cfg");
        cfg << "# tiny run\nepochs_frozen = 2\nseed = 3\nwidths = 4,4,4,4\nschedule = 16\n";
    }
    auto args = std::vector<std::string>{"train", "--config", (dir / "train.cfg").string(), "--images",
                                         (rendered_fixture() / "img").string(), "--epochs-unfrozen", "0", "--seed", "5",
                                         "--quiet", "--out", (dir / "out").string()};
    const auto r = hgr_run(args);
    INFO(r.err);
    REQUIRE(r.code == 0);
    const auto m = read_json(dir / "out" / "run_manifest.json");
    CHECK(m["settings"]["config"]["seed"] == 5);
    CHECK(m["settings"]["config"]["epochs_frozen"] == 2);
    CHECK(m["settings"]["config"]["schedule"] == nlohmann::json::array({16}));

    CHECK(hgr_run({"train", "--config", (dir / "absent.cfg").string(), "--images", (rendered_fixture() / "img").string()})
              .code == cli::kExitUsage);
}

TEST_CASE("cli output root from the environment") {
    const auto root = test::temp_dir("envroot");
    ::setenv("HGR_OUTPUT_ROOT", root.string().c_str(), 1);
    const auto r = hgr_run({"import", "--format", "synthetic", "--per-class", "1", "--recordings", "1"});
    ::unsetenv("HGR_OUTPUT_ROOT");
    REQUIRE(r.code == 0);
    CHECK(fs::exists(root / "import" / "dataset.json"));
}
