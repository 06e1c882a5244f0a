#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "hgr/dataset.hpp"
#include "hgr/eval.hpp"
#include "hgr/nn/checkpoint.hpp"
#include "hgr/render.hpp"
#include "hgr/stream.hpp"
#include "hgr/synthetic.hpp"
#include "hgr/train/lr_finder.hpp"
#include "hgr/train/trainer.hpp"

namespace hgr::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr const char* kVersion = "1.0.0";

// ---------------------------------------------------------------------------
// small helpers

fs::path resolve_out(const std::string& out, const std::string& command) {
    if (!out.empty()) return out;
    const char* root = std::getenv("HGR_OUTPUT_ROOT");
    return fs::path(root && *root ? root : "hgr_out") / command;
}

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::size_t> parse_size_list(const std::string& text, const std::string& what) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        std::size_t pos = 0;
        unsigned long long v = 0;
        try {
            v = std::stoull(item, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos != item.size() || item[0] == '-') throw UsageError(what + ": '" + item + "' is not a non-negative integer");
        out.push_back(static_cast<std::size_t>(v));
    }
    return out;
}

std::pair<int, int> parse_resolution(const std::string& text) {
    const auto x = text.find_first_of("xX");
    if (x == std::string::npos) throw UsageError("resolution must look like WIDTHxHEIGHT, got '" + text + "'");
    const auto w = parse_size_list(text.substr(0, x), "resolution");
    const auto h = parse_size_list(text.substr(x + 1), "resolution");
    if (w.size() != 1 || h.size() != 1) throw UsageError("resolution must look like WIDTHxHEIGHT, got '" + text + "'");
    return {static_cast<int>(w[0]), static_cast<int>(h[0])};
}

void write_json(const fs::path& path, const json& j) { write_file(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
    try {
        return json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

void write_run_manifest(const fs::path& dir, const std::string& command, const json& settings) {
    write_json(dir / "run_manifest.json", json{{"command", command},
                                               {"version", kVersion},
                                               {"checkpoint_format", nn::kCheckpointVersion},
                                               {"settings", settings}});
}

void require_dir(const std::string& path, const std::string& flag) {
    if (!fs::is_directory(path)) throw UsageError(flag + ": directory '" + path + "' does not exist");
}

void require_file(const std::string& path, const std::string& flag) {
    if (!fs::is_regular_file(path)) throw UsageError(flag + ": file '" + path + "' does not exist");
}

ClassSet classes_for_dataset(const fs::path& root, const std::string& flag_value) {
    if (!flag_value.empty()) return ClassSet::from_spec(flag_value);
    if (fs::exists(root / "dataset.json")) {
        return ClassSet(read_json(root / "dataset.json").at("classes").get<std::vector<std::string>>());
    }
    return ClassSet::lmdhg();
}

struct ImageSet {
    train::LabeledImages images;
    ClassSet classes;
    json manifest;
    std::vector<std::optional<int>> recordings;
};

ImageSet load_images(const fs::path& dir) {
    if (!fs::exists(dir / "manifest.json")) throw UsageError("no manifest.json in image directory " + dir.string());
    ImageSet s;
    s.manifest = read_json(dir / "manifest.json");
    s.classes = ClassSet(s.manifest.at("classes").get<std::vector<std::string>>());
    for (const auto& e : s.manifest.at("samples")) {
        if (e.at("label").is_null()) continue;
        s.images.add(read_png((dir / e.at("file").get<std::string>()).string()), e.at("label").get<std::size_t>(),
                     e.at("id").get<std::string>());
        s.recordings.push_back(e.at("recording").is_null() ? std::nullopt
                                                           : std::optional<int>(e.at("recording").get<int>()));
    }
    return s;
}

train::LabeledImages subset(const train::LabeledImages& all, const std::vector<std::size_t>& idx) {
    train::LabeledImages out;
    for (std::size_t i : idx) out.add(all.images[i], all.labels[i], all.ids[i]);
    return out;
}

// ---------------------------------------------------------------------------
// import

struct ImportOpts {
    std::string format;
    std::string src;
    std::string out;
    std::string classes;
    std::size_t per_class = 80;
    std::size_t recordings = 4;
    double fps = 100.0;
    std::uint64_t seed = 0;
};

int run_import(const ImportOpts& o, std::ostream& out) {
    if (o.format != "synthetic") require_dir(o.src, "--src");
    if (o.format == "synthetic" && (o.per_class == 0 || o.recordings == 0)) {
        throw UsageError("--per-class and --recordings must be positive");
    }
    const ClassSet classes =
        !o.classes.empty() ? ClassSet::from_spec(o.classes)
                           : (o.format == "synthetic" ? ClassSet::synthetic() : ClassSet::lmdhg());
    const fs::path dir = resolve_out(o.out, "import");

    std::vector<Recording> recs;
    if (o.format == "lmdhg") {
        recs = import_lmdhg(o.src, classes);
    } else if (o.format == "canonical") {
        recs = load_dataset(o.src, classes);
    } else {
        if (!(classes == ClassSet::synthetic())) throw UsageError("synthetic data uses the synthetic class set");
        std::vector<synth::Kind> kinds;
        for (std::size_t k = 0; k < synth::kKindCount; ++k) kinds.insert(kinds.end(), o.per_class, static_cast<synth::Kind>(k));
        Rng rng(o.seed);
        rng.shuffle(kinds);
        const std::size_t n = std::min(o.recordings, kinds.size());
        for (std::size_t r = 0; r < n; ++r) {
            const std::size_t lo = kinds.size() * r / n, hi = kinds.size() * (r + 1) / n;
            std::vector<synth::Kind> part(kinds.begin() + static_cast<std::ptrdiff_t>(lo),
                                          kinds.begin() + static_cast<std::ptrdiff_t>(hi));
            recs.push_back(synth::make_recording("synth" + std::to_string(r + 1), part, rng, o.fps));
        }
    }

    std::size_t samples = 0;
    for (const auto& r : recs) {
        save_recording(dir, r);
        samples += r.intervals.size();
        for (const auto& w : r.warnings) out << "warning: " << r.sequence.source_id << ": " << w << "\n";
    }
    write_json(dir / "dataset.json", json{{"classes", classes.names()}, {"recordings", recs.size()}, {"samples", samples}});
    write_run_manifest(dir, "import",
                       json{{"format", o.format}, {"src", o.src}, {"out", dir.string()}, {"classes", classes.names()},
                            {"per_class", o.per_class}, {"recordings", o.recordings}, {"fps", o.fps}, {"seed", o.seed}});
    out << "imported " << recs.size() << " recordings, " << samples << " labeled intervals into " << dir.string() << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// render

struct RenderOpts {
    std::string dataset;
    std::string view = "top";
    std::string res = "192x108";
    std::string out;
    std::string classes;
    std::optional<double> alpha_min;
    bool smooth = false;
};

int run_render(const RenderOpts& o, std::ostream& out) {
    require_dir(o.dataset, "--dataset");
    const ViewMode mode = parse_view_mode(o.view);
    const auto [w, h] = parse_resolution(o.res);
    RenderConfig cfg = RenderConfig::for_size(w, h);
    if (o.alpha_min) cfg.alpha_min = *o.alpha_min;
    cfg.smooth = o.smooth;
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    const ClassSet classes = classes_for_dataset(o.dataset, o.classes);
    const fs::path dir = resolve_out(o.out, "render");

    const auto samples = segment_all(load_dataset(o.dataset, classes), classes);
    fs::create_directories(dir);
    json entries = json::array();
    json warnings = json::array();
    for (const auto& s : samples) {
        std::vector<std::string> warns;
        const auto diag = validate_sample(s);
        if (!diag.clean()) {
            warns.push_back(std::to_string(diag.frames_with_invalid_joints.size()) + " frames with invalid joints");
        }
        const RasterImage img = render_view(s, cfg, mode, &warns);
        const std::string file = s.sample_id + "__" + to_string(mode) + ".png";
        write_png((dir / file).string(), img);
        for (const auto& wmsg : warns) warnings.push_back(s.sample_id + ": " + wmsg);
        entries.push_back({{"id", s.sample_id},
                           {"file", file},
                           {"label", s.label ? json(*s.label) : json(nullptr)},
                           {"class", s.label ? json(classes.name(*s.label)) : json(nullptr)},
                           {"recording", s.recording ? json(*s.recording) : json(nullptr)},
                           {"source", s.source_id},
                           {"frames", s.frames.size()},
                           {"start_frame", s.frames.empty() ? 0 : s.frames.front().index},
                           {"end_frame", s.frames.empty() ? 0 : s.frames.back().index}});
    }
    write_json(dir / "manifest.json", json{{"classes", classes.names()},
                                           {"view", to_string(mode)},
                                           {"render", cfg},
                                           {"samples", entries},
                                           {"warnings", warnings}});
    write_run_manifest(dir, "render",
                       json{{"dataset", o.dataset}, {"view", to_string(mode)}, {"res", o.res}, {"render", cfg},
                            {"classes", classes.names()}, {"out", dir.string()}});
    out << "rendered " << samples.size() << " samples into " << dir.string() << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// train

struct TrainOpts {
    std::string images;
    std::string val_images;
    std::string split = "random";
    double fraction = 0.7;
    std::string schedule = "48,96,192";
    std::size_t epochs_frozen = 10;
    std::size_t epochs_unfrozen = 10;
    double lr = 1e-3;
    std::optional<double> lr_unfrozen;
    std::size_t batch = 16;
    std::uint64_t seed = 0;
    std::string freeze_boundary = "head";
    std::string widths = "16,32,64,128";
    std::size_t lookahead_k = 6;
    double lookahead_alpha = 0.5;
    bool lr_find = false;
    std::string out;
    bool quiet = false;
};

json train_config_json(const train::TrainConfig& c) {
    return {{"schedule", c.schedule},
            {"epochs_frozen", c.epochs_frozen},
            {"epochs_unfrozen", c.epochs_unfrozen},
            {"lr", c.lr},
            {"lr_unfrozen", c.phase_b_lr()},
            {"batch_size", c.batch_size},
            {"seed", c.seed},
            {"freeze_boundary", c.freeze_boundary},
            {"widths", c.widths},
            {"radam", {{"beta1", c.radam.beta1}, {"beta2", c.radam.beta2}, {"eps", c.radam.eps}}},
            {"lookahead", {{"k", c.lookahead.k}, {"alpha", c.lookahead.alpha}}}};
}

int run_train(const TrainOpts& o, std::ostream& out) {
    require_dir(o.images, "--images");
    if (!o.val_images.empty()) require_dir(o.val_images, "--val-images");
    train::TrainConfig cfg;
    cfg.schedule = parse_size_list(o.schedule, "--schedule");
    cfg.epochs_frozen = o.epochs_frozen;
    cfg.epochs_unfrozen = o.epochs_unfrozen;
    cfg.lr = o.lr;
    cfg.lr_unfrozen = o.lr_unfrozen;
    cfg.batch_size = o.batch;
    cfg.seed = o.seed;
    cfg.freeze_boundary = o.freeze_boundary;
    cfg.widths = parse_size_list(o.widths, "--widths");
    cfg.lookahead.k = o.lookahead_k;
    cfg.lookahead.alpha = o.lookahead_alpha;
    if (cfg.schedule.empty()) throw UsageError("--schedule needs at least one resolution");
    if (!(o.fraction > 0 && o.fraction < 1)) throw UsageError("--fraction must lie strictly between 0 and 1");
    try {
        cfg.validate();
        nn::ModelSpec::mini_conv_net(2, cfg.widths).layer_index(cfg.freeze_boundary);
        const std::size_t multiple = std::size_t{1} << cfg.widths.size();
        for (std::size_t s : cfg.schedule) {
            if (s % multiple) {
                throw std::invalid_argument("schedule resolution " + std::to_string(s) + " is not a multiple of " +
                                            std::to_string(multiple));
            }
        }
    } catch (const std::exception& e) {
        throw UsageError(e.what());
    }
    const fs::path dir = resolve_out(o.out, "train");

    ImageSet all = load_images(o.images);
    train::LabeledImages train_set, val_set;
    if (!o.val_images.empty()) {
        ImageSet val = load_images(o.val_images);
        if (!(val.classes == all.classes)) throw std::runtime_error("training and validation images use different classes");
        train_set = std::move(all.images);
        val_set = std::move(val.images);
    } else if (o.split == "lmdhg") {
        std::vector<std::size_t> tr, va;
        for (std::size_t i = 0; i < all.images.size(); ++i) {
            const auto r = all.recordings[i];
            if (!r || *r < 1 || *r > 50) throw std::runtime_error(all.images.ids[i] + " has no recording number in 1..50");
            (*r <= 35 ? tr : va).push_back(i);
        }
        train_set = subset(all.images, tr);
        val_set = subset(all.images, va);
    } else {
        const auto [tr, va] = eval::random_split(all.images.labels, o.fraction, o.seed);
        train_set = subset(all.images, tr);
        val_set = subset(all.images, va);
    }
    fs::create_directories(dir);
    write_json(dir / "split.json", json{{"train", train_set.ids}, {"validation", val_set.ids}});

    if (o.lr_find) {
        train::ModelLrProbe probe(nn::Model<float>(nn::ModelSpec::mini_conv_net(all.classes.size(), cfg.widths), cfg.seed),
                                  train_set, cfg.schedule.front(), cfg.batch_size, cfg.seed);
        const auto r = train::lr_range_test(probe);
        std::string csv = "lr,loss\n";
        for (std::size_t i = 0; i < r.lrs.size(); ++i) {
            char buf[96];
            std::snprintf(buf, sizeof buf, "%.9g,%.9g\n", r.lrs[i], r.losses[i]);
            csv += buf;
        }
        write_file(dir / "lr_find.csv", csv);
        cfg.lr = r.suggested_lr;
        out << "lr range test suggests " << r.suggested_lr << "\n";
    }

    write_run_manifest(dir, "train",
                       json{{"images", o.images}, {"val_images", o.val_images}, {"split", o.split},
                            {"fraction", o.fraction}, {"lr_find", o.lr_find}, {"config", train_config_json(cfg)},
                            {"train_samples", train_set.size()}, {"validation_samples", val_set.size()},
                            {"out", dir.string()}});

    train::TrainCallbacks cb;
    cb.on_epoch = [&](const train::HistoryRow& r) {
        if (o.quiet) return;
        out << "round " << r.round << " (" << r.resolution << " px) phase " << r.phase << " epoch " << r.epoch
            << ": loss " << r.train_loss << ", val accuracy " << r.val_accuracy << "\n"
            << std::flush;
    };
    const auto result = train::train(train_set, val_set, all.classes.size(), cfg, cb);

    auto checkpoint = [&](const nn::Model<float>& m, std::size_t resolution, json meta) {
        nn::Checkpoint c;
        c.model = m;
        c.classes = all.classes;
        c.resolution = resolution;
        c.seed = cfg.seed;
        c.render = all.manifest.at("render");
        c.view = all.manifest.at("view").get<std::string>();
        meta["train"] = train_config_json(cfg);
        c.meta = std::move(meta);
        return c;
    };

    write_file(dir / "history.csv", train::history_csv(result.history));
    for (const auto& snap : result.phase_ends) {
        const std::string name = "round" + std::to_string(snap.round) + "_" + snap.phase + ".ckpt";
        nn::save_checkpoint(dir / name, checkpoint(snap.model, cfg.schedule[snap.round],
                                                   json{{"round", snap.round}, {"phase", std::string(1, snap.phase)}}));
    }
    json best = nullptr;
    if (result.best) {
        best = {{"round", result.best->round},
                {"resolution", result.best->resolution},
                {"phase", std::string(1, result.best->phase)},
                {"epoch", result.best->epoch},
                {"val_accuracy", result.best->val_accuracy}};
    }
    nn::save_checkpoint(dir / "best_model.ckpt",
                        checkpoint(result.best_model, result.best ? result.best->resolution : cfg.schedule.front(),
                                   json{{"best", best}}));
    nn::write_checkpoint_pointer(dir / "best.ckpt", "best_model.ckpt");
    if (result.best) {
        out << "best validation accuracy " << result.best->val_accuracy << " (round " << result.best->round
            << ", phase " << result.best->phase << ", epoch " << result.best->epoch << ")\n";
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// eval

struct EvalOpts {
    std::string model;
    std::string images;
    std::string dataset;
    std::string classes;
    std::string subset = "all";
    std::size_t top = 10;
    std::string out;
};

int run_eval(const EvalOpts& o, std::ostream& out) {
    require_file(o.model, "--model");
    if (o.images.empty() == o.dataset.empty()) throw UsageError("give exactly one of --images or --dataset");
    if (!o.images.empty()) require_dir(o.images, "--images");
    if (!o.dataset.empty()) require_dir(o.dataset, "--dataset");
    if (o.top == 0) throw UsageError("--top must be at least 1");
    const fs::path dir = resolve_out(o.out, "eval");

    const nn::Checkpoint ckpt = nn::load_checkpoint(o.model);
    eval::EvalResult result;
    ClassSet classes;
    if (!o.images.empty()) {
        ImageSet s = load_images(o.images);
        classes = s.classes;
        result = eval::evaluate(ckpt, s.images, classes);
    } else {
        classes = classes_for_dataset(o.dataset, o.classes);
        auto samples = segment_all(load_dataset(o.dataset, classes), classes);
        if (o.subset != "all") {
            auto [tr, va] = eval::split_lmdhg(samples);
            samples = o.subset == "lmdhg-train" ? std::move(tr) : std::move(va);
        }
        result = eval::evaluate(ckpt, samples, classes);
    }
    eval::write_report(dir, result, classes, o.top,
                       json{{"model", o.model}, {"images", o.images}, {"dataset", o.dataset}, {"subset", o.subset}});
    write_run_manifest(dir, "eval",
                       json{{"model", o.model}, {"images", o.images}, {"dataset", o.dataset}, {"subset", o.subset},
                            {"top", o.top}, {"out", dir.string()}});
    out << "accuracy " << result.accuracy << " on " << result.matrix.total() << " samples; report in " << dir.string()
        << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// predict

struct PredictOpts {
    std::string model;
    std::string image;
    std::string frames;
    std::string format = "canonical";
    std::string out;
};

int run_predict(const PredictOpts& o, std::ostream& out) {
    require_file(o.model, "--model");
    if (o.image.empty() == o.frames.empty()) throw UsageError("give exactly one of --image or --frames");
    if (!o.image.empty()) require_file(o.image, "--image");
    if (!o.frames.empty()) require_file(o.frames, "--frames");
    const FrameFormat format = parse_frame_format(o.format);

    const nn::Checkpoint ckpt = nn::load_checkpoint(o.model);
    nn::Prediction p;
    if (!o.image.empty()) {
        p = eval::classify(ckpt, read_png(o.image));
    } else {
        GestureSample s;
        s.sample_id = fs::path(o.frames).stem().string();
        s.frames = parse_frames(read_file(o.frames), format, s.sample_id).frames;
        p = eval::classify(ckpt, eval::render_for(ckpt, s));
    }
    const json j{{"class", ckpt.classes.name(p.argmax)}, {"class_index", p.argmax}, {"probabilities", p.probabilities}};
    out << j.dump() << "\n";
    if (!o.out.empty()) {
        const fs::path dir = o.out;
        write_json(dir / "prediction.json", j);
        write_run_manifest(dir, "predict",
                           json{{"model", o.model}, {"image", o.image}, {"frames", o.frames}, {"format", o.format}});
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// stream

struct StreamOpts {
    std::string model;
    double window_seconds = 5.0;
    std::optional<std::size_t> window_frames;
    double fps = 100.0;
    std::string input = "-";
    std::optional<std::uint16_t> listen;
    std::string replay;
    bool paced = false;
    std::string out;
};

int run_stream(const StreamOpts& o, std::istream& in, std::ostream& out, std::ostream& err) {
    require_file(o.model, "--model");
    if (!o.replay.empty()) require_file(o.replay, "--replay");
    if (o.input != "-" && !o.input.empty()) require_file(o.input, "--input");
    stream::WindowConfig wc;
    wc.seconds = o.window_seconds;
    wc.frames = o.window_frames;
    wc.assumed_fps = o.fps;
    try {
        wc.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }

    auto ckpt = std::make_shared<const nn::Checkpoint>(nn::load_checkpoint(o.model));
    std::mutex out_mu;
    std::string log;
    auto sink = [&](const stream::Emission& e) {
        const std::string line = stream::emission_to_json(e);
        std::lock_guard lock(out_mu);
        out << line << "\n" << std::flush;
        log += line + "\n";
    };

    std::size_t emitted = 0;
    if (!o.replay.empty()) {
        const auto seq = parse_frames(read_file(o.replay), FrameFormat::CanonicalCsv, o.replay);
        stream::StreamSession session(ckpt, wc);
        stream::ReplayOptions ro;
        ro.paced = o.paced;
        const auto emissions = stream::replay(seq, session, ro);
        for (const auto& e : emissions) sink(e);
        emitted = emissions.size();
    } else {
        auto counted = [&](const stream::Emission& e) {
            sink(e);
            ++emitted;
        };
        stream::AsyncPipeline pipe(ckpt, wc, counted);
        auto on_line = [&](const std::string& line) {
            if (trim(line).empty()) return;
            pipe.push_frame(stream::frame_from_json(line));
        };
        if (o.listen) {
            stream::serve_tcp_lines(*o.listen, on_line, [&](std::uint16_t port) {
                err << "listening on 127.0.0.1:" << port << "\n" << std::flush;
            });
        } else {
            std::ifstream file;
            std::istream* src = &in;
            if (o.input != "-" && !o.input.empty()) {
                file.open(o.input);
                src = &file;
            }
            std::string line;
            while (std::getline(*src, line)) on_line(line);
        }
        pipe.finish();
    }
    if (!o.out.empty()) {
        const fs::path dir = o.out;
        write_file(dir / "emissions.ndjson", log);
        write_run_manifest(dir, "stream",
                           json{{"model", o.model}, {"window_seconds", o.window_seconds},
                                {"window_frames", o.window_frames ? json(*o.window_frames) : json(nullptr)},
                                {"fps", o.fps}, {"input", o.input}, {"replay", o.replay}, {"paced", o.paced}});
    }
    err << emitted << " windows classified\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// report

struct ReportOpts {
    std::string history;
    std::string out;
};

std::vector<train::HistoryRow> parse_history(const std::string& text) {
    std::vector<train::HistoryRow> rows;
    std::stringstream ss(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        if (lineno == 1 || trim(line).empty()) continue;
        std::vector<std::string> f;
        std::stringstream ls(line);
        std::string item;
        while (std::getline(ls, item, ',')) f.push_back(trim(item));
        if (f.size() != 6 || f[2].size() != 1) throw ParseError(lineno, "expected 6 history columns");
        try {
            train::HistoryRow r;
            r.round = std::stoul(f[0]);
            r.resolution = std::stoul(f[1]);
            r.phase = f[2][0];
            r.epoch = std::stoul(f[3]);
            r.train_loss = std::stod(f[4]);
            r.val_accuracy = std::stod(f[5]);
            rows.push_back(r);
        } catch (const std::logic_error&) {
            throw ParseError(lineno, "malformed history row");
        }
    }
    return rows;
}

void draw_line(RasterImage& img, int x0, int y0, int x1, int y1, Rgb c) {
    const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    int e = dx + dy;
    for (;;) {
        if (x0 >= 0 && y0 >= 0 && x0 < img.width && y0 < img.height) img.set(x0, y0, c);
        if (x0 == x1 && y0 == y1) break;
        const int e2 = 2 * e;
        if (e2 >= dy) {
            e += dy;
            x0 += sx;
        }
        if (e2 <= dx) {
            e += dx;
            y0 += sy;
        }
    }
}

// Validation accuracy (blue) and training loss scaled to its maximum (red).
RasterImage plot_history(const std::vector<train::HistoryRow>& rows) {
    constexpr int W = 640, H = 360, M = 20;
    RasterImage img(W, H, Rgb{255, 255, 255});
    draw_line(img, M, H - M, W - M, H - M, Rgb{128, 128, 128});
    draw_line(img, M, M, M, H - M, Rgb{128, 128, 128});
    if (rows.empty()) return img;
    double max_loss = 0;
    for (const auto& r : rows) max_loss = std::max(max_loss, r.train_loss);
    if (!(max_loss > 0)) max_loss = 1;
    auto px = [&](std::size_t i) {
        return rows.size() == 1 ? M : M + static_cast<int>(std::lround(static_cast<double>(i) * (W - 2 * M) /
                                                                       static_cast<double>(rows.size() - 1)));
    };
    auto py = [&](double v) { return H - M - static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * (H - 2 * M))); };
    for (std::size_t i = 1; i < rows.size(); ++i) {
        draw_line(img, px(i - 1), py(rows[i - 1].val_accuracy), px(i), py(rows[i].val_accuracy), Rgb{0, 64, 200});
        draw_line(img, px(i - 1), py(rows[i - 1].train_loss / max_loss), px(i), py(rows[i].train_loss / max_loss),
                  Rgb{200, 0, 0});
    }
    return img;
}

int run_report(const ReportOpts& o, std::ostream& out) {
    require_file(o.history, "--history");
    const fs::path dir = resolve_out(o.out, "report");
    const auto rows = parse_history(read_file(o.history));

    json phases = json::array();
    std::optional<train::HistoryRow> best;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (!best || r.val_accuracy > best->val_accuracy) best = r;
        const bool last_of_phase = i + 1 == rows.size() || rows[i + 1].round != r.round || rows[i + 1].phase != r.phase;
        if (last_of_phase) {
            phases.push_back({{"round", r.round},
                              {"resolution", r.resolution},
                              {"phase", std::string(1, r.phase)},
                              {"epochs", r.epoch},
                              {"final_train_loss", r.train_loss},
                              {"final_val_accuracy", r.val_accuracy}});
        }
    }
    json j{{"epochs", rows.size()}, {"phases", phases}, {"reference", eval::reference_annotations()}};
    j["best"] = best ? json{{"round", best->round},
                            {"resolution", best->resolution},
                            {"phase", std::string(1, best->phase)},
                            {"epoch", best->epoch},
                            {"val_accuracy", best->val_accuracy}}
                     : json(nullptr);
    fs::create_directories(dir);
    write_json(dir / "training_report.json", j);
    write_png((dir / "curves.png").string(), plot_history(rows));
    write_run_manifest(dir, "report", json{{"history", o.history}, {"out", dir.string()}});
    out << "training report for " << rows.size() << " epochs in " << dir.string() << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// config file

// Lines of `key = value`; blank lines and lines starting with # are ignored.
std::vector<std::string> config_args(const fs::path& path) {
    if (!fs::is_regular_file(path)) throw UsageError("--config: file '" + path.string() + "' does not exist");
    std::vector<std::string> out;
    std::stringstream ss(read_file(path));
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw UsageError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
        }
        std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        std::replace(key.begin(), key.end(), '_', '-');
        out.push_back("--" + key + "=" + value);
    }
    return out;
}

// Splices `--config FILE` into the argument list right after the subcommand so
// that explicit flags, which come later, take precedence.
std::vector<std::string> expand_config(std::vector<std::string> args) {
    std::optional<std::string> path;
    for (std::size_t i = 1; i < args.size(); ++i) {
        if (args[i] == "--config") {
            if (i + 1 >= args.size()) throw UsageError("--config needs a file name");
            path = args[i + 1];
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i + 2));
            break;
        }
        if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
            break;
        }
    }
    if (!path) return args;
    if (args.size() < 2 || args[1].empty() || args[1][0] == '-') throw UsageError("--config must follow a subcommand");
    const auto extra = config_args(*path);
    args.insert(args.begin() + 2, extra.begin(), extra.end());
    return args;
}

}  // namespace

int run(std::vector<std::string> args, std::istream& in, std::ostream& out, std::ostream& err) {
    if (args.empty()) args.push_back("hgr");
    CLI::App app{"Hand-gesture recognition from skeleton traces: import, render, train, eval, predict, stream, report.", "hgr"};
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.require_subcommand(1);
    app.failure_message(CLI::FailureMessage::help);
    app.set_version_flag("--version", kVersion);
    const std::string config_help = "key = value file; explicit flags override it";
    const std::string out_help = "output directory (default $HGR_OUTPUT_ROOT/<command> or ./hgr_out/<command>)";

    ImportOpts io;
    auto* imp = app.add_subcommand("import", "Import recordings into the canonical dataset layout");
    imp->add_option("--format", io.format, "lmdhg, canonical or synthetic")
        ->required()
        ->check(CLI::IsMember({"lmdhg", "canonical", "synthetic"}));
    imp->add_option("--src", io.src, "source directory");
    imp->add_option("--out", io.out, out_help);
    imp->add_option("--classes", io.classes, "lmdhg, extended, synthetic or a comma-separated list");
    imp->add_option("--per-class", io.per_class, "synthetic samples per class")->capture_default_str();
    imp->add_option("--recordings", io.recordings, "synthetic recordings")->capture_default_str();
    imp->add_option("--fps", io.fps, "synthetic frame rate")->capture_default_str();
    imp->add_option("--seed", io.seed, "random seed")->capture_default_str();
    imp->add_option("--config", config_help);

    RenderOpts ro;
    auto* ren = app.add_subcommand("render", "Render every labeled sample to a trace image");
    ren->add_option("--dataset", ro.dataset, "canonical dataset directory")->required();
    ren->add_option("--view", ro.view, "top, right or double")
        ->check(CLI::IsMember({"top", "right", "double"}))
        ->capture_default_str();
    ren->add_option("--res", ro.res, "single-view size WIDTHxHEIGHT")->capture_default_str();
    ren->add_option("--out", ro.out, out_help);
    ren->add_option("--classes", ro.classes, "class set (default: dataset.json, else lmdhg)");
    ren->add_option("--alpha-min", ro.alpha_min, "opacity of the oldest frame");
    ren->add_flag("--smooth", ro.smooth, "supersampled edges (not bit-exact across platforms)");
    ren->add_option("--config", config_help);

    TrainOpts to;
    auto* tr = app.add_subcommand("train", "Train the classifier with progressive resizing");
    tr->add_option("--images", to.images, "rendered image directory")->required();
    tr->add_option("--val-images", to.val_images, "separate validation image directory");
    tr->add_option("--split", to.split, "random or lmdhg, when --val-images is absent")
        ->check(CLI::IsMember({"random", "lmdhg"}))
        ->capture_default_str();
    tr->add_option("--fraction", to.fraction, "training fraction of the random split")->capture_default_str();
    tr->add_option("--schedule", to.schedule, "comma-separated square input sides")->capture_default_str();
    tr->add_option("--epochs-frozen", to.epochs_frozen, "epochs of phase a")->capture_default_str();
    tr->add_option("--epochs-unfrozen", to.epochs_unfrozen, "epochs of phase b")->capture_default_str();
    tr->add_option("--lr", to.lr, "phase-a learning rate")->capture_default_str();
    tr->add_option("--lr-unfrozen", to.lr_unfrozen, "phase-b learning rate (default lr / 10)");
    tr->add_option("--batch", to.batch, "batch size")->capture_default_str();
    tr->add_option("--seed", to.seed, "random seed")->capture_default_str();
    tr->add_option("--freeze-boundary", to.freeze_boundary, "first layer trained in phase a")->capture_default_str();
    tr->add_option("--widths", to.widths, "convolution widths")->capture_default_str();
    tr->add_option("--lookahead-k", to.lookahead_k, "lookahead sync period")->capture_default_str();
    tr->add_option("--lookahead-alpha", to.lookahead_alpha, "lookahead interpolation")->capture_default_str();
    tr->add_flag("--lr-find", to.lr_find, "pick the phase-a rate with a range test");
    tr->add_flag("--quiet", to.quiet, "no per-epoch progress");
    tr->add_option("--out", to.out, out_help);
    tr->add_option("--config", config_help);

    EvalOpts eo;
    auto* ev = app.add_subcommand("eval", "Accuracy, confusion matrix and top losses");
    ev->add_option("--model", eo.model, "checkpoint or best.ckpt pointer")->required();
    ev->add_option("--images", eo.images, "rendered image directory");
    ev->add_option("--dataset", eo.dataset, "canonical dataset, rendered with the checkpoint's settings");
    ev->add_option("--classes", eo.classes, "class set for --dataset");
    ev->add_option("--subset", eo.subset, "all, lmdhg-train or lmdhg-val (with --dataset)")
        ->check(CLI::IsMember({"all", "lmdhg-train", "lmdhg-val"}))
        ->capture_default_str();
    ev->add_option("--top", eo.top, "number of top losses")->capture_default_str();
    ev->add_option("--out", eo.out, out_help);
    ev->add_option("--config", config_help);

    PredictOpts po;
    auto* pr = app.add_subcommand("predict", "Classify one image or one frame file");
    pr->add_option("--model", po.model, "checkpoint")->required();
    pr->add_option("--image", po.image, "trace image");
    pr->add_option("--frames", po.frames, "frame file of one gesture");
    pr->add_option("--format", po.format, "frame file format: canonical or lmdhg")
        ->check(CLI::IsMember({"canonical", "lmdhg"}))
        ->capture_default_str();
    pr->add_option("--out", po.out, "also write prediction.json here");
    pr->add_option("--config", config_help);

    StreamOpts so;
    auto* st = app.add_subcommand("stream", "Classify tumbling windows of a frame stream");
    st->add_option("--model", so.model, "checkpoint")->required();
    st->add_option("--window-seconds", so.window_seconds, "window length in seconds")->capture_default_str();
    st->add_option("--window-frames", so.window_frames, "window length in frames");
    st->add_option("--fps", so.fps, "frame rate assumed without timestamps")->capture_default_str();
    st->add_option("--input", so.input, "NDJSON frames file, - for stdin")->capture_default_str();
    st->add_option("--listen", so.listen, "read NDJSON frames from one TCP client on this port");
    st->add_option("--replay", so.replay, "replay a canonical frames.csv");
    st->add_flag("--paced", so.paced, "replay at recorded speed");
    st->add_option("--out", so.out, "also write emissions.ndjson here");
    st->add_option("--config", config_help);

    ReportOpts rpo;
    auto* rep = app.add_subcommand("report", "Summarize a training history");
    rep->add_option("--history", rpo.history, "history.csv of a train run")->required();
    rep->add_option("--out", rpo.out, out_help);
    rep->add_option("--config", config_help);

    try {
        args = expand_config(std::move(args));
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n" << app.help();
        return kExitUsage;
    }
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (imp->parsed()) return run_import(io, out);
        if (ren->parsed()) return run_render(ro, out);
        if (tr->parsed()) return run_train(to, out);
        if (ev->parsed()) return run_eval(eo, out);
        if (pr->parsed()) return run_predict(po, out);
        if (st->parsed()) return run_stream(so, in, out, err);
        if (rep->parsed()) return run_report(rpo, out);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}

}  // namespace hgr::cli
