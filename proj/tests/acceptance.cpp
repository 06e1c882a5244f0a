// Acceptance runner: one PASS / FAIL / SKIP line per criterion.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <memory>
#include <sstream>
#include <string>

#include "cli.hpp"
#include "golden.hpp"
#include "hgr/dataset.hpp"
#include "hgr/eval.hpp"
#include "hgr/render.hpp"
#include "hgr/stream.hpp"
#include "hgr/synthetic.hpp"
#include "hgr/train/optim.hpp"
#include "hgr/train/trainer.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace hgr;
namespace fs = std::filesystem;

namespace {

enum class Verdict { Pass, Fail, Skip };

struct Outcome {
    Verdict verdict = Verdict::Fail;
    std::string detail;
};

Outcome pass(std::string d) { return {Verdict::Pass, std::move(d)}; }
Outcome fail(std::string d) { return {Verdict::Fail, std::move(d)}; }
Outcome skip(std::string d) { return {Verdict::Skip, std::move(d)}; }

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

// ---- 1: golden renders

Outcome golden_suite() {
    const GestureSample s = synth::sinusoid_fixture();
    const RenderConfig small = RenderConfig::for_size(192, 108);
    const RenderConfig large = RenderConfig::for_size(1920, 1080);
    struct Case {
        const char* name;
        const RenderConfig* cfg;
        ViewMode mode;
        std::uint64_t want;
    };
    const Case cases[] = {{"top 192x108", &small, ViewMode::Top, test::golden::kTop192},
                          {"right 192x108", &small, ViewMode::Right, test::golden::kRight192},
                          {"double 192x108", &small, ViewMode::Double, test::golden::kDouble192},
                          {"top 1920x1080", &large, ViewMode::Top, test::golden::kTop1920},
                          {"double 1920x1080", &large, ViewMode::Double, test::golden::kDouble1920}};
    for (const auto& c : cases) {
        const auto a = image_digest(render_view(s, *c.cfg, c.mode));
        const auto b = image_digest(render_view(s, *c.cfg, c.mode));
        if (a != b) return fail(std::string(c.name) + " differs between runs");
        if (a != c.want) return fail(std::string(c.name) + " does not match the frozen digest");
    }
    return pass("5 renders bit-identical across runs and equal to the frozen digests (other platforms not checked here)");
}

// ---- 2: two-frame alpha

Outcome two_frame_alpha() {
    RenderConfig cfg = RenderConfig::for_size(192, 108);
    cfg.alpha_min = 0.0;
    cfg.point_radius = 2;
    const JointId tip = JointId::fingertip(Hand::Right, Finger::Index);
    GestureSample s;
    const Vec3 pos[2] = {{-100, 200, 0}, {100, 200, 0}};
    for (std::uint64_t i = 0; i < 2; ++i) {
        Frame f;
        f.index = i;
        for (std::size_t j = 0; j < kJointCount; ++j) f.invalidate(JointId::from_index(j));
        f.set(tip, pos[i]);
        s.frames.push_back(f);
    }
    const RasterImage img = render_gesture(s, cfg, ViewKind::Top);
    const Rgb c = cfg.palette[fingertip_slot(Hand::Right, Finger::Index)];
    const auto p0 = *world_to_pixel(project(pos[0], ViewKind::Top), cfg.top_window, cfg.width, cfg.height);
    const auto p1 = *world_to_pixel(project(pos[1], ViewKind::Top), cfg.top_window, cfg.width, cfg.height);
    const Rgb early = img.at(p0.x, p0.y), late = img.at(p1.x, p1.y);
    const Rgb half{static_cast<std::uint8_t>(c.r / 2), static_cast<std::uint8_t>(c.g / 2), static_cast<std::uint8_t>(c.b / 2)};
    std::ostringstream d;
    d << "earlier (" << int(early.r) << "," << int(early.g) << "," << int(early.b) << ") final (" << int(late.r) << ","
      << int(late.g) << "," << int(late.b) << ")";
    if (late == c && early == half) return pass(d.str() + ", exactly half");
    return fail(d.str());
}

// ---- 3: gradient oracle

using TensorD = nn::Tensor<double>;

TensorD random_tensor(nn::Shape s, Rng& rng, double lo = -1, double hi = 1) {
    TensorD t(std::move(s));
    for (auto& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

double dot(const TensorD& a, const TensorD& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// Largest relative error between `analytic` and central differences of f,
// over all coordinates or, with `probe` set, that many seeded picks.
double fd_error(TensorD x, const TensorD& analytic, const std::function<double(const TensorD&)>& f,
                std::size_t probe = 0) {
    const double h = 1e-5;
    double worst = 0;
    std::vector<std::size_t> coords;
    if (probe == 0 || probe >= x.size()) {
        for (std::size_t i = 0; i < x.size(); ++i) coords.push_back(i);
    } else {
        Rng pick(x.size());
        for (std::size_t k = 0; k < probe; ++k) coords.push_back(pick.below(x.size()));
    }
    for (std::size_t i : coords) {
        const double keep = x[i];
        x[i] = keep + h;
        const double up = f(x);
        x[i] = keep - h;
        const double down = f(x);
        x[i] = keep;
        const double num = (up - down) / (2 * h);
        const double diff = std::abs(num - analytic[i]);
        // Floor keeps gradients that are zero up to rounding from dominating.
        worst = std::max(worst, diff / std::max({std::abs(num), std::abs(analytic[i]), 1e-7}));
    }
    return worst;
}

Outcome gradient_oracle() {
    Rng rng(31);
    std::map<std::string, double> err;
    {
        const auto x = random_tensor({2, 2, 6, 5}, rng), w = random_tensor({3, 2, 3, 3}, rng), b = random_tensor({3}, rng);
        const auto r = random_tensor({2, 3, 6, 5}, rng);
        const auto g = nn::conv2d_backward(x, w, r);
        err["conv2d.input"] = fd_error(x, g.input, [&](const TensorD& t) { return dot(nn::conv2d(t, w, b), r); });
        err["conv2d.weight"] = fd_error(w, g.weight, [&](const TensorD& t) { return dot(nn::conv2d(x, t, b), r); });
        err["conv2d.bias"] = fd_error(b, g.bias, [&](const TensorD& t) { return dot(nn::conv2d(x, w, t), r); });
    }
    {
        const auto x = random_tensor({3, 6}, rng), w = random_tensor({4, 6}, rng), b = random_tensor({4}, rng);
        const auto r = random_tensor({3, 4}, rng);
        const auto g = nn::dense_backward(x, w, r);
        err["dense.input"] = fd_error(x, g.input, [&](const TensorD& t) { return dot(nn::dense(t, w, b), r); });
        err["dense.weight"] = fd_error(w, g.weight, [&](const TensorD& t) { return dot(nn::dense(x, t, b), r); });
        err["dense.bias"] = fd_error(b, g.bias, [&](const TensorD& t) { return dot(nn::dense(x, w, t), r); });
    }
    {
        auto x = random_tensor({2, 3, 4, 6}, rng, 0.05, 1.0);
        for (std::size_t i = 0; i < x.size(); i += 3) x[i] = -x[i];
        const auto r = random_tensor(x.shape, rng), rp = random_tensor({2, 3, 2, 3}, rng), rg = random_tensor({2, 3}, rng);
        err["relu"] = fd_error(x, nn::relu_backward(x, r), [&](const TensorD& t) { return dot(nn::relu(t), r); });
        err["maxpool2x2"] = fd_error(x, nn::maxpool2x2_backward(x, rp), [&](const TensorD& t) { return dot(nn::maxpool2x2(t), rp); });
        err["global_avg_pool"] = fd_error(x, nn::global_avg_pool_backward(x.shape, rg),
                                          [&](const TensorD& t) { return dot(nn::global_avg_pool(t), rg); });
    }
    {
        const auto z = random_tensor({3, 5}, rng, -3, 3);
        const std::vector<std::size_t> labels{4, 0, 2};
        err["softmax_cross_entropy"] = fd_error(z, nn::softmax_cross_entropy_backward(nn::softmax(z), labels),
                                                [&](const TensorD& t) { return nn::cross_entropy(nn::softmax(t), labels); });
    }
    {
        // Full MiniConvNet, default widths, 16x16 input; 256 coordinates per tensor.
        nn::Model<double> model(nn::ModelSpec::mini_conv_net(4), 77);
        const auto x = random_tensor({2, 3, 16, 16}, rng, 0, 1);
        const std::vector<std::size_t> labels{1, 3};
        const auto g = model.backward(x, labels);
        auto& params = model.parameters();
        double worst = 0;
        for (std::size_t p = 0; p < params.size(); ++p) {
            worst = std::max(worst, fd_error(params[p].value, g.params[p], [&](const TensorD& t) {
                                         const TensorD keep = params[p].value;
                                         params[p].value = t;
                                         const double l = nn::cross_entropy(nn::softmax(model.forward(x)), labels);
                                         params[p].value = keep;
                                         return l;
                                     }, 256));
        }
        err["MiniConvNet parameters"] = worst;
        err["MiniConvNet input"] = fd_error(x, g.input, [&](const TensorD& t) {
            return nn::cross_entropy(nn::softmax(model.forward(t)), labels);
        });
    }
    double worst = 0;
    std::string worst_name;
    for (const auto& [k, v] : err) {
        if (v >= worst) {
            worst = v;
            worst_name = k;
        }
    }
    const std::string d = std::to_string(err.size()) + " checks, max relative error " + fmt("%.2e", worst) + " (" + worst_name + ")";
    return worst < 1e-4 ? pass(d) : fail(d);
}

// ---- 4: optimizer oracle

Outcome optimizer_oracle() {
    using train::ParamSlot;
    double worst = 0;
    // Scalar f = theta^2.
    {
        train::RAdamState<double> st(train::RAdamConfig{.lr = 0.1});
        test::ScalarRAdam o{.lr = 0.1};
        std::vector<double> th{1.0}, g{0};
        double ref = 1.0;
        for (int i = 0; i < 50; ++i) {
            g[0] = 2 * th[0];
            std::vector<ParamSlot<double>> s{{"theta", std::span<double>(th), std::span<const double>(g), true}};
            train::radam_step(st, s);
            ref = o.step(ref, 2 * ref);
            worst = std::max(worst, std::abs(th[0] - ref));
        }
    }
    // f = 3x^2 + 0.5y^2 + xy with lookahead (k 6, alpha 0.5).
    {
        train::RAdamState<double> st(train::RAdamConfig{.lr = 0.05});
        std::vector<double> th{1.0, -2.0}, g(2);
        std::vector<ParamSlot<double>> s0{{"xy", std::span<double>(th), std::span<const double>(g), true}};
        auto la = train::lookahead_init(s0, {0.5, 6});
        test::ScalarRAdam ox{.lr = 0.05}, oy{.lr = 0.05};
        double x = 1, y = -2, sx = 1, sy = -2;
        for (int i = 1; i <= 60; ++i) {
            g = {6 * th[0] + th[1], th[1] + th[0]};
            std::vector<ParamSlot<double>> s{{"xy", std::span<double>(th), std::span<const double>(g), true}};
            train::radam_step(st, s);
            train::lookahead_sync(s, la);
            const double gx = 6 * x + y, gy = y + x;
            x = ox.step(x, gx);
            y = oy.step(y, gy);
            if (i % 6 == 0) {
                sx += 0.5 * (x - sx);
                sy += 0.5 * (y - sy);
                x = sx;
                y = sy;
            }
            worst = std::max({worst, std::abs(th[0] - x), std::abs(th[1] - y)});
        }
    }
    bool unrectified = true;
    for (std::uint64_t t = 1; t <= 4; ++t) unrectified = unrectified && train::radam_rho(t, 0.999) <= 4.0;
    const bool fifth = train::radam_rho(5, 0.999) > 4.0;
    const std::string d = "max trajectory deviation " + fmt("%.2e", worst) + "; rho(1..4) <= 4: " +
                          (unrectified ? "yes" : "no") + "; rho(5) = " + fmt("%.4f", train::radam_rho(5, 0.999));
    return worst <= 1e-10 && unrectified && fifth ? pass(d) : fail(d);
}

// ---- 5: desk training

constexpr std::size_t kPerClass = 80;
constexpr int kRenderSide = 96;
constexpr std::uint64_t kDeskSeed = 7;

train::TrainConfig desk_config() {
    train::TrainConfig c;
    c.schedule = {48, 96};
    c.epochs_frozen = 20;
    c.epochs_unfrozen = 20;
    c.lr = 1e-2;
    c.lr_unfrozen = 3e-3;
    c.batch_size = 16;
    c.seed = kDeskSeed;
    return c;
}

std::shared_ptr<nn::Checkpoint> g_desk_model;

Outcome desk_training() {
    const auto samples = synth::make_dataset(kPerClass, kDeskSeed);
    const RenderConfig cfg = RenderConfig::for_size(kRenderSide, kRenderSide);
    std::vector<std::size_t> labels;
    for (const auto& s : samples) labels.push_back(*s.label);
    const auto [tr, va] = eval::random_split(labels, 0.7, kDeskSeed);
    train::LabeledImages train_set, val_set;
    for (std::size_t i : tr) train_set.add(render_view(samples[i], cfg, ViewMode::Top), labels[i], samples[i].sample_id);
    for (std::size_t i : va) val_set.add(render_view(samples[i], cfg, ViewMode::Top), labels[i], samples[i].sample_id);

    const auto t0 = std::chrono::steady_clock::now();
    const auto r = train::train(train_set, val_set, synth::kKindCount, desk_config());
    const double minutes = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60.0;

    auto ckpt = std::make_shared<nn::Checkpoint>();
    ckpt->model = r.best_model;
    ckpt->classes = ClassSet::synthetic();
    ckpt->resolution = r.best ? r.best->resolution : 48;
    ckpt->render = cfg;
    ckpt->view = "top";
    g_desk_model = ckpt;

    const double acc = r.best ? r.best->val_accuracy : 0.0;
    std::ostringstream d;
    d << train_set.size() << " train / " << val_set.size() << " validation, best validation accuracy " << fmt("%.4f", acc);
    if (r.best) d << " (round " << r.best->round << " phase " << r.best->phase << " epoch " << r.best->epoch << ")";
    d << ", training time " << fmt("%.1f", minutes) << " min";
    return acc >= 0.95 && minutes < 30.0 ? pass(d.str()) : fail(d.str());
}

// ---- 6: LMDHG split

Outcome lmdhg_split() {
    const char* root = std::getenv("HGR_LMDHG_ROOT");
    if (!root || !*root) return skip("LMDHG dataset not available; set HGR_LMDHG_ROOT to the directory of the original files");
    if (!fs::is_directory(root)) return skip(std::string("HGR_LMDHG_ROOT=") + root + " is not a directory");
    const ClassSet classes = ClassSet::lmdhg();
    const auto samples = segment_all(import_lmdhg(root, classes), classes);
    const auto [tr, va] = eval::split_lmdhg(samples);
    const std::string d = std::to_string(tr.size()) + " train / " + std::to_string(va.size()) + " validation from " +
                          std::to_string(samples.size()) + " samples";
    return tr.size() == 779 && va.size() == 355 ? pass(d) : fail(d + " (expected 779 / 355)");
}

// ---- 7: confusion algebra

Outcome confusion_algebra() {
    Rng rng(1234);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 2 + rng.below(15);
        std::vector<std::size_t> labels(1000), preds(1000), count(n, 0);
        std::size_t correct = 0;
        for (std::size_t i = 0; i < 1000; ++i) {
            labels[i] = rng.below(n);
            preds[i] = rng.below(2) ? labels[i] : rng.below(n);
            ++count[labels[i]];
            correct += labels[i] == preds[i];
        }
        const auto m = eval::ConfusionMatrix::from(labels, preds, n);
        for (std::size_t h = 0; h < n; ++h) {
            if (m.row_sum(h) != count[h]) return fail("row sum mismatch in trial " + std::to_string(trial));
        }
        if (m.total() != 1000 || m.diagonal() != correct) return fail("total or diagonal mismatch in trial " + std::to_string(trial));
        if (m.accuracy() != static_cast<double>(correct) / 1000.0) return fail("accuracy mismatch in trial " + std::to_string(trial));
    }
    return pass("20 random fixtures of 1000 predictions: row sums, totals and accuracy exact");
}

// ---- 8: stream / batch equivalence

Outcome stream_batch() {
    std::shared_ptr<const nn::Checkpoint> ckpt = g_desk_model;
    std::string which = "desk-trained model";
    if (!ckpt) {
        auto c = std::make_shared<nn::Checkpoint>();
        c->model = nn::Model<float>(nn::ModelSpec::mini_conv_net(4), 5);
        c->classes = ClassSet::synthetic();
        c->resolution = 96;
        c->render = RenderConfig::for_size(kRenderSide, kRenderSide);
        ckpt = c;
        which = "seeded untrained model";
    }
    Rng rng(99);
    const auto rec = synth::make_recording("accept", 90, rng);
    stream::WindowConfig wc;
    wc.seconds = 1.0;
    stream::StreamSession session(ckpt, wc);
    const auto log = stream::replay(rec.sequence, session);
    if (log.size() < 50) return fail("only " + std::to_string(log.size()) + " windows in the recording");

    std::map<std::uint64_t, std::vector<Frame>> groups;
    const double t0 = *rec.sequence.frames.front().timestamp;
    for (const auto& f : rec.sequence.frames) groups[static_cast<std::uint64_t>(std::floor((*f.timestamp - t0) / wc.seconds + 1e-9))].push_back(f);
    double worst = 0;
    std::size_t class_mismatch = 0;
    for (std::size_t k = 0; k < 50; ++k) {
        GestureSample s;
        s.sample_id = "batch_" + std::to_string(k);
        s.frames = groups.at(log[k].window);
        const auto p = eval::classify(*ckpt, eval::render_for(*ckpt, s));
        class_mismatch += p.argmax != log[k].class_index;
        for (std::size_t c = 0; c < p.probabilities.size(); ++c) worst = std::max(worst, std::abs(p.probabilities[c] - log[k].probabilities[c]));
    }
    const std::string d = "50 windows (" + which + "): " + std::to_string(class_mismatch) + " class mismatches, max probability difference " + fmt("%.2e", worst);
    return class_mismatch == 0 && worst <= 1e-6 ? pass(d) : fail(d);
}

// ---- 9: train determinism through the command line

int hgr(std::vector<std::string> args) {
    args.insert(args.begin(), "hgr");
    std::istringstream in;
    std::ostringstream out, err;
    const int code = cli::run(std::move(args), in, out, err);
    if (code != 0) std::fprintf(stderr, "%s", err.str().c_str());
    return code;
}

Outcome train_determinism() {
    const auto dir = test::temp_dir("accept_det");
    if (hgr({"import", "--format", "synthetic", "--per-class", "10", "--recordings", "2", "--seed", "5", "--out", (dir / "ds").string()}) ||
        hgr({"render", "--dataset", (dir / "ds").string(), "--res", "64x64", "--out", (dir / "img").string()})) {
        return fail("could not prepare the dataset");
    }
    auto train_into = [&](const std::string& name) {
        return hgr({"train", "--images", (dir / "img").string(), "--schedule", "32,64", "--epochs-frozen", "2",
                    "--epochs-unfrozen", "2", "--lr", "0.01", "--seed", "7", "--quiet", "--out", (dir / name).string()});
    };
    if (train_into("a") || train_into("b")) return fail("train failed");
    std::size_t compared = 0;
    for (const auto& e : fs::directory_iterator(dir / "a")) {
        const auto name = e.path().filename().string();
        if (name != "history.csv" && e.path().extension() != ".ckpt") continue;
        if (read_file(e.path()) != read_file(dir / "b" / name)) return fail(name + " differs between runs");
        ++compared;
    }
    fs::remove_all(dir);
    return compared >= 6 ? pass("history.csv and " + std::to_string(compared - 1) + " checkpoint files byte-identical")
                         : fail("expected outputs missing");
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        double budget_seconds;  // 0 = none
        std::function<Outcome()> run;
    };
    const Criterion criteria[] = {
        {1, "rendering golden suite", 5, golden_suite},
        {2, "two-frame alpha check", 0, two_frame_alpha},
        {3, "gradient oracle", 120, gradient_oracle},
        {4, "optimizer oracle", 10, optimizer_oracle},
        {5, "end-to-end desk training", 1800, desk_training},
        {6, "LMDHG split replication", 0, lmdhg_split},
        {7, "confusion-matrix algebra", 0, confusion_algebra},
        {8, "stream/batch equivalence", 0, stream_batch},
        {9, "train determinism", 0, train_determinism},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        if (std::getenv("HGR_ACCEPT_ONLY") && std::atoi(std::getenv("HGR_ACCEPT_ONLY")) != c.id) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = fail(std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (o.verdict == Verdict::Pass && c.budget_seconds > 0 && secs >= c.budget_seconds) {
            o = fail(o.detail + "; over the " + fmt("%.0f", c.budget_seconds) + " s budget");
        }
        const char* tag = o.verdict == Verdict::Pass ? "PASS" : o.verdict == Verdict::Skip ? "SKIP" : "FAIL";
        std::printf("criterion %d %s [%s] (%.1f s): %s\n", c.id, tag, c.name, secs, o.detail.c_str());
        std::fflush(stdout);
        failures += o.verdict == Verdict::Fail;
    }
    return failures ? 1 : 0;
}
