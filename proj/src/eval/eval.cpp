#include "hgr/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "hgr/dataset.hpp"
#include "hgr/rng.hpp"

namespace hgr::eval {

ConfusionMatrix ConfusionMatrix::from(const std::vector<std::size_t>& labels,
                                      const std::vector<std::size_t>& predictions, std::size_t classes) {
    if (labels.size() != predictions.size()) throw std::invalid_argument("labels and predictions differ in length");
    ConfusionMatrix m(classes);
    for (std::size_t i = 0; i < labels.size(); ++i) m.add(labels[i], predictions[i]);
    return m;
}

void ConfusionMatrix::add(std::size_t truth, std::size_t predicted) {
    if (truth >= n_ || predicted >= n_) {
        throw std::out_of_range("class index outside confusion matrix of size " + std::to_string(n_));
    }
    ++counts_[truth * n_ + predicted];
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
    if (other.n_ != n_) throw std::invalid_argument("cannot merge confusion matrices of different sizes");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t truth) const {
    std::uint64_t s = 0;
    for (std::size_t p = 0; p < n_; ++p) s += at(truth, p);
    return s;
}

std::uint64_t ConfusionMatrix::column_sum(std::size_t predicted) const {
    std::uint64_t s = 0;
    for (std::size_t t = 0; t < n_; ++t) s += at(t, predicted);
    return s;
}

std::uint64_t ConfusionMatrix::diagonal() const {
    std::uint64_t s = 0;
    for (std::size_t i = 0; i < n_; ++i) s += at(i, i);
    return s;
}

std::uint64_t ConfusionMatrix::total() const { return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0}); }

double ConfusionMatrix::accuracy() const {
    const auto t = total();
    return t ? static_cast<double>(diagonal()) / static_cast<double>(t) : 0.0;
}

double ConfusionMatrix::recall(std::size_t truth) const {
    const auto r = row_sum(truth);
    return r ? static_cast<double>(at(truth, truth)) / static_cast<double>(r) : std::numeric_limits<double>::quiet_NaN();
}

std::pair<std::vector<GestureSample>, std::vector<GestureSample>> split_lmdhg(const std::vector<GestureSample>& samples) {
    std::pair<std::vector<GestureSample>, std::vector<GestureSample>> out;
    for (const auto& s : samples) {
        if (!s.recording || *s.recording < 1 || *s.recording > 50) {
            throw std::invalid_argument("sample " + s.sample_id + " has no recording number in 1..50");
        }
        (*s.recording <= 35 ? out.first : out.second).push_back(s);
    }
    return out;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> random_split(const std::vector<std::size_t>& labels,
                                                                           double fraction, std::uint64_t seed) {
    if (!(fraction > 0 && fraction < 1)) throw std::invalid_argument("split fraction must lie strictly between 0 and 1");
    const std::size_t n = labels.size();
    std::size_t classes = 0;
    for (std::size_t l : labels) classes = std::max(classes, l + 1);
    std::vector<std::vector<std::size_t>> members(classes);
    for (std::size_t i = 0; i < n; ++i) members[labels[i]].push_back(i);

    const auto target = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 0.5));
    std::vector<std::size_t> quota(classes);
    std::vector<double> remainder(classes);
    std::size_t assigned = 0;
    for (std::size_t c = 0; c < classes; ++c) {
        const double exact = fraction * static_cast<double>(members[c].size());
        quota[c] = static_cast<std::size_t>(std::floor(exact));
        remainder[c] = exact - static_cast<double>(quota[c]);
        assigned += quota[c];
    }
    std::vector<std::size_t> order(classes);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    for (std::size_t k = 0; assigned < target && k < order.size(); ++k) {
        if (quota[order[k]] < members[order[k]].size()) {
            ++quota[order[k]];
            ++assigned;
        }
    }

    Rng rng(seed);
    std::pair<std::vector<std::size_t>, std::vector<std::size_t>> out;
    for (std::size_t c = 0; c < classes; ++c) {
        auto m = members[c];
        rng.shuffle(m);
        out.first.insert(out.first.end(), m.begin(), m.begin() + static_cast<std::ptrdiff_t>(quota[c]));
        out.second.insert(out.second.end(), m.begin() + static_cast<std::ptrdiff_t>(quota[c]), m.end());
    }
    std::sort(out.first.begin(), out.first.end());
    std::sort(out.second.begin(), out.second.end());
    return out;
}

std::pair<std::vector<GestureSample>, std::vector<GestureSample>> random_split(const std::vector<GestureSample>& samples,
                                                                               double fraction, std::uint64_t seed) {
    std::vector<std::size_t> labels;
    for (const auto& s : samples) {
        if (!s.label) throw std::invalid_argument("sample " + s.sample_id + " has no label");
        labels.push_back(*s.label);
    }
    const auto [tr, va] = random_split(labels, fraction, seed);
    std::pair<std::vector<GestureSample>, std::vector<GestureSample>> out;
    for (std::size_t i : tr) out.first.push_back(samples[i]);
    for (std::size_t i : va) out.second.push_back(samples[i]);
    return out;
}

RenderConfig render_config_of(const nn::Checkpoint& ckpt) {
    RenderConfig cfg = ckpt.render.is_null() || ckpt.render.empty() ? RenderConfig{} : ckpt.render.get<RenderConfig>();
    cfg.validate();
    return cfg;
}

ViewMode view_of(const nn::Checkpoint& ckpt) { return parse_view_mode(ckpt.view); }

RasterImage render_for(const nn::Checkpoint& ckpt, const GestureSample& sample) {
    return render_view(sample, render_config_of(ckpt), view_of(ckpt));
}

nn::Prediction classify(const nn::Checkpoint& ckpt, const RasterImage& image) {
    train::LabeledImages one;
    one.add(image, 0, "");
    const std::size_t idx = 0;
    return ckpt.model.predict(train::make_batch(one, std::span<const std::size_t>(&idx, 1), ckpt.resolution)).at(0);
}

namespace {

void check_classes(const nn::Checkpoint& ckpt, const ClassSet& classes) {
    if (!(ckpt.classes == classes)) {
        throw std::invalid_argument("class set mismatch: checkpoint has [" + ckpt.classes.joined() +
                                    "], samples use [" + classes.joined() + "]");
    }
}

double sample_loss(const std::vector<double>& p, std::size_t label) {
    return -std::log(std::max(p.at(label), std::numeric_limits<double>::min()));
}

}  // namespace

EvalResult evaluate(const nn::Checkpoint& ckpt, const train::LabeledImages& set, const ClassSet& classes) {
    check_classes(ckpt, classes);
    EvalResult r;
    r.matrix = ConfusionMatrix(classes.size());
    constexpr std::size_t kBatch = 32;
    std::vector<std::size_t> idx(set.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t start = 0; start < idx.size(); start += kBatch) {
        const std::size_t n = std::min(kBatch, idx.size() - start);
        std::span<const std::size_t> chunk(idx.data() + start, n);
        auto preds = ckpt.model.predict(train::make_batch(set, chunk, ckpt.resolution));
        for (std::size_t k = 0; k < n; ++k) {
            const std::size_t i = chunk[k];
            SampleOutcome o;
            o.sample_id = set.ids.at(i);
            o.label = set.labels.at(i);
            o.predicted = preds[k].argmax;
            o.loss = sample_loss(preds[k].probabilities, o.label);
            o.probabilities = std::move(preds[k].probabilities);
            r.matrix.add(o.label, o.predicted);
            r.outcomes.push_back(std::move(o));
        }
    }
    r.accuracy = r.matrix.accuracy();
    return r;
}

EvalResult evaluate(const nn::Checkpoint& ckpt, const std::vector<GestureSample>& samples, const ClassSet& classes) {
    check_classes(ckpt, classes);
    const RenderConfig cfg = render_config_of(ckpt);
    const ViewMode mode = view_of(ckpt);
    train::LabeledImages set;
    for (const auto& s : samples) {
        if (!s.label) throw std::invalid_argument("sample " + s.sample_id + " has no label");
        set.add(render_view(s, cfg, mode), *s.label, s.sample_id);
    }
    return evaluate(ckpt, set, classes);
}

std::vector<TopLossEntry> top_losses(const EvalResult& result, std::size_t count) {
    if (count < 1) throw std::invalid_argument("top-losses count must be at least 1");
    std::vector<TopLossEntry> all;
    for (const auto& o : result.outcomes) all.push_back({o.sample_id, o.loss, o.predicted, o.label});
    std::sort(all.begin(), all.end(), [](const TopLossEntry& a, const TopLossEntry& b) {
        if (a.loss != b.loss) return a.loss > b.loss;
        return a.sample_id < b.sample_id;
    });
    if (all.size() > count) all.resize(count);
    return all;
}

nlohmann::json reference_annotations() {
    const std::string note = "published figures for a pretrained 50-layer backbone; not thresholds for this model";
    return {
        {"note", note},
        {"lmdhg_prior_method_accuracy", 0.8478},
        {"lmdhg_single_view_accuracy", 0.9183},
        {"lmdhg_double_view_accuracy", 0.9211},
        {"extended_dataset_accuracy", 0.9878},
    };
}

nlohmann::json report_json(const EvalResult& result, const ClassSet& classes) {
    nlohmann::json recall = nlohmann::json::object();
    for (std::size_t c = 0; c < classes.size(); ++c) {
        const double r = result.matrix.recall(c);
        recall[classes.name(c)] = std::isnan(r) ? nlohmann::json(nullptr) : nlohmann::json(r);
    }
    return {
        {"accuracy", result.accuracy},
        {"samples", result.matrix.total()},
        {"correct", result.matrix.diagonal()},
        {"classes", classes.names()},
        {"per_class_recall", recall},
        {"reference", reference_annotations()},
    };
}

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

}  // namespace

std::string confusion_csv(const ConfusionMatrix& m, const ClassSet& classes) {
    std::string out = "true\\predicted";
    for (const auto& n : classes.names()) out += "," + csv_field(n);
    out += '\n';
    for (std::size_t t = 0; t < m.classes(); ++t) {
        out += csv_field(classes.name(t));
        for (std::size_t p = 0; p < m.classes(); ++p) out += "," + std::to_string(m.at(t, p));
        out += '\n';
    }
    return out;
}

std::string top_losses_csv(const std::vector<TopLossEntry>& entries, const ClassSet& classes) {
    std::string out = "sample_id,loss,predicted,actual\n";
    char buf[64];
    for (const auto& e : entries) {
        std::snprintf(buf, sizeof buf, "%.9g", e.loss);
        out += csv_field(e.sample_id) + "," + buf + "," + csv_field(classes.name(e.predicted)) + "," +
               csv_field(classes.name(e.label)) + "\n";
    }
    return out;
}

RasterImage confusion_heatmap(const ConfusionMatrix& m, int cell) {
    if (cell < 1) throw std::invalid_argument("heatmap cell size must be positive");
    const int n = static_cast<int>(m.classes());
    RasterImage img(std::max(1, n * cell), std::max(1, n * cell), Rgb{255, 255, 255});
    for (int t = 0; t < n; ++t) {
        const auto row = m.row_sum(static_cast<std::size_t>(t));
        for (int p = 0; p < n; ++p) {
            const double f = row ? static_cast<double>(m.at(t, p)) / static_cast<double>(row) : 0.0;
            // white -> dark blue
            const Rgb c{static_cast<std::uint8_t>(std::lround(255 - 247 * f)),
                        static_cast<std::uint8_t>(std::lround(255 - 207 * f)),
                        static_cast<std::uint8_t>(std::lround(255 - 148 * f))};
            for (int y = t * cell; y < (t + 1) * cell; ++y) {
                for (int x = p * cell; x < (p + 1) * cell; ++x) img.set(x, y, c);
            }
        }
    }
    return img;
}

void write_report(const std::filesystem::path& dir, const EvalResult& result, const ClassSet& classes,
                  std::size_t top_count, const nlohmann::json& extra) {
    std::filesystem::create_directories(dir);
    auto report = report_json(result, classes);
    for (const auto& [k, v] : extra.items()) report[k] = v;
    write_file(dir / "report.json", report.dump(2) + "\n");
    write_file(dir / "confusion.csv", confusion_csv(result.matrix, classes));
    write_file(dir / "top_losses.csv", top_losses_csv(top_losses(result, std::max<std::size_t>(1, top_count)), classes));
    write_png((dir / "confusion.png").string(), confusion_heatmap(result.matrix));
}

}  // namespace hgr::eval
