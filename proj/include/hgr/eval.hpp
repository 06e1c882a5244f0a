#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "hgr/nn/checkpoint.hpp"
#include "hgr/render.hpp"
#include "hgr/skeleton.hpp"
#include "hgr/train/trainer.hpp"

namespace hgr::eval {

/// Rows are true classes, columns predicted classes.
class ConfusionMatrix {
public:
    ConfusionMatrix() = default;
    explicit ConfusionMatrix(std::size_t classes) : n_(classes), counts_(classes * classes, 0) {}

    static ConfusionMatrix from(const std::vector<std::size_t>& labels, const std::vector<std::size_t>& predictions,
                                std::size_t classes);

    void add(std::size_t truth, std::size_t predicted);
    void merge(const ConfusionMatrix& other);

    std::size_t classes() const { return n_; }
    std::uint64_t at(std::size_t truth, std::size_t predicted) const { return counts_.at(truth * n_ + predicted); }
    std::uint64_t row_sum(std::size_t truth) const;
    std::uint64_t column_sum(std::size_t predicted) const;
    std::uint64_t diagonal() const;
    std::uint64_t total() const;
    /// diagonal / total; 0 for an empty matrix.
    double accuracy() const;
    /// Recall of one class; NaN when the class has no samples.
    double recall(std::size_t truth) const;

    bool operator==(const ConfusionMatrix&) const = default;

private:
    std::size_t n_ = 0;
    std::vector<std::uint64_t> counts_;
};

struct SampleOutcome {
    std::string sample_id;
    std::size_t label = 0;
    std::size_t predicted = 0;
    double loss = 0;  // cross-entropy of the true class
    std::vector<double> probabilities;
};

struct EvalResult {
    double accuracy = 0;
    ConfusionMatrix matrix;
    std::vector<SampleOutcome> outcomes;  // input order
};

struct TopLossEntry {
    std::string sample_id;
    double loss = 0;
    std::size_t predicted = 0;
    std::size_t label = 0;
};

/// Recordings 1-35 train, 36-50 validate. Throws for a sample without a
/// recording number in that range.
std::pair<std::vector<GestureSample>, std::vector<GestureSample>> split_lmdhg(const std::vector<GestureSample>& samples);

/// Seeded, class-stratified split of sample indices. The training side gets
/// round(fraction * N) samples overall, spread across classes by largest
/// remainder. Both index lists come back in ascending order.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> random_split(const std::vector<std::size_t>& labels,
                                                                           double fraction, std::uint64_t seed);

std::pair<std::vector<GestureSample>, std::vector<GestureSample>> random_split(const std::vector<GestureSample>& samples,
                                                                               double fraction, std::uint64_t seed);

/// The render settings and view a checkpoint was trained with.
RenderConfig render_config_of(const nn::Checkpoint& ckpt);
ViewMode view_of(const nn::Checkpoint& ckpt);

/// Renders a sample exactly as the checkpoint's training images were rendered.
RasterImage render_for(const nn::Checkpoint& ckpt, const GestureSample& sample);

/// Classifies one stored-resolution image at the checkpoint's input size.
nn::Prediction classify(const nn::Checkpoint& ckpt, const RasterImage& image);

/// Classifies rendered images. `classes` names the label indices of `set` and
/// must equal the checkpoint's class set.
EvalResult evaluate(const nn::Checkpoint& ckpt, const train::LabeledImages& set, const ClassSet& classes);

/// Renders every labeled sample with the checkpoint's settings, then evaluates.
EvalResult evaluate(const nn::Checkpoint& ckpt, const std::vector<GestureSample>& samples, const ClassSet& classes);

/// Highest-loss outcomes first; equal losses ordered by sample id.
std::vector<TopLossEntry> top_losses(const EvalResult& result, std::size_t count);

/// Published accuracies of the original backbone, kept in reports for comparison only.
nlohmann::json reference_annotations();

nlohmann::json report_json(const EvalResult& result, const ClassSet& classes);
std::string confusion_csv(const ConfusionMatrix& m, const ClassSet& classes);
std::string top_losses_csv(const std::vector<TopLossEntry>& entries, const ClassSet& classes);
/// Row-normalized heatmap, one square cell per matrix entry.
RasterImage confusion_heatmap(const ConfusionMatrix& m, int cell = 24);

/// Writes report.json, confusion.csv, top_losses.csv and confusion.png into `dir`.
void write_report(const std::filesystem::path& dir, const EvalResult& result, const ClassSet& classes,
                  std::size_t top_count, const nlohmann::json& extra = nlohmann::json::object());

}  // namespace hgr::eval
