#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hgr/nn/checkpoint.hpp"
#include "hgr/nn/model.hpp"
#include "hgr/render.hpp"
#include "hgr/train/optim.hpp"

namespace hgr::train {

/// Rendered images with their class indices.
struct LabeledImages {
    std::vector<RasterImage> images;
    std::vector<std::size_t> labels;
    std::vector<std::string> ids;

    std::size_t size() const { return images.size(); }
    void add(RasterImage img, std::size_t label, std::string id);
};

/// Square (B, 3, side, side) float batch of the selected images, area-resampled.
nn::Tensor<float> make_batch(const LabeledImages& set, std::span<const std::size_t> indices, std::size_t side);

struct TrainConfig {
    /// Square input side per round, strictly increasing.
    std::vector<std::size_t> schedule{48, 96, 192};
    std::size_t epochs_frozen = 10;
    std::size_t epochs_unfrozen = 10;
    double lr = 1e-3;
    /// Phase-b learning rate; defaults to lr / 10.
    std::optional<double> lr_unfrozen;
    std::size_t batch_size = 16;
    std::uint64_t seed = 0;
    /// Layers before this one are frozen during phase a.
    std::string freeze_boundary = "head";
    std::vector<std::size_t> widths{16, 32, 64, 128};
    RAdamConfig radam{};
    LookaheadConfig lookahead{};

    double phase_b_lr() const { return lr_unfrozen.value_or(lr / 10.0); }
    void validate() const;
};

struct HistoryRow {
    std::size_t round = 0;
    std::size_t resolution = 0;
    char phase = 'a';
    std::size_t epoch = 0;  // 1-based within the phase
    double train_loss = 0;
    double val_accuracy = 0;
};

std::string history_csv(const std::vector<HistoryRow>& rows);

struct PhaseSnapshot {
    std::size_t round = 0;
    char phase = 'a';
    nn::Model<float> model;
};

struct TrainResult {
    nn::Model<float> best_model;
    std::optional<HistoryRow> best;  // the epoch that produced best_model
    std::vector<HistoryRow> history;
    std::vector<PhaseSnapshot> phase_ends;
};

struct TrainCallbacks {
    std::function<void(const HistoryRow&)> on_epoch;
    std::function<void(const HistoryRow&, const nn::Model<float>&)> on_new_best;
};

/// Progressive-resizing training: for each scheduled resolution a frozen
/// phase (head only) followed by an unfrozen phase at the reduced rate.
/// Validation accuracy is measured after every epoch; the best epoch wins,
/// earlier (lower-round) epochs winning ties.
TrainResult train(const LabeledImages& train_set, const LabeledImages& val_set, std::size_t num_classes,
                  const TrainConfig& config, const TrainCallbacks& callbacks = {});

/// Fraction of `set` whose argmax prediction at `side` matches the label.
double accuracy(const nn::Model<float>& model, const LabeledImages& set, std::size_t side, std::size_t batch_size = 32);

}  // namespace hgr::train
