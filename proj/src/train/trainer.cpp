#include "hgr/train/trainer.hpp"

#include <cstdio>
#include <numeric>

#include "hgr/rng.hpp"

namespace hgr::train {

void LabeledImages::add(RasterImage img, std::size_t label, std::string id) {
    images.push_back(std::move(img));
    labels.push_back(label);
    ids.push_back(std::move(id));
}

nn::Tensor<float> make_batch(const LabeledImages& set, std::span<const std::size_t> indices, std::size_t side) {
    const std::size_t plane = 3 * side * side;
    nn::Tensor<float> batch({indices.size(), 3, side, side});
    for (std::size_t n = 0; n < indices.size(); ++n) {
        const auto planar = to_planar(set.images.at(indices[n]), static_cast<int>(side), static_cast<int>(side));
        std::copy(planar.begin(), planar.end(), batch.ptr() + n * plane);
    }
    return batch;
}

void TrainConfig::validate() const {
    for (std::size_t i = 0; i < schedule.size(); ++i) {
        if (schedule[i] == 0) throw std::invalid_argument("schedule resolutions must be positive");
        if (i && schedule[i] <= schedule[i - 1]) throw std::invalid_argument("schedule must be strictly increasing");
    }
    if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
    if (!(lr > 0) || !(phase_b_lr() > 0)) throw std::invalid_argument("learning rates must be positive");
}

std::string history_csv(const std::vector<HistoryRow>& rows) {
    std::string out = "round,resolution,phase,epoch,train_loss,val_accuracy\n";
    char buf[160];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%zu,%zu,%c,%zu,%.9g,%.9g\n", r.round, r.resolution, r.phase, r.epoch,
                      r.train_loss, r.val_accuracy);
        out += buf;
    }
    return out;
}

double accuracy(const nn::Model<float>& model, const LabeledImages& set, std::size_t side, std::size_t batch_size) {
    if (set.size() == 0) return 0.0;
    std::size_t correct = 0;
    std::vector<std::size_t> idx(set.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t start = 0; start < idx.size(); start += batch_size) {
        const std::size_t n = std::min(batch_size, idx.size() - start);
        std::span<const std::size_t> chunk(idx.data() + start, n);
        const auto preds = model.predict(make_batch(set, chunk, side));
        for (std::size_t k = 0; k < n; ++k) correct += preds[k].argmax == set.labels[chunk[k]];
    }
    return static_cast<double>(correct) / static_cast<double>(set.size());
}

namespace {

double run_epoch(nn::Model<float>& model, Ranger<float>& opt, const LabeledImages& set, std::size_t side,
                 std::size_t batch_size, Rng& rng) {
    std::vector<std::size_t> order(set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    double loss_sum = 0;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
        const std::size_t n = std::min(batch_size, order.size() - start);
        std::span<const std::size_t> chunk(order.data() + start, n);
        std::vector<std::size_t> labels;
        labels.reserve(n);
        for (std::size_t i : chunk) labels.push_back(set.labels[i]);
        const auto grads = model.backward(make_batch(set, chunk, side), labels);
        loss_sum += static_cast<double>(grads.loss) * static_cast<double>(n);
        opt.step(model, grads);
    }
    return loss_sum / static_cast<double>(set.size());
}

}  // namespace

TrainResult train(const LabeledImages& train_set, const LabeledImages& val_set, std::size_t num_classes,
                  const TrainConfig& config, const TrainCallbacks& callbacks) {
    config.validate();
    if (train_set.size() == 0) throw std::invalid_argument("training set is empty");
    if (val_set.size() == 0) throw std::invalid_argument("validation set is empty");
    for (std::size_t l : train_set.labels) {
        if (l >= num_classes) throw std::out_of_range("training label outside class set");
    }

    nn::Model<float> model(nn::ModelSpec::mini_conv_net(num_classes, config.widths), config.seed);
    Rng rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
    TrainResult result;
    result.best_model = model;

    for (std::size_t round = 0; round < config.schedule.size(); ++round) {
        const std::size_t side = config.schedule[round];
        for (char phase : {'a', 'b'}) {
            const bool frozen = phase == 'a';
            RAdamConfig radam = config.radam;
            radam.lr = frozen ? config.lr : config.phase_b_lr();
            FreezeMask mask = set_freeze(model, frozen ? config.freeze_boundary : model.spec().layers.front().name);
            Ranger<float> opt(model, radam, config.lookahead, std::move(mask));
            const std::size_t epochs = frozen ? config.epochs_frozen : config.epochs_unfrozen;
            for (std::size_t epoch = 1; epoch <= epochs; ++epoch) {
                HistoryRow row;
                row.round = round;
                row.resolution = side;
                row.phase = phase;
                row.epoch = epoch;
                row.train_loss = run_epoch(model, opt, train_set, side, config.batch_size, rng);
                row.val_accuracy = accuracy(model, val_set, side);
                result.history.push_back(row);
                if (callbacks.on_epoch) callbacks.on_epoch(row);
                if (!result.best || row.val_accuracy > result.best->val_accuracy) {
                    result.best = row;
                    result.best_model = model;
                    if (callbacks.on_new_best) callbacks.on_new_best(row, model);
                }
            }
            result.phase_ends.push_back({round, phase, model});
        }
    }
    return result;
}

}  // namespace hgr::train
