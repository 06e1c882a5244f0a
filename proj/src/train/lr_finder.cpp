#include "hgr/train/lr_finder.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace hgr::train {

LrRangeResult lr_range_test(LrProbe& probe, const LrRangeConfig& config) {
    if (!(config.min_lr > 0) || !(config.max_lr > config.min_lr)) {
        throw std::invalid_argument("learning-rate span must satisfy 0 < min < max");
    }
    if (config.steps < 2) throw std::invalid_argument("learning-rate range test needs at least 2 steps");
    LrRangeResult r;
    const double ratio = std::pow(config.max_lr / config.min_lr, 1.0 / static_cast<double>(config.steps - 1));
    double best = INFINITY;
    for (std::size_t i = 0; i < config.steps; ++i) {
        const double lr = config.min_lr * std::pow(ratio, static_cast<double>(i));
        const double loss = probe.loss_then_step(lr);
        r.lrs.push_back(lr);
        r.losses.push_back(loss);
        if (!std::isfinite(loss) || loss > config.divergence_factor * best) {
            if (i <= 1) {
                throw std::runtime_error("loss diverges immediately at lr " + std::to_string(lr) +
                                         "; try a smaller learning-rate span");
            }
            r.divergence_lr = lr;
            break;
        }
        best = std::min(best, loss);
    }
    r.suggested_lr = r.divergence_lr ? *r.divergence_lr / 10.0 : std::sqrt(config.min_lr * config.max_lr);
    return r;
}

ModelLrProbe::ModelLrProbe(nn::Model<float> model, const LabeledImages& set, std::size_t side, std::size_t batch_size,
                           std::uint64_t seed)
    : model_(std::move(model)), set_(set), side_(side), batch_size_(batch_size), rng_(seed), order_(set.size()) {
    if (set.size() == 0) throw std::invalid_argument("learning-rate probe needs data");
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    rng_.shuffle(order_);
}

double ModelLrProbe::loss_then_step(double lr) {
    std::vector<std::size_t> chunk;
    for (std::size_t k = 0; k < std::min(batch_size_, order_.size()); ++k) {
        if (cursor_ == order_.size()) {
            cursor_ = 0;
            rng_.shuffle(order_);
        }
        chunk.push_back(order_[cursor_++]);
    }
    std::vector<std::size_t> labels;
    for (std::size_t i : chunk) labels.push_back(set_.labels[i]);
    const auto grads = model_.backward(make_batch(set_, chunk, side_), labels);
    auto& params = model_.parameters();
    const float step = static_cast<float>(lr);
    for (std::size_t p = 0; p < params.size(); ++p) {
        for (std::size_t k = 0; k < params[p].value.size(); ++k) params[p].value[k] -= step * grads.params[p][k];
    }
    return static_cast<double>(grads.loss);
}

}  // namespace hgr::train
