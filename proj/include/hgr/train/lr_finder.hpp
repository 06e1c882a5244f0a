#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "hgr/rng.hpp"
#include "hgr/train/trainer.hpp"

namespace hgr::train {

/// Something whose loss can be measured and then stepped with plain gradient
/// descent at a given learning rate.
class LrProbe {
public:
    virtual ~LrProbe() = default;
    /// Returns the loss at the current parameters, then applies one step at `lr`.
    virtual double loss_then_step(double lr) = 0;
};

struct LrRangeConfig {
    double min_lr = 1e-7;
    double max_lr = 10.0;
    std::size_t steps = 100;
    /// The run stops once the loss exceeds this multiple of the best loss seen.
    double divergence_factor = 4.0;
};

struct LrRangeResult {
    std::vector<double> lrs;
    std::vector<double> losses;
    std::optional<double> divergence_lr;
    double suggested_lr = 0;
};

/// Learning-rate range test with exponentially spaced rates. The suggestion is
/// one order of magnitude below the divergence point; without divergence it is
/// the geometric midpoint of the span. Throws if the loss diverges on the
/// first steps.
LrRangeResult lr_range_test(LrProbe& probe, const LrRangeConfig& config = {});

/// Probe over a copy of a model, cycling seeded mini-batches of `set`.
class ModelLrProbe : public LrProbe {
public:
    ModelLrProbe(nn::Model<float> model, const LabeledImages& set, std::size_t side, std::size_t batch_size,
                 std::uint64_t seed);
    double loss_then_step(double lr) override;

private:
    nn::Model<float> model_;
    const LabeledImages& set_;
    std::size_t side_;
    std::size_t batch_size_;
    Rng rng_;
    std::vector<std::size_t> order_;
    std::size_t cursor_ = 0;
};

}  // namespace hgr::train
