#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hgr/nn/model.hpp"

namespace hgr::train {

/// One optimizable tensor as seen by the optimizers.
template <typename T>
struct ParamSlot {
    std::string name;
    std::span<T> value;
    std::span<const T> grad;
    bool trainable = true;
};

struct RAdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    /// When false the variance rectification is skipped and every step is a
    /// plain Adam step.
    bool rectify = true;
};

template <typename T>
struct RAdamState {
    RAdamConfig config;
    std::vector<std::vector<T>> m;
    std::vector<std::vector<T>> v;
    std::uint64_t t = 0;

    explicit RAdamState(RAdamConfig c = {}) : config(c) {}
};

/// Length of the approximated simple moving average at step t; the limit is
/// 2 / (1 - beta2) - 1.
double radam_rho(std::uint64_t t, double beta2);
double radam_rho_inf(double beta2);
/// Variance rectification term; only defined for rho > 4.
double radam_rectifier(double rho, double rho_inf);

/// One RAdam update of every trainable slot. Frozen slots keep their values
/// and moments. Throws, naming the parameter, if any gradient is non-finite;
/// in that case nothing is modified.
template <typename T>
void radam_step(RAdamState<T>& state, std::vector<ParamSlot<T>>& slots);

struct LookaheadConfig {
    double alpha = 0.5;
    std::size_t k = 6;
};

template <typename T>
struct LookaheadState {
    LookaheadConfig config;
    std::vector<std::vector<T>> slow;
    std::uint64_t steps = 0;
};

template <typename T>
LookaheadState<T> lookahead_init(const std::vector<ParamSlot<T>>& slots, LookaheadConfig config = {});

/// Call after every inner step. Every k-th call moves the slow weights toward
/// the fast ones by alpha and resets the fast weights to them. Returns true on
/// a synchronizing call.
template <typename T>
bool lookahead_sync(std::vector<ParamSlot<T>>& slots, LookaheadState<T>& state);

/// Per-parameter trainability: parameters of layers before `boundary` are frozen.
struct FreezeMask {
    std::vector<bool> trainable;
    std::size_t boundary_layer = 0;
};

template <typename T>
FreezeMask set_freeze(const nn::Model<T>& model, const std::string& boundary);

/// RAdam wrapped in Lookahead.
template <typename T>
class Ranger {
public:
    Ranger(nn::Model<T>& model, RAdamConfig radam, LookaheadConfig lookahead, FreezeMask mask);

    void step(nn::Model<T>& model, const typename nn::Model<T>::Gradients& grads);

    const RAdamState<T>& radam() const { return radam_; }
    const FreezeMask& mask() const { return mask_; }

private:
    std::vector<ParamSlot<T>> slots(nn::Model<T>& model, const typename nn::Model<T>::Gradients* grads) const;

    RAdamState<T> radam_;
    LookaheadState<T> lookahead_;
    FreezeMask mask_;
};

}  // namespace hgr::train
