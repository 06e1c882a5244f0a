#include "hgr/train/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace hgr::train {

double radam_rho_inf(double beta2) { return 2.0 / (1.0 - beta2) - 1.0; }

double radam_rho(std::uint64_t t, double beta2) {
    const double bt = std::pow(beta2, static_cast<double>(t));
    return radam_rho_inf(beta2) - 2.0 * static_cast<double>(t) * bt / (1.0 - bt);
}

double radam_rectifier(double rho, double rho_inf) {
    return std::sqrt(((rho - 4.0) * (rho - 2.0) * rho_inf) / ((rho_inf - 4.0) * (rho_inf - 2.0) * rho));
}

template <typename T>
void radam_step(RAdamState<T>& state, std::vector<ParamSlot<T>>& slots) {
    const RAdamConfig& c = state.config;
    if (!(c.lr > 0)) throw std::invalid_argument("learning rate must be positive");
    for (const auto& s : slots) {
        if (s.value.size() != s.grad.size()) throw std::invalid_argument("gradient shape mismatch for " + s.name);
        if (!s.trainable) continue;
        for (T g : s.grad) {
            if (!std::isfinite(static_cast<double>(g))) throw std::runtime_error("non-finite gradient in " + s.name);
        }
    }
    if (state.m.size() != slots.size()) {
        state.m.assign(slots.size(), {});
        state.v.assign(slots.size(), {});
        for (std::size_t i = 0; i < slots.size(); ++i) {
            state.m[i].assign(slots[i].value.size(), T(0));
            state.v[i].assign(slots[i].value.size(), T(0));
        }
    }

    ++state.t;
    const double t = static_cast<double>(state.t);
    const double bias1 = 1.0 - std::pow(c.beta1, t);
    const double bias2 = 1.0 - std::pow(c.beta2, t);
    const double rho_inf = radam_rho_inf(c.beta2);
    const double rho = radam_rho(state.t, c.beta2);
    const bool adaptive = !c.rectify || rho > 4.0;
    const double rect = c.rectify && adaptive ? radam_rectifier(rho, rho_inf) : 1.0;
    const T b1 = static_cast<T>(c.beta1), b2 = static_cast<T>(c.beta2);
    const T one = T(1);

    for (std::size_t i = 0; i < slots.size(); ++i) {
        auto& s = slots[i];
        if (!s.trainable) continue;
        T* m = state.m[i].data();
        T* v = state.v[i].data();
        if (adaptive) {
            const T step = static_cast<T>(c.lr * rect / bias1);
            const T sqrt_bias2 = static_cast<T>(std::sqrt(bias2));
            const T eps = static_cast<T>(c.eps);
            for (std::size_t k = 0; k < s.value.size(); ++k) {
                const T g = s.grad[k];
                m[k] = b1 * m[k] + (one - b1) * g;
                v[k] = b2 * v[k] + (one - b2) * g * g;
                s.value[k] -= step * m[k] / (std::sqrt(v[k]) / sqrt_bias2 + eps);
            }
        } else {
            const T step = static_cast<T>(c.lr / bias1);
            for (std::size_t k = 0; k < s.value.size(); ++k) {
                const T g = s.grad[k];
                m[k] = b1 * m[k] + (one - b1) * g;
                v[k] = b2 * v[k] + (one - b2) * g * g;
                s.value[k] -= step * m[k];
            }
        }
    }
}

template <typename T>
LookaheadState<T> lookahead_init(const std::vector<ParamSlot<T>>& slots, LookaheadConfig config) {
    if (config.k == 0) throw std::invalid_argument("lookahead sync period must be positive");
    LookaheadState<T> st;
    st.config = config;
    for (const auto& s : slots) st.slow.emplace_back(s.value.begin(), s.value.end());
    return st;
}

template <typename T>
bool lookahead_sync(std::vector<ParamSlot<T>>& slots, LookaheadState<T>& state) {
    if (state.slow.size() != slots.size()) throw std::invalid_argument("lookahead state does not match parameters");
    ++state.steps;
    if (state.steps % state.config.k != 0) return false;
    const T alpha = static_cast<T>(state.config.alpha);
    for (std::size_t i = 0; i < slots.size(); ++i) {
        auto& s = slots[i];
        if (!s.trainable) continue;
        auto& slow = state.slow[i];
        for (std::size_t k = 0; k < s.value.size(); ++k) {
            slow[k] += alpha * (s.value[k] - slow[k]);
            s.value[k] = slow[k];
        }
    }
    return true;
}

template <typename T>
FreezeMask set_freeze(const nn::Model<T>& model, const std::string& boundary) {
    FreezeMask mask;
    mask.boundary_layer = model.spec().layer_index(boundary);
    for (const auto& p : model.parameters()) mask.trainable.push_back(p.layer >= mask.boundary_layer);
    return mask;
}

template <typename T>
Ranger<T>::Ranger(nn::Model<T>& model, RAdamConfig radam, LookaheadConfig lookahead, FreezeMask mask)
    : radam_(radam), mask_(std::move(mask)) {
    if (mask_.trainable.size() != model.parameters().size()) throw std::invalid_argument("freeze mask size mismatch");
    lookahead_ = lookahead_init(slots(model, nullptr), lookahead);
}

template <typename T>
std::vector<ParamSlot<T>> Ranger<T>::slots(nn::Model<T>& model, const typename nn::Model<T>::Gradients* grads) const {
    std::vector<ParamSlot<T>> out;
    auto& params = model.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) {
        ParamSlot<T> s;
        s.name = params[i].name;
        s.value = std::span<T>(params[i].value.data);
        if (grads) s.grad = std::span<const T>(grads->params.at(i).data);
        else s.grad = std::span<const T>(params[i].value.data);
        s.trainable = mask_.trainable[i];
        out.push_back(std::move(s));
    }
    return out;
}

template <typename T>
void Ranger<T>::step(nn::Model<T>& model, const typename nn::Model<T>::Gradients& grads) {
    auto s = slots(model, &grads);
    radam_step(radam_, s);
    lookahead_sync(s, lookahead_);
}

#define HGR_INSTANTIATE_OPTIM(T)                                                                    \
    template void radam_step(RAdamState<T>&, std::vector<ParamSlot<T>>&);                           \
    template LookaheadState<T> lookahead_init(const std::vector<ParamSlot<T>>&, LookaheadConfig);   \
    template bool lookahead_sync(std::vector<ParamSlot<T>>&, LookaheadState<T>&);                   \
    template FreezeMask set_freeze(const nn::Model<T>&, const std::string&);                        \
    template class Ranger<T>;

HGR_INSTANTIATE_OPTIM(float)
HGR_INSTANTIATE_OPTIM(double)

#undef HGR_INSTANTIATE_OPTIM

}  // namespace hgr::train
