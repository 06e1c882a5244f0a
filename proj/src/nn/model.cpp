#include "hgr/nn/model.hpp"

#include <cmath>

#include "hgr/rng.hpp"

namespace hgr::nn {

std::string to_string(LayerKind k) {
    switch (k) {
        case LayerKind::Conv2D: return "conv2d";
        case LayerKind::ReLU: return "relu";
        case LayerKind::MaxPool2x2: return "maxpool2x2";
        case LayerKind::GlobalAvgPool: return "global_avg_pool";
        case LayerKind::Dense: return "dense";
    }
    return "?";
}

LayerKind layer_kind_from(const std::string& s) {
    for (LayerKind k : {LayerKind::Conv2D, LayerKind::ReLU, LayerKind::MaxPool2x2, LayerKind::GlobalAvgPool,
                        LayerKind::Dense}) {
        if (to_string(k) == s) return k;
    }
    throw std::invalid_argument("unknown layer kind '" + s + "'");
}

ModelSpec ModelSpec::mini_conv_net(std::size_t classes, std::vector<std::size_t> widths) {
    if (classes == 0) throw std::invalid_argument("model needs at least one class");
    ModelSpec s;
    std::size_t in = s.input_channels;
    for (std::size_t i = 0; i < widths.size(); ++i) {
        const std::string n = std::to_string(i + 1);
        s.layers.push_back({LayerKind::Conv2D, in, widths[i], "conv" + n});
        s.layers.push_back({LayerKind::ReLU, 0, 0, "relu" + n});
        s.layers.push_back({LayerKind::MaxPool2x2, 0, 0, "pool" + n});
        in = widths[i];
    }
    s.layers.push_back({LayerKind::GlobalAvgPool, 0, 0, "gap"});
    s.layers.push_back({LayerKind::Dense, in, classes, "head"});
    return s;
}

std::size_t ModelSpec::num_classes() const {
    if (layers.empty() || layers.back().kind != LayerKind::Dense) throw std::logic_error("model has no dense head");
    return layers.back().out;
}

std::size_t ModelSpec::pool_stages() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.kind == LayerKind::MaxPool2x2;
    return n;
}

std::size_t ModelSpec::layer_index(const std::string& name) const {
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (layers[i].name == name) return i;
    }
    std::string names;
    for (const auto& l : layers) names += (names.empty() ? "" : ", ") + l.name;
    throw std::invalid_argument("unknown layer '" + name + "'; layers: " + names);
}

void ModelSpec::validate() const {
    if (layers.empty()) throw std::invalid_argument("model has no layers");
    bool spatial = true;
    std::size_t width = input_channels;
    for (const auto& l : layers) {
        switch (l.kind) {
            case LayerKind::Conv2D:
                if (!spatial) throw std::invalid_argument(l.name + ": conv2d after flattening");
                if (l.in != width) {
                    throw std::invalid_argument(l.name + ": expects " + std::to_string(l.in) + " channels, receives " +
                                                std::to_string(width));
                }
                width = l.out;
                break;
            case LayerKind::ReLU: break;
            case LayerKind::MaxPool2x2:
                if (!spatial) throw std::invalid_argument(l.name + ": pooling after flattening");
                break;
            case LayerKind::GlobalAvgPool:
                if (!spatial) throw std::invalid_argument(l.name + ": global pooling twice");
                spatial = false;
                break;
            case LayerKind::Dense:
                if (spatial) throw std::invalid_argument(l.name + ": dense layer on spatial input");
                if (l.in != width) {
                    throw std::invalid_argument(l.name + ": expects " + std::to_string(l.in) + " features, receives " +
                                                std::to_string(width));
                }
                width = l.out;
                break;
        }
        if (l.has_params() && (l.in == 0 || l.out == 0)) throw std::invalid_argument(l.name + ": zero-sized layer");
    }
    if (layers.back().kind != LayerKind::Dense) throw std::invalid_argument("last layer must be dense");
}

void to_json(nlohmann::json& j, const ModelSpec& s) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : s.layers) {
        nlohmann::json e{{"kind", to_string(l.kind)}, {"name", l.name}};
        if (l.has_params()) {
            e["in"] = l.in;
            e["out"] = l.out;
        }
        layers.push_back(e);
    }
    j = nlohmann::json{{"input_channels", s.input_channels}, {"layers", layers}};
}

void from_json(const nlohmann::json& j, ModelSpec& s) {
    s.input_channels = j.at("input_channels").get<std::size_t>();
    s.layers.clear();
    for (const auto& e : j.at("layers")) {
        LayerSpec l;
        l.kind = layer_kind_from(e.at("kind").get<std::string>());
        l.name = e.at("name").get<std::string>();
        l.in = e.value("in", std::size_t{0});
        l.out = e.value("out", std::size_t{0});
        s.layers.push_back(l);
    }
    s.validate();
}

template <typename T>
Model<T>::Model(ModelSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
    spec_.validate();
    Rng rng(seed);
    for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
        const LayerSpec& l = spec_.layers[i];
        if (!l.has_params()) continue;
        Shape wshape = l.kind == LayerKind::Conv2D ? Shape{l.out, l.in, 3, 3} : Shape{l.out, l.in};
        const std::size_t fan_in = l.kind == LayerKind::Conv2D ? l.in * 9 : l.in;
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
        Tensor<T> w(wshape);
        for (auto& v : w.data) v = static_cast<T>(rng.uniform(-bound, bound));
        params_.push_back({l.name + ".weight", i, std::move(w)});
        params_.push_back({l.name + ".bias", i, Tensor<T>({l.out})});
    }
}

template <typename T>
std::size_t Model<T>::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
}

template <typename T>
std::optional<std::size_t> Model<T>::weight_of(std::size_t layer) const {
    for (std::size_t i = 0; i < params_.size(); ++i) {
        if (params_[i].layer == layer) return i;
    }
    return std::nullopt;
}

template <typename T>
void Model<T>::check_input(const Tensor<T>& batch) const {
    if (batch.rank() != 4) throw std::invalid_argument("model input must be (B, C, H, W), got " + shape_str(batch.shape));
    if (batch.dim(1) != spec_.input_channels) {
        throw std::invalid_argument("model expects " + std::to_string(spec_.input_channels) + " input channels, got " +
                                    std::to_string(batch.dim(1)));
    }
    const std::size_t div = std::size_t{1} << spec_.pool_stages();
    if (batch.dim(2) % div || batch.dim(3) % div || batch.dim(2) == 0 || batch.dim(3) == 0) {
        throw std::invalid_argument("input resolution " + std::to_string(batch.dim(3)) + "x" +
                                    std::to_string(batch.dim(2)) + " is not divisible by " + std::to_string(div));
    }
}

template <typename T>
Tensor<T> Model<T>::forward(const Tensor<T>& batch) const {
    check_input(batch);
    Tensor<T> x = batch;
    for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
        const LayerSpec& l = spec_.layers[i];
        switch (l.kind) {
            case LayerKind::Conv2D: {
                const std::size_t p = *weight_of(i);
                x = conv2d(x, params_[p].value, params_[p + 1].value);
                break;
            }
            case LayerKind::ReLU: x = relu(x); break;
            case LayerKind::MaxPool2x2: x = maxpool2x2(x); break;
            case LayerKind::GlobalAvgPool: x = global_avg_pool(x); break;
            case LayerKind::Dense: {
                const std::size_t p = *weight_of(i);
                x = dense(x, params_[p].value, params_[p + 1].value);
                break;
            }
        }
    }
    return x;
}

template <typename T>
Tensor<T> Model<T>::forward_trace(const Tensor<T>& batch, Trace& trace) const {
    check_input(batch);
    trace.inputs.clear();
    trace.inputs.reserve(spec_.layers.size());
    trace.inputs.push_back(batch);
    for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
        const LayerSpec& l = spec_.layers[i];
        const Tensor<T>& x = trace.inputs.back();
        Tensor<T> y;
        switch (l.kind) {
            case LayerKind::Conv2D: {
                const std::size_t p = *weight_of(i);
                y = conv2d(x, params_[p].value, params_[p + 1].value);
                break;
            }
            case LayerKind::ReLU: y = relu(x); break;
            case LayerKind::MaxPool2x2: y = maxpool2x2(x); break;
            case LayerKind::GlobalAvgPool: y = global_avg_pool(x); break;
            case LayerKind::Dense: {
                const std::size_t p = *weight_of(i);
                y = dense(x, params_[p].value, params_[p + 1].value);
                break;
            }
        }
        if (i + 1 < spec_.layers.size()) {
            trace.inputs.push_back(std::move(y));
        } else {
            trace.logits = std::move(y);
        }
    }
    return trace.logits;
}

template <typename T>
typename Model<T>::Gradients Model<T>::backward(const Tensor<T>& batch, const std::vector<std::size_t>& labels) const {
    Trace trace;
    forward_trace(batch, trace);
    const Tensor<T> probs = softmax(trace.logits);
    Gradients g;
    g.loss = cross_entropy(probs, labels);
    g.params.resize(params_.size());
    Tensor<T> grad = softmax_cross_entropy_backward(probs, labels);
    for (std::size_t i = spec_.layers.size(); i-- > 0;) {
        const LayerSpec& l = spec_.layers[i];
        const Tensor<T>& x = trace.inputs[i];
        switch (l.kind) {
            case LayerKind::Conv2D:
            case LayerKind::Dense: {
                const std::size_t p = *weight_of(i);
                ParamGrads<T> pg = l.kind == LayerKind::Conv2D ? conv2d_backward(x, params_[p].value, grad)
                                                               : dense_backward(x, params_[p].value, grad);
                g.params[p] = std::move(pg.weight);
                g.params[p + 1] = std::move(pg.bias);
                grad = std::move(pg.input);
                break;
            }
            case LayerKind::ReLU: grad = relu_backward(x, grad); break;
            case LayerKind::MaxPool2x2: grad = maxpool2x2_backward(x, grad); break;
            case LayerKind::GlobalAvgPool: grad = global_avg_pool_backward(x.shape, grad); break;
        }
    }
    g.input = std::move(grad);
    return g;
}

template <typename T>
std::vector<Prediction> Model<T>::predict(const Tensor<T>& batch) const {
    const Tensor<T> probs = softmax(forward(batch));
    const std::size_t B = probs.dim(0), N = probs.dim(1);
    std::vector<Prediction> out(B);
    for (std::size_t n = 0; n < B; ++n) {
        const T* row = probs.ptr() + n * N;
        out[n].probabilities.assign(row, row + N);
        out[n].argmax = argmax(row, N);
    }
    return out;
}

template <typename T>
void Model<T>::zero() {
    for (auto& p : params_) p.value.fill(T(0));
}

template class Model<float>;
template class Model<double>;

}  // namespace hgr::nn
