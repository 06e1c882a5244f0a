#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hgr/nn/layers.hpp"
#include "hgr/nn/tensor.hpp"

namespace hgr::nn {

enum class LayerKind { Conv2D, ReLU, MaxPool2x2, GlobalAvgPool, Dense };

std::string to_string(LayerKind k);
LayerKind layer_kind_from(const std::string& s);

struct LayerSpec {
    LayerKind kind = LayerKind::ReLU;
    std::size_t in = 0;   // channels or features, for Conv2D and Dense
    std::size_t out = 0;
    std::string name;

    bool has_params() const { return kind == LayerKind::Conv2D || kind == LayerKind::Dense; }
    bool operator==(const LayerSpec&) const = default;
};

struct ModelSpec {
    std::size_t input_channels = 3;
    std::vector<LayerSpec> layers;

    /// 4 x [conv3x3 -> relu -> maxpool] with the given widths, global average
    /// pool, then a dense head with one output per class.
    static ModelSpec mini_conv_net(std::size_t classes, std::vector<std::size_t> widths = {16, 32, 64, 128});

    std::size_t num_classes() const;
    std::size_t pool_stages() const;
    std::size_t layer_index(const std::string& name) const;
    /// Throws if adjacent layers are incompatible or the last layer is not Dense.
    void validate() const;

    bool operator==(const ModelSpec&) const = default;
};

void to_json(nlohmann::json& j, const ModelSpec& s);
void from_json(const nlohmann::json& j, ModelSpec& s);

/// Per-sample class distribution.
struct Prediction {
    std::vector<double> probabilities;
    std::size_t argmax = 0;
};

template <typename T>
class Model {
public:
    struct Parameter {
        std::string name;      // e.g. "conv1.weight"
        std::size_t layer = 0; // index into spec().layers
        Tensor<T> value;
    };

    /// Activations kept by forward_trace for the backward pass.
    struct Trace {
        std::vector<Tensor<T>> inputs;  // input of every layer
        Tensor<T> logits;
    };

    struct Gradients {
        std::vector<Tensor<T>> params;  // aligned with parameters()
        Tensor<T> input;
        T loss = 0;
    };

    Model() = default;
    /// Fan-in scaled uniform weights (bound sqrt(6 / fan_in)), zero biases.
    Model(ModelSpec spec, std::uint64_t seed);

    const ModelSpec& spec() const { return spec_; }
    std::vector<Parameter>& parameters() { return params_; }
    const std::vector<Parameter>& parameters() const { return params_; }
    std::size_t parameter_count() const;

    /// Batch (B, C, H, W) to logits (B, N).
    Tensor<T> forward(const Tensor<T>& batch) const;
    Tensor<T> forward_trace(const Tensor<T>& batch, Trace& trace) const;
    /// Mean cross-entropy over the batch and its gradient for every parameter
    /// and for the input.
    Gradients backward(const Tensor<T>& batch, const std::vector<std::size_t>& labels) const;

    std::vector<Prediction> predict(const Tensor<T>& batch) const;

    template <typename U>
    Model<U> cast() const {
        Model<U> out;
        out.spec_ = spec_;
        for (const auto& p : params_) out.params_.push_back({p.name, p.layer, p.value.template cast<U>()});
        return out;
    }

    /// Zero every weight and bias.
    void zero();

private:
    template <typename>
    friend class Model;

    void check_input(const Tensor<T>& batch) const;
    std::optional<std::size_t> weight_of(std::size_t layer) const;

    ModelSpec spec_;
    std::vector<Parameter> params_;
};

}  // namespace hgr::nn
