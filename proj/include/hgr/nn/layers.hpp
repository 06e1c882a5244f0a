#pragma once

#include <vector>

#include "hgr/nn/tensor.hpp"

// Stateless layer kernels. Activations are (B, C, H, W) for spatial layers and
// (B, F) for dense layers. Every backward takes the forward input and the
// gradient of the loss with respect to the forward output.
namespace hgr::nn {

template <typename T>
struct ParamGrads {
    Tensor<T> input;
    Tensor<T> weight;
    Tensor<T> bias;
};

/// 3x3 convolution, stride 1, zero padding 1. weight (O, C, 3, 3), bias (O).
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);
template <typename T>
ParamGrads<T> conv2d_backward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& grad_out);

template <typename T>
Tensor<T> relu(const Tensor<T>& x);
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& grad_out);

/// 2x2 max pooling with stride 2. Odd spatial sizes are rejected.
template <typename T>
Tensor<T> maxpool2x2(const Tensor<T>& x);
/// Routes each gradient to the first maximum in row-major window order.
template <typename T>
Tensor<T> maxpool2x2_backward(const Tensor<T>& x, const Tensor<T>& grad_out);

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x);
template <typename T>
Tensor<T> global_avg_pool_backward(const Shape& input_shape, const Tensor<T>& grad_out);

/// y = x W^T + b with weight (O, I).
template <typename T>
Tensor<T> dense(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);
template <typename T>
ParamGrads<T> dense_backward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& grad_out);

/// Row-wise softmax over (B, N) logits, max-subtracted.
template <typename T>
Tensor<T> softmax(const Tensor<T>& logits);

/// Mean negative log-likelihood of `labels` under row-wise probabilities.
template <typename T>
T cross_entropy(const Tensor<T>& probabilities, const std::vector<std::size_t>& labels);

/// Gradient of mean cross-entropy w.r.t. the logits: (p - one_hot) / B.
template <typename T>
Tensor<T> softmax_cross_entropy_backward(const Tensor<T>& probabilities, const std::vector<std::size_t>& labels);

/// Lowest index among the maxima.
template <typename T>
std::size_t argmax(const T* values, std::size_t n);

}  // namespace hgr::nn
