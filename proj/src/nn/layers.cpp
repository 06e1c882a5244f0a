#include "hgr/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hgr::nn {

namespace {

void expect_rank(const Shape& s, std::size_t rank, const char* what) {
    if (s.size() != rank) {
        throw std::invalid_argument(std::string(what) + ": expected rank " + std::to_string(rank) + ", got shape " +
                                    shape_str(s));
    }
}

// Unfolds one (C, H, W) image into (C*9, H*W) columns for a padded 3x3 kernel.
template <typename T>
void im2col(const T* img, std::size_t C, std::size_t H, std::size_t W, T* col) {
    const std::size_t HW = H * W;
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t ky = 0; ky < 3; ++ky) {
            for (std::size_t kx = 0; kx < 3; ++kx) {
                T* row = col + ((c * 3 + ky) * 3 + kx) * HW;
                for (std::size_t y = 0; y < H; ++y) {
                    const long sy = static_cast<long>(y) + static_cast<long>(ky) - 1;
                    T* out = row + y * W;
                    if (sy < 0 || sy >= static_cast<long>(H)) {
                        std::fill(out, out + W, T(0));
                        continue;
                    }
                    const T* src = img + (c * H + static_cast<std::size_t>(sy)) * W;
                    for (std::size_t x = 0; x < W; ++x) {
                        const long sx = static_cast<long>(x) + static_cast<long>(kx) - 1;
                        out[x] = (sx < 0 || sx >= static_cast<long>(W)) ? T(0) : src[sx];
                    }
                }
            }
        }
    }
}

template <typename T>
void col2im(const T* col, std::size_t C, std::size_t H, std::size_t W, T* img) {
    const std::size_t HW = H * W;
    std::fill(img, img + C * HW, T(0));
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t ky = 0; ky < 3; ++ky) {
            for (std::size_t kx = 0; kx < 3; ++kx) {
                const T* row = col + ((c * 3 + ky) * 3 + kx) * HW;
                for (std::size_t y = 0; y < H; ++y) {
                    const long sy = static_cast<long>(y) + static_cast<long>(ky) - 1;
                    if (sy < 0 || sy >= static_cast<long>(H)) continue;
                    T* dst = img + (c * H + static_cast<std::size_t>(sy)) * W;
                    const T* in = row + y * W;
                    for (std::size_t x = 0; x < W; ++x) {
                        const long sx = static_cast<long>(x) + static_cast<long>(kx) - 1;
                        if (sx >= 0 && sx < static_cast<long>(W)) dst[sx] += in[x];
                    }
                }
            }
        }
    }
}

// y[n] += a * x[n]
template <typename T>
inline void axpy(std::size_t n, T a, const T* __restrict x, T* __restrict y) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void check_conv_shapes(const Shape& x, const Shape& w, const Shape* b) {
    expect_rank(x, 4, "conv2d input");
    expect_rank(w, 4, "conv2d weight");
    if (w[2] != 3 || w[3] != 3) throw std::invalid_argument("conv2d kernel must be 3x3, got " + shape_str(w));
    if (w[1] != x[1]) {
        throw std::invalid_argument("conv2d: input has " + std::to_string(x[1]) + " channels but weight " +
                                    shape_str(w) + " expects " + std::to_string(w[1]));
    }
    if (b && (b->size() != 1 || (*b)[0] != w[0])) {
        throw std::invalid_argument("conv2d: bias " + shape_str(*b) + " does not match " + std::to_string(w[0]) +
                                    " output channels");
    }
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
    check_conv_shapes(x.shape, weight.shape, &bias.shape);
    const std::size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3), O = weight.dim(0);
    const std::size_t HW = H * W, K = C * 9;
    Tensor<T> y({B, O, H, W});
    std::vector<T> col(K * HW);
    for (std::size_t n = 0; n < B; ++n) {
        im2col(x.ptr() + n * C * HW, C, H, W, col.data());
        T* out = y.ptr() + n * O * HW;
        for (std::size_t o = 0; o < O; ++o) {
            T* yo = out + o * HW;
            std::fill(yo, yo + HW, bias[o]);
            const T* wo = weight.ptr() + o * K;
            for (std::size_t k = 0; k < K; ++k) axpy(HW, wo[k], col.data() + k * HW, yo);
        }
    }
    return y;
}

template <typename T>
ParamGrads<T> conv2d_backward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& grad_out) {
    check_conv_shapes(x.shape, weight.shape, nullptr);
    const std::size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3), O = weight.dim(0);
    if (grad_out.shape != Shape{B, O, H, W}) {
        throw std::invalid_argument("conv2d_backward: gradient shape " + shape_str(grad_out.shape) +
                                    " does not match output " + shape_str({B, O, H, W}));
    }
    const std::size_t HW = H * W, K = C * 9;
    ParamGrads<T> g{Tensor<T>(x.shape), Tensor<T>(weight.shape), Tensor<T>({O})};
    std::vector<T> col(K * HW), col_t(HW * K), dcol(K * HW);
    for (std::size_t n = 0; n < B; ++n) {
        im2col(x.ptr() + n * C * HW, C, H, W, col.data());
        for (std::size_t k = 0; k < K; ++k) {
            for (std::size_t j = 0; j < HW; ++j) col_t[j * K + k] = col[k * HW + j];
        }
        const T* gy = grad_out.ptr() + n * O * HW;
        std::fill(dcol.begin(), dcol.end(), T(0));
        for (std::size_t o = 0; o < O; ++o) {
            const T* gyo = gy + o * HW;
            T* gw = g.weight.ptr() + o * K;
            T bsum = 0;
            for (std::size_t j = 0; j < HW; ++j) {
                bsum += gyo[j];
                axpy(K, gyo[j], col_t.data() + j * K, gw);
            }
            g.bias[o] += bsum;
            const T* wo = weight.ptr() + o * K;
            for (std::size_t k = 0; k < K; ++k) axpy(HW, wo[k], gyo, dcol.data() + k * HW);
        }
        col2im(dcol.data(), C, H, W, g.input.ptr() + n * C * HW);
    }
    return g;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
    Tensor<T> y(x.shape);
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
    return y;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& grad_out) {
    if (x.shape != grad_out.shape) throw std::invalid_argument("relu_backward: shape mismatch");
    Tensor<T> g(x.shape);
    for (std::size_t i = 0; i < x.size(); ++i) g[i] = x[i] > T(0) ? grad_out[i] : T(0);
    return g;
}

template <typename T>
Tensor<T> maxpool2x2(const Tensor<T>& x) {
    expect_rank(x.shape, 4, "maxpool2x2 input");
    const std::size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    if (H % 2 || W % 2) {
        throw std::invalid_argument("maxpool2x2 needs even spatial size, got " + std::to_string(H) + "x" +
                                    std::to_string(W));
    }
    const std::size_t OH = H / 2, OW = W / 2;
    Tensor<T> y({B, C, OH, OW});
    for (std::size_t p = 0; p < B * C; ++p) {
        const T* src = x.ptr() + p * H * W;
        T* dst = y.ptr() + p * OH * OW;
        for (std::size_t oy = 0; oy < OH; ++oy) {
            const T* r0 = src + 2 * oy * W;
            const T* r1 = r0 + W;
            for (std::size_t ox = 0; ox < OW; ++ox) {
                T m = r0[2 * ox];
                if (r0[2 * ox + 1] > m) m = r0[2 * ox + 1];
                if (r1[2 * ox] > m) m = r1[2 * ox];
                if (r1[2 * ox + 1] > m) m = r1[2 * ox + 1];
                dst[oy * OW + ox] = m;
            }
        }
    }
    return y;
}

template <typename T>
Tensor<T> maxpool2x2_backward(const Tensor<T>& x, const Tensor<T>& grad_out) {
    expect_rank(x.shape, 4, "maxpool2x2_backward input");
    const std::size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const std::size_t OH = H / 2, OW = W / 2;
    if (grad_out.shape != Shape{B, C, OH, OW}) throw std::invalid_argument("maxpool2x2_backward: shape mismatch");
    Tensor<T> g(x.shape);
    for (std::size_t p = 0; p < B * C; ++p) {
        const T* src = x.ptr() + p * H * W;
        T* dst = g.ptr() + p * H * W;
        const T* gy = grad_out.ptr() + p * OH * OW;
        for (std::size_t oy = 0; oy < OH; ++oy) {
            for (std::size_t ox = 0; ox < OW; ++ox) {
                const std::size_t cand[4] = {2 * oy * W + 2 * ox, 2 * oy * W + 2 * ox + 1, (2 * oy + 1) * W + 2 * ox,
                                             (2 * oy + 1) * W + 2 * ox + 1};
                std::size_t best = cand[0];
                for (std::size_t c : cand) {
                    if (src[c] > src[best]) best = c;
                }
                dst[best] += gy[oy * OW + ox];
            }
        }
    }
    return g;
}

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
    expect_rank(x.shape, 4, "global_avg_pool input");
    const std::size_t B = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
    Tensor<T> y({B, C});
    for (std::size_t p = 0; p < B * C; ++p) {
        const T* src = x.ptr() + p * HW;
        T s = 0;
        for (std::size_t i = 0; i < HW; ++i) s += src[i];
        y[p] = s / static_cast<T>(HW);
    }
    return y;
}

template <typename T>
Tensor<T> global_avg_pool_backward(const Shape& input_shape, const Tensor<T>& grad_out) {
    expect_rank(input_shape, 4, "global_avg_pool_backward input");
    const std::size_t B = input_shape[0], C = input_shape[1], HW = input_shape[2] * input_shape[3];
    if (grad_out.shape != Shape{B, C}) throw std::invalid_argument("global_avg_pool_backward: shape mismatch");
    Tensor<T> g(input_shape);
    for (std::size_t p = 0; p < B * C; ++p) {
        const T v = grad_out[p] / static_cast<T>(HW);
        std::fill(g.ptr() + p * HW, g.ptr() + (p + 1) * HW, v);
    }
    return g;
}

template <typename T>
Tensor<T> dense(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
    expect_rank(x.shape, 2, "dense input");
    expect_rank(weight.shape, 2, "dense weight");
    const std::size_t B = x.dim(0), I = x.dim(1), O = weight.dim(0);
    if (weight.dim(1) != I) {
        throw std::invalid_argument("dense: input has " + std::to_string(I) + " features but weight " +
                                    shape_str(weight.shape) + " expects " + std::to_string(weight.dim(1)));
    }
    if (bias.shape != Shape{O}) throw std::invalid_argument("dense: bias shape " + shape_str(bias.shape));
    Tensor<T> y({B, O});
    for (std::size_t n = 0; n < B; ++n) {
        const T* xi = x.ptr() + n * I;
        for (std::size_t o = 0; o < O; ++o) {
            const T* w = weight.ptr() + o * I;
            T s = bias[o];
            for (std::size_t i = 0; i < I; ++i) s += w[i] * xi[i];
            y[n * O + o] = s;
        }
    }
    return y;
}

template <typename T>
ParamGrads<T> dense_backward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& grad_out) {
    const std::size_t B = x.dim(0), I = x.dim(1), O = weight.dim(0);
    if (grad_out.shape != Shape{B, O}) throw std::invalid_argument("dense_backward: gradient shape mismatch");
    ParamGrads<T> g{Tensor<T>(x.shape), Tensor<T>(weight.shape), Tensor<T>({O})};
    for (std::size_t n = 0; n < B; ++n) {
        const T* xi = x.ptr() + n * I;
        T* gx = g.input.ptr() + n * I;
        for (std::size_t o = 0; o < O; ++o) {
            const T go = grad_out[n * O + o];
            g.bias[o] += go;
            axpy(I, go, xi, g.weight.ptr() + o * I);
            axpy(I, go, weight.ptr() + o * I, gx);
        }
    }
    return g;
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& logits) {
    expect_rank(logits.shape, 2, "softmax input");
    const std::size_t B = logits.dim(0), N = logits.dim(1);
    Tensor<T> p(logits.shape);
    for (std::size_t n = 0; n < B; ++n) {
        const T* z = logits.ptr() + n * N;
        T* out = p.ptr() + n * N;
        const T m = *std::max_element(z, z + N);
        T sum = 0;
        for (std::size_t k = 0; k < N; ++k) {
            out[k] = std::exp(z[k] - m);
            sum += out[k];
        }
        for (std::size_t k = 0; k < N; ++k) out[k] /= sum;
    }
    return p;
}

template <typename T>
T cross_entropy(const Tensor<T>& probabilities, const std::vector<std::size_t>& labels) {
    const std::size_t B = probabilities.dim(0), N = probabilities.dim(1);
    if (labels.size() != B) throw std::invalid_argument("cross_entropy: label count does not match batch");
    T total = 0;
    for (std::size_t n = 0; n < B; ++n) {
        if (labels[n] >= N) throw std::out_of_range("cross_entropy: label out of range");
        const T p = probabilities[n * N + labels[n]];
        total += -std::log(std::max(p, std::numeric_limits<T>::min()));
    }
    return total / static_cast<T>(B);
}

template <typename T>
Tensor<T> softmax_cross_entropy_backward(const Tensor<T>& probabilities, const std::vector<std::size_t>& labels) {
    const std::size_t B = probabilities.dim(0), N = probabilities.dim(1);
    if (labels.size() != B) throw std::invalid_argument("cross_entropy: label count does not match batch");
    Tensor<T> g = probabilities;
    for (std::size_t n = 0; n < B; ++n) g[n * N + labels.at(n)] -= T(1);
    for (auto& v : g.data) v /= static_cast<T>(B);
    return g;
}

template <typename T>
std::size_t argmax(const T* values, std::size_t n) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < n; ++i) {
        if (values[i] > values[best]) best = i;
    }
    return best;
}

#define HGR_INSTANTIATE_LAYERS(T)                                                                       \
    template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                    \
    template ParamGrads<T> conv2d_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);       \
    template Tensor<T> relu(const Tensor<T>&);                                                          \
    template Tensor<T> relu_backward(const Tensor<T>&, const Tensor<T>&);                               \
    template Tensor<T> maxpool2x2(const Tensor<T>&);                                                    \
    template Tensor<T> maxpool2x2_backward(const Tensor<T>&, const Tensor<T>&);                         \
    template Tensor<T> global_avg_pool(const Tensor<T>&);                                               \
    template Tensor<T> global_avg_pool_backward(const Shape&, const Tensor<T>&);                        \
    template Tensor<T> dense(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                     \
    template ParamGrads<T> dense_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);        \
    template Tensor<T> softmax(const Tensor<T>&);                                                       \
    template T cross_entropy(const Tensor<T>&, const std::vector<std::size_t>&);                        \
    template Tensor<T> softmax_cross_entropy_backward(const Tensor<T>&, const std::vector<std::size_t>&); \
    template std::size_t argmax(const T*, std::size_t);

HGR_INSTANTIATE_LAYERS(float)
HGR_INSTANTIATE_LAYERS(double)

#undef HGR_INSTANTIATE_LAYERS

}  // namespace hgr::nn
