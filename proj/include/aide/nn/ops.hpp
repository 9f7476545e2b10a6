#pragma once

// Forward/backward kernels for the layers used by the detector. Every backward
// takes the forward input and the upstream gradient and returns the gradient
// with respect to the input; parameter gradients are accumulated (+=).

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Core>

#include "aide/nn/tensor.hpp"

namespace aide::nn {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

struct Conv2dGeometry {
    std::size_t c_in, h, w, c_out, kh, kw, stride, pad, h_out, w_out;
};

inline Conv2dGeometry conv2d_geometry(const Tensor& input, const Tensor& weights, const Tensor& bias,
                                      std::size_t stride, std::size_t pad) {
    if (input.rank() != 3) throw ArgumentError("conv2d: input must be [C,H,W]");
    if (weights.rank() != 4) throw ArgumentError("conv2d: weights must be [Cout,Cin,kh,kw]");
    if (stride == 0) throw ArgumentError("conv2d: stride must be >= 1");
    Conv2dGeometry g{input.dim(0), input.dim(1), input.dim(2), weights.dim(0), weights.dim(2),
                     weights.dim(3), stride, pad, 0, 0};
    if (weights.dim(1) != g.c_in) throw ArgumentError("conv2d: channel mismatch between input and weights");
    expect_shape(bias, {g.c_out}, "conv2d bias");
    if (g.kh > g.h + 2 * pad || g.kw > g.w + 2 * pad) throw ArgumentError("conv2d: kernel exceeds padded input");
    g.h_out = (g.h + 2 * pad - g.kh) / stride + 1;
    g.w_out = (g.w + 2 * pad - g.kw) / stride + 1;
    return g;
}

/// Unfolds input patches into a [Cin*kh*kw, Hout*Wout] row-major matrix.
inline std::vector<double> im2col(const Tensor& input, const Conv2dGeometry& g) {
    const std::size_t cols = g.h_out * g.w_out;
    std::vector<double> out(g.c_in * g.kh * g.kw * cols, 0.0);
    for (std::size_t c = 0; c < g.c_in; ++c)
        for (std::size_t ky = 0; ky < g.kh; ++ky)
            for (std::size_t kx = 0; kx < g.kw; ++kx) {
                double* row = &out[((c * g.kh + ky) * g.kw + kx) * cols];
                for (std::size_t oy = 0; oy < g.h_out; ++oy) {
                    const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                    static_cast<std::ptrdiff_t>(g.pad);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
                    const double* src = &input.data[(c * g.h + static_cast<std::size_t>(iy)) * g.w];
                    for (std::size_t ox = 0; ox < g.w_out; ++ox) {
                        const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                                        static_cast<std::ptrdiff_t>(g.pad);
                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
                        row[oy * g.w_out + ox] = src[ix];
                    }
                }
            }
    return out;
}

inline void col2im_add(const std::vector<double>& cols_data, const Conv2dGeometry& g, Tensor& grad_input) {
    const std::size_t cols = g.h_out * g.w_out;
    for (std::size_t c = 0; c < g.c_in; ++c)
        for (std::size_t ky = 0; ky < g.kh; ++ky)
            for (std::size_t kx = 0; kx < g.kw; ++kx) {
                const double* row = &cols_data[((c * g.kh + ky) * g.kw + kx) * cols];
                for (std::size_t oy = 0; oy < g.h_out; ++oy) {
                    const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                    static_cast<std::ptrdiff_t>(g.pad);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
                    double* dst = &grad_input.data[(c * g.h + static_cast<std::size_t>(iy)) * g.w];
                    for (std::size_t ox = 0; ox < g.w_out; ++ox) {
                        const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                                        static_cast<std::ptrdiff_t>(g.pad);
                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
                        dst[ix] += row[oy * g.w_out + ox];
                    }
                }
            }
}

/// Cross-correlation with zero padding: [Cin,H,W] -> [Cout,H',W'].
inline Tensor conv2d(const Tensor& input, const Tensor& weights, const Tensor& bias, std::size_t stride,
                     std::size_t pad) {
    const auto g = conv2d_geometry(input, weights, bias, stride, pad);
    const std::size_t k = g.c_in * g.kh * g.kw;
    const std::size_t cols = g.h_out * g.w_out;
    const auto unfolded = im2col(input, g);
    Tensor out({g.c_out, g.h_out, g.w_out});
    MatMap o(out.data.data(), static_cast<Eigen::Index>(g.c_out), static_cast<Eigen::Index>(cols));
    ConstMatMap w(weights.data.data(), static_cast<Eigen::Index>(g.c_out), static_cast<Eigen::Index>(k));
    ConstMatMap x(unfolded.data(), static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(cols));
    o.noalias() = w * x;
    for (std::size_t co = 0; co < g.c_out; ++co) o.row(static_cast<Eigen::Index>(co)).array() += bias[co];
    return out;
}

inline Tensor conv2d_backward(const Tensor& input, const Tensor& weights, const Tensor& bias,
                              std::size_t stride, std::size_t pad, const Tensor& grad_out, Tensor& grad_w,
                              Tensor& grad_b) {
    const auto g = conv2d_geometry(input, weights, bias, stride, pad);
    expect_shape(grad_out, {g.c_out, g.h_out, g.w_out}, "conv2d grad_out");
    const auto k = static_cast<Eigen::Index>(g.c_in * g.kh * g.kw);
    const auto cols = static_cast<Eigen::Index>(g.h_out * g.w_out);
    const auto c_out = static_cast<Eigen::Index>(g.c_out);
    const auto unfolded = im2col(input, g);
    ConstMatMap go(grad_out.data.data(), c_out, cols);
    ConstMatMap x(unfolded.data(), k, cols);
    ConstMatMap w(weights.data.data(), c_out, k);
    MatMap gw(grad_w.data.data(), c_out, k);
    gw.noalias() += go * x.transpose();
    for (Eigen::Index co = 0; co < c_out; ++co) grad_b[static_cast<std::size_t>(co)] += go.row(co).sum();

    std::vector<double> grad_cols(static_cast<std::size_t>(k * cols));
    MatMap gc(grad_cols.data(), k, cols);
    gc.noalias() = w.transpose() * go;
    Tensor grad_in(input.shape);
    col2im_add(grad_cols, g, grad_in);
    return grad_in;
}

/// y = W x + b for x of shape [D_in].
inline Tensor linear(const Tensor& input, const Tensor& weights, const Tensor& bias) {
    if (input.rank() != 1 || weights.rank() != 2 || weights.dim(1) != input.dim(0)) {
        throw ArgumentError("linear: shape mismatch " + shape_string(weights.shape) + " x " +
                            shape_string(input.shape));
    }
    expect_shape(bias, {weights.dim(0)}, "linear bias");
    Tensor out({weights.dim(0)});
    const auto rows = static_cast<Eigen::Index>(weights.dim(0));
    const auto cols = static_cast<Eigen::Index>(weights.dim(1));
    ConstMatMap w(weights.data.data(), rows, cols);
    Eigen::Map<const Eigen::VectorXd> x(input.data.data(), cols);
    Eigen::Map<const Eigen::VectorXd> b(bias.data.data(), rows);
    Eigen::Map<Eigen::VectorXd>(out.data.data(), rows).noalias() = w * x + b;
    return out;
}

inline Tensor linear_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_out,
                              Tensor& grad_w, Tensor& grad_b) {
    const auto rows = static_cast<Eigen::Index>(weights.dim(0));
    const auto cols = static_cast<Eigen::Index>(weights.dim(1));
    expect_shape(grad_out, {weights.dim(0)}, "linear grad_out");
    Eigen::Map<const Eigen::VectorXd> go(grad_out.data.data(), rows);
    Eigen::Map<const Eigen::VectorXd> x(input.data.data(), cols);
    MatMap(grad_w.data.data(), rows, cols).noalias() += go * x.transpose();
    Eigen::Map<Eigen::VectorXd>(grad_b.data.data(), rows) += go;
    Tensor grad_in({weights.dim(1)});
    Eigen::Map<Eigen::VectorXd>(grad_in.data.data(), cols).noalias() =
        ConstMatMap(weights.data.data(), rows, cols).transpose() * go;
    return grad_in;
}

/// 1×1 projection applied at every spatial location: [C,H,W] with W [D,C] -> [D,H,W].
inline Tensor pointwise_linear(const Tensor& input, const Tensor& weights, const Tensor& bias) {
    if (input.rank() != 3 || weights.rank() != 2 || weights.dim(1) != input.dim(0)) {
        throw ArgumentError("pointwise_linear: shape mismatch");
    }
    expect_shape(bias, {weights.dim(0)}, "pointwise_linear bias");
    const auto d = static_cast<Eigen::Index>(weights.dim(0));
    const auto c = static_cast<Eigen::Index>(weights.dim(1));
    const auto hw = static_cast<Eigen::Index>(input.dim(1) * input.dim(2));
    Tensor out({weights.dim(0), input.dim(1), input.dim(2)});
    MatMap o(out.data.data(), d, hw);
    o.noalias() = ConstMatMap(weights.data.data(), d, c) * ConstMatMap(input.data.data(), c, hw);
    for (Eigen::Index r = 0; r < d; ++r) o.row(r).array() += bias[static_cast<std::size_t>(r)];
    return out;
}

inline Tensor pointwise_linear_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_out,
                                        Tensor& grad_w, Tensor& grad_b) {
    const auto d = static_cast<Eigen::Index>(weights.dim(0));
    const auto c = static_cast<Eigen::Index>(weights.dim(1));
    const auto hw = static_cast<Eigen::Index>(input.dim(1) * input.dim(2));
    ConstMatMap go(grad_out.data.data(), d, hw);
    ConstMatMap x(input.data.data(), c, hw);
    MatMap(grad_w.data.data(), d, c).noalias() += go * x.transpose();
    for (Eigen::Index r = 0; r < d; ++r) grad_b[static_cast<std::size_t>(r)] += go.row(r).sum();
    Tensor grad_in(input.shape);
    MatMap(grad_in.data.data(), c, hw).noalias() = ConstMatMap(weights.data.data(), d, c).transpose() * go;
    return grad_in;
}

enum class Activation { relu, gelu };

namespace detail {
inline constexpr double gelu_c = 0.7978845608028654;  // sqrt(2/pi)
inline constexpr double gelu_a = 0.044715;
}  // namespace detail

inline double gelu(double x) {
    return 0.5 * x * (1.0 + std::tanh(detail::gelu_c * (x + detail::gelu_a * x * x * x)));
}

inline double gelu_derivative(double x) {
    const double t = std::tanh(detail::gelu_c * (x + detail::gelu_a * x * x * x));
    return 0.5 * (1.0 + t) +
           0.5 * x * (1.0 - t * t) * detail::gelu_c * (1.0 + 3.0 * detail::gelu_a * x * x);
}

inline Tensor apply_activation(const Tensor& input, Activation kind) {
    Tensor out(input.shape);
    for (std::size_t i = 0; i < input.numel(); ++i) {
        const double x = input.data[i];
        out.data[i] = kind == Activation::relu ? (x > 0.0 ? x : 0.0) : gelu(x);
    }
    return out;
}

inline Tensor activation_backward(const Tensor& input, Activation kind, const Tensor& grad_out) {
    Tensor grad_in(input.shape);
    for (std::size_t i = 0; i < input.numel(); ++i) {
        const double x = input.data[i];
        const double d = kind == Activation::relu ? (x > 0.0 ? 1.0 : 0.0) : gelu_derivative(x);
        grad_in.data[i] = d * grad_out.data[i];
    }
    return grad_in;
}

/// Non-overlapping 2×2 mean pooling; odd trailing rows/columns are dropped.
inline Tensor avgpool2x2(const Tensor& input) {
    if (input.rank() != 3) throw ArgumentError("avgpool2x2: input must be [C,H,W]");
    const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
    const std::size_t ho = h / 2, wo = w / 2;
    if (ho == 0 || wo == 0) throw ArgumentError("avgpool2x2: input smaller than 2x2");
    Tensor out({c, ho, wo});
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < ho; ++y)
            for (std::size_t x = 0; x < wo; ++x) {
                const double* r0 = &input.data[(ch * h + 2 * y) * w + 2 * x];
                const double* r1 = r0 + w;
                out.data[(ch * ho + y) * wo + x] = 0.25 * (r0[0] + r0[1] + r1[0] + r1[1]);
            }
    return out;
}

inline Tensor avgpool2x2_backward(const Tensor& input, const Tensor& grad_out) {
    const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
    const std::size_t ho = h / 2, wo = w / 2;
    expect_shape(grad_out, {c, ho, wo}, "avgpool2x2 grad_out");
    Tensor grad_in(input.shape);
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < ho; ++y)
            for (std::size_t x = 0; x < wo; ++x) {
                const double g = 0.25 * grad_out.data[(ch * ho + y) * wo + x];
                double* r0 = &grad_in.data[(ch * h + 2 * y) * w + 2 * x];
                double* r1 = r0 + w;
                r0[0] = g;
                r0[1] = g;
                r1[0] = g;
                r1[1] = g;
            }
    return grad_in;
}

/// Per-channel spatial mean: [C,H,W] -> [C].
inline Tensor avgpool_global(const Tensor& input) {
    if (input.rank() != 3 || input.dim(1) == 0 || input.dim(2) == 0) {
        throw ArgumentError("avgpool_global: input must be [C,H,W] with H,W >= 1");
    }
    const std::size_t c = input.dim(0), hw = input.dim(1) * input.dim(2);
    Tensor out({c});
    for (std::size_t ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        for (std::size_t i = 0; i < hw; ++i) acc += input.data[ch * hw + i];
        out.data[ch] = acc / static_cast<double>(hw);
    }
    return out;
}

inline Tensor avgpool_global_backward(const Tensor& input, const Tensor& grad_out) {
    const std::size_t c = input.dim(0), hw = input.dim(1) * input.dim(2);
    expect_shape(grad_out, {c}, "avgpool_global grad_out");
    Tensor grad_in(input.shape);
    for (std::size_t ch = 0; ch < c; ++ch) {
        const double g = grad_out.data[ch] / static_cast<double>(hw);
        std::fill_n(grad_in.data.begin() + static_cast<std::ptrdiff_t>(ch * hw), hw, g);
    }
    return grad_in;
}

inline double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

struct LossAndGrad {
    double loss;
    double grad;  // dL/dz
};

/// Numerically stable binary cross-entropy on a logit; label 1 = fake.
inline LossAndGrad bce_with_logits(double logit, int label) {
    const double y = label ? 1.0 : 0.0;
    const double loss = std::max(logit, 0.0) - logit * y + std::log1p(std::exp(-std::abs(logit)));
    return {loss, sigmoid(logit) - y};
}

}  // namespace aide::nn
