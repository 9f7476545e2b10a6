#pragma once

#include <cmath>
#include <string>
#include <variant>
#include <vector>

#include "aide/nn/ops.hpp"
#include "aide/rng.hpp"

namespace aide::nn {

/// Kaiming-uniform (ReLU gain): U(-sqrt(6/fan_in), sqrt(6/fan_in)).
inline Tensor kaiming_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
    Tensor t(std::move(shape));
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (auto& v : t.data) v = rng.uniform(-bound, bound);
    return t;
}

struct Conv2d {
    std::size_t weight, bias;
    std::size_t stride = 1;
    std::size_t pad = 0;

    static Conv2d make(ParamStore& store, const std::string& name, std::size_t c_in, std::size_t c_out,
                       std::size_t k, std::size_t stride, std::size_t pad, Rng& rng) {
        const auto w = store.add(name + ".weight", kaiming_uniform({c_out, c_in, k, k}, c_in * k * k, rng));
        const auto b = store.add(name + ".bias", Tensor({c_out}));
        return {w, b, stride, pad};
    }

    Tensor forward(const ParamStore& p, const Tensor& x) const {
        return conv2d(x, p.value(weight), p.value(bias), stride, pad);
    }
    Tensor backward(const ParamStore& p, const Tensor& x, const Tensor& gy, Grads& g) const {
        return conv2d_backward(x, p.value(weight), p.value(bias), stride, pad, gy, g[weight], g[bias]);
    }
};

struct Linear {
    std::size_t weight, bias;

    static Linear make(ParamStore& store, const std::string& name, std::size_t d_in, std::size_t d_out,
                       Rng& rng) {
        const auto w = store.add(name + ".weight", kaiming_uniform({d_out, d_in}, d_in, rng));
        const auto b = store.add(name + ".bias", Tensor({d_out}));
        return {w, b};
    }

    Tensor forward(const ParamStore& p, const Tensor& x) const {
        return linear(x, p.value(weight), p.value(bias));
    }
    Tensor backward(const ParamStore& p, const Tensor& x, const Tensor& gy, Grads& g) const {
        return linear_backward(x, p.value(weight), gy, g[weight], g[bias]);
    }
};

/// Linear map applied independently at every spatial location of a [C,H,W] map.
struct PointwiseLinear {
    std::size_t weight, bias;

    static PointwiseLinear make(ParamStore& store, const std::string& name, std::size_t d_in,
                                std::size_t d_out, Rng& rng) {
        const auto w = store.add(name + ".weight", kaiming_uniform({d_out, d_in}, d_in, rng));
        const auto b = store.add(name + ".bias", Tensor({d_out}));
        return {w, b};
    }

    Tensor forward(const ParamStore& p, const Tensor& x) const {
        return pointwise_linear(x, p.value(weight), p.value(bias));
    }
    Tensor backward(const ParamStore& p, const Tensor& x, const Tensor& gy, Grads& g) const {
        return pointwise_linear_backward(x, p.value(weight), gy, g[weight], g[bias]);
    }
};

struct ActivationLayer {
    Activation kind;

    Tensor forward(const ParamStore&, const Tensor& x) const { return apply_activation(x, kind); }
    Tensor backward(const ParamStore&, const Tensor& x, const Tensor& gy, Grads&) const {
        return activation_backward(x, kind, gy);
    }
};

struct AvgPool2x2 {
    Tensor forward(const ParamStore&, const Tensor& x) const { return avgpool2x2(x); }
    Tensor backward(const ParamStore&, const Tensor& x, const Tensor& gy, Grads&) const {
        return avgpool2x2_backward(x, gy);
    }
};

struct GlobalAvgPool {
    Tensor forward(const ParamStore&, const Tensor& x) const { return avgpool_global(x); }
    Tensor backward(const ParamStore&, const Tensor& x, const Tensor& gy, Grads&) const {
        return avgpool_global_backward(x, gy);
    }
};

using Layer = std::variant<Conv2d, Linear, PointwiseLinear, ActivationLayer, AvgPool2x2, GlobalAvgPool>;

/// Activations recorded by a forward pass: trace[i] is the input of layer i,
/// trace.back() the output.
using Trace = std::vector<Tensor>;

struct Sequential {
    std::vector<Layer> layers;

    Tensor forward(const ParamStore& p, const Tensor& x, Trace* trace = nullptr) const {
        if (trace) {
            trace->clear();
            trace->reserve(layers.size() + 1);
            trace->push_back(x);
            for (const auto& layer : layers) {
                trace->push_back(std::visit([&](const auto& l) { return l.forward(p, trace->back()); }, layer));
            }
            return trace->back();
        }
        Tensor cur = x;
        for (const auto& layer : layers) cur = std::visit([&](const auto& l) { return l.forward(p, cur); }, layer);
        return cur;
    }

    /// Accumulates parameter gradients into `g` and returns dL/dx.
    Tensor backward(const ParamStore& p, const Trace& trace, const Tensor& grad_out, Grads& g) const {
        if (trace.size() != layers.size() + 1) throw ArgumentError("Sequential::backward: stale trace");
        Tensor grad = grad_out;
        for (std::size_t i = layers.size(); i-- > 0;) {
            grad = std::visit([&](const auto& l) { return l.backward(p, trace[i], grad, g); }, layers[i]);
        }
        return grad;
    }
};

}  // namespace aide::nn
