#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "aide/error.hpp"

namespace aide::nn {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "," : "") + std::to_string(shape[i]);
    return s + "]";
}

/// Row-major n-dimensional array of doubles.
struct Tensor {
    Shape shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(Shape s, double fill = 0.0) : shape(std::move(s)), data(shape_numel(shape), fill) {}
    Tensor(Shape s, std::vector<double> values) : shape(std::move(s)), data(std::move(values)) {
        if (data.size() != shape_numel(shape)) {
            throw ArgumentError("tensor data length does not match shape " + shape_string(shape));
        }
    }

    std::size_t numel() const { return data.size(); }
    std::size_t dim(std::size_t i) const { return shape.at(i); }
    std::size_t rank() const { return shape.size(); }

    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }

    bool operator==(const Tensor&) const = default;
};

inline Tensor zeros_like(const Tensor& t) { return Tensor(t.shape); }

inline void expect_shape(const Tensor& t, const Shape& shape, const char* what) {
    if (t.shape != shape) {
        throw ArgumentError(std::string(what) + ": expected shape " + shape_string(shape) + ", got " +
                            shape_string(t.shape));
    }
}

inline void add_into(Tensor& dst, const Tensor& src) {
    if (dst.shape != src.shape) throw ArgumentError("add_into: shape mismatch");
    for (std::size_t i = 0; i < dst.numel(); ++i) dst.data[i] += src.data[i];
}

/// A learnable tensor with its gradient and AdamW moments.
struct ParamState {
    std::string name;
    Tensor value;
    Tensor grad;
    Tensor adam_m;
    Tensor adam_v;
    std::uint64_t step_count = 0;

    ParamState() = default;
    ParamState(std::string n, Tensor v)
        : name(std::move(n)), value(std::move(v)), grad(zeros_like(value)), adam_m(zeros_like(value)),
          adam_v(zeros_like(value)) {}
};

/// Ordered parameter collection; layers refer to entries by index.
class ParamStore {
public:
    std::size_t add(std::string name, Tensor value) {
        for (const auto& p : params_)
            if (p.name == name) throw ArgumentError("duplicate parameter name " + name);
        params_.emplace_back(std::move(name), std::move(value));
        return params_.size() - 1;
    }

    std::size_t size() const { return params_.size(); }
    ParamState& operator[](std::size_t i) { return params_[i]; }
    const ParamState& operator[](std::size_t i) const { return params_[i]; }
    const Tensor& value(std::size_t i) const { return params_[i].value; }

    std::vector<ParamState>& all() { return params_; }
    const std::vector<ParamState>& all() const { return params_; }

    std::size_t index_of(const std::string& name) const {
        for (std::size_t i = 0; i < params_.size(); ++i)
            if (params_[i].name == name) return i;
        throw ArgumentError("no parameter named " + name);
    }

    std::size_t total_numel() const {
        std::size_t n = 0;
        for (const auto& p : params_) n += p.value.numel();
        return n;
    }

    void zero_grad() {
        for (auto& p : params_) p.grad.fill(0.0);
    }

private:
    std::vector<ParamState> params_;
};

/// Gradient buffers aligned with a ParamStore.
struct Grads {
    std::vector<Tensor> g;

    Grads() = default;
    explicit Grads(const ParamStore& store) {
        g.reserve(store.size());
        for (const auto& p : store.all()) g.push_back(zeros_like(p.value));
    }

    Tensor& operator[](std::size_t i) { return g[i]; }
    const Tensor& operator[](std::size_t i) const { return g[i]; }

    void zero() {
        for (auto& t : g) t.fill(0.0);
    }
};

}  // namespace aide::nn
