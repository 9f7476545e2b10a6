#pragma once

#include <cmath>
#include <string>

#include "aide/nn/tensor.hpp"

namespace aide::nn {

struct AdamWConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

/// One decoupled-weight-decay Adam update of `param` from `param.grad`:
///   m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2
///   theta <- theta - lr (m_hat / (sqrt(v_hat) + eps) + wd theta)
/// with bias correction at t = step_count + 1.
inline void adamw_step(ParamState& param, const AdamWConfig& cfg) {
    if (!(cfg.lr > 0.0) || !(cfg.eps > 0.0) || cfg.beta1 < 0.0 || cfg.beta1 >= 1.0 || cfg.beta2 < 0.0 ||
        cfg.beta2 >= 1.0) {
        throw ArgumentError("adamw_step: hyperparameters out of range");
    }
    if (!param.grad.all_finite()) throw OptimizerError("non-finite gradient in parameter " + param.name);
    const double t = static_cast<double>(param.step_count + 1);
    const double bc1 = 1.0 - std::pow(cfg.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.beta2, t);
    auto& theta = param.value.data;
    auto& m = param.adam_m.data;
    auto& v = param.adam_v.data;
    const auto& g = param.grad.data;
    for (std::size_t i = 0; i < theta.size(); ++i) {
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
        const double m_hat = m[i] / bc1;
        const double v_hat = v[i] / bc2;
        theta[i] -= cfg.lr * (m_hat / (std::sqrt(v_hat) + cfg.eps) + cfg.weight_decay * theta[i]);
    }
    ++param.step_count;
}

}  // namespace aide::nn
