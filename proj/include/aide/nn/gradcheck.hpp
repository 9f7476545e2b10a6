#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "aide/nn/tensor.hpp"
#include "aide/rng.hpp"

namespace aide::nn {

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::size_t entries_checked = 0;
    std::string worst_param;
    std::size_t worst_index = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
    bool passed = false;
};

struct GradCheckOptions {
    double tolerance = 1e-6;
    double step = 1e-6;
    /// Relative error is |a - n| / max(|a|, |n|, floor); the floor keeps
    /// near-zero gradients from turning round-off into large ratios.
    double denominator_floor = 1e-2;
    /// 0 checks every entry; otherwise this many seeded entries per tensor.
    std::size_t max_entries_per_param = 0;
    std::uint64_t seed = 0;
};

inline double relative_error(double analytic, double numeric, double floor) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Compares analytic gradients against central differences for a scalar
/// function of the given parameters. `compute_grads` must overwrite every
/// param.grad with dF/dparam at the current values.
inline GradCheckReport grad_check(const std::vector<ParamState*>& params, const std::function<double()>& value,
                                  const std::function<void()>& compute_grads,
                                  const GradCheckOptions& opts = {}) {
    compute_grads();
    std::vector<Tensor> analytic;
    analytic.reserve(params.size());
    for (auto* p : params) analytic.push_back(p->grad);

    GradCheckReport report;
    Rng rng(opts.seed);
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto& theta = params[pi]->value.data;
        std::vector<std::size_t> entries;
        if (opts.max_entries_per_param == 0 || opts.max_entries_per_param >= theta.size()) {
            entries.resize(theta.size());
            for (std::size_t i = 0; i < theta.size(); ++i) entries[i] = i;
        } else {
            for (std::size_t s = 0; s < opts.max_entries_per_param; ++s) {
                entries.push_back(static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(theta.size()) - 1)));
            }
        }
        for (std::size_t i : entries) {
            const double orig = theta[i];
            theta[i] = orig + opts.step;
            const double plus = value();
            theta[i] = orig - opts.step;
            const double minus = value();
            theta[i] = orig;
            const double numeric = (plus - minus) / (2.0 * opts.step);
            const double a = analytic[pi].data[i];
            const double err = relative_error(a, numeric, opts.denominator_floor);
            ++report.entries_checked;
            if (err > report.max_rel_error || !std::isfinite(err)) {
                report.max_rel_error = std::isfinite(err) ? err : INFINITY;
                report.worst_param = params[pi]->name;
                report.worst_index = i;
                report.worst_analytic = a;
                report.worst_numeric = numeric;
            }
        }
    }
    report.passed = report.max_rel_error <= opts.tolerance;
    return report;
}

}  // namespace aide::nn
