#pragma once

// Finite-difference verification of every layer's backward pass and of the
// full detector logit, shared by the `gradcheck` command and the tests.

#include <functional>
#include <string>
#include <vector>

#include "aide/model/aide_model.hpp"
#include "aide/nn/gradcheck.hpp"

namespace aide {

struct NamedGradCheck {
    std::string name;
    nn::GradCheckReport report;
};

namespace detail {

inline nn::Tensor random_tensor(nn::Shape shape, Rng& rng, double scale = 1.0) {
    nn::Tensor t(std::move(shape));
    for (auto& v : t.data) v = rng.normal(0.0, scale);
    return t;
}

/// Checks one layer inside the scalar objective sum(r ⊙ layer(x)), over its
/// parameters and its input.
inline nn::GradCheckReport check_layer(const nn::Layer& layer, nn::ParamStore& store, const nn::Shape& in_shape,
                                       Rng& rng, const nn::GradCheckOptions& opts, bool corrupt = false) {
    nn::ParamState input("input", random_tensor(in_shape, rng));
    const auto probe_out = std::visit([&](const auto& l) { return l.forward(store, input.value); }, layer);
    const auto weights = random_tensor(probe_out.shape, rng);

    auto value = [&] {
        const auto y = std::visit([&](const auto& l) { return l.forward(store, input.value); }, layer);
        double s = 0.0;
        for (std::size_t i = 0; i < y.numel(); ++i) s += weights.data[i] * y.data[i];
        return s;
    };
    auto grads = [&] {
        nn::Grads g(store);
        input.grad = std::visit([&](const auto& l) { return l.backward(store, input.value, weights, g); }, layer);
        for (std::size_t i = 0; i < store.size(); ++i) store[i].grad = g[i];
        if (corrupt) {
            for (auto& v : input.grad.data) v = -v;
            for (std::size_t i = 0; i < store.size(); ++i)
                for (auto& v : store[i].grad.data) v = -v;
        }
    };
    std::vector<nn::ParamState*> params{&input};
    for (std::size_t i = 0; i < store.size(); ++i) params.push_back(&store[i]);
    return nn::grad_check(params, value, grads, opts);
}

}  // namespace detail

/// End-to-end check of d(logit)/d(param) for a compact detector fed random
/// patch and image tensors.
inline nn::GradCheckReport check_model_logit(Ablation ablation, std::uint64_t seed,
                                             const nn::GradCheckOptions& opts) {
    AideConfig cfg;
    cfg.encoder_dim = 6;
    cfg.semantic_dim = 5;
    cfg.fusion_hidden = 7;
    cfg.k_select = 2;
    cfg.patch_resize = 8;
    cfg.semantic_input_size = 8;
    cfg.seed = seed;
    cfg.ablation = ablation;
    AideModel model(cfg);
    Rng rng(seed ^ 0xfeed);
    PreparedInputs in;
    for (std::size_t i = 0; i < cfg.k_select; ++i) {
        in.max_inputs.push_back(detail::random_tensor({3, 8, 8}, rng));
        in.min_inputs.push_back(detail::random_tensor({3, 8, 8}, rng));
    }
    in.semantic_input = detail::random_tensor({3, 8, 8}, rng);

    auto& store = model.params();
    auto value = [&] { return model.fuse_and_score(model.embed(in, "", nullptr, ablation, nullptr), ablation); };
    auto grads = [&] {
        ForwardTrace trace;
        model.fuse_and_score(model.embed(in, "", nullptr, ablation, &trace), ablation, &trace);
        nn::Grads g(store);
        model.backward(trace, ablation, 1.0, g);
        for (std::size_t i = 0; i < store.size(); ++i) store[i].grad = g[i];
    };
    std::vector<nn::ParamState*> params;
    for (auto& p : store.all()) params.push_back(&p);
    return nn::grad_check(params, value, grads, opts);
}

/// Every layer type plus the full model; the last entry is a sign-flipped
/// negative control that is expected to fail.
inline std::vector<NamedGradCheck> run_gradient_suite(std::uint64_t seed = 1, double tolerance = 1e-6) {
    using namespace nn;
    GradCheckOptions opts;
    opts.tolerance = tolerance;
    opts.seed = seed;
    std::vector<NamedGradCheck> out;
    Rng rng(seed);

    auto layer_case = [&](const std::string& name, auto make_layer, const Shape& in_shape, bool corrupt = false) {
        ParamStore store;
        const Layer layer = make_layer(store);
        out.push_back({name, aide::detail::check_layer(layer, store, in_shape, rng, opts, corrupt)});
    };
    layer_case("conv2d 3x3 pad1", [&](ParamStore& s) -> Layer { return Conv2d::make(s, "c", 3, 4, 3, 1, 1, rng); },
               {3, 6, 5});
    layer_case("conv2d 3x3 stride2", [&](ParamStore& s) -> Layer { return Conv2d::make(s, "c", 2, 3, 3, 2, 0, rng); },
               {2, 7, 7});
    layer_case("linear", [&](ParamStore& s) -> Layer { return Linear::make(s, "l", 7, 4, rng); }, {7});
    layer_case("pointwise linear",
               [&](ParamStore& s) -> Layer { return PointwiseLinear::make(s, "g", 4, 3, rng); }, {4, 3, 5});
    layer_case("relu", [](ParamStore&) -> Layer { return ActivationLayer{Activation::relu}; }, {3, 4, 4});
    layer_case("gelu", [](ParamStore&) -> Layer { return ActivationLayer{Activation::gelu}; }, {11});
    layer_case("avgpool2x2", [](ParamStore&) -> Layer { return AvgPool2x2{}; }, {2, 5, 6});
    layer_case("avgpool_global", [](ParamStore&) -> Layer { return GlobalAvgPool{}; }, {3, 4, 5});

    {
        ParamState z("logit", Tensor({5}));
        for (auto& v : z.value.data) v = rng.normal(0.0, 2.0);
        const int labels[5] = {1, 0, 1, 0, 1};
        auto value = [&] {
            double s = 0.0;
            for (std::size_t i = 0; i < 5; ++i) s += bce_with_logits(z.value[i], labels[i]).loss;
            return s;
        };
        auto grads = [&] {
            for (std::size_t i = 0; i < 5; ++i) z.grad[i] = bce_with_logits(z.value[i], labels[i]).grad;
        };
        out.push_back({"bce_with_logits", grad_check({&z}, value, grads, opts)});
    }

    GradCheckOptions model_opts = opts;
    model_opts.max_entries_per_param = 24;
    out.push_back({"detector logit (full)", check_model_logit(Ablation::full, seed, model_opts)});
    out.push_back({"detector logit (pfe_h_only)", check_model_logit(Ablation::pfe_h_only, seed + 1, model_opts)});

    layer_case("negative control: sign-flipped conv2d backward",
               [&](ParamStore& s) -> Layer { return Conv2d::make(s, "c", 2, 2, 3, 1, 1, rng); }, {2, 4, 4}, true);
    return out;
}

}  // namespace aide
