#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "aide/frequency.hpp"
#include "aide/imageio.hpp"
#include "aide/model/config.hpp"
#include "aide/model/embedding.hpp"
#include "aide/nn/layers.hpp"
#include "aide/srm.hpp"

namespace aide {

/// conv3x3(3->16)/relu/pool2 -> conv3x3(16->32)/relu/pool2 -> conv3x3(32->64)/relu,
/// the trunk shared by the patch encoders and the tiny semantic encoder.
inline nn::Sequential make_conv_trunk(nn::ParamStore& store, const std::string& name, Rng& rng) {
    using namespace nn;
    Sequential s;
    s.layers.push_back(Conv2d::make(store, name + ".conv1", 3, 16, 3, 1, 1, rng));
    s.layers.push_back(ActivationLayer{Activation::relu});
    s.layers.push_back(AvgPool2x2{});
    s.layers.push_back(Conv2d::make(store, name + ".conv2", 16, 32, 3, 1, 1, rng));
    s.layers.push_back(ActivationLayer{Activation::relu});
    s.layers.push_back(AvgPool2x2{});
    s.layers.push_back(Conv2d::make(store, name + ".conv3", 32, 64, 3, 1, 1, rng));
    s.layers.push_back(ActivationLayer{Activation::relu});
    return s;
}

inline constexpr std::size_t trunk_channels = 64;

/// Patch encoder: conv trunk, global average pool, linear(64 -> D).
inline nn::Sequential make_patch_encoder(nn::ParamStore& store, const std::string& name, std::size_t dim,
                                         Rng& rng) {
    auto s = make_conv_trunk(store, name, rng);
    s.layers.push_back(nn::GlobalAvgPool{});
    s.layers.push_back(nn::Linear::make(store, name + ".head", trunk_channels, dim, rng));
    return s;
}

/// Model inputs derived from one image before any learnable layer runs.
struct PreparedInputs {
    std::optional<PatchSelection> selection;
    std::size_t patches_per_row = 0;
    std::vector<nn::Tensor> max_inputs;  // SRM residuals of the highest-grade patches
    std::vector<nn::Tensor> min_inputs;  // ... of the lowest-grade patches
    std::optional<nn::Tensor> semantic_input;
};

struct Embeddings {
    nn::Tensor f_max;
    nn::Tensor f_min;
    nn::Tensor f_s;
};

/// Everything one forward pass needs for backward.
struct ForwardTrace {
    std::vector<nn::Trace> max_traces;
    std::vector<nn::Trace> min_traces;
    nn::Trace semantic_trace;
    nn::Trace projection_trace;
    nn::Trace fusion_trace;
};

struct Diagnostics {
    PatchSelection selection;
    std::size_t patches_per_row = 0;
    std::size_t patch_n = 0;
    Embeddings embeddings;
    double logit = 0.0;
    double probability = 0.0;
};

inline nn::Tensor residual_tensor(const RgbImage& img, const SrmKernelSet& kernels) {
    auto r = srm_residual(img, kernels);
    return nn::Tensor({3, r.height, r.width}, std::move(r.values));
}

/// [3,H,W] tensor of pixels mapped to [-0.5, 0.5].
inline nn::Tensor image_tensor(const RgbImage& img) {
    nn::Tensor t({3, img.height, img.width});
    for (std::size_t y = 0; y < img.height; ++y)
        for (std::size_t x = 0; x < img.width; ++x)
            for (std::size_t c = 0; c < 3; ++c)
                t.data[(c * img.height + y) * img.width + x] = img.at(x, y, c) / 255.0 - 0.5;
    return t;
}

/// The detector: two patch encoders (f1 for highest-grade, f2 for lowest-grade
/// patches), a semantic branch (projection g, optionally over a tiny encoder),
/// and the fusion MLP linear/gelu/linear.
class AideModel {
public:
    explicit AideModel(AideConfig cfg)
        : cfg_(std::move(cfg)), bank_(cfg_.patch_n, cfg_.k_bands), srm_(cfg_.srm_kernel_set()) {
        cfg_.validate();
        Rng rng(cfg_.seed);
        f1_ = make_patch_encoder(params_, "f1", cfg_.encoder_dim, rng);
        f2_ = make_patch_encoder(params_, "f2", cfg_.encoder_dim, rng);
        if (cfg_.semantic_source == SemanticSource::tiny_encoder) {
            semantic_encoder_ = make_conv_trunk(params_, "semantic", rng);
            projection_.layers.push_back(nn::PointwiseLinear::make(params_, "g", trunk_channels, cfg_.semantic_dim, rng));
            projection_.layers.push_back(nn::GlobalAvgPool{});
        } else {
            if (cfg_.embedding_dim == 0) throw ConfigError("embedded_table mode needs embedding_dim > 0");
            projection_.layers.push_back(nn::Linear::make(params_, "g", cfg_.embedding_dim, cfg_.semantic_dim, rng));
        }
        fusion_.layers.push_back(
            nn::Linear::make(params_, "fusion.fc1", cfg_.encoder_dim + cfg_.semantic_dim, cfg_.fusion_hidden, rng));
        fusion_.layers.push_back(nn::ActivationLayer{nn::Activation::gelu});
        fusion_.layers.push_back(nn::Linear::make(params_, "fusion.fc2", cfg_.fusion_hidden, 1, rng));
    }

    const AideConfig& config() const { return cfg_; }
    nn::ParamStore& params() { return params_; }
    const nn::ParamStore& params() const { return params_; }
    const BandFilterBank& filter_bank() const { return bank_; }
    const SrmKernelSet& srm_kernels() const { return srm_; }
    const nn::Sequential& f1() const { return f1_; }
    const nn::Sequential& f2() const { return f2_; }
    const nn::Sequential& fusion() const { return fusion_; }
    const std::optional<nn::Sequential>& semantic_encoder() const { return semantic_encoder_; }
    const nn::Sequential& projection() const { return projection_; }

    /// Patch grading, selection, resize and SRM for the enabled branches, plus
    /// the resized semantic input in tiny-encoder mode.
    PreparedInputs prepare(const RgbImage& img, Ablation ablation) const {
        PreparedInputs in;
        const bool need_max = uses_max_branch(ablation);
        const bool need_min = uses_min_branch(ablation);
        if (need_max || need_min) {
            const auto patches = patchify(img, cfg_.patch_n);
            in.patches_per_row = img.width / cfg_.patch_n;
            in.selection = select_extreme_patches(patches, bank_, cfg_.k_select);
            auto encode = [&](std::size_t idx) {
                const auto resized = resize_image(patches[idx].pixels, cfg_.patch_resize, cfg_.patch_resize,
                                                  ResizeMethod::bilinear);
                return residual_tensor(resized, srm_);
            };
            if (need_max)
                for (auto idx : in.selection->max_indices) in.max_inputs.push_back(encode(idx));
            if (need_min)
                for (auto idx : in.selection->min_indices) in.min_inputs.push_back(encode(idx));
        }
        if (uses_semantic_branch(ablation) && cfg_.semantic_source == SemanticSource::tiny_encoder) {
            in.semantic_input = image_tensor(
                resize_image(img, cfg_.semantic_input_size, cfg_.semantic_input_size, ResizeMethod::bilinear));
        }
        return in;
    }

    /// Mean over patches of the per-patch encoder output.
    nn::Tensor encode_patches(const nn::Sequential& encoder, const std::vector<nn::Tensor>& inputs,
                              std::vector<nn::Trace>* traces) const {
        nn::Tensor sum({cfg_.encoder_dim});
        if (traces) traces->assign(inputs.size(), {});
        for (std::size_t i = 0; i < inputs.size(); ++i) {
            add_into(sum, encoder.forward(params_, inputs[i], traces ? &(*traces)[i] : nullptr));
        }
        for (auto& v : sum.data) v /= static_cast<double>(inputs.size());
        return sum;
    }

    /// F_s: g over a table vector, or g applied per location to the tiny-encoder map then averaged.
    nn::Tensor encode_semantic(const PreparedInputs& in, const std::string& id, const EmbeddingTable* table,
                               ForwardTrace* trace) const {
        if (cfg_.semantic_source == SemanticSource::embedded_table) {
            if (table == nullptr) throw ConfigError("embedded_table mode requires an embedding table");
            if (table->dim() != cfg_.embedding_dim) {
                throw ConfigError("embedding table dimension " + std::to_string(table->dim()) +
                                  " does not match g input dimension " + std::to_string(cfg_.embedding_dim));
            }
            const auto& vec = table->at(id);
            nn::Tensor v({vec.size()});
            for (std::size_t i = 0; i < vec.size(); ++i) v.data[i] = vec[i];
            return projection_.forward(params_, v, trace ? &trace->projection_trace : nullptr);
        }
        if (!in.semantic_input) throw ArgumentError("semantic input was not prepared");
        const auto feature_map =
            semantic_encoder_->forward(params_, *in.semantic_input, trace ? &trace->semantic_trace : nullptr);
        return projection_.forward(params_, feature_map, trace ? &trace->projection_trace : nullptr);
    }

    Embeddings embed(const PreparedInputs& in, const std::string& id, const EmbeddingTable* table,
                     Ablation ablation, ForwardTrace* trace) const {
        Embeddings e{nn::Tensor({cfg_.encoder_dim}), nn::Tensor({cfg_.encoder_dim}), nn::Tensor({cfg_.semantic_dim})};
        if (uses_max_branch(ablation)) e.f_max = encode_patches(f1_, in.max_inputs, trace ? &trace->max_traces : nullptr);
        if (uses_min_branch(ablation)) e.f_min = encode_patches(f2_, in.min_inputs, trace ? &trace->min_traces : nullptr);
        if (uses_semantic_branch(ablation)) e.f_s = encode_semantic(in, id, table, trace);
        return e;
    }

    /// Builds concat(F_mean, F_s) under the ablation mask.
    nn::Tensor fusion_input(const Embeddings& e, Ablation ablation) const {
        const std::size_t d = cfg_.encoder_dim;
        if (e.f_max.numel() != d || e.f_min.numel() != d || e.f_s.numel() != cfg_.semantic_dim) {
            throw ArgumentError("fuse_and_score: embedding dimension mismatch");
        }
        nn::Tensor x({d + cfg_.semantic_dim});
        const bool hi = uses_max_branch(ablation);
        const bool lo = uses_min_branch(ablation);
        for (std::size_t i = 0; i < d; ++i) {
            if (hi && lo) x.data[i] = 0.5 * (e.f_max.data[i] + e.f_min.data[i]);
            else if (hi) x.data[i] = e.f_max.data[i];
            else if (lo) x.data[i] = e.f_min.data[i];
        }
        if (uses_semantic_branch(ablation)) std::copy(e.f_s.data.begin(), e.f_s.data.end(), x.data.begin() + d);
        return x;
    }

    double fuse_and_score(const Embeddings& e, Ablation ablation, ForwardTrace* trace = nullptr) const {
        return fusion_.forward(params_, fusion_input(e, ablation), trace ? &trace->fusion_trace : nullptr)[0];
    }

    double logit(const RgbImage& img, const std::string& id, const EmbeddingTable* table, Ablation ablation,
                 ForwardTrace* trace = nullptr) const {
        const auto in = prepare(img, ablation);
        return fuse_and_score(embed(in, id, table, ablation, trace), ablation, trace);
    }

    /// Sigmoid of the fused logit plus the intermediate quantities that produced it.
    Diagnostics forward(const RgbImage& img, const std::string& id, const EmbeddingTable* table) const {
        const auto in = prepare(img, cfg_.ablation);
        Diagnostics d;
        if (in.selection) d.selection = *in.selection;
        d.patches_per_row = in.patches_per_row;
        d.patch_n = cfg_.patch_n;
        d.embeddings = embed(in, id, table, cfg_.ablation, nullptr);
        d.logit = fuse_and_score(d.embeddings, cfg_.ablation);
        d.probability = nn::sigmoid(d.logit);
        return d;
    }

    double probability(const RgbImage& img, const std::string& id, const EmbeddingTable* table) const {
        return nn::sigmoid(logit(img, id, table, cfg_.ablation));
    }

    /// Accumulates d(logit)/d(param) * grad_logit into `grads` for a trace from `logit`.
    void backward(const ForwardTrace& trace, Ablation ablation, double grad_logit, nn::Grads& grads) const {
        const std::size_t d = cfg_.encoder_dim;
        const auto g_fused = fusion_.backward(params_, trace.fusion_trace, nn::Tensor({1}, {grad_logit}), grads);
        const bool hi = uses_max_branch(ablation);
        const bool lo = uses_min_branch(ablation);
        const double branch_scale = hi && lo ? 0.5 : 1.0;
        auto patch_backward = [&](const nn::Sequential& enc, const std::vector<nn::Trace>& traces) {
            nn::Tensor g_embed({d});
            const double scale = branch_scale / static_cast<double>(traces.size());
            for (std::size_t i = 0; i < d; ++i) g_embed.data[i] = g_fused.data[i] * scale;
            for (const auto& t : traces) enc.backward(params_, t, g_embed, grads);
        };
        if (hi) patch_backward(f1_, trace.max_traces);
        if (lo) patch_backward(f2_, trace.min_traces);
        if (uses_semantic_branch(ablation)) {
            nn::Tensor g_s({cfg_.semantic_dim});
            std::copy(g_fused.data.begin() + static_cast<std::ptrdiff_t>(d), g_fused.data.end(), g_s.data.begin());
            const auto g_map = projection_.backward(params_, trace.projection_trace, g_s, grads);
            if (semantic_encoder_) semantic_encoder_->backward(params_, trace.semantic_trace, g_map, grads);
        }
    }

private:
    AideConfig cfg_;
    BandFilterBank bank_;
    SrmKernelSet srm_;
    nn::ParamStore params_;
    nn::Sequential f1_;
    nn::Sequential f2_;
    std::optional<nn::Sequential> semantic_encoder_;
    nn::Sequential projection_;
    nn::Sequential fusion_;
};

}  // namespace aide
