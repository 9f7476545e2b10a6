#pragma once

#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "aide/data.hpp"
#include "aide/model/checkpoint.hpp"
#include "aide/nn/adamw.hpp"
#include "aide/parallel.hpp"
#include "aide/perturb.hpp"

namespace aide {

/// A decoded image with its manifest metadata.
struct LabeledImage {
    std::string id;
    std::string source;
    Label label = Label::real;
    RgbImage image;
};

inline std::vector<LabeledImage> load_images(const std::vector<ManifestRecord>& records,
                                             const std::filesystem::path& base_dir = {},
                                             std::size_t threads = default_thread_count()) {
    std::vector<LabeledImage> out(records.size());
    parallel_for(records.size(), threads, [&](std::size_t i) {
        const auto& r = records[i];
        out[i] = {r.id, r.source, r.label, read_image(resolve_record_path(r, base_dir))};
    });
    return out;
}

struct TrainOptions {
    std::size_t threads = default_thread_count();
    std::function<void(std::size_t epoch, double mean_loss)> on_epoch;
};

namespace detail {
inline constexpr std::uint64_t shuffle_stream = 0x5348554646ULL;
inline constexpr std::uint64_t augment_stream = 0x4155474dULL;

inline AideConfig bind_table(AideConfig cfg, const EmbeddingTable* table) {
    if (cfg.semantic_source != SemanticSource::embedded_table) return cfg;
    if (table == nullptr) throw ConfigError("embedded_table mode requires an embedding table");
    if (cfg.embedding_dim == 0) cfg.embedding_dim = table->dim();
    if (cfg.embedding_dim != table->dim()) {
        throw ConfigError("embedding_dim " + std::to_string(cfg.embedding_dim) + " != table dimension " +
                          std::to_string(table->dim()));
    }
    return cfg;
}

inline bool same_except_epochs(AideConfig a, AideConfig b) {
    a.epochs = b.epochs = 0;
    return to_json(a) == to_json(b);
}
}  // namespace detail

/// Minimizes BCE (fake = 1) with AdamW over shuffled mini-batches. Shuffle and
/// augmentation streams are derived from (seed, epoch[, example]) so a run
/// resumed from a checkpoint continues exactly as an uninterrupted one.
inline Checkpoint train_model(const std::vector<LabeledImage>& train, AideConfig cfg, const EmbeddingTable* table,
                              const Checkpoint* resume = nullptr, const TrainOptions& opts = {}) {
    cfg = detail::bind_table(cfg, table);
    cfg.validate();
    if (train.empty()) throw TrainingError("training split is empty");
    const bool has_real = std::any_of(train.begin(), train.end(), [](auto& e) { return e.label == Label::real; });
    const bool has_fake = std::any_of(train.begin(), train.end(), [](auto& e) { return e.label == Label::fake; });
    if (!has_real || !has_fake) throw TrainingError("training split must contain both real and fake images");

    std::size_t start_epoch = 0;
    std::vector<double> epoch_losses;
    AideModel model = [&] {
        if (!resume) return AideModel(cfg);
        if (!detail::same_except_epochs(resume->config, cfg)) {
            throw TrainingError("checkpoint configuration differs from the requested configuration");
        }
        Checkpoint rebased = *resume;
        rebased.config = cfg;
        start_epoch = resume->epochs_completed;
        epoch_losses = resume->epoch_losses;
        return restore_model(rebased);
    }();

    const nn::AdamWConfig adam{cfg.lr, cfg.beta1, cfg.beta2, cfg.eps, cfg.weight_decay};
    auto& params = model.params();
    std::vector<nn::Grads> slots(std::min(cfg.batch_size, train.size()), nn::Grads(params));
    std::vector<double> losses(slots.size());
    std::size_t batch_counter = 0;

    for (std::size_t epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
        std::vector<std::size_t> order(train.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng::derive({cfg.seed, epoch, detail::shuffle_stream}).shuffle(order.begin(), order.end());

        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_counter) {
            const std::size_t count = std::min(cfg.batch_size, order.size() - start);
            parallel_for(count, opts.threads, [&](std::size_t i) {
                const std::size_t idx = order[start + i];
                const auto& ex = train[idx];
                Rng rng = Rng::derive({cfg.seed, epoch, idx, detail::augment_stream});
                const auto img = random_augment(ex.image, rng, cfg.augment_prob);
                ForwardTrace trace;
                const double z = model.logit(img, ex.id, table, cfg.ablation, &trace);
                const auto lg = nn::bce_with_logits(z, static_cast<int>(ex.label));
                slots[i].zero();
                model.backward(trace, cfg.ablation, lg.grad, slots[i]);
                losses[i] = lg.loss;
            });
            double batch_loss = 0.0;
            for (std::size_t i = 0; i < count; ++i) batch_loss += losses[i];
            if (!std::isfinite(batch_loss)) {
                throw OptimizerError("non-finite loss in batch " + std::to_string(batch_counter) + " (epoch " +
                                     std::to_string(epoch) + ")");
            }
            epoch_loss += batch_loss;
            const double inv = 1.0 / static_cast<double>(count);
            for (std::size_t p = 0; p < params.size(); ++p) {
                auto& g = params[p].grad.data;
                std::fill(g.begin(), g.end(), 0.0);
                for (std::size_t i = 0; i < count; ++i) {
                    const auto& s = slots[i][p].data;
                    for (std::size_t k = 0; k < g.size(); ++k) g[k] += s[k];
                }
                for (auto& v : g) v *= inv;
                nn::adamw_step(params[p], adam);
            }
        }
        epoch_losses.push_back(epoch_loss / static_cast<double>(train.size()));
        if (opts.on_epoch) opts.on_epoch(epoch, epoch_losses.back());
    }
    return snapshot(model, cfg.epochs, std::move(epoch_losses));
}

inline Checkpoint train_model(const DatasetManifest& manifest, const AideConfig& cfg, const EmbeddingTable* table,
                              const std::filesystem::path& base_dir = {}, const Checkpoint* resume = nullptr,
                              const TrainOptions& opts = {}) {
    return train_model(load_images(manifest.split(Split::train), base_dir, opts.threads), cfg, table, resume, opts);
}

}  // namespace aide
