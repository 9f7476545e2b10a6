#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "aide/model/train.hpp"

namespace aide {

struct ScoredExample {
    std::string id;
    Label label = Label::real;
    double probability = 0.0;
    std::string source;
};

/// Percentages. Per-class values are absent when that class has no examples.
struct AccuracyMetrics {
    double overall = 0.0;
    std::optional<double> fake_acc;
    std::optional<double> real_acc;
};

inline AccuracyMetrics accuracy_metrics(std::span<const ScoredExample> scored, double threshold = 0.5) {
    if (scored.empty()) throw ArgumentError("accuracy_metrics: no examples");
    std::size_t correct = 0, fake_n = 0, fake_ok = 0, real_n = 0, real_ok = 0;
    for (const auto& s : scored) {
        const bool predicted_fake = s.probability >= threshold;
        const bool is_fake = s.label == Label::fake;
        const bool ok = predicted_fake == is_fake;
        correct += ok;
        (is_fake ? fake_n : real_n) += 1;
        (is_fake ? fake_ok : real_ok) += ok;
    }
    AccuracyMetrics m;
    m.overall = 100.0 * static_cast<double>(correct) / static_cast<double>(scored.size());
    if (fake_n) m.fake_acc = 100.0 * static_cast<double>(fake_ok) / static_cast<double>(fake_n);
    if (real_n) m.real_acc = 100.0 * static_cast<double>(real_ok) / static_cast<double>(real_n);
    return m;
}

/// Mean of precision@r over the ranks r of the positives (fake), ranking by
/// probability descending with ties broken by ascending id.
inline double average_precision(std::span<const ScoredExample> scored) {
    std::vector<const ScoredExample*> ranked;
    ranked.reserve(scored.size());
    for (const auto& s : scored) ranked.push_back(&s);
    std::sort(ranked.begin(), ranked.end(), [](const ScoredExample* a, const ScoredExample* b) {
        if (a->probability != b->probability) return a->probability > b->probability;
        return a->id < b->id;
    });
    std::size_t positives = 0;
    double sum = 0.0;
    for (std::size_t r = 0; r < ranked.size(); ++r) {
        if (ranked[r]->label != Label::fake) continue;
        ++positives;
        sum += static_cast<double>(positives) / static_cast<double>(r + 1);
    }
    if (positives == 0) throw UndefinedMetricError("average precision is undefined without positive examples");
    return sum / static_cast<double>(positives);
}

struct SourceMetrics {
    double acc = 0.0;
    std::optional<double> ap;
    std::size_t n = 0;
};

struct RobustnessEntry {
    PerturbationSpec spec;
    double acc = 0.0;
};

struct AblationEntry {
    std::string label;  // variant name, or "patch_n=.. k_select=.." for the hyperparameter grid
    double acc = 0.0;
};

struct EvalReport {
    double overall_acc = 0.0;
    std::optional<double> fake_acc;
    std::optional<double> real_acc;
    std::optional<double> ap;
    std::map<std::string, SourceMetrics> per_source;
    std::size_t evaluated = 0;
    std::vector<std::string> skipped_ids;
    std::optional<double> robustness_baseline;
    std::vector<RobustnessEntry> robustness;
    std::vector<AblationEntry> ablation;
    nlohmann::json config;
    std::string timestamp;  // filled by callers that want one; kept out of equality-sensitive paths

    std::optional<double> robustness_acc(const PerturbationSpec& spec) const {
        for (const auto& e : robustness)
            if (e.spec == spec) return e.acc;
        return std::nullopt;
    }
    std::optional<double> ablation_acc(const std::string& label) const {
        for (const auto& e : ablation)
            if (e.label == label) return e.acc;
        return std::nullopt;
    }
};

inline std::optional<double> try_average_precision(std::span<const ScoredExample> scored) {
    try {
        return average_precision(scored);
    } catch (const UndefinedMetricError&) {
        return std::nullopt;
    }
}

inline EvalReport summarize(const std::vector<ScoredExample>& scored) {
    EvalReport report;
    report.evaluated = scored.size();
    if (scored.empty()) return report;
    const auto acc = accuracy_metrics(scored);
    report.overall_acc = acc.overall;
    report.fake_acc = acc.fake_acc;
    report.real_acc = acc.real_acc;
    report.ap = try_average_precision(scored);
    std::map<std::string, std::vector<ScoredExample>> by_source;
    for (const auto& s : scored) by_source[s.source].push_back(s);
    for (const auto& [source, group] : by_source) {
        report.per_source[source] = {accuracy_metrics(group).overall, try_average_precision(group), group.size()};
    }
    return report;
}

/// Scores every image (never augmented) after applying `perturbation`. Images
/// whose id is missing from the embedding table are skipped and listed.
inline std::vector<ScoredExample> score_images(const AideModel& model, const std::vector<LabeledImage>& images,
                                               const EmbeddingTable* table,
                                               const PerturbationSpec& perturbation = PerturbationSpec::identity(),
                                               std::vector<std::string>* skipped = nullptr,
                                               std::size_t threads = default_thread_count()) {
    std::vector<std::optional<ScoredExample>> slots(images.size());
    const bool needs_table = model.config().semantic_source == SemanticSource::embedded_table &&
                             uses_semantic_branch(model.config().ablation);
    parallel_for(images.size(), threads, [&](std::size_t i) {
        const auto& ex = images[i];
        if (needs_table && (table == nullptr || !table->contains(ex.id))) return;
        const auto img = apply_perturbation(ex.image, perturbation);
        slots[i] = ScoredExample{ex.id, ex.label, model.probability(img, ex.id, table), ex.source};
    });
    std::vector<ScoredExample> scored;
    for (std::size_t i = 0; i < slots.size(); ++i) {
        if (slots[i]) scored.push_back(*slots[i]);
        else if (skipped) skipped->push_back(images[i].id);
    }
    return scored;
}

inline EvalReport evaluate(const AideModel& model, const std::vector<LabeledImage>& images,
                           const EmbeddingTable* table, std::size_t threads = default_thread_count()) {
    if (images.empty()) throw ArgumentError("evaluate: split is empty");
    std::vector<std::string> skipped;
    auto report = summarize(score_images(model, images, table, PerturbationSpec::identity(), &skipped, threads));
    report.skipped_ids = std::move(skipped);
    report.config = to_json(model.config());
    return report;
}

/// Accuracy under each perturbation, alongside the unperturbed baseline.
inline void robustness_sweep(const AideModel& model, const std::vector<LabeledImage>& images,
                             const EmbeddingTable* table, EvalReport& report,
                             const std::vector<PerturbationSpec>& specs = robustness_grid(),
                             std::size_t threads = default_thread_count()) {
    if (images.empty()) throw ArgumentError("robustness_sweep: split is empty");
    report.robustness_baseline = accuracy_metrics(score_images(model, images, table, {}, nullptr, threads)).overall;
    report.robustness.clear();
    for (const auto& spec : specs) {
        const auto scored = score_images(model, images, table, spec, nullptr, threads);
        report.robustness.push_back({spec, accuracy_metrics(scored).overall});
    }
}

struct AblationOptions {
    bool variants = true;
    bool hyper_grid = false;
    std::vector<std::size_t> patch_sizes = {16, 32, 64};
    std::vector<std::size_t> select_counts = {1, 2, 4};
    TrainOptions train;
};

/// Retrains and evaluates each branch configuration under identical seeds and data.
inline std::vector<AblationEntry> ablation_suite(const std::vector<LabeledImage>& train,
                                                 const std::vector<LabeledImage>& test, const AideConfig& cfg,
                                                 const EmbeddingTable* table, const AblationOptions& opts = {}) {
    std::vector<AblationEntry> out;
    auto run = [&](const AideConfig& c, const std::string& label) {
        const auto model = restore_model(train_model(train, c, table, nullptr, opts.train));
        out.push_back({label, evaluate(model, test, table, opts.train.threads).overall_acc});
    };
    if (opts.variants) {
        for (auto variant : all_ablations) {
            AideConfig c = cfg;
            c.ablation = variant;
            run(c, to_string(variant));
        }
    }
    if (opts.hyper_grid) {
        for (auto n : opts.patch_sizes)
            for (auto k : opts.select_counts) {
                AideConfig c = cfg;
                c.patch_n = n;
                c.k_bands = std::min(cfg.k_bands, 2 * n - 1);
                c.k_select = k;
                run(c, "patch_n=" + std::to_string(n) + " k_select=" + std::to_string(k));
            }
    }
    return out;
}

inline nlohmann::json opt_json(const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

inline nlohmann::ordered_json report_to_json(const EvalReport& r) {
    nlohmann::ordered_json j;
    j["overall_acc"] = r.overall_acc;
    j["fake_acc"] = opt_json(r.fake_acc);
    j["real_acc"] = opt_json(r.real_acc);
    j["ap"] = opt_json(r.ap);
    j["evaluated"] = r.evaluated;
    j["skipped_ids"] = r.skipped_ids;
    auto& ps = j["per_source"] = nlohmann::ordered_json::object();
    for (const auto& [source, m] : r.per_source) ps[source] = {{"acc", m.acc}, {"ap", opt_json(m.ap)}, {"n", m.n}};
    if (r.robustness_baseline) {
        auto& rob = j["robustness"] = nlohmann::ordered_json::object();
        rob["baseline"] = *r.robustness_baseline;
        for (const auto& e : r.robustness) rob[e.spec.label()] = e.acc;
    }
    if (!r.ablation.empty()) {
        auto& ab = j["ablation"] = nlohmann::ordered_json::object();
        for (const auto& e : r.ablation) ab[e.label] = e.acc;
    }
    j["config"] = r.config;
    if (!r.timestamp.empty()) j["timestamp"] = r.timestamp;
    return j;
}

/// One row per cell: section,key,metric,value.
inline std::string report_to_csv(const EvalReport& r) {
    std::string out = "section,key,metric,value\n";
    auto row = [&](const std::string& section, const std::string& key, const std::string& metric,
                   const std::optional<double>& v) {
        char buf[64];
        if (v) std::snprintf(buf, sizeof buf, "%.6f", *v);
        out += section + "," + key + "," + metric + "," + (v ? std::string(buf) : std::string()) + "\n";
    };
    row("overall", "all", "acc", r.overall_acc);
    row("overall", "fake", "acc", r.fake_acc);
    row("overall", "real", "acc", r.real_acc);
    row("overall", "all", "ap", r.ap);
    for (const auto& [source, m] : r.per_source) {
        row("source", source, "acc", m.acc);
        row("source", source, "ap", m.ap);
        row("source", source, "n", static_cast<double>(m.n));
    }
    if (r.robustness_baseline) row("robustness", "baseline", "acc", r.robustness_baseline);
    for (const auto& e : r.robustness) row("robustness", e.spec.label(), "acc", e.acc);
    for (const auto& e : r.ablation) row("ablation", e.label, "acc", e.acc);
    return out;
}

}  // namespace aide
