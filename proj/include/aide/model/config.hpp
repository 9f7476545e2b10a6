#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include "json.hpp"

#include "aide/error.hpp"
#include "aide/srm.hpp"

namespace aide {

enum class SemanticSource { embedded_table, tiny_encoder };

/// Which branches feed the fusion head. Disabled branches contribute zero vectors.
enum class Ablation { full, pfe_h_only, pfe_l_only, sfe_only, pfe_only, h_plus_sfe, l_plus_sfe };

inline constexpr std::array<Ablation, 7> all_ablations = {
    Ablation::pfe_h_only, Ablation::pfe_l_only, Ablation::sfe_only, Ablation::pfe_only,
    Ablation::h_plus_sfe, Ablation::l_plus_sfe, Ablation::full};

inline std::string to_string(Ablation a) {
    switch (a) {
        case Ablation::full: return "full";
        case Ablation::pfe_h_only: return "pfe_h_only";
        case Ablation::pfe_l_only: return "pfe_l_only";
        case Ablation::sfe_only: return "sfe_only";
        case Ablation::pfe_only: return "pfe_only";
        case Ablation::h_plus_sfe: return "h_plus_sfe";
        case Ablation::l_plus_sfe: return "l_plus_sfe";
    }
    return "full";
}

inline Ablation ablation_from_string(const std::string& s) {
    for (auto a : all_ablations)
        if (to_string(a) == s) return a;
    throw ConfigError("unknown ablation variant '" + s + "'");
}

inline bool uses_max_branch(Ablation a) {
    return a == Ablation::full || a == Ablation::pfe_h_only || a == Ablation::pfe_only || a == Ablation::h_plus_sfe;
}
inline bool uses_min_branch(Ablation a) {
    return a == Ablation::full || a == Ablation::pfe_l_only || a == Ablation::pfe_only || a == Ablation::l_plus_sfe;
}
inline bool uses_semantic_branch(Ablation a) {
    return a == Ablation::full || a == Ablation::sfe_only || a == Ablation::h_plus_sfe || a == Ablation::l_plus_sfe;
}

inline std::string to_string(SemanticSource s) {
    return s == SemanticSource::embedded_table ? "embedded_table" : "tiny_encoder";
}

inline SemanticSource semantic_source_from_string(const std::string& s) {
    if (s == "embedded_table") return SemanticSource::embedded_table;
    if (s == "tiny_encoder") return SemanticSource::tiny_encoder;
    throw ConfigError("unknown semantic_source '" + s + "'");
}

struct AideConfig {
    std::size_t patch_n = 32;
    std::size_t k_bands = 6;
    std::size_t k_select = 2;
    std::size_t patch_resize = 64;
    std::size_t encoder_dim = 128;
    std::size_t semantic_dim = 128;
    SemanticSource semantic_source = SemanticSource::tiny_encoder;
    std::size_t semantic_input_size = 64;
    /// Width of vectors in the embedding table; 0 until bound to a table.
    std::size_t embedding_dim = 0;
    std::size_t fusion_hidden = 128;
    double clamp_t = 2.0;
    std::optional<std::array<Kernel5, 3>> srm_kernels;
    std::optional<std::array<double, 3>> srm_normalizers;
    std::uint64_t seed = 0;
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
    std::size_t batch_size = 32;
    std::size_t epochs = 5;
    double augment_prob = 0.1;
    Ablation ablation = Ablation::full;

    SrmKernelSet srm_kernel_set() const {
        if (srm_kernels || srm_normalizers) {
            const auto base = SrmKernelSet::standard();
            std::array<Kernel5, 3> k = srm_kernels.value_or(
                std::array<Kernel5, 3>{base.raw(0), base.raw(1), base.raw(2)});
            std::array<double, 3> n = srm_normalizers.value_or(
                std::array<double, 3>{base.normalizer(0), base.normalizer(1), base.normalizer(2)});
            return SrmKernelSet(k, n, clamp_t);
        }
        return SrmKernelSet::standard(clamp_t);
    }

    void validate() const {
        if (patch_n == 0) throw ConfigError("patch_n must be positive");
        if (k_bands == 0 || k_bands > 2 * patch_n - 1) throw ConfigError("k_bands must lie in [1, 2*patch_n-1]");
        if (k_select == 0) throw ConfigError("k_select must be >= 1");
        if (patch_resize < 5) throw ConfigError("patch_resize must be >= 5 (SRM kernel size)");
        if (semantic_input_size < 5) throw ConfigError("semantic_input_size must be >= 5");
        if (encoder_dim == 0 || semantic_dim == 0 || fusion_hidden == 0) throw ConfigError("dimensions must be positive");
        if (batch_size == 0) throw ConfigError("batch_size must be positive");
        if (!(lr > 0.0)) throw ConfigError("lr must be positive");
        if (!(augment_prob >= 0.0 && augment_prob <= 1.0)) throw ConfigError("augment_prob must lie in [0,1]");
        (void)srm_kernel_set();
    }
};

inline nlohmann::json to_json(const AideConfig& c) {
    nlohmann::json j = {
        {"patch_n", c.patch_n},
        {"k_bands", c.k_bands},
        {"k_select", c.k_select},
        {"patch_resize", c.patch_resize},
        {"encoder_dim", c.encoder_dim},
        {"semantic_dim", c.semantic_dim},
        {"semantic_source", to_string(c.semantic_source)},
        {"semantic_input_size", c.semantic_input_size},
        {"embedding_dim", c.embedding_dim},
        {"fusion_hidden", c.fusion_hidden},
        {"clamp_t", c.clamp_t},
        {"seed", c.seed},
        {"lr", c.lr},
        {"beta1", c.beta1},
        {"beta2", c.beta2},
        {"eps", c.eps},
        {"weight_decay", c.weight_decay},
        {"batch_size", c.batch_size},
        {"epochs", c.epochs},
        {"augment_prob", c.augment_prob},
        {"ablation", to_string(c.ablation)},
    };
    if (c.srm_kernels) j["srm_kernels"] = *c.srm_kernels;
    if (c.srm_normalizers) j["srm_normalizers"] = *c.srm_normalizers;
    return j;
}

/// Fields absent from the JSON keep their defaults; unknown keys are rejected.
inline AideConfig config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    AideConfig c;
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "patch_n") c.patch_n = v.get<std::size_t>();
            else if (key == "k_bands") c.k_bands = v.get<std::size_t>();
            else if (key == "k_select") c.k_select = v.get<std::size_t>();
            else if (key == "patch_resize") c.patch_resize = v.get<std::size_t>();
            else if (key == "encoder_dim") c.encoder_dim = v.get<std::size_t>();
            else if (key == "semantic_dim") c.semantic_dim = v.get<std::size_t>();
            else if (key == "semantic_source") c.semantic_source = semantic_source_from_string(v.get<std::string>());
            else if (key == "semantic_input_size") c.semantic_input_size = v.get<std::size_t>();
            else if (key == "embedding_dim") c.embedding_dim = v.get<std::size_t>();
            else if (key == "fusion_hidden") c.fusion_hidden = v.get<std::size_t>();
            else if (key == "clamp_t") c.clamp_t = v.get<double>();
            else if (key == "srm_kernels") c.srm_kernels = v.get<std::array<Kernel5, 3>>();
            else if (key == "srm_normalizers") c.srm_normalizers = v.get<std::array<double, 3>>();
            else if (key == "seed") c.seed = v.get<std::uint64_t>();
            else if (key == "lr") c.lr = v.get<double>();
            else if (key == "beta1") c.beta1 = v.get<double>();
            else if (key == "beta2") c.beta2 = v.get<double>();
            else if (key == "eps") c.eps = v.get<double>();
            else if (key == "weight_decay") c.weight_decay = v.get<double>();
            else if (key == "batch_size") c.batch_size = v.get<std::size_t>();
            else if (key == "epochs") c.epochs = v.get<std::size_t>();
            else if (key == "augment_prob") c.augment_prob = v.get<double>();
            else if (key == "ablation") c.ablation = ablation_from_string(v.get<std::string>());
            else throw ConfigError("unknown config key '" + key + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(e.what());
    }
    c.validate();
    return c;
}

inline AideConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    try {
        return config_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

}  // namespace aide
