#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "json.hpp"

#include "aide/imageio.hpp"
#include "aide/rng.hpp"

namespace aide {

enum class Label { real = 0, fake = 1 };
enum class Split { train, val, test };

inline std::string to_string(Label l) { return l == Label::real ? "real" : "fake"; }
inline std::string to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    return "train";
}

inline Label label_from_string(const std::string& s) {
    if (s == "real") return Label::real;
    if (s == "fake") return Label::fake;
    throw FormatError("unknown label '" + s + "'");
}

inline Split split_from_string(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "val") return Split::val;
    if (s == "test") return Split::test;
    throw FormatError("unknown split '" + s + "'");
}

struct ManifestRecord {
    std::string path;
    std::string id;
    Label label = Label::real;
    std::string source = "unknown";
    Split split = Split::train;
    bool missing = false;  // set at load time when the file does not exist

    bool operator==(const ManifestRecord&) const = default;
};

struct DatasetManifest {
    std::vector<ManifestRecord> records;

    std::vector<ManifestRecord> split(Split s) const {
        std::vector<ManifestRecord> out;
        for (const auto& r : records)
            if (r.split == s) out.push_back(r);
        return out;
    }

    bool operator==(const DatasetManifest&) const = default;
};

inline std::string manifest_to_jsonl(const DatasetManifest& m) {
    std::string out;
    for (const auto& r : m.records) {
        nlohmann::ordered_json j = {{"path", r.path},
                                    {"id", r.id},
                                    {"label", to_string(r.label)},
                                    {"source", r.source},
                                    {"split", to_string(r.split)}};
        out += j.dump() + "\n";
    }
    return out;
}

/// Parses JSON-lines; relative paths resolve against `base_dir` when checking existence.
inline DatasetManifest manifest_from_jsonl(const std::string& text, const std::filesystem::path& base_dir = {}) {
    DatasetManifest m;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    std::set<std::string> ids;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            ManifestRecord r;
            r.path = j.at("path").get<std::string>();
            r.id = j.at("id").get<std::string>();
            r.label = label_from_string(j.at("label").get<std::string>());
            r.source = j.value("source", std::string("unknown"));
            r.split = split_from_string(j.value("split", std::string("train")));
            if (!ids.insert(r.id).second) throw FormatError("duplicate id '" + r.id + "'");
            std::filesystem::path p(r.path);
            if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
            r.missing = !std::filesystem::exists(p);
            m.records.push_back(std::move(r));
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("manifest line " + std::to_string(line_no) + ": " + e.what());
        } catch (const FormatError& e) {
            throw FormatError("manifest line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return m;
}

inline void save_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path.string());
    out << manifest_to_jsonl(m);
}

inline DatasetManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open manifest " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return manifest_from_jsonl(ss.str(), path.parent_path());
}

/// Absolute-or-manifest-relative location of a record's image.
inline std::filesystem::path resolve_record_path(const ManifestRecord& r, const std::filesystem::path& base_dir) {
    std::filesystem::path p(r.path);
    return p.is_relative() && !base_dir.empty() ? base_dir / p : p;
}

/// One record per image under root/real and root/fake. The label comes from the
/// top-level directory, the source from the second-level directory if any.
/// Paths are root-joined, ids are root-relative; records sorted by path.
inline DatasetManifest build_manifest(const std::filesystem::path& root) {
    namespace fs = std::filesystem;
    const bool has_real = fs::is_directory(root / "real");
    const bool has_fake = fs::is_directory(root / "fake");
    if (!has_real && !has_fake) throw LayoutError(root.string() + " has neither real/ nor fake/");

    DatasetManifest m;
    for (const auto label : {Label::real, Label::fake}) {
        const auto dir = root / to_string(label);
        if (!fs::is_directory(dir)) continue;
        for (const auto& entry : fs::recursive_directory_iterator(dir)) {
            if (!entry.is_regular_file() || !is_image_path(entry.path())) continue;
            const auto rel = fs::relative(entry.path(), root);
            ManifestRecord r;
            r.path = (root / rel).generic_string();
            r.id = rel.generic_string();
            r.label = label;
            const auto within = fs::relative(entry.path(), dir);
            auto it = within.begin();
            r.source = std::next(it) != within.end() ? it->string() : "unknown";
            m.records.push_back(std::move(r));
        }
    }
    std::sort(m.records.begin(), m.records.end(),
              [](const ManifestRecord& a, const ManifestRecord& b) { return a.path < b.path; });
    return m;
}

inline std::array<std::uint8_t, 32> sha256(std::span<const std::uint8_t> bytes) {
    std::array<std::uint8_t, 32> digest{};
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1 || len != 32) {
        throw Error(Error::Kind::runtime, "SHA-256 failed");
    }
    return digest;
}

/// SHA-256 over width and height (u64 little-endian) followed by the raw RGB pixels.
inline std::array<std::uint8_t, 32> pixel_hash(const RgbImage& img) {
    std::vector<std::uint8_t> buf;
    buf.reserve(16 + img.pixels.size());
    for (auto v : {static_cast<std::uint64_t>(img.width), static_cast<std::uint64_t>(img.height)})
        for (int i = 0; i < 8; ++i) buf.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    buf.insert(buf.end(), img.pixels.begin(), img.pixels.end());
    return sha256(buf);
}

struct DroppedRecord {
    ManifestRecord record;
    std::string reason;  // "resolution" | "duplicate" | "undecodable"
    std::string detail;
};

struct CurationResult {
    DatasetManifest kept;
    std::vector<DroppedRecord> dropped;
};

/// Drops images whose shorter side is below `min_side` and pixel-identical
/// duplicates (keeping the earliest record in manifest order).
inline CurationResult curate_manifest(const DatasetManifest& manifest, std::size_t min_side = 448,
                                      const std::filesystem::path& base_dir = {}) {
    CurationResult result;
    std::map<std::array<std::uint8_t, 32>, std::string> seen;
    for (const auto& r : manifest.records) {
        RgbImage img;
        try {
            img = read_image(resolve_record_path(r, base_dir));
        } catch (const Error& e) {
            result.dropped.push_back({r, "undecodable", e.what()});
            continue;
        }
        if (std::min(img.width, img.height) < min_side) {
            result.dropped.push_back(
                {r, "resolution", std::to_string(img.width) + "x" + std::to_string(img.height)});
            continue;
        }
        const auto [it, inserted] = seen.emplace(pixel_hash(img), r.id);
        if (!inserted) {
            result.dropped.push_back({r, "duplicate", "same pixels as " + it->second});
            continue;
        }
        result.kept.records.push_back(r);
    }
    return result;
}

struct SplitFractions {
    double train = 0.8;
    double val = 0.1;
    double test = 0.1;
};

struct SplitResult {
    DatasetManifest manifest;
    std::vector<std::string> warnings;
};

/// Largest-remainder allocation of n items to the three fractions.
inline std::array<std::size_t, 3> allocate_split_counts(std::size_t n, const SplitFractions& f) {
    const std::array<double, 3> frac = {f.train, f.val, f.test};
    std::array<std::size_t, 3> counts{};
    std::array<double, 3> rem{};
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        const double exact = frac[i] * static_cast<double>(n);
        counts[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
        rem[i] = exact - static_cast<double>(counts[i]);
        assigned += counts[i];
    }
    while (assigned < n) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < 3; ++i)
            if (rem[i] > rem[best]) best = i;
        ++counts[best];
        rem[best] = -1.0;
        ++assigned;
    }
    return counts;
}

/// Stratified by (label, source); seeded shuffle inside each stratum.
inline SplitResult split_manifest(const DatasetManifest& manifest, const SplitFractions& fractions,
                                  std::uint64_t seed) {
    const double total = fractions.train + fractions.val + fractions.test;
    if (std::abs(total - 1.0) > 1e-9 || fractions.train < 0 || fractions.val < 0 || fractions.test < 0) {
        throw ArgumentError("split fractions must be non-negative and sum to 1");
    }
    std::map<std::pair<int, std::string>, std::vector<std::size_t>> strata;
    for (std::size_t i = 0; i < manifest.records.size(); ++i) {
        const auto& r = manifest.records[i];
        strata[{static_cast<int>(r.label), r.source}].push_back(i);
    }
    SplitResult result{manifest, {}};
    std::uint64_t ordinal = 0;
    for (auto& [key, members] : strata) {
        Rng rng = Rng::derive({seed, ordinal++});
        rng.shuffle(members.begin(), members.end());
        const auto counts = allocate_split_counts(members.size(), fractions);
        const std::array<double, 3> frac = {fractions.train, fractions.val, fractions.test};
        for (std::size_t s = 0; s < 3; ++s) {
            if (frac[s] > 0.0 && counts[s] == 0) {
                result.warnings.push_back("stratum (" + to_string(static_cast<Label>(key.first)) + ", " + key.second +
                                          ") has no records for split " + to_string(static_cast<Split>(s)));
            }
        }
        std::size_t pos = 0;
        for (std::size_t s = 0; s < 3; ++s)
            for (std::size_t c = 0; c < counts[s]; ++c) result.manifest.records[members[pos++]].split = static_cast<Split>(s);
    }
    return result;
}

// ---------------------------------------------------------------------------
// Synthetic corpus

enum class SynthArtifact { spectral, semantic, both };

inline std::string to_string(SynthArtifact a) {
    switch (a) {
        case SynthArtifact::spectral: return "spectral";
        case SynthArtifact::semantic: return "semantic";
        case SynthArtifact::both: return "both";
    }
    return "both";
}

inline SynthArtifact synth_artifact_from_string(const std::string& s) {
    if (s == "spectral") return SynthArtifact::spectral;
    if (s == "semantic") return SynthArtifact::semantic;
    if (s == "both") return SynthArtifact::both;
    throw ConfigError("unknown synthetic artifact '" + s + "'");
}

struct SynthSpec {
    std::size_t count_per_class = 10;
    std::size_t image_size = 128;
    SynthArtifact artifact = SynthArtifact::both;
    std::uint64_t seed = 0;
};

inline SynthSpec synth_spec_from_json(const nlohmann::json& j) {
    SynthSpec s;
    try {
        s.count_per_class = j.value("count_per_class", s.count_per_class);
        s.image_size = j.value("image_size", s.image_size);
        s.artifact = synth_artifact_from_string(j.value("artifact", std::string("both")));
        s.seed = j.value("seed", s.seed);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("synthetic spec: ") + e.what());
    }
    if (s.count_per_class < 2) throw ConfigError("count_per_class must be >= 2");
    if (s.image_size < 32) throw ConfigError("image_size must be >= 32");
    return s;
}

inline constexpr std::size_t sentinel_size = 16;
inline constexpr double synth_noise_sigma = 6.0;

/// Additive 16×16 sentinel: a flat-topped sine bump added to red and
/// subtracted from blue, green untouched. Stored [y][x][c] as signed offsets.
inline const std::array<int, sentinel_size * sentinel_size * 3>& sentinel_pattern() {
    static const auto pattern = [] {
        std::array<int, sentinel_size * sentinel_size * 3> p{};
        for (std::size_t y = 0; y < sentinel_size; ++y)
            for (std::size_t x = 0; x < sentinel_size; ++x) {
                const double sx = std::min(1.0, 2.0 * std::sin(std::numbers::pi * (x + 0.5) / sentinel_size));
                const double sy = std::min(1.0, 2.0 * std::sin(std::numbers::pi * (y + 0.5) / sentinel_size));
                const int s = static_cast<int>(std::lround(60.0 * sx * sy));
                p[(y * sentinel_size + x) * 3 + 0] = s;
                p[(y * sentinel_size + x) * 3 + 2] = -s;
            }
        return p;
    }();
    return pattern;
}

inline RgbImage add_sentinel(const RgbImage& img, std::size_t x0, std::size_t y0) {
    RgbImage out = img;
    const auto& p = sentinel_pattern();
    for (std::size_t y = 0; y < sentinel_size; ++y)
        for (std::size_t x = 0; x < sentinel_size; ++x)
            for (std::size_t c = 0; c < 3; ++c) {
                const int v = int{img.at(x0 + x, y0 + y, c)} + p[(y * sentinel_size + x) * 3 + c];
                out.at(x0 + x, y0 + y, c) = static_cast<std::uint8_t>(std::clamp(v, 0, 255));
            }
    return out;
}

/// True when `img` equals `base` with the sentinel added at (x0, y0) and nowhere else.
inline bool matches_sentinel_at(const RgbImage& img, const RgbImage& base, std::size_t x0, std::size_t y0) {
    if (x0 + sentinel_size > img.width || y0 + sentinel_size > img.height) return false;
    return add_sentinel(base, x0, y0) == img;
}

/// Smooth gray 2-D gradient with a gentle low-frequency ripple plus
/// independent per-channel Gaussian sensor noise (sigma 6 on [0,255]).
inline RgbImage synthesize_base(const SynthSpec& spec, Label stream, std::size_t index) {
    Rng rng = Rng::derive({spec.seed, static_cast<std::uint64_t>(stream), index, 0x5a17});
    const std::size_t n = spec.image_size;
    const double mid = rng.uniform(90.0, 150.0);
    const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double span = rng.uniform(10.0, 50.0);
    const double ripple_amp = rng.uniform(0.0, 10.0);
    const double ripple_period = rng.uniform(0.5, 1.5) * static_cast<double>(n);
    const double ripple_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double gx = std::cos(angle) * span / static_cast<double>(n);
    const double gy = std::sin(angle) * span / static_cast<double>(n);
    const double c = 0.5 * static_cast<double>(n);
    RgbImage img(n, n);
    for (std::size_t y = 0; y < n; ++y)
        for (std::size_t x = 0; x < n; ++x) {
            const double base = mid + gx * (x - c) + gy * (y - c) +
                                ripple_amp * std::sin(2.0 * std::numbers::pi * (x + y) / ripple_period + ripple_phase);
            for (std::size_t ch = 0; ch < 3; ++ch) img.at(x, y, ch) = clamp_round_u8(base + rng.normal(0.0, synth_noise_sigma));
        }
    return img;
}

/// 2× bilinear downsample followed by 2× bilinear upsample.
inline RgbImage spectral_artifact(const RgbImage& img) {
    const auto small = resize_image(img, img.width / 2, img.height / 2, ResizeMethod::bilinear);
    return resize_image(small, img.width, img.height, ResizeMethod::bilinear);
}

struct SyntheticFake {
    RgbImage image;
    std::optional<std::pair<std::size_t, std::size_t>> sentinel_offset;
};

inline SyntheticFake synthesize_fake(const SynthSpec& spec, std::size_t index) {
    SyntheticFake fake{synthesize_base(spec, Label::fake, index), std::nullopt};
    if (spec.artifact != SynthArtifact::semantic) fake.image = spectral_artifact(fake.image);
    if (spec.artifact != SynthArtifact::spectral) {
        Rng rng = Rng::derive({spec.seed, 1, index, 0x5e47});
        const auto limit = static_cast<std::int64_t>(spec.image_size - sentinel_size);
        const auto x0 = static_cast<std::size_t>(rng.uniform_int(0, limit));
        const auto y0 = static_cast<std::size_t>(rng.uniform_int(0, limit));
        fake.image = add_sentinel(fake.image, x0, y0);
        fake.sentinel_offset = {x0, y0};
    }
    return fake;
}

/// Writes real/camera/real_NNNN.png and fake/<artifact>/fake_NNNN.png plus
/// manifest.jsonl under out_dir; returns the manifest (all records split=train).
inline DatasetManifest make_synthetic_dataset(const SynthSpec& spec, const std::filesystem::path& out_dir) {
    namespace fs = std::filesystem;
    if (spec.count_per_class < 2) throw ConfigError("count_per_class must be >= 2");
    const auto real_dir = out_dir / "real" / "camera";
    const auto fake_dir = out_dir / "fake" / to_string(spec.artifact);
    fs::create_directories(real_dir);
    fs::create_directories(fake_dir);
    char name[32];
    for (std::size_t i = 0; i < spec.count_per_class; ++i) {
        std::snprintf(name, sizeof name, "real_%04zu.png", i);
        write_png(real_dir / name, synthesize_base(spec, Label::real, i));
        std::snprintf(name, sizeof name, "fake_%04zu.png", i);
        write_png(fake_dir / name, synthesize_fake(spec, i).image);
    }
    auto manifest = build_manifest(out_dir);
    save_manifest(manifest, out_dir / "manifest.jsonl");
    return manifest;
}

}  // namespace aide
