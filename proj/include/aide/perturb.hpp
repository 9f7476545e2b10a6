#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "aide/codec.hpp"
#include "aide/imageio.hpp"
#include "aide/rng.hpp"

namespace aide {

/// JPEG encode at quality `qf` then decode; dimensions are preserved.
inline RgbImage jpeg_recompress(const RgbImage& img, int qf) {
    if (qf < 1 || qf > 100) throw ArgumentError("jpeg_recompress: qf must lie in [1, 100]");
    return decode_jpeg(encode_jpeg(img, qf));
}

/// Sampled Gaussian taps at integer offsets -r..r, r = ceil(3 sigma), normalized to sum 1.
inline std::vector<double> gaussian_kernel_1d(double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ArgumentError("gaussian_blur: sigma must be positive");
    const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (std::ptrdiff_t t = -radius; t <= radius; ++t) {
        const double v = std::exp(-static_cast<double>(t * t) / (2.0 * sigma * sigma));
        k[static_cast<std::size_t>(t + radius)] = v;
        sum += v;
    }
    for (auto& v : k) v /= sum;
    return k;
}

/// Separable blur with clamp-to-edge borders; unrounded between passes.
inline std::vector<double> gaussian_blur_unrounded(const RgbImage& img, double sigma) {
    const auto k = gaussian_kernel_1d(sigma);
    const auto radius = static_cast<std::ptrdiff_t>(k.size() / 2);
    const auto w = static_cast<std::ptrdiff_t>(img.width);
    const auto h = static_cast<std::ptrdiff_t>(img.height);
    std::vector<double> horiz(img.pixels.size());
    for (std::ptrdiff_t y = 0; y < h; ++y)
        for (std::ptrdiff_t x = 0; x < w; ++x)
            for (std::size_t c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (std::ptrdiff_t t = -radius; t <= radius; ++t) {
                    const auto sx = std::clamp<std::ptrdiff_t>(x + t, 0, w - 1);
                    acc += k[static_cast<std::size_t>(t + radius)] * img.pixels[(y * w + sx) * 3 + c];
                }
                horiz[(y * w + x) * 3 + c] = acc;
            }
    std::vector<double> out(img.pixels.size());
    for (std::ptrdiff_t y = 0; y < h; ++y)
        for (std::ptrdiff_t x = 0; x < w; ++x)
            for (std::size_t c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (std::ptrdiff_t t = -radius; t <= radius; ++t) {
                    const auto sy = std::clamp<std::ptrdiff_t>(y + t, 0, h - 1);
                    acc += k[static_cast<std::size_t>(t + radius)] * horiz[(sy * w + x) * 3 + c];
                }
                out[(y * w + x) * 3 + c] = acc;
            }
    return out;
}

inline RgbImage gaussian_blur(const RgbImage& img, double sigma) {
    const auto values = gaussian_blur_unrounded(img, sigma);
    RgbImage out(img.width, img.height);
    for (std::size_t i = 0; i < values.size(); ++i) out.pixels[i] = clamp_round_u8(values[i]);
    return out;
}

enum class PerturbationKind { none, jpeg, blur };

/// A single evaluation-time perturbation. `none` is the identity used as a control.
struct PerturbationSpec {
    PerturbationKind kind = PerturbationKind::none;
    int qf = 0;
    double sigma = 0.0;

    static PerturbationSpec identity() { return {}; }
    static PerturbationSpec jpeg(int qf) {
        if (qf < 1 || qf > 100) throw ArgumentError("jpeg quality factor must lie in [1, 100]");
        return {PerturbationKind::jpeg, qf, 0.0};
    }
    static PerturbationSpec blur(double sigma) {
        if (!(sigma > 0.0)) throw ArgumentError("blur sigma must be positive");
        return {PerturbationKind::blur, 0, sigma};
    }

    std::string label() const {
        switch (kind) {
            case PerturbationKind::jpeg: return "jpeg_qf" + std::to_string(qf);
            case PerturbationKind::blur: {
                char buf[32];
                std::snprintf(buf, sizeof buf, "blur_sigma%.1f", sigma);
                return buf;
            }
            case PerturbationKind::none: break;
        }
        return "identity";
    }

    bool operator==(const PerturbationSpec&) const = default;
};

inline RgbImage apply_perturbation(const RgbImage& img, const PerturbationSpec& spec) {
    switch (spec.kind) {
        case PerturbationKind::jpeg: return jpeg_recompress(img, spec.qf);
        case PerturbationKind::blur: return gaussian_blur(img, spec.sigma);
        case PerturbationKind::none: break;
    }
    return img;
}

/// The evaluation grid: JPEG QF 95/90/75/50 and blur sigma 1/2/3/4.
inline std::vector<PerturbationSpec> robustness_grid() {
    return {PerturbationSpec::jpeg(95), PerturbationSpec::jpeg(90), PerturbationSpec::jpeg(75),
            PerturbationSpec::jpeg(50), PerturbationSpec::blur(1.0), PerturbationSpec::blur(2.0),
            PerturbationSpec::blur(3.0), PerturbationSpec::blur(4.0)};
}

struct AugmentationPlan {
    std::optional<int> jpeg_qf;
    std::optional<double> blur_sigma;
};

/// Always consumes four draws in the order (jpeg decision, qf, blur decision,
/// sigma) so the stream position does not depend on the outcomes.
inline AugmentationPlan draw_augmentation(Rng& rng, double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw ArgumentError("augmentation probability must lie in [0, 1]");
    AugmentationPlan plan;
    const bool do_jpeg = rng.bernoulli(p);
    const auto qf = static_cast<int>(rng.uniform_int(30, 100));
    const bool do_blur = rng.bernoulli(p);
    const double sigma = rng.uniform(0.1, 3.0);
    if (do_jpeg) plan.jpeg_qf = qf;
    if (do_blur) plan.blur_sigma = sigma;
    return plan;
}

inline RgbImage apply_augmentation(const RgbImage& img, const AugmentationPlan& plan) {
    if (!plan.jpeg_qf && !plan.blur_sigma) return img;
    RgbImage out = plan.jpeg_qf ? jpeg_recompress(img, *plan.jpeg_qf) : img;
    if (plan.blur_sigma) out = gaussian_blur(out, *plan.blur_sigma);
    return out;
}

inline RgbImage random_augment(const RgbImage& img, Rng& rng, double p) {
    return apply_augmentation(img, draw_augmentation(rng, p));
}

}  // namespace aide
