#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "aide/image.hpp"

namespace aide {

using Kernel5 = std::array<double, 25>;

/// Fixed high-pass residual filters plus truncation threshold. Each kernel is
/// stored already divided by its normalizer and must sum to zero.
class SrmKernelSet {
public:
    SrmKernelSet(const std::array<Kernel5, 3>& raw, const std::array<double, 3>& normalizers,
                 double clamp_t)
        : clamp_t_(clamp_t), raw_(raw), normalizers_(normalizers) {
        if (!(clamp_t > 0.0) || !std::isfinite(clamp_t)) throw ArgumentError("SRM clamp_t must be positive");
        for (std::size_t q = 0; q < 3; ++q) {
            if (normalizers[q] == 0.0 || !std::isfinite(normalizers[q])) {
                throw ArgumentError("SRM normalizer must be finite and nonzero");
            }
            double sum = 0.0;
            for (double v : raw[q]) sum += v;
            if (sum != 0.0) throw ArgumentError("SRM kernel " + std::to_string(q) + " does not sum to zero");
            for (std::size_t t = 0; t < 25; ++t) kernels_[q][t] = raw[q][t] / normalizers[q];
        }
    }

    static SrmKernelSet standard(double clamp_t = 2.0) {
        // clang-format off
        const Kernel5 k1 = { 0, 0, 0, 0, 0,
                             0,-1, 2,-1, 0,
                             0, 2,-4, 2, 0,
                             0,-1, 2,-1, 0,
                             0, 0, 0, 0, 0};
        const Kernel5 k2 = {-1, 2, -2, 2,-1,
                             2,-6,  8,-6, 2,
                            -2, 8,-12, 8,-2,
                             2,-6,  8,-6, 2,
                            -1, 2, -2, 2,-1};
        const Kernel5 k3 = { 0, 0, 0, 0, 0,
                             0, 0, 0, 0, 0,
                             0, 1,-2, 1, 0,
                             0, 0, 0, 0, 0,
                             0, 0, 0, 0, 0};
        // clang-format on
        return SrmKernelSet({k1, k2, k3}, {4.0, 12.0, 2.0}, clamp_t);
    }

    const Kernel5& kernel(std::size_t q) const { return kernels_[q]; }
    const Kernel5& raw(std::size_t q) const { return raw_[q]; }
    double normalizer(std::size_t q) const { return normalizers_[q]; }
    double clamp_t() const { return clamp_t_; }

private:
    double clamp_t_;
    std::array<Kernel5, 3> raw_;
    std::array<double, 3> normalizers_;
    std::array<Kernel5, 3> kernels_{};
};

/// Residual planes, one per kernel, stored [q][y][x].
struct ResidualTensor {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<double> values;

    double at(std::size_t q, std::size_t x, std::size_t y) const {
        return values[(q * height + y) * width + x];
    }
};

/// Pixels on [0,1]; each kernel is cross-correlated with every input channel
/// (same-size output, edge-replicated border), the three responses averaged,
/// then clamped to [-clamp_t, clamp_t].
inline ResidualTensor srm_residual(const RgbImage& img, const SrmKernelSet& kernels) {
    if (img.width < 5 || img.height < 5) throw ArgumentError("srm_residual: image smaller than 5x5");
    const auto w = static_cast<std::ptrdiff_t>(img.width);
    const auto h = static_cast<std::ptrdiff_t>(img.height);

    // Correlation is linear, so averaging the per-channel responses equals
    // correlating the channel sum once and dividing by 3*255 at the end. The
    // integer channel sum keeps constant regions exactly zero.
    std::vector<double> sum(img.width * img.height);
    for (std::size_t p = 0; p < sum.size(); ++p) {
        const auto* px = &img.pixels[p * 3];
        sum[p] = static_cast<double>(int{px[0]} + int{px[1]} + int{px[2]});
    }

    ResidualTensor out{img.width, img.height, std::vector<double>(3 * sum.size())};
    const double t = kernels.clamp_t();
    for (std::size_t q = 0; q < 3; ++q) {
        const auto& k = kernels.raw(q);
        const double denom = kernels.normalizer(q) * 3.0 * 255.0;
        for (std::ptrdiff_t y = 0; y < h; ++y) {
            for (std::ptrdiff_t x = 0; x < w; ++x) {
                double acc = 0.0;
                for (std::ptrdiff_t dy = -2; dy <= 2; ++dy) {
                    const auto sy = std::clamp<std::ptrdiff_t>(y + dy, 0, h - 1);
                    for (std::ptrdiff_t dx = -2; dx <= 2; ++dx) {
                        const auto sx = std::clamp<std::ptrdiff_t>(x + dx, 0, w - 1);
                        acc += k[(dy + 2) * 5 + (dx + 2)] * sum[sy * w + sx];
                    }
                }
                out.values[(q * img.height + y) * img.width + x] = std::clamp(acc / denom, -t, t);
            }
        }
    }
    return out;
}

}  // namespace aide
