#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <span>
#include <vector>

#include "aide/image.hpp"

namespace aide {

/// Orthonormal DCT-II of size N, applied separably (rows then columns).
class DctPlan {
public:
    explicit DctPlan(std::size_t n) : n_(n), basis_(n * n) {
        if (n == 0) throw ArgumentError("DctPlan: size must be positive");
        const double dn = static_cast<double>(n);
        for (std::size_t u = 0; u < n; ++u) {
            const double scale = u == 0 ? std::sqrt(1.0 / dn) : std::sqrt(2.0 / dn);
            for (std::size_t i = 0; i < n; ++i) {
                basis_[u * n + i] =
                    scale * std::cos(std::numbers::pi * (2.0 * i + 1.0) * u / (2.0 * dn));
            }
        }
    }

    std::size_t size() const { return n_; }

    /// X = C x C^T for a row-major n×n block.
    std::vector<double> forward(std::span<const double> x) const {
        check(x);
        std::vector<double> tmp(n_ * n_, 0.0);
        std::vector<double> out(n_ * n_, 0.0);
        // tmp[i][v] = sum_j x[i][j] C[v][j]
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t v = 0; v < n_; ++v) {
                double acc = 0.0;
                for (std::size_t j = 0; j < n_; ++j) acc += x[i * n_ + j] * basis_[v * n_ + j];
                tmp[i * n_ + v] = acc;
            }
        // out[u][v] = sum_i C[u][i] tmp[i][v]
        for (std::size_t u = 0; u < n_; ++u)
            for (std::size_t i = 0; i < n_; ++i) {
                const double c = basis_[u * n_ + i];
                for (std::size_t v = 0; v < n_; ++v) out[u * n_ + v] += c * tmp[i * n_ + v];
            }
        return out;
    }

    /// x = C^T X C.
    std::vector<double> inverse(std::span<const double> coeffs) const {
        check(coeffs);
        std::vector<double> tmp(n_ * n_, 0.0);
        std::vector<double> out(n_ * n_, 0.0);
        for (std::size_t u = 0; u < n_; ++u)
            for (std::size_t j = 0; j < n_; ++j) {
                double acc = 0.0;
                for (std::size_t v = 0; v < n_; ++v) acc += coeffs[u * n_ + v] * basis_[v * n_ + j];
                tmp[u * n_ + j] = acc;
            }
        for (std::size_t u = 0; u < n_; ++u)
            for (std::size_t i = 0; i < n_; ++i) {
                const double c = basis_[u * n_ + i];
                for (std::size_t j = 0; j < n_; ++j) out[i * n_ + j] += c * tmp[u * n_ + j];
            }
        return out;
    }

private:
    void check(std::span<const double> x) const {
        if (x.size() != n_ * n_) throw ArgumentError("DCT input is not n×n");
        for (double v : x)
            if (!std::isfinite(v)) throw ArgumentError("DCT input contains a non-finite value");
    }

    std::size_t n_;
    std::vector<double> basis_;
};

inline std::size_t square_side(std::size_t count) {
    const auto n = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(count))));
    if (n * n != count) throw ArgumentError("channel is not square");
    return n;
}

inline std::vector<double> dct2(std::span<const double> channel) {
    return DctPlan(square_side(channel.size())).forward(channel);
}

inline std::vector<double> idct2(std::span<const double> coeffs) {
    return DctPlan(square_side(coeffs.size())).inverse(coeffs);
}

/// Per-channel DCT coefficients of an N×N RGB patch, stored as three planes.
struct DctPatch {
    std::size_t n = 0;
    std::vector<double> coeffs;  // [c][i][j]

    double at(std::size_t c, std::size_t i, std::size_t j) const {
        return coeffs[(c * n + i) * n + j];
    }
};

inline DctPatch dct_patch(const RgbImage& patch, const DctPlan& plan) {
    const std::size_t n = plan.size();
    if (patch.width != n || patch.height != n) throw ArgumentError("dct_patch: size mismatch");
    DctPatch out{n, std::vector<double>(3 * n * n)};
    std::vector<double> plane(n * n);
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) plane[i * n + j] = patch.at(j, i, c);
        const auto spectrum = plan.forward(plane);
        std::copy(spectrum.begin(), spectrum.end(), out.coeffs.begin() + c * n * n);
    }
    return out;
}

/// K binary anti-diagonal masks: cell (i,j) belongs to band k iff
/// (2N/K)·k <= i+j < (2N/K)·(k+1), compared exactly as 2N·k <= (i+j)·K.
class BandFilterBank {
public:
    BandFilterBank(std::size_t n, std::size_t k_bands) : n_(n), k_(k_bands), band_(n * n) {
        if (n == 0) throw ArgumentError("filter bank: n must be positive");
        if (k_bands == 0 || k_bands > 2 * n - 1) {
            throw ArgumentError("filter bank: k_bands must lie in [1, 2n-1]");
        }
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) band_[i * n + j] = ((i + j) * k_) / (2 * n_);
    }

    std::size_t n() const { return n_; }
    std::size_t k_bands() const { return k_; }
    std::size_t band_of(std::size_t i, std::size_t j) const { return band_[i * n_ + j]; }

    /// mask_k[i][j] in {0,1}.
    int mask(std::size_t k, std::size_t i, std::size_t j) const { return band_of(i, j) == k ? 1 : 0; }

    std::vector<std::uint8_t> mask_matrix(std::size_t k) const {
        std::vector<std::uint8_t> m(n_ * n_);
        for (std::size_t idx = 0; idx < m.size(); ++idx) m[idx] = band_[idx] == k ? 1 : 0;
        return m;
    }

private:
    std::size_t n_;
    std::size_t k_;
    std::vector<std::size_t> band_;
};

inline BandFilterBank build_band_filter_bank(std::size_t n, std::size_t k_bands) {
    return BandFilterBank(n, k_bands);
}

/// G = sum_k 2^k sum_c sum_ij mask_k[i][j] ln(|X_c[i][j]| + 1).
inline double grade_patch(const DctPatch& dct, const BandFilterBank& bank) {
    const std::size_t n = bank.n();
    if (dct.n != n || dct.coeffs.size() != 3 * n * n) throw ArgumentError("grade_patch: shape mismatch");
    std::vector<double> band_sum(bank.k_bands(), 0.0);
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                band_sum[bank.band_of(i, j)] += std::log(std::abs(dct.at(c, i, j)) + 1.0);
    double grade = 0.0;
    for (std::size_t k = 0; k < band_sum.size(); ++k) grade += std::ldexp(band_sum[k], static_cast<int>(k));
    return grade;
}

struct PatchSelection {
    std::size_t k = 0;
    std::vector<double> grades;          // aligned with patch linear indices
    std::vector<std::size_t> max_indices;  // descending grade
    std::vector<std::size_t> min_indices;  // ascending grade
};

/// Picks the k highest and k lowest grades; ties go to the lower linear index.
inline PatchSelection select_from_grades(std::vector<double> grades, std::size_t k) {
    if (k == 0) throw ArgumentError("selection count must be positive");
    if (grades.size() < 2 * k) throw InsufficientPatchesError(grades.size(), 2 * k);
    std::vector<std::size_t> order(grades.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    PatchSelection sel;
    sel.k = k;
    auto desc = order;
    std::stable_sort(desc.begin(), desc.end(),
                     [&](std::size_t a, std::size_t b) { return grades[a] > grades[b]; });
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return grades[a] < grades[b]; });
    sel.max_indices.assign(desc.begin(), desc.begin() + static_cast<std::ptrdiff_t>(k));
    sel.min_indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    sel.grades = std::move(grades);
    return sel;
}

inline std::vector<double> grade_patches(std::span<const Patch> patches, const BandFilterBank& bank) {
    const DctPlan plan(bank.n());
    std::vector<double> grades(patches.size());
    for (std::size_t m = 0; m < patches.size(); ++m) {
        if (patches[m].linear_index != m) throw ArgumentError("patches are not in grid order");
        grades[m] = grade_patch(dct_patch(patches[m].pixels, plan), bank);
    }
    return grades;
}

inline PatchSelection select_extreme_patches(std::span<const Patch> patches, const BandFilterBank& bank,
                                             std::size_t k) {
    if (patches.size() < 2 * k) throw InsufficientPatchesError(patches.size(), 2 * k);
    return select_from_grades(grade_patches(patches, bank), k);
}

}  // namespace aide
