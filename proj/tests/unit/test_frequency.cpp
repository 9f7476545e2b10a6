#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "helpers.hpp"

using namespace aide;

namespace {

double alpha(std::size_t u, std::size_t n) {
    return u == 0 ? std::sqrt(1.0 / static_cast<double>(n)) : std::sqrt(2.0 / static_cast<double>(n));
}

double basis(std::size_t i, std::size_t u, std::size_t n) {
    return std::cos(std::numbers::pi * (2.0 * static_cast<double>(i) + 1.0) * static_cast<double>(u) /
                    (2.0 * static_cast<double>(n)));
}

// Definitional O(N^4) forward transform.
std::vector<double> naive_dct2(const std::vector<double>& x, std::size_t n) {
    std::vector<double> out(n * n);
    for (std::size_t u = 0; u < n; ++u)
        for (std::size_t v = 0; v < n; ++v) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) s += x[i * n + j] * basis(i, u, n) * basis(j, v, n);
            out[u * n + v] = alpha(u, n) * alpha(v, n) * s;
        }
    return out;
}

// Definitional O(N^4) synthesis.
std::vector<double> naive_idct2(const std::vector<double>& X, std::size_t n) {
    std::vector<double> out(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t u = 0; u < n; ++u)
                for (std::size_t v = 0; v < n; ++v)
                    s += alpha(u, n) * alpha(v, n) * X[u * n + v] * basis(i, u, n) * basis(j, v, n);
            out[i * n + j] = s;
        }
    return out;
}

std::vector<double> random_channel(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> dist(0.0, 255.0);
    std::vector<double> x(n * n);
    for (auto& v : x) v = dist(gen);
    return x;
}

// Band index straight from the inequality (2N/K)k <= i+j < (2N/K)(k+1), in rationals.
std::size_t naive_band(std::size_t i, std::size_t j, std::size_t n, std::size_t k_bands) {
    for (std::size_t k = 0; k < k_bands; ++k) {
        const bool lower = 2 * n * k <= (i + j) * k_bands;
        const bool upper = (i + j) * k_bands < 2 * n * (k + 1);
        if (lower && upper) return k;
    }
    return k_bands;
}

// Naive grade: explicit masks, explicit powers of two.
double naive_grade(const RgbImage& patch, std::size_t k_bands) {
    const std::size_t n = patch.width;
    double g = 0.0;
    for (std::size_t c = 0; c < 3; ++c) {
        std::vector<double> x(n * n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) x[i * n + j] = patch.at(j, i, c);
        const auto X = naive_dct2(x, n);
        for (std::size_t k = 0; k < k_bands; ++k)
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    if (naive_band(i, j, n, k_bands) == k) g += std::pow(2.0, k) * std::log(std::abs(X[i * n + j]) + 1.0);
    }
    return g;
}

// Full stable sort of (grade, index) pairs.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> naive_select(const std::vector<double>& g,
                                                                           std::size_t k) {
    std::vector<std::pair<double, std::size_t>> asc, desc;
    for (std::size_t i = 0; i < g.size(); ++i) asc.push_back({g[i], i});
    desc = asc;
    std::sort(asc.begin(), asc.end(), [](auto a, auto b) { return a.first < b.first || (a.first == b.first && a.second < b.second); });
    std::sort(desc.begin(), desc.end(), [](auto a, auto b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
    std::vector<std::size_t> mx, mn;
    for (std::size_t i = 0; i < k; ++i) {
        mx.push_back(desc[i].second);
        mn.push_back(asc[i].second);
    }
    return {mx, mn};
}

}  // namespace

TEST(Dct, ConstantChannelIsDcOnly) {
    const std::size_t n = 32;
    const auto X = dct2(std::vector<double>(n * n, 37.0));
    EXPECT_NEAR(X[0], 37.0 * n, 1e-9);
    for (std::size_t i = 1; i < X.size(); ++i) EXPECT_NEAR(X[i], 0.0, 1e-9);
}

TEST(Dct, MatchesNaiveDefinition) {
    for (std::size_t n : {1u, 2u, 5u, 8u, 32u}) {
        for (std::uint64_t seed = 0; seed < 3; ++seed) {
            const auto x = random_channel(n, 100 * n + seed);
            const auto fast = dct2(x);
            const auto slow = naive_dct2(x, n);
            for (std::size_t i = 0; i < x.size(); ++i) ASSERT_NEAR(fast[i], slow[i], 1e-9) << "n=" << n;
        }
    }
}

TEST(Dct, ParsevalAndRoundTrip) {
    const auto x = random_channel(32, 42);
    const auto X = dct2(x);
    double ex = 0.0, eX = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        ex += x[i] * x[i];
        eX += X[i] * X[i];
    }
    EXPECT_NEAR(eX / ex, 1.0, 1e-9);
    const auto back = idct2(X);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(back[i], x[i], 1e-9);
}

TEST(Dct, InverseBasisFunctions) {
    const std::size_t n = 32;
    std::vector<double> e(n * n, 0.0);
    e[0] = 1.0;
    for (double v : idct2(e)) EXPECT_NEAR(v, 1.0 / n, 1e-12);

    std::fill(e.begin(), e.end(), 0.0);
    e[1] = 1.0;  // (u,v) = (0,1)
    const auto fast = idct2(e);
    const auto slow = naive_idct2(e, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            EXPECT_NEAR(fast[i * n + j], slow[i * n + j], 1e-12);
            EXPECT_NEAR(fast[i * n + j], alpha(0, n) * alpha(1, n) * basis(j, 1, n), 1e-12);
        }
}

TEST(Dct, NonFiniteInputRejected) {
    std::vector<double> x(16, 1.0);
    x[5] = std::nan("");
    EXPECT_THROW(dct2(x), ArgumentError);
    x[5] = INFINITY;
    EXPECT_THROW(idct2(x), ArgumentError);
}

TEST(DctPatch, ParsevalPerChannel) {
    const auto img = testutil::random_image(32, 32, 9);
    const auto d = dct_patch(img, DctPlan(32));
    for (std::size_t c = 0; c < 3; ++c) {
        double ex = 0.0, eX = 0.0;
        for (std::size_t i = 0; i < 32; ++i)
            for (std::size_t j = 0; j < 32; ++j) {
                ex += std::pow(img.at(j, i, c), 2.0);
                eX += d.at(c, i, j) * d.at(c, i, j);
            }
        EXPECT_NEAR(eX / ex, 1.0, 1e-6);
    }
}

TEST(FilterBank, SpecPositions) {
    const auto bank = build_band_filter_bank(32, 6);
    EXPECT_EQ(bank.band_of(0, 0), 0u);
    EXPECT_EQ(bank.band_of(31, 31), 5u);
    std::size_t mass = 0;
    for (std::size_t k = 0; k < 6; ++k) {
        const auto m = bank.mask_matrix(k);
        mass += std::accumulate(m.begin(), m.end(), std::size_t{0});
    }
    EXPECT_EQ(mass, 1024u);
}

TEST(FilterBank, MatchesInequalityAndPartitions) {
    std::mt19937_64 gen(5);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 40)(gen);
        const std::size_t k = std::uniform_int_distribution<std::size_t>(1, 2 * n - 1)(gen);
        const auto bank = build_band_filter_bank(n, k);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                int covered = 0;
                for (std::size_t b = 0; b < k; ++b) covered += bank.mask(b, i, j);
                ASSERT_EQ(covered, 1);
                ASSERT_EQ(bank.band_of(i, j), naive_band(i, j, n, k));
                if (j + 1 < n) ASSERT_LE(bank.band_of(i, j), bank.band_of(i, j + 1));
            }
    }
}

TEST(FilterBank, RangeChecked) {
    EXPECT_THROW(build_band_filter_bank(4, 0), ArgumentError);
    EXPECT_THROW(build_band_filter_bank(4, 8), ArgumentError);
    EXPECT_NO_THROW(build_band_filter_bank(4, 7));
}

TEST(Grade, ClosedForms) {
    const auto bank = build_band_filter_bank(32, 6);
    const DctPlan plan(32);
    EXPECT_EQ(grade_patch(dct_patch(testutil::solid(32, 32, 0, 0, 0), plan), bank), 0.0);
    EXPECT_NEAR(grade_patch(dct_patch(testutil::solid(32, 32, 100, 100, 100), plan), bank), 3.0 * std::log(3201.0),
                1e-9);
}

TEST(Grade, MatchesNaiveEvaluation) {
    const auto patch = testutil::random_image(8, 8, 77);
    for (std::size_t k : {1u, 3u, 6u, 15u}) {
        const double fast = grade_patch(dct_patch(patch, DctPlan(8)), build_band_filter_bank(8, k));
        EXPECT_NEAR(fast, naive_grade(patch, k), 1e-9 * std::abs(fast));
    }
}

TEST(Grade, NoiseBeatsConstant) {
    const auto bank = build_band_filter_bank(32, 6);
    const DctPlan plan(32);
    const auto noise = testutil::random_image(32, 32, 3);
    double mean = 0.0;
    for (auto p : noise.pixels) mean += p;
    const auto m = static_cast<std::uint8_t>(std::lround(mean / noise.pixels.size()));
    EXPECT_GT(grade_patch(dct_patch(noise, plan), bank), grade_patch(dct_patch(testutil::solid(32, 32, m, m, m), plan), bank));
}

TEST(Grade, ChannelPermutationInvariant) {
    const auto bank = build_band_filter_bank(16, 6);
    const DctPlan plan(16);
    const auto img = testutil::random_image(16, 16, 8);
    RgbImage perm = img;
    for (std::size_t p = 0; p < 16 * 16; ++p) {
        perm.pixels[3 * p] = img.pixels[3 * p + 2];
        perm.pixels[3 * p + 1] = img.pixels[3 * p];
        perm.pixels[3 * p + 2] = img.pixels[3 * p + 1];
    }
    EXPECT_NEAR(grade_patch(dct_patch(img, plan), bank), grade_patch(dct_patch(perm, plan), bank), 1e-9);
}

TEST(Grade, NoiseInjectionNeverDecreasesGrade) {
    const auto bank = build_band_filter_bank(32, 6);
    const DctPlan plan(32);
    const auto flat = testutil::solid(32, 32, 128, 128, 128);
    const double g0 = grade_patch(dct_patch(flat, plan), bank);
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        std::mt19937_64 gen(seed);
        std::normal_distribution<double> noise(0.0, 4.0);
        RgbImage noisy = flat;
        for (auto& p : noisy.pixels) p = clamp_round_u8(p + noise(gen));
        ASSERT_GE(grade_patch(dct_patch(noisy, plan), bank), g0);
    }
}

TEST(Selection, WorkedExample) {
    const auto sel = select_from_grades({3.2, 9.1, 0.5, 7.7, 1.1, 4.4}, 2);
    EXPECT_EQ(sel.max_indices, (std::vector<std::size_t>{1, 3}));
    EXPECT_EQ(sel.min_indices, (std::vector<std::size_t>{2, 4}));
}

TEST(Selection, AllTies) {
    const auto sel = select_from_grades(std::vector<double>(6, 1.5), 2);
    EXPECT_EQ(sel.max_indices, (std::vector<std::size_t>{0, 1}));
    EXPECT_EQ(sel.min_indices, (std::vector<std::size_t>{0, 1}));
}

TEST(Selection, InsufficientPatches) {
    try {
        select_from_grades({1.0, 2.0, 3.0}, 2);
        FAIL();
    } catch (const InsufficientPatchesError& e) {
        EXPECT_EQ(e.have, 3u);
        EXPECT_EQ(e.need, 4u);
    }
    const auto patches = patchify(testutil::random_image(96, 32, 1), 32);
    EXPECT_THROW(select_extreme_patches(patches, build_band_filter_bank(32, 6), 2), InsufficientPatchesError);
}

TEST(Selection, MatchesStableSortOracle) {
    std::mt19937_64 gen(2024);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t len = std::uniform_int_distribution<std::size_t>(2, 40)(gen);
        const std::size_t k = std::uniform_int_distribution<std::size_t>(1, len / 2)(gen);
        const int levels = trial % 3 == 0 ? 1 : (trial % 3 == 1 ? 3 : 1000);  // all-ties, heavy ties, few ties
        std::vector<double> g(len);
        for (auto& v : g) v = std::uniform_int_distribution<int>(0, levels - 1)(gen) * 0.5;
        const auto sel = select_from_grades(g, k);
        const auto [mx, mn] = naive_select(g, k);
        ASSERT_EQ(sel.max_indices, mx);
        ASSERT_EQ(sel.min_indices, mn);
        ASSERT_EQ(sel.grades, g);
    }
}

TEST(Selection, FromPatchesUsesGrades) {
    // Patch 2 is noise (highest), the others flat at different levels.
    RgbImage img = testutil::solid(64, 64, 50, 50, 50);
    const auto noise = testutil::random_image(32, 32, 4);
    for (std::size_t y = 0; y < 32; ++y)
        for (std::size_t x = 0; x < 32; ++x)
            for (std::size_t c = 0; c < 3; ++c) img.at(x, 32 + y, c) = noise.at(x, y, c);
    const auto sel = select_extreme_patches(patchify(img, 32), build_band_filter_bank(32, 6), 1);
    EXPECT_EQ(sel.max_indices, (std::vector<std::size_t>{2}));
    EXPECT_EQ(sel.min_indices, (std::vector<std::size_t>{0}));
}
