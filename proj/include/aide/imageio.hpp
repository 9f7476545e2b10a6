#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <string>
#include <vector>

#include "aide/codec.hpp"
#include "aide/image.hpp"

namespace aide {

enum class ResizeMethod { nearest, bilinear };

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline std::optional<ImageFormat> format_from_extension(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    if (ext == ".png") return ImageFormat::png;
    if (ext == ".jpg" || ext == ".jpeg") return ImageFormat::jpeg;
    return std::nullopt;
}

inline bool is_image_path(const std::filesystem::path& path) {
    return format_from_extension(path).has_value();
}

/// Reads an image file: the extension selects the codec and the magic bytes must agree.
inline RgbImage read_image(const std::filesystem::path& path) {
    const auto fmt = format_from_extension(path);
    if (!fmt) throw UnsupportedFormatError("unsupported extension: " + path.string());
    const auto bytes = read_file_bytes(path);
    if (*fmt == ImageFormat::png) {
        if (!has_png_magic(bytes)) throw UnsupportedFormatError("not a PNG stream: " + path.string());
        return decode_png(bytes);
    }
    if (!has_jpeg_magic(bytes)) throw UnsupportedFormatError("not a JPEG stream: " + path.string());
    return decode_jpeg(bytes);
}

inline void write_png(const std::filesystem::path& path, const RgbImage& img) {
    write_file_bytes(path, encode_png(img));
}

inline std::uint8_t clamp_round_u8(double v) {
    return static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
}

/// Resamples to target size. Nearest picks floor((dst + 0.5) * scale); bilinear
/// samples at (dst + 0.5) * scale - 0.5 with edge clamping (align-corners false).
inline RgbImage resize_image(const RgbImage& img, std::size_t target_w, std::size_t target_h,
                             ResizeMethod method) {
    if (target_w == 0 || target_h == 0) throw ArgumentError("resize_image: zero target dimension");
    if (img.width == 0 || img.height == 0) throw ArgumentError("resize_image: empty source");
    RgbImage out(target_w, target_h);
    const double sx = static_cast<double>(img.width) / static_cast<double>(target_w);
    const double sy = static_cast<double>(img.height) / static_cast<double>(target_h);

    if (method == ResizeMethod::nearest) {
        for (std::size_t y = 0; y < target_h; ++y) {
            const auto src_y = std::min(img.height - 1, static_cast<std::size_t>((y + 0.5) * sy));
            for (std::size_t x = 0; x < target_w; ++x) {
                const auto src_x = std::min(img.width - 1, static_cast<std::size_t>((x + 0.5) * sx));
                for (std::size_t c = 0; c < 3; ++c) out.at(x, y, c) = img.at(src_x, src_y, c);
            }
        }
        return out;
    }

    struct Tap {
        std::size_t i0, i1;
        double frac;
    };
    auto taps = [](std::size_t dst_len, std::size_t src_len, double scale) {
        std::vector<Tap> t(dst_len);
        const double max_coord = static_cast<double>(src_len - 1);
        for (std::size_t d = 0; d < dst_len; ++d) {
            const double s = std::clamp((d + 0.5) * scale - 0.5, 0.0, max_coord);
            const auto i0 = static_cast<std::size_t>(std::floor(s));
            t[d] = {i0, std::min(i0 + 1, src_len - 1), s - static_cast<double>(i0)};
        }
        return t;
    };
    const auto tx = taps(target_w, img.width, sx);
    const auto ty = taps(target_h, img.height, sy);
    for (std::size_t y = 0; y < target_h; ++y) {
        const auto& [y0, y1, fy] = ty[y];
        for (std::size_t x = 0; x < target_w; ++x) {
            const auto& [x0, x1, fx] = tx[x];
            for (std::size_t c = 0; c < 3; ++c) {
                const double top = img.at(x0, y0, c) * (1.0 - fx) + img.at(x1, y0, c) * fx;
                const double bottom = img.at(x0, y1, c) * (1.0 - fx) + img.at(x1, y1, c) * fx;
                out.at(x, y, c) = clamp_round_u8(top * (1.0 - fy) + bottom * fy);
            }
        }
    }
    return out;
}

/// Non-overlapping n×n tiles in row-major grid order; right/bottom remainders are dropped.
inline std::vector<Patch> patchify(const RgbImage& img, std::size_t n) {
    if (n == 0) throw ArgumentError("patchify: patch size must be positive");
    const std::size_t cols = img.width / n;
    const std::size_t rows = img.height / n;
    if (cols * rows == 0) {
        throw EmptyGridError(img.width, img.height, n);
    }
    std::vector<Patch> patches;
    patches.reserve(rows * cols);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            patches.push_back({r, c, r * cols + c, crop(img, c * n, r * n, n, n)});
        }
    }
    return patches;
}

inline std::size_t patch_count(const RgbImage& img, std::size_t n) {
    return n == 0 ? 0 : (img.width / n) * (img.height / n);
}

}  // namespace aide
