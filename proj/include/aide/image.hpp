#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "aide/error.hpp"

namespace aide {

/// Decoded 8-bit RGB raster, row-major, channels interleaved.
struct RgbImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> pixels;

    RgbImage() = default;
    RgbImage(std::size_t w, std::size_t h, std::uint8_t fill = 0)
        : width(w), height(h), pixels(w * h * 3, fill) {}
    RgbImage(std::size_t w, std::size_t h, std::vector<std::uint8_t> data)
        : width(w), height(h), pixels(std::move(data)) {
        if (pixels.size() != width * height * 3) {
            throw ArgumentError("RgbImage: pixel buffer size does not match dimensions");
        }
    }

    std::uint8_t& at(std::size_t x, std::size_t y, std::size_t c) {
        return pixels[(y * width + x) * 3 + c];
    }
    std::uint8_t at(std::size_t x, std::size_t y, std::size_t c) const {
        return pixels[(y * width + x) * 3 + c];
    }

    bool operator==(const RgbImage&) const = default;
};

/// One N×N tile of the patch grid.
struct Patch {
    std::size_t grid_row = 0;
    std::size_t grid_col = 0;
    std::size_t linear_index = 0;
    RgbImage pixels;

    std::size_t n() const { return pixels.width; }
};

/// Copy of the w×h region whose top-left corner is (x0, y0).
inline RgbImage crop(const RgbImage& img, std::size_t x0, std::size_t y0, std::size_t w,
                     std::size_t h) {
    if (x0 + w > img.width || y0 + h > img.height) {
        throw ArgumentError("crop: region exceeds image bounds");
    }
    RgbImage out(w, h);
    for (std::size_t y = 0; y < h; ++y) {
        const auto* src = &img.pixels[((y0 + y) * img.width + x0) * 3];
        std::copy(src, src + w * 3, &out.pixels[y * w * 3]);
    }
    return out;
}

}  // namespace aide
