#pragma once

// PNG and baseline JPEG encode/decode over libpng and libjpeg(-turbo).

#include <csetjmp>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include <jpeglib.h>
#include <png.h>
#include <zlib.h>

#include "aide/image.hpp"

namespace aide {

enum class ImageFormat { png, jpeg };

inline bool has_png_magic(std::span<const std::uint8_t> bytes) {
    static constexpr std::uint8_t magic[] = {0x89, 0x50, 0x4E, 0x47};
    return bytes.size() >= 4 && std::memcmp(bytes.data(), magic, 4) == 0;
}

inline bool has_jpeg_magic(std::span<const std::uint8_t> bytes) {
    return bytes.size() >= 2 && bytes[0] == 0xFF && bytes[1] == 0xD8;
}

namespace detail {

inline std::uint32_t read_be32(const std::uint8_t* p) {
    return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) |
           std::uint32_t{p[3]};
}

/// Walks the PNG chunk list and throws DecodeError at the offset of the first
/// structural defect (truncation, bad CRC, missing IHDR/IEND).
inline void validate_png_chunks(std::span<const std::uint8_t> bytes) {
    static constexpr std::uint8_t signature[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
    if (bytes.size() < 8 || std::memcmp(bytes.data(), signature, 8) != 0) {
        throw DecodeError(0, "bad PNG signature");
    }
    std::size_t pos = 8;
    bool first = true;
    while (true) {
        if (pos + 8 > bytes.size()) throw DecodeError(pos, "truncated PNG chunk header");
        const std::uint32_t len = read_be32(&bytes[pos]);
        if (len > 0x7fffffffu) throw DecodeError(pos, "PNG chunk length out of range");
        const std::string type(reinterpret_cast<const char*>(&bytes[pos + 4]), 4);
        if (first && type != "IHDR") throw DecodeError(pos, "first PNG chunk is not IHDR");
        first = false;
        if (pos + 12 + std::size_t{len} > bytes.size()) {
            throw DecodeError(pos, "truncated PNG chunk " + type);
        }
        const auto crc = static_cast<std::uint32_t>(
            crc32(crc32(0L, Z_NULL, 0), &bytes[pos + 4], static_cast<uInt>(len + 4)));
        if (crc != read_be32(&bytes[pos + 8 + len])) {
            throw DecodeError(pos, "CRC mismatch in PNG chunk " + type);
        }
        pos += 12 + std::size_t{len};
        if (type == "IEND") return;
    }
}

inline std::size_t first_idat_offset(std::span<const std::uint8_t> bytes) {
    std::size_t pos = 8;
    while (pos + 8 <= bytes.size()) {
        if (std::memcmp(&bytes[pos + 4], "IDAT", 4) == 0) return pos;
        pos += 12 + std::size_t{read_be32(&bytes[pos])};
    }
    return 8;
}

struct JpegErrorState {
    jpeg_error_mgr mgr;
    std::jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
};

extern "C" inline void jpeg_error_exit_jump(j_common_ptr cinfo) {
    auto* state = reinterpret_cast<JpegErrorState*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, state->message);
    std::longjmp(state->jump, 1);
}

// Corrupt-data warnings are fatal: a silently gray-filled image is worse than an error.
extern "C" inline void jpeg_emit_message_strict(j_common_ptr cinfo, int msg_level) {
    if (msg_level < 0) jpeg_error_exit_jump(cinfo);
}

extern "C" inline void jpeg_output_message_silent(j_common_ptr) {}

struct JpegDecodeResult {
    unsigned char* data = nullptr;
    unsigned width = 0;
    unsigned height = 0;
    std::size_t error_offset = 0;
    char message[JMSG_LENGTH_MAX] = {0};
};

// Only trivially destructible locals live in this frame: longjmp skips destructors.
inline bool jpeg_decode_raw(const std::uint8_t* bytes, std::size_t size, JpegDecodeResult* out) {
    jpeg_decompress_struct cinfo;
    JpegErrorState err;
    cinfo.err = jpeg_std_error(&err.mgr);
    err.mgr.error_exit = jpeg_error_exit_jump;
    err.mgr.emit_message = jpeg_emit_message_strict;
    err.mgr.output_message = jpeg_output_message_silent;
    if (setjmp(err.jump)) {
        out->error_offset = cinfo.src ? size - cinfo.src->bytes_in_buffer : 0;
        std::memcpy(out->message, err.message, sizeof(out->message));
        jpeg_destroy_decompress(&cinfo);
        std::free(out->data);
        out->data = nullptr;
        return false;
    }
    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, bytes, static_cast<unsigned long>(size));
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    out->width = cinfo.output_width;
    out->height = cinfo.output_height;
    const std::size_t stride = std::size_t{cinfo.output_width} * 3;
    out->data = static_cast<unsigned char*>(std::malloc(stride * cinfo.output_height));
    if (out->data == nullptr) {
        std::snprintf(out->message, sizeof(out->message), "out of memory");
        jpeg_destroy_decompress(&cinfo);
        return false;
    }
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = out->data + stride * cinfo.output_scanline;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return true;
}

struct JpegEncodeResult {
    unsigned char* data = nullptr;
    unsigned long size = 0;
    char message[JMSG_LENGTH_MAX] = {0};
};

inline bool jpeg_encode_raw(const std::uint8_t* pixels, unsigned width, unsigned height,
                            int quality, JpegEncodeResult* out) {
    jpeg_compress_struct cinfo;
    JpegErrorState err;
    cinfo.err = jpeg_std_error(&err.mgr);
    err.mgr.error_exit = jpeg_error_exit_jump;
    err.mgr.output_message = jpeg_output_message_silent;
    if (setjmp(err.jump)) {
        std::memcpy(out->message, err.message, sizeof(out->message));
        jpeg_destroy_compress(&cinfo);
        std::free(out->data);
        out->data = nullptr;
        return false;
    }
    jpeg_create_compress(&cinfo);
    jpeg_mem_dest(&cinfo, &out->data, &out->size);
    cinfo.image_width = width;
    cinfo.image_height = height;
    cinfo.input_components = 3;
    cinfo.in_color_space = JCS_RGB;
    jpeg_set_defaults(&cinfo);
    // IJG scaling of the Annex K reference tables, clamped to baseline-legal values.
    jpeg_set_quality(&cinfo, quality, TRUE);
    jpeg_start_compress(&cinfo, TRUE);
    const std::size_t stride = std::size_t{width} * 3;
    while (cinfo.next_scanline < cinfo.image_height) {
        auto row = const_cast<JSAMPROW>(pixels + stride * cinfo.next_scanline);
        jpeg_write_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_compress(&cinfo);
    jpeg_destroy_compress(&cinfo);
    return true;
}

}  // namespace detail

inline RgbImage decode_png(std::span<const std::uint8_t> bytes) {
    detail::validate_png_chunks(bytes);
    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
        throw DecodeError(8, std::string("PNG header: ") + image.message);
    }
    if (image.width == 0 || image.height == 0) {
        png_image_free(&image);
        throw DecodeError(8, "PNG has zero dimension");
    }
    image.format = PNG_FORMAT_RGB;
    RgbImage out(image.width, image.height);
    if (!png_image_finish_read(&image, nullptr, out.pixels.data(), 0, nullptr)) {
        const std::string msg = image.message;
        png_image_free(&image);
        throw DecodeError(detail::first_idat_offset(bytes), "PNG data: " + msg);
    }
    return out;
}

inline RgbImage decode_jpeg(std::span<const std::uint8_t> bytes) {
    detail::JpegDecodeResult result;
    if (!detail::jpeg_decode_raw(bytes.data(), bytes.size(), &result)) {
        throw DecodeError(result.error_offset, std::string("JPEG: ") + result.message);
    }
    RgbImage out(result.width, result.height);
    std::memcpy(out.pixels.data(), result.data, out.pixels.size());
    std::free(result.data);
    return out;
}

/// Decodes a PNG or baseline JPEG stream, dispatching on magic bytes.
inline RgbImage decode_image(std::span<const std::uint8_t> bytes) {
    if (has_png_magic(bytes)) return decode_png(bytes);
    if (has_jpeg_magic(bytes)) return decode_jpeg(bytes);
    throw UnsupportedFormatError("unsupported image format (expected PNG or JPEG magic bytes)");
}

inline std::vector<std::uint8_t> encode_png(const RgbImage& img) {
    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(img.width);
    image.height = static_cast<png_uint_32>(img.height);
    image.format = PNG_FORMAT_RGB;
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&image, nullptr, &size, 0, img.pixels.data(), 0, nullptr)) {
        throw ArgumentError(std::string("PNG encode: ") + image.message);
    }
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&image, out.data(), &size, 0, img.pixels.data(), 0, nullptr)) {
        throw ArgumentError(std::string("PNG encode: ") + image.message);
    }
    out.resize(size);
    return out;
}

inline std::vector<std::uint8_t> encode_jpeg(const RgbImage& img, int quality) {
    if (quality < 1 || quality > 100) throw ArgumentError("JPEG quality must be in [1, 100]");
    detail::JpegEncodeResult result;
    if (!detail::jpeg_encode_raw(img.pixels.data(), static_cast<unsigned>(img.width),
                                 static_cast<unsigned>(img.height), quality, &result)) {
        throw ArgumentError(std::string("JPEG encode: ") + result.message);
    }
    std::vector<std::uint8_t> out(result.data, result.data + result.size);
    std::free(result.data);
    return out;
}

}  // namespace aide
