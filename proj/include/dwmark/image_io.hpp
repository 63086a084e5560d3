#pragma once

#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <jpeglib.h>
#include <png.h>

#include "dwmark/image.hpp"

namespace dwmark {

// ---------------------------------------------------------------------------
// PNG
// ---------------------------------------------------------------------------

inline ImageBuffer read_png(const std::string& path) {
    FILE* fp = std::fopen(path.c_str(), "rb");
    if (!fp) throw std::runtime_error("read_png: cannot open " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        std::fclose(fp);
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("read_png: libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw std::runtime_error("read_png: decode error in " + path);
    }
    png_init_io(png, fp);
    png_read_info(png, info);

    png_uint_32 w = png_get_image_width(png, info);
    png_uint_32 h = png_get_image_height(png, info);
    int bit_depth = png_get_bit_depth(png, info);
    int color_type = png_get_color_type(png, info);

    if (bit_depth == 16) png_set_strip_16(png);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);

    ImageBuffer img(static_cast<int>(h), static_cast<int>(w));
    std::vector<png_bytep> rows(h);
    for (png_uint_32 y = 0; y < h; ++y) rows[y] = img.pixels.data() + static_cast<std::size_t>(y) * w * 3;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    return img;
}

inline void write_png(const ImageBuffer& img, const std::string& path) {
    FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw std::runtime_error("write_png: cannot open " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        std::fclose(fp);
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("write_png: libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw std::runtime_error("write_png: encode error for " + path);
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(img.height);
    for (int y = 0; y < img.height; ++y)
        rows[y] = const_cast<png_bytep>(img.pixels.data() + static_cast<std::size_t>(y) * img.width * 3);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

// Masks persist as 1-bit grayscale PNG.
inline void write_mask_png(const MaskBuffer& mask, const std::string& path) {
    FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw std::runtime_error("write_mask_png: cannot open " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        std::fclose(fp);
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("write_mask_png: libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw std::runtime_error("write_mask_png: encode error for " + path);
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, mask.width, mask.height, 1, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    int stride = (mask.width + 7) / 8;
    std::vector<std::uint8_t> packed(static_cast<std::size_t>(stride) * mask.height, 0);
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x)
            if (mask.at(y, x)) packed[static_cast<std::size_t>(y) * stride + x / 8] |= 0x80 >> (x % 8);
    std::vector<png_bytep> rows(mask.height);
    for (int y = 0; y < mask.height; ++y) rows[y] = packed.data() + static_cast<std::size_t>(y) * stride;
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

inline MaskBuffer read_mask_png(const std::string& path) {
    ImageBuffer img = read_png(path);
    MaskBuffer mask(img.height, img.width);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) mask.at(y, x) = img.at(y, x, 0) >= 128 ? 1 : 0;
    return mask;
}

// ---------------------------------------------------------------------------
// JPEG (in-memory, used by the attack simulator and for .jpg files)
// ---------------------------------------------------------------------------

namespace detail {

struct JpegErrorMgr {
    jpeg_error_mgr pub;
    std::jmp_buf jump;
};

inline void jpeg_error_exit(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
    std::longjmp(err->jump, 1);
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_jpeg(const ImageBuffer& img, int quality) {
    if (quality < 1 || quality > 100) throw std::invalid_argument("encode_jpeg: quality out of range");
    jpeg_compress_struct cinfo{};
    detail::JpegErrorMgr err{};
    cinfo.err = jpeg_std_error(&err.pub);
    err.pub.error_exit = detail::jpeg_error_exit;

    unsigned char* buf = nullptr;
    unsigned long buf_size = 0;
    if (setjmp(err.jump)) {
        jpeg_destroy_compress(&cinfo);
        if (buf) free(buf);
        throw std::runtime_error("encode_jpeg: compression failed");
    }
    jpeg_create_compress(&cinfo);
    jpeg_mem_dest(&cinfo, &buf, &buf_size);
    cinfo.image_width = static_cast<JDIMENSION>(img.width);
    cinfo.image_height = static_cast<JDIMENSION>(img.height);
    cinfo.input_components = 3;
    cinfo.in_color_space = JCS_RGB;
    jpeg_set_defaults(&cinfo);
    jpeg_set_quality(&cinfo, quality, TRUE);
    jpeg_start_compress(&cinfo, TRUE);
    while (cinfo.next_scanline < cinfo.image_height) {
        JSAMPROW row = const_cast<JSAMPROW>(
            img.pixels.data() + static_cast<std::size_t>(cinfo.next_scanline) * img.width * 3);
        jpeg_write_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_compress(&cinfo);
    jpeg_destroy_compress(&cinfo);
    std::vector<std::uint8_t> out(buf, buf + buf_size);
    free(buf);
    return out;
}

inline ImageBuffer decode_jpeg(const std::vector<std::uint8_t>& data) {
    jpeg_decompress_struct cinfo{};
    detail::JpegErrorMgr err{};
    cinfo.err = jpeg_std_error(&err.pub);
    err.pub.error_exit = detail::jpeg_error_exit;
    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&cinfo);
        throw std::runtime_error("decode_jpeg: decompression failed");
    }
    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, data.data(), static_cast<unsigned long>(data.size()));
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    ImageBuffer img(static_cast<int>(cinfo.output_height), static_cast<int>(cinfo.output_width));
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = img.pixels.data() + static_cast<std::size_t>(cinfo.output_scanline) * img.width * 3;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return img;
}

inline ImageBuffer jpeg_round_trip(const ImageBuffer& img, int quality) {
    return decode_jpeg(encode_jpeg(img, quality));
}

// ---------------------------------------------------------------------------
// Extension dispatch
// ---------------------------------------------------------------------------

inline bool has_suffix(const std::string& s, const std::string& suf) {
    return s.size() >= suf.size() && std::equal(suf.rbegin(), suf.rend(), s.rbegin(), [](char a, char b) {
               return std::tolower(static_cast<unsigned char>(a)) == std::tolower(static_cast<unsigned char>(b));
           });
}

inline ImageBuffer read_image(const std::string& path) {
    if (has_suffix(path, ".jpg") || has_suffix(path, ".jpeg")) {
        FILE* fp = std::fopen(path.c_str(), "rb");
        if (!fp) throw std::runtime_error("read_image: cannot open " + path);
        std::fseek(fp, 0, SEEK_END);
        long n = std::ftell(fp);
        std::fseek(fp, 0, SEEK_SET);
        std::vector<std::uint8_t> data(static_cast<std::size_t>(n));
        if (std::fread(data.data(), 1, data.size(), fp) != data.size()) {
            std::fclose(fp);
            throw std::runtime_error("read_image: short read on " + path);
        }
        std::fclose(fp);
        return decode_jpeg(data);
    }
    return read_png(path);
}

inline void write_image(const ImageBuffer& img, const std::string& path, int jpeg_quality = 95) {
    if (has_suffix(path, ".jpg") || has_suffix(path, ".jpeg")) {
        auto data = encode_jpeg(img, jpeg_quality);
        FILE* fp = std::fopen(path.c_str(), "wb");
        if (!fp) throw std::runtime_error("write_image: cannot open " + path);
        if (std::fwrite(data.data(), 1, data.size(), fp) != data.size()) {
            std::fclose(fp);
            throw std::runtime_error("write_image: short write on " + path);
        }
        std::fclose(fp);
        return;
    }
    write_png(img, path);
}

}  // namespace dwmark
