#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "dwmark/common.hpp"

namespace dwmark {

// 8-bit interleaved RGB image, row major.
struct ImageBuffer {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> pixels;

    ImageBuffer() = default;
    ImageBuffer(int h, int w, std::uint8_t fill = 0)
        : height(h), width(w), pixels(static_cast<std::size_t>(h) * w * 3, fill) {
        if (h < 1 || w < 1) throw std::invalid_argument("ImageBuffer: dimensions must be >= 1");
    }

    std::uint8_t& at(int y, int x, int c) {
        return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }
    std::uint8_t at(int y, int x, int c) const {
        return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }

    bool same_size(const ImageBuffer& o) const { return height == o.height && width == o.width; }
    std::size_t pixel_count() const { return static_cast<std::size_t>(height) * width; }

    bool operator==(const ImageBuffer& o) const {
        return height == o.height && width == o.width && pixels == o.pixels;
    }
};

// Per-pixel binary map. Values are 0 or 1.
struct MaskBuffer {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> values;

    MaskBuffer() = default;
    MaskBuffer(int h, int w, std::uint8_t fill = 0)
        : height(h), width(w), values(static_cast<std::size_t>(h) * w, fill ? 1 : 0) {
        if (h < 1 || w < 1) throw std::invalid_argument("MaskBuffer: dimensions must be >= 1");
    }

    std::uint8_t& at(int y, int x) { return values[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }

    bool same_size(const MaskBuffer& o) const { return height == o.height && width == o.width; }
    std::size_t count_set() const {
        std::size_t n = 0;
        for (auto v : values) n += (v != 0);
        return n;
    }

    bool operator==(const MaskBuffer& o) const {
        return height == o.height && width == o.width && values == o.values;
    }
};

// BT.601 luma.
inline double luma(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    return 0.299 * r + 0.587 * g + 0.114 * b;
}

inline std::vector<double> luma_plane(const ImageBuffer& img) {
    std::vector<double> y(img.pixel_count());
    for (std::size_t i = 0; i < y.size(); ++i) {
        y[i] = luma(img.pixels[i * 3], img.pixels[i * 3 + 1], img.pixels[i * 3 + 2]);
    }
    return y;
}

inline ImageBuffer crop(const ImageBuffer& img, int y0, int x0, int h, int w) {
    if (h < 1 || w < 1 || y0 < 0 || x0 < 0 || y0 + h > img.height || x0 + w > img.width)
        throw std::invalid_argument("crop: rectangle out of bounds");
    ImageBuffer out(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y0 + y, x0 + x, c);
    return out;
}

// Copies `src` into `dst` at (y0, x0). Portions falling outside dst are dropped.
inline void paste(ImageBuffer& dst, const ImageBuffer& src, int y0, int x0) {
    int ys = std::max(0, -y0), xs = std::max(0, -x0);
    int ye = std::min(src.height, dst.height - y0);
    int xe = std::min(src.width, dst.width - x0);
    for (int y = ys; y < ye; ++y)
        for (int x = xs; x < xe; ++x)
            for (int c = 0; c < 3; ++c) dst.at(y0 + y, x0 + x, c) = src.at(y, x, c);
}

namespace detail {

// Single bilinear tap with border replication, per channel.
inline double sample_bilinear_clamped(const ImageBuffer& img, double sy, double sx, int c) {
    int x0 = static_cast<int>(std::floor(sx));
    int y0 = static_cast<int>(std::floor(sy));
    double fx = sx - x0, fy = sy - y0;
    auto cl = [](int v, int hi) { return v < 0 ? 0 : (v > hi ? hi : v); };
    int x1 = cl(x0 + 1, img.width - 1), y1 = cl(y0 + 1, img.height - 1);
    x0 = cl(x0, img.width - 1);
    y0 = cl(y0, img.height - 1);
    double top = img.at(y0, x0, c) * (1.0 - fx) + img.at(y0, x1, c) * fx;
    double bot = img.at(y1, x0, c) * (1.0 - fx) + img.at(y1, x1, c) * fx;
    return top * (1.0 - fy) + bot * fy;
}

// Bilinear tap that treats everything outside the canvas as `fill`.
inline double sample_bilinear_fill(const ImageBuffer& img, double sy, double sx, int c, double fill) {
    int x0 = static_cast<int>(std::floor(sx));
    int y0 = static_cast<int>(std::floor(sy));
    double fx = sx - x0, fy = sy - y0;
    auto px = [&](int y, int x) -> double {
        if (y < 0 || x < 0 || y >= img.height || x >= img.width) return fill;
        return img.at(y, x, c);
    };
    double top = px(y0, x0) * (1.0 - fx) + px(y0, x0 + 1) * fx;
    double bot = px(y0 + 1, x0) * (1.0 - fx) + px(y0 + 1, x0 + 1) * fx;
    return top * (1.0 - fy) + bot * fy;
}

}  // namespace detail

// Bilinear resize with align-centers source mapping.
inline ImageBuffer resize_bilinear(const ImageBuffer& img, int out_h, int out_w) {
    if (out_h < 1 || out_w < 1) throw std::invalid_argument("resize_bilinear: bad target size");
    ImageBuffer out(out_h, out_w);
    double ry = static_cast<double>(img.height) / out_h;
    double rx = static_cast<double>(img.width) / out_w;
    for (int y = 0; y < out_h; ++y) {
        double sy = (y + 0.5) * ry - 0.5;
        for (int x = 0; x < out_w; ++x) {
            double sx = (x + 0.5) * rx - 0.5;
            for (int c = 0; c < 3; ++c)
                out.at(y, x, c) = clamp_u8(detail::sample_bilinear_clamped(img, sy, sx, c));
        }
    }
    return out;
}

// General affine warp: for each output pixel p, samples the input at A*p + b
// (pixel centers on the integer grid). Out-of-canvas taps read `fill`.
inline ImageBuffer warp_affine_bilinear(const ImageBuffer& img, int out_h, int out_w,
                                        double a00, double a01, double a10, double a11,
                                        double bx, double by, double fill = 0.0) {
    ImageBuffer out(out_h, out_w);
    for (int y = 0; y < out_h; ++y) {
        for (int x = 0; x < out_w; ++x) {
            double sx = a00 * x + a01 * y + bx;
            double sy = a10 * x + a11 * y + by;
            for (int c = 0; c < 3; ++c)
                out.at(y, x, c) = clamp_u8(detail::sample_bilinear_fill(img, sy, sx, c, fill));
        }
    }
    return out;
}

// Mask counterpart of warp_affine_bilinear: bilinear on {0,1} then threshold at 0.5.
inline MaskBuffer warp_affine_mask(const MaskBuffer& mask, int out_h, int out_w,
                                   double a00, double a01, double a10, double a11,
                                   double bx, double by) {
    MaskBuffer out(out_h, out_w);
    auto px = [&](int y, int x) -> double {
        if (y < 0 || x < 0 || y >= mask.height || x >= mask.width) return 0.0;
        return mask.at(y, x);
    };
    for (int y = 0; y < out_h; ++y) {
        for (int x = 0; x < out_w; ++x) {
            double sx = a00 * x + a01 * y + bx;
            double sy = a10 * x + a11 * y + by;
            int x0 = static_cast<int>(std::floor(sx));
            int y0 = static_cast<int>(std::floor(sy));
            double fx = sx - x0, fy = sy - y0;
            double top = px(y0, x0) * (1.0 - fx) + px(y0, x0 + 1) * fx;
            double bot = px(y0 + 1, x0) * (1.0 - fx) + px(y0 + 1, x0 + 1) * fx;
            out.at(y, x) = (top * (1.0 - fy) + bot * fy) >= 0.5 ? 1 : 0;
        }
    }
    return out;
}

inline MaskBuffer resize_mask(const MaskBuffer& mask, int out_h, int out_w) {
    double ry = static_cast<double>(mask.height) / out_h;
    double rx = static_cast<double>(mask.width) / out_w;
    // x -> (x + 0.5) * r - 0.5 expressed as an affine map
    return warp_affine_mask(mask, out_h, out_w, rx, 0.0, 0.0, ry, 0.5 * rx - 0.5, 0.5 * ry - 0.5);
}

// Canvas size of a rotated image, expanded to the rotated bounding box.
inline void rotated_canvas(int h, int w, double angle_deg, int& out_h, int& out_w) {
    double rad = angle_deg * 3.14159265358979323846 / 180.0;
    double ca = std::fabs(std::cos(rad)), sa = std::fabs(std::sin(rad));
    out_w = static_cast<int>(std::llround(w * ca + h * sa));
    out_h = static_cast<int>(std::llround(h * ca + w * sa));
}

namespace detail {

// Affine coefficients for rotating about the image center onto an expanded
// canvas. Positive angles rotate content counter-clockwise in (x right, y down)
// coordinates.
struct RotMap {
    double a00, a01, a10, a11, bx, by;
    int out_h, out_w;
};

inline RotMap rotation_map(int h, int w, double angle_deg) {
    RotMap m{};
    rotated_canvas(h, w, angle_deg, m.out_h, m.out_w);
    double rad = angle_deg * 3.14159265358979323846 / 180.0;
    double ca = std::cos(rad), sa = std::sin(rad);
    double cx_in = (w - 1) * 0.5, cy_in = (h - 1) * 0.5;
    double cx_out = (m.out_w - 1) * 0.5, cy_out = (m.out_h - 1) * 0.5;
    // inverse mapping: output -> input rotates by -angle
    m.a00 = ca;
    m.a01 = -sa;
    m.a10 = sa;
    m.a11 = ca;
    m.bx = cx_in - (ca * cx_out - sa * cy_out);
    m.by = cy_in - (sa * cx_out + ca * cy_out);
    return m;
}

}  // namespace detail

inline ImageBuffer rotate_bilinear(const ImageBuffer& img, double angle_deg, double fill = 0.0) {
    auto m = detail::rotation_map(img.height, img.width, angle_deg);
    return warp_affine_bilinear(img, m.out_h, m.out_w, m.a00, m.a01, m.a10, m.a11, m.bx, m.by, fill);
}

inline MaskBuffer rotate_mask(const MaskBuffer& mask, double angle_deg) {
    auto m = detail::rotation_map(mask.height, mask.width, angle_deg);
    return warp_affine_mask(mask, m.out_h, m.out_w, m.a00, m.a01, m.a10, m.a11, m.bx, m.by);
}

inline ImageBuffer pad_image(const ImageBuffer& img, int top, int bottom, int left, int right,
                             std::uint8_t fill = 0) {
    if (top < 0 || bottom < 0 || left < 0 || right < 0)
        throw std::invalid_argument("pad_image: negative padding");
    ImageBuffer out(img.height + top + bottom, img.width + left + right, fill);
    paste(out, img, top, left);
    return out;
}

// Separable Gaussian blur; sigma follows the usual kernel-size convention
// sigma = 0.3*((ks-1)*0.5 - 1) + 0.8. Borders replicate.
inline ImageBuffer gaussian_blur(const ImageBuffer& img, int ksize) {
    if (ksize < 1 || ksize % 2 == 0) throw std::invalid_argument("gaussian_blur: kernel size must be odd");
    double sigma = 0.3 * ((ksize - 1) * 0.5 - 1.0) + 0.8;
    int r = ksize / 2;
    std::vector<double> k(ksize);
    double sum = 0;
    for (int i = 0; i < ksize; ++i) {
        double d = i - r;
        k[i] = std::exp(-d * d / (2.0 * sigma * sigma));
        sum += k[i];
    }
    for (auto& v : k) v /= sum;

    auto clampi = [](int v, int hi) { return v < 0 ? 0 : (v > hi ? hi : v); };
    std::vector<double> tmp(img.pixel_count() * 3);
    // horizontal
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) {
                double acc = 0;
                for (int i = -r; i <= r; ++i) acc += k[i + r] * img.at(y, clampi(x + i, img.width - 1), c);
                tmp[(static_cast<std::size_t>(y) * img.width + x) * 3 + c] = acc;
            }
    // vertical
    ImageBuffer out(img.height, img.width);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) {
                double acc = 0;
                for (int i = -r; i <= r; ++i) {
                    int yy = clampi(y + i, img.height - 1);
                    acc += k[i + r] * tmp[(static_cast<std::size_t>(yy) * img.width + x) * 3 + c];
                }
                out.at(y, x, c) = clamp_u8(acc);
            }
    return out;
}

}  // namespace dwmark
