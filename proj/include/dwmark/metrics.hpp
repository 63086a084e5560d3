#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "dwmark/image.hpp"
#include "dwmark/message.hpp"

namespace dwmark {

inline double bit_accuracy(const Message& decoded, const Message& truth) {
    if (decoded.size() != truth.size() || decoded.empty())
        throw std::invalid_argument("bit_accuracy: length mismatch");
    int match = 0;
    for (std::size_t i = 0; i < decoded.size(); ++i) match += (decoded[i] == truth[i]);
    return static_cast<double>(match) / static_cast<double>(decoded.size());
}

// Identical images report the documented 99.0 dB cap instead of infinity.
inline constexpr double kPsnrCap = 99.0;

inline double mse(const ImageBuffer& a, const ImageBuffer& b) {
    if (!a.same_size(b)) throw std::invalid_argument("mse: dimension mismatch");
    double acc = 0;
    for (std::size_t i = 0; i < a.pixels.size(); ++i) {
        double d = static_cast<double>(a.pixels[i]) - static_cast<double>(b.pixels[i]);
        acc += d * d;
    }
    return acc / static_cast<double>(a.pixels.size());
}

inline double psnr(const ImageBuffer& a, const ImageBuffer& b) {
    double m = mse(a, b);
    if (m <= 0.0) return kPsnrCap;
    double v = 10.0 * std::log10(255.0 * 255.0 / m);
    return v > kPsnrCap ? kPsnrCap : v;
}

inline double byte_increase_rate(std::size_t cover_file_bytes, std::size_t wm_file_bytes) {
    if (cover_file_bytes == 0) throw std::invalid_argument("byte_increase_rate: zero cover size");
    return 100.0 * (static_cast<double>(wm_file_bytes) - static_cast<double>(cover_file_bytes)) /
           static_cast<double>(cover_file_bytes);
}

inline double mask_iou(const MaskBuffer& pred, const MaskBuffer& truth) {
    if (!pred.same_size(truth)) throw std::invalid_argument("mask_iou: dimension mismatch");
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < pred.values.size(); ++i) {
        bool p = pred.values[i] != 0, t = truth.values[i] != 0;
        inter += (p && t);
        uni += (p || t);
    }
    if (uni == 0) return 1.0;  // both empty
    return static_cast<double>(inter) / static_cast<double>(uni);
}

// ---------------------------------------------------------------------------
// MS-SSIM, canonical 5-scale form on luma: K1=0.01, K2=0.03, 11-tap Gaussian
// window with sigma 1.5, per-scale weights below. Images smaller than the
// 5-scale minimum fall back to the largest feasible scale count with the
// leading weights renormalized.
// ---------------------------------------------------------------------------

struct MsSsimResult {
    double value = 0.0;
    int scales_used = 0;
};

namespace detail {

inline constexpr std::array<double, 5> kMsSsimWeights = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
inline constexpr int kSsimWindow = 11;

struct Plane {
    int h = 0, w = 0;
    std::vector<double> v;
    double at(int y, int x) const { return v[static_cast<std::size_t>(y) * w + x]; }
};

inline Plane luma_to_plane(const ImageBuffer& img) {
    Plane p{img.height, img.width, luma_plane(img)};
    return p;
}

inline Plane downsample2(const Plane& p) {
    Plane o{p.h / 2, p.w / 2, {}};
    o.v.resize(static_cast<std::size_t>(o.h) * o.w);
    for (int y = 0; y < o.h; ++y)
        for (int x = 0; x < o.w; ++x)
            o.v[static_cast<std::size_t>(y) * o.w + x] =
                0.25 * (p.at(2 * y, 2 * x) + p.at(2 * y, 2 * x + 1) + p.at(2 * y + 1, 2 * x) +
                        p.at(2 * y + 1, 2 * x + 1));
    return o;
}

// Separable valid-region Gaussian filtering.
inline Plane gauss_valid(const Plane& p, const std::array<double, kSsimWindow>& k) {
    Plane tmp{p.h, p.w - kSsimWindow + 1, {}};
    tmp.v.resize(static_cast<std::size_t>(tmp.h) * tmp.w);
    for (int y = 0; y < p.h; ++y)
        for (int x = 0; x < tmp.w; ++x) {
            double acc = 0;
            for (int i = 0; i < kSsimWindow; ++i) acc += k[i] * p.at(y, x + i);
            tmp.v[static_cast<std::size_t>(y) * tmp.w + x] = acc;
        }
    Plane out{p.h - kSsimWindow + 1, tmp.w, {}};
    out.v.resize(static_cast<std::size_t>(out.h) * out.w);
    for (int y = 0; y < out.h; ++y)
        for (int x = 0; x < out.w; ++x) {
            double acc = 0;
            for (int i = 0; i < kSsimWindow; ++i) acc += k[i] * tmp.at(y + i, x);
            out.v[static_cast<std::size_t>(y) * out.w + x] = acc;
        }
    return out;
}

struct SsimTerms {
    double luminance = 0.0;          // mean of l map
    double contrast_structure = 0.0; // mean of cs map
};

inline SsimTerms ssim_terms(const Plane& a, const Plane& b) {
    std::array<double, kSsimWindow> k{};
    double sum = 0;
    for (int i = 0; i < kSsimWindow; ++i) {
        double d = i - (kSsimWindow - 1) / 2.0;
        k[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
        sum += k[i];
    }
    for (auto& v : k) v /= sum;

    Plane mu_a = gauss_valid(a, k), mu_b = gauss_valid(b, k);
    Plane a2{a.h, a.w, {}}, b2{a.h, a.w, {}}, ab{a.h, a.w, {}};
    a2.v.resize(a.v.size());
    b2.v.resize(a.v.size());
    ab.v.resize(a.v.size());
    for (std::size_t i = 0; i < a.v.size(); ++i) {
        a2.v[i] = a.v[i] * a.v[i];
        b2.v[i] = b.v[i] * b.v[i];
        ab.v[i] = a.v[i] * b.v[i];
    }
    Plane e_a2 = gauss_valid(a2, k), e_b2 = gauss_valid(b2, k), e_ab = gauss_valid(ab, k);

    const double c1 = (0.01 * 255) * (0.01 * 255);
    const double c2 = (0.03 * 255) * (0.03 * 255);
    double l_acc = 0, cs_acc = 0;
    for (std::size_t i = 0; i < mu_a.v.size(); ++i) {
        double ma = mu_a.v[i], mb = mu_b.v[i];
        double va = e_a2.v[i] - ma * ma;
        double vb = e_b2.v[i] - mb * mb;
        double vab = e_ab.v[i] - ma * mb;
        l_acc += (2 * ma * mb + c1) / (ma * ma + mb * mb + c1);
        cs_acc += (2 * vab + c2) / (va + vb + c2);
    }
    SsimTerms t;
    t.luminance = l_acc / static_cast<double>(mu_a.v.size());
    t.contrast_structure = cs_acc / static_cast<double>(mu_a.v.size());
    return t;
}

}  // namespace detail

inline MsSsimResult ms_ssim_ex(const ImageBuffer& a, const ImageBuffer& b) {
    if (!a.same_size(b)) throw std::invalid_argument("ms_ssim: dimension mismatch");
    int min_dim = std::min(a.height, a.width);
    int scales = 0;
    for (int m = 1; m <= 5; ++m) {
        if (min_dim / (1 << (m - 1)) >= detail::kSsimWindow) scales = m;
    }
    if (scales == 0) throw std::invalid_argument("ms_ssim: image smaller than the filter window");

    double wsum = 0;
    for (int j = 0; j < scales; ++j) wsum += detail::kMsSsimWeights[j];

    detail::Plane pa = detail::luma_to_plane(a), pb = detail::luma_to_plane(b);
    double value = 1.0;
    for (int j = 0; j < scales; ++j) {
        detail::SsimTerms t = detail::ssim_terms(pa, pb);
        double w = detail::kMsSsimWeights[j] / wsum;
        double cs = std::max(0.0, t.contrast_structure);
        value *= std::pow(cs, w);
        if (j == scales - 1) value *= std::pow(std::max(0.0, t.luminance), w);
        if (j + 1 < scales) {
            pa = detail::downsample2(pa);
            pb = detail::downsample2(pb);
        }
    }
    return {value, scales};
}

inline double ms_ssim(const ImageBuffer& a, const ImageBuffer& b) { return ms_ssim_ex(a, b).value; }

}  // namespace dwmark
