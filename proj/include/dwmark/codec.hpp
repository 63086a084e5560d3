#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "dwmark/common.hpp"
#include "dwmark/image.hpp"
#include "dwmark/message.hpp"
#include "dwmark/metrics.hpp"

namespace dwmark {

// Key for the reference codec. The seed drives every pseudo-random carrier
// pattern; decoding with the embedding key on an unattacked block recovers
// the message exactly.
struct CodecKey {
    std::uint64_t seed = 0;
};

inline constexpr int kBlockSize = 128;
inline constexpr double kDefaultTargetPsnr = 35.0;

namespace detail {

inline constexpr int kCodecTile = 8;

// Luminance DCT coefficients carrying the watermark, one set per 8x8 tile.
// All sit below ~0.19 cycles/px so the carrier survives moderate blur,
// half-scale resampling and JPEG quantization.
inline constexpr std::array<std::pair<int, int>, 8> kMidBand = {
    {{0, 2}, {1, 1}, {2, 0}, {0, 3}, {1, 2}, {2, 1}, {3, 0}, {2, 2}}};

struct Dct8 {
    std::array<std::array<double, 8>, 8> c{};  // c[k][n]

    Dct8() {
        for (int k = 0; k < 8; ++k) {
            double s = k == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
            for (int n = 0; n < 8; ++n)
                c[k][n] = s * std::cos((2 * n + 1) * k * 3.14159265358979323846 / 16.0);
        }
    }

    static const Dct8& instance() {
        static const Dct8 d;
        return d;
    }

    // B = C X C^T
    void forward(const double* in, double* out) const {
        double tmp[64];
        for (int k = 0; k < 8; ++k)
            for (int n = 0; n < 8; ++n) {
                double acc = 0;
                for (int m = 0; m < 8; ++m) acc += c[k][m] * in[m * 8 + n];
                tmp[k * 8 + n] = acc;
            }
        for (int k = 0; k < 8; ++k)
            for (int l = 0; l < 8; ++l) {
                double acc = 0;
                for (int n = 0; n < 8; ++n) acc += tmp[k * 8 + n] * c[l][n];
                out[k * 8 + l] = acc;
            }
    }

    // X = C^T B C
    void inverse(const double* in, double* out) const {
        double tmp[64];
        for (int m = 0; m < 8; ++m)
            for (int l = 0; l < 8; ++l) {
                double acc = 0;
                for (int k = 0; k < 8; ++k) acc += c[k][m] * in[k * 8 + l];
                tmp[m * 8 + l] = acc;
            }
        for (int m = 0; m < 8; ++m)
            for (int n = 0; n < 8; ++n) {
                double acc = 0;
                for (int l = 0; l < 8; ++l) acc += tmp[m * 8 + l] * c[l][n];
                out[m * 8 + n] = acc;
            }
    }
};

inline int codec_slot_count(int block) {
    int tiles = block / kCodecTile;
    return tiles * tiles * static_cast<int>(kMidBand.size());
}

// One +/-1 carrier per message bit over all coefficient slots.
inline std::vector<std::int8_t> make_carriers(CodecKey key, int bits, int slots) {
    std::vector<std::int8_t> sign(static_cast<std::size_t>(bits) * slots);
    Rng rng(splitmix64(key.seed));
    for (std::size_t i = 0; i < sign.size(); ++i) sign[i] = (rng.next_u64() & 1) ? 1 : -1;
    return sign;
}

inline void validate_block(const ImageBuffer& block) {
    if (block.height != block.width || block.height < 2 * kCodecTile || block.height % kCodecTile != 0)
        throw std::invalid_argument("codec: block must be square with side a multiple of 8");
}

// Mid-band luminance DCT coefficients of every tile, in slot order.
inline std::vector<double> midband_coefficients(const ImageBuffer& block) {
    const int n = block.height;
    const int tiles = n / kCodecTile;
    std::vector<double> y = luma_plane(block);
    std::vector<double> coeffs(static_cast<std::size_t>(codec_slot_count(n)));
    const Dct8& dct = Dct8::instance();
    double tile_in[64], tile_out[64];
    std::size_t s = 0;
    for (int ty = 0; ty < tiles; ++ty)
        for (int tx = 0; tx < tiles; ++tx) {
            for (int i = 0; i < 8; ++i)
                for (int j = 0; j < 8; ++j)
                    tile_in[i * 8 + j] = y[static_cast<std::size_t>(ty * 8 + i) * n + tx * 8 + j];
            dct.forward(tile_in, tile_out);
            for (auto [u, v] : kMidBand) coeffs[s++] = tile_out[u * 8 + v];
        }
    return coeffs;
}

// Spatial luminance field whose tile DCTs equal the given mid-band values.
inline std::vector<double> midband_to_spatial(const std::vector<double>& coeffs, int block) {
    const int tiles = block / kCodecTile;
    std::vector<double> delta(static_cast<std::size_t>(block) * block, 0.0);
    const Dct8& dct = Dct8::instance();
    double tile_in[64], tile_out[64];
    std::size_t s = 0;
    for (int ty = 0; ty < tiles; ++ty)
        for (int tx = 0; tx < tiles; ++tx) {
            for (int i = 0; i < 64; ++i) tile_in[i] = 0.0;
            for (auto [u, v] : kMidBand) tile_in[u * 8 + v] = coeffs[s++];
            dct.inverse(tile_in, tile_out);
            for (int i = 0; i < 8; ++i)
                for (int j = 0; j < 8; ++j)
                    delta[static_cast<std::size_t>(ty * 8 + i) * block + tx * 8 + j] = tile_out[i * 8 + j];
        }
    return delta;
}

// The luminance residual is written to all three channels equally; BT.601
// luma of the result then shifts by exactly the residual while chroma stays
// untouched.
inline ImageBuffer apply_residual(const ImageBuffer& cover, const std::vector<double>& delta) {
    ImageBuffer out(cover.height, cover.width);
    for (std::size_t p = 0; p < cover.pixel_count(); ++p)
        for (int c = 0; c < 3; ++c)
            out.pixels[p * 3 + c] = clamp_u8(static_cast<double>(cover.pixels[p * 3 + c]) + delta[p]);
    return out;
}

// Fixed squashing scale for decode soft values, calibrated to the nominal
// carrier amplitude at the 35 dB operating point.
inline double squash_scale(int block, int bits) {
    double slots = codec_slot_count(block);
    double mse35 = 255.0 * 255.0 * std::pow(10.0, -kDefaultTargetPsnr / 10.0);
    double nominal_amp = std::sqrt(mse35 * block * block / (slots * bits));
    return 0.3 * slots * nominal_amp;
}

}  // namespace detail

// Embeds `msg` into `cover` and hits `target_psnr` within +/-0.5 dB after
// 8-bit quantization. Each bit rides a keyed +/-1 carrier over the mid-band
// tile coefficients; the cover's own correlation with every carrier is
// cancelled so that decoding the unattacked block is exact for any cover the
// distortion budget allows.
inline ImageBuffer embed_block(const ImageBuffer& cover, const Message& msg, CodecKey key,
                               double target_psnr = kDefaultTargetPsnr) {
    detail::validate_block(cover);
    validate_message(msg);
    if (msg.empty()) throw std::invalid_argument("embed_block: empty message");
    const int n = cover.height;
    const int bits = static_cast<int>(msg.size());
    const int slots = detail::codec_slot_count(n);

    std::vector<std::int8_t> carrier = detail::make_carriers(key, bits, slots);
    std::vector<double> host = detail::midband_coefficients(cover);

    // Host correlation per bit, then its projection back onto the carriers.
    std::vector<double> rho(bits, 0.0);
    for (int i = 0; i < bits; ++i) {
        const std::int8_t* ci = carrier.data() + static_cast<std::size_t>(i) * slots;
        double acc = 0;
        for (int s = 0; s < slots; ++s) acc += ci[s] * host[s];
        rho[i] = acc;
    }
    std::vector<double> reject(slots, 0.0);
    for (int i = 0; i < bits; ++i) {
        const std::int8_t* ci = carrier.data() + static_cast<std::size_t>(i) * slots;
        double r = rho[i] / slots;
        for (int s = 0; s < slots; ++s) reject[s] += ci[s] * r;
    }
    std::vector<double> pattern(slots, 0.0);
    for (int i = 0; i < bits; ++i) {
        const std::int8_t* ci = carrier.data() + static_cast<std::size_t>(i) * slots;
        double m = msg[i] ? 1.0 : -1.0;
        for (int s = 0; s < slots; ++s) pattern[s] += ci[s] * m;
    }

    // Amplitude from the closed-form energy budget: sum (amp*g - r)^2 = E.
    double budget = 255.0 * 255.0 * std::pow(10.0, -target_psnr / 10.0) * n * n;
    double a = 0, b = 0, c = 0;
    for (int s = 0; s < slots; ++s) {
        a += pattern[s] * pattern[s];
        b += pattern[s] * reject[s];
        c += reject[s] * reject[s];
    }
    double disc = b * b - a * (c - budget);
    if (disc < 0) {
        // Host rejection alone would blow the budget (extreme covers); give
        // it half the budget and spend the rest on signal.
        double lambda = std::sqrt(0.5 * budget / c);
        for (auto& v : reject) v *= lambda;
        b *= lambda;
        c *= lambda * lambda;
        disc = b * b - a * (c - budget);
    }
    double amp = (b + std::sqrt(disc)) / a;

    std::vector<double> coeff_delta(slots);
    for (int s = 0; s < slots; ++s) coeff_delta[s] = amp * pattern[s] - reject[s];
    std::vector<double> delta = detail::midband_to_spatial(coeff_delta, n);

    ImageBuffer out = detail::apply_residual(cover, delta);
    double realized = psnr(out, cover);
    if (std::fabs(realized - target_psnr) > 0.5) {
        double scale = std::pow(10.0, (realized - target_psnr) / 20.0);
        for (auto& v : delta) v *= scale;
        out = detail::apply_residual(cover, delta);
    }
    return out;
}

// Per-bit carrier correlation squashed into [0, 1]; values >= 0.5 vote 1.
inline SoftMessage decode_block(const ImageBuffer& block, CodecKey key, int bits = kMessageLength) {
    detail::validate_block(block);
    if (bits < 1) throw std::invalid_argument("decode_block: bits must be positive");
    const int n = block.height;
    const int slots = detail::codec_slot_count(n);
    std::vector<std::int8_t> carrier = detail::make_carriers(key, bits, slots);
    std::vector<double> coeffs = detail::midband_coefficients(block);

    double kappa = detail::squash_scale(n, bits);
    SoftMessage soft(bits);
    for (int i = 0; i < bits; ++i) {
        const std::int8_t* ci = carrier.data() + static_cast<std::size_t>(i) * slots;
        double corr = 0;
        for (int s = 0; s < slots; ++s) corr += ci[s] * coeffs[s];
        soft[i] = 1.0 / (1.0 + std::exp(-corr / kappa));
    }
    return soft;
}

}  // namespace dwmark
