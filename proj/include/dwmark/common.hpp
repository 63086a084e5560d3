#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace dwmark {

// Rounding convention used everywhere a float value becomes an 8-bit pixel:
// round half away from zero, then clamp.
inline int round_half_up(double v) {
    return static_cast<int>(std::floor(v + 0.5));
}

inline std::uint8_t clamp_u8(double v) {
    int r = round_half_up(v);
    if (r < 0) r = 0;
    if (r > 255) r = 255;
    return static_cast<std::uint8_t>(r);
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t fnv1a64_u64(std::uint64_t v, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (int i = 0; i < 8; ++i) {
        h ^= (v >> (8 * i)) & 0xff;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Seed derivation for fan-out streams: mixing a master seed with labels and
// indices so adding a stream never perturbs the draws of another.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view label, std::uint64_t index = 0) {
    return splitmix64(fnv1a64_u64(index, fnv1a64(label, fnv1a64_u64(master))));
}

// Deterministic random stream. mt19937_64 output is pinned by the standard;
// the distribution mappings below are spelled out by hand because the
// std::*_distribution adapters are not portable across library vendors.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // [0, 1)
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

    // [0, n)
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("Rng::below: n must be positive");
        return static_cast<std::uint64_t>(static_cast<unsigned __int128>(next_u64()) * n >> 64);
    }

    // inclusive range
    int uniform_int(int lo, int hi) {
        return lo + static_cast<int>(below(static_cast<std::uint64_t>(hi - lo + 1)));
    }

    // Box-Muller, two draws per value.
    double normal() {
        double u1 = 1.0 - next_unit();
        double u2 = next_unit();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace dwmark
