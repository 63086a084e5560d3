#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace dwmark {

inline constexpr int kMessageLength = 30;

// Hard binary message of length L. Elements are 0 or 1.
using Message = std::vector<std::uint8_t>;

// Soft-decoded message; per-bit confidence in [0, 1], 0.5 is "no idea".
using SoftMessage = std::vector<double>;

inline void validate_message(const Message& m, int expected_len = -1) {
    if (expected_len >= 0 && static_cast<int>(m.size()) != expected_len)
        throw std::invalid_argument("message length mismatch");
    for (auto b : m)
        if (b != 0 && b != 1) throw std::invalid_argument("message bits must be 0 or 1");
}

// Threshold at 0.5; exact ties go to 1.
inline Message binarize(const SoftMessage& soft) {
    Message out(soft.size());
    for (std::size_t i = 0; i < soft.size(); ++i) out[i] = soft[i] >= 0.5 ? 1 : 0;
    return out;
}

inline int hamming_distance(const Message& a, const Message& b) {
    if (a.size() != b.size()) throw std::invalid_argument("hamming_distance: length mismatch");
    int d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] != b[i]);
    return d;
}

}  // namespace dwmark
