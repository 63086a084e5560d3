#pragma once

#include <cstdint>
#include <stdexcept>

#include "dwmark/message.hpp"

namespace dwmark {

// CRC-8 with polynomial x^8 + x^2 + x + 1 (0x07), init 0x00, MSB-first,
// no reflection, no final XOR. Runs bit-serial directly over the payload
// bit sequence, so payloads need not be byte aligned.
inline constexpr std::uint8_t kCrc8Polynomial = 0x07;
inline constexpr int kCrcBits = 8;
inline constexpr int kPayloadBits = kMessageLength - kCrcBits;

inline std::uint8_t crc8(const Message& bits) {
    std::uint8_t crc = 0x00;
    for (auto b : bits) {
        if (b != 0 && b != 1) throw std::invalid_argument("crc8: bits must be 0 or 1");
        std::uint8_t msb = (crc >> 7) & 1;
        crc = static_cast<std::uint8_t>(crc << 1);
        if (msb ^ b) crc ^= kCrc8Polynomial;
    }
    return crc;
}

// A message split into payload and its 8-bit checksum.
struct CrcFrame {
    Message payload_bits;   // L - 8 bits
    Message checksum_bits;  // 8 bits, MSB first
};

inline CrcFrame crc8_encode(const Message& payload) {
    if (static_cast<int>(payload.size()) != kPayloadBits)
        throw std::invalid_argument("crc8_encode: payload must be L-8 bits");
    validate_message(payload);
    CrcFrame frame;
    frame.payload_bits = payload;
    std::uint8_t c = crc8(payload);
    frame.checksum_bits.resize(kCrcBits);
    for (int i = 0; i < kCrcBits; ++i) frame.checksum_bits[i] = (c >> (7 - i)) & 1;
    return frame;
}

inline bool crc8_verify(const CrcFrame& frame) {
    if (static_cast<int>(frame.payload_bits.size() + frame.checksum_bits.size()) != kMessageLength)
        throw std::invalid_argument("crc8_verify: frame must total L bits");
    std::uint8_t expect = crc8(frame.payload_bits);
    std::uint8_t got = 0;
    for (int i = 0; i < kCrcBits; ++i) got = static_cast<std::uint8_t>((got << 1) | (frame.checksum_bits[i] & 1));
    return expect == got;
}

inline Message frame_to_message(const CrcFrame& frame) {
    Message m = frame.payload_bits;
    m.insert(m.end(), frame.checksum_bits.begin(), frame.checksum_bits.end());
    return m;
}

inline CrcFrame message_to_frame(const Message& m) {
    if (static_cast<int>(m.size()) != kMessageLength)
        throw std::invalid_argument("message_to_frame: message must be L bits");
    CrcFrame frame;
    frame.payload_bits.assign(m.begin(), m.begin() + kPayloadBits);
    frame.checksum_bits.assign(m.begin() + kPayloadBits, m.end());
    return frame;
}

inline bool crc8_verify_message(const Message& m) { return crc8_verify(message_to_frame(m)); }

}  // namespace dwmark
