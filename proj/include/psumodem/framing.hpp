#pragma once

// Frame protocol: 8-bit alternating preamble (0xAA), 32-bit payload and an
// 8-bit CRC, 48 bits total, MSB first on the wire.

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "psumodem/types.hpp"

namespace psumodem {

inline constexpr uint8_t kPreambleByte = 0xAA;  // '10101010'
inline constexpr size_t kPreambleBits = 8;
inline constexpr size_t kPayloadBits = 32;
inline constexpr size_t kCrcBits = 8;
inline constexpr size_t kFrameBits = kPreambleBits + kPayloadBits + kCrcBits;
inline constexpr size_t kBodyBits = kPayloadBits + kCrcBits;

// CRC-8 with generator polynomial x^8+x^2+x+1 (0x07), init 0x00, no
// reflection, no final xor. Payload bytes are processed MSB first.
inline uint8_t crc8(uint32_t payload) {
    uint8_t crc = 0x00;
    for (int i = 3; i >= 0; --i) {
        crc ^= static_cast<uint8_t>(payload >> (8 * i));
        for (int bit = 0; bit < 8; ++bit)
            crc = (crc & 0x80) ? static_cast<uint8_t>((crc << 1) ^ 0x07)
                               : static_cast<uint8_t>(crc << 1);
    }
    return crc;
}

inline Bits encode_frame(uint32_t payload) {
    Bits out;
    out.reserve(kFrameBits);
    for (int i = 7; i >= 0; --i) out.push_back((kPreambleByte >> i) & 1u);
    for (int i = 31; i >= 0; --i) out.push_back(static_cast<uint8_t>((payload >> i) & 1u));
    const uint8_t crc = crc8(payload);
    for (int i = 7; i >= 0; --i) out.push_back((crc >> i) & 1u);
    return out;
}

// Decodes the 40 bits following the preamble (32 payload + 8 CRC). Returns
// the payload when the recomputed CRC matches, std::nullopt otherwise.
inline std::optional<uint32_t> decode_frame(std::span<const uint8_t> bits) {
    if (bits.size() != kBodyBits)
        throw std::invalid_argument("decode_frame expects exactly 40 bits");
    const uint32_t payload = u32_from_bits(bits.data(), kPayloadBits);
    const uint8_t crc = static_cast<uint8_t>(u32_from_bits(bits.data() + kPayloadBits, kCrcBits));
    if (crc8(payload) != crc) return std::nullopt;
    return payload;
}

// Segments a byte stream into 32-bit payloads, MSB first, zero-padding the
// final partial word. Callers convey the true length out of band.
inline std::vector<uint32_t> segment_payloads(std::span<const uint8_t> bytes) {
    if (bytes.empty()) throw std::invalid_argument("payload must not be empty");
    std::vector<uint32_t> out;
    out.reserve((bytes.size() + 3) / 4);
    for (size_t i = 0; i < bytes.size(); i += 4) {
        uint32_t word = 0;
        for (size_t j = 0; j < 4; ++j) {
            word <<= 8;
            if (i + j < bytes.size()) word |= bytes[i + j];
        }
        out.push_back(word);
    }
    return out;
}

}  // namespace psumodem
