#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace psumodem {

// Bit sequences are vectors of 0/1 values, most significant bit first.
using Bits = std::vector<uint8_t>;

// Sampled audio buffer, the common currency between the simulator, WAV I/O
// and the receiver. Samples are nominally normalized to [-1, 1]; values
// outside that range survive in memory and are only clamped (and counted)
// at the WAV boundary.
struct Waveform {
    std::vector<float> samples;
    double sample_rate = 44100.0;
    uint64_t clipped = 0;

    double duration_s() const {
        return sample_rate > 0.0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
    }
    bool empty() const { return samples.empty(); }
};

struct BandHz {
    double low = 0.0;
    double high = 0.0;

    bool contains(double f) const { return f >= low && f <= high; }
    double width() const { return high - low; }
    bool operator==(const BandHz&) const = default;
};

inline double db_to_amplitude(double db) { return std::pow(10.0, db / 20.0); }
inline double db_to_power(double db) { return std::pow(10.0, db / 10.0); }
inline double power_to_db(double p) { return 10.0 * std::log10(p); }

inline double rms(const std::vector<float>& s) {
    if (s.empty()) return 0.0;
    double acc = 0.0;
    for (float v : s) acc += static_cast<double>(v) * v;
    return std::sqrt(acc / static_cast<double>(s.size()));
}

inline Bits bits_from_u32(uint32_t v) {
    Bits out(32);
    for (int i = 0; i < 32; ++i) out[i] = static_cast<uint8_t>((v >> (31 - i)) & 1u);
    return out;
}

inline uint32_t u32_from_bits(const uint8_t* bits, size_t n = 32) {
    uint32_t v = 0;
    for (size_t i = 0; i < n; ++i) v = (v << 1) | (bits[i] & 1u);
    return v;
}

inline Bits bits_from_bytes(const std::vector<uint8_t>& bytes) {
    Bits out;
    out.reserve(bytes.size() * 8);
    for (uint8_t b : bytes)
        for (int i = 7; i >= 0; --i) out.push_back(static_cast<uint8_t>((b >> i) & 1u));
    return out;
}

inline std::vector<uint8_t> bytes_from_hex(const std::string& hex) {
    if (hex.empty() || hex.size() % 2 != 0)
        throw std::invalid_argument("hex payload must be a non-empty even-length string");
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        throw std::invalid_argument(std::string("invalid hex digit: ") + c);
    };
    std::vector<uint8_t> out(hex.size() / 2);
    for (size_t i = 0; i < out.size(); ++i)
        out[i] = static_cast<uint8_t>(nibble(hex[2 * i]) << 4 | nibble(hex[2 * i + 1]));
    return out;
}

inline std::string hex_from_u32(uint32_t v) {
    static const char* digits = "0123456789ABCDEF";
    std::string s(8, '0');
    for (int i = 7; i >= 0; --i) {
        s[i] = digits[v & 0xF];
        v >>= 4;
    }
    return s;
}

inline Bits random_bits(size_t n, uint64_t seed) {
    std::mt19937_64 rng(seed);
    Bits out(n);
    for (auto& b : out) b = static_cast<uint8_t>(rng() & 1u);
    return out;
}

}  // namespace psumodem
