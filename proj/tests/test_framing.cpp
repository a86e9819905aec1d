#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "psumodem/framing.hpp"

using namespace psumodem;

namespace {

// Independent CRC oracle: bit-serial polynomial long division over GF(2).
// The message bits are appended with 8 zeros and divided by
// x^8 + x^2 + x + 1; the remainder is the CRC.
uint8_t crc8_longdiv(const Bits& payload_bits) {
    static const int poly[9] = {1, 0, 0, 0, 0, 0, 1, 1, 1};
    std::vector<int> reg(payload_bits.size() + 8, 0);
    for (size_t i = 0; i < payload_bits.size(); ++i) reg[i] = payload_bits[i];
    for (size_t i = 0; i < payload_bits.size(); ++i)
        if (reg[i])
            for (int j = 0; j < 9; ++j) reg[i + j] ^= poly[j];
    uint8_t crc = 0;
    for (size_t i = reg.size() - 8; i < reg.size(); ++i) crc = static_cast<uint8_t>(crc << 1 | reg[i]);
    return crc;
}

uint8_t crc8_oracle(uint32_t payload) { return crc8_longdiv(bits_from_u32(payload)); }

}  // namespace

TEST_CASE("crc8 matches the long-division oracle on frozen values") {
    CHECK(crc8(0x00000000u) == 0x00);
    CHECK(crc8(0xDEADBEEFu) == 0xCA);
    CHECK(crc8(0xFFFFFFFFu) == 0xDE);
    CHECK(crc8(0xFFFFFFFEu) == 0xD9);
    CHECK(crc8(0xFFFFFFFFu) != crc8(0xFFFFFFFEu));

    CHECK(crc8_oracle(0x00000000u) == 0x00);
    CHECK(crc8_oracle(0xDEADBEEFu) == 0xCA);
    CHECK(crc8_oracle(0xFFFFFFFFu) == 0xDE);
    CHECK(crc8_oracle(0xFFFFFFFEu) == 0xD9);
}

TEST_CASE("crc8 agrees with the oracle on random payloads") {
    std::mt19937 rng(1234);
    for (int i = 0; i < 5000; ++i) {
        const uint32_t p = rng();
        CHECK(crc8(p) == crc8_oracle(p));
    }
}

TEST_CASE("encode_frame layout") {
    const Bits f = encode_frame(0x00000000u);
    REQUIRE(f.size() == kFrameBits);
    const Bits preamble{1, 0, 1, 0, 1, 0, 1, 0};
    CHECK(Bits(f.begin(), f.begin() + 8) == preamble);
    for (size_t i = 8; i < 48; ++i) CHECK(f[i] == 0);

    std::mt19937 rng(99);
    for (int i = 0; i < 100; ++i) {
        const Bits g = encode_frame(rng());
        CHECK(Bits(g.begin(), g.begin() + 8) == preamble);
    }
}

TEST_CASE("frame round trip is the identity") {
    std::mt19937 rng(7);
    auto check = [](uint32_t p) {
        const Bits f = encode_frame(p);
        const auto decoded = decode_frame(std::span<const uint8_t>(f.data() + 8, kBodyBits));
        REQUIRE(decoded.has_value());
        CHECK(*decoded == p);
    };
    for (uint32_t p : {0u, 0xFFFFFFFFu, 0xAAFF0055u, 0x80000000u, 1u}) check(p);
    for (int i = 0; i < 20000; ++i) check(rng());
}

TEST_CASE("every single-bit error is detected") {
    std::mt19937 rng(42);
    for (int i = 0; i < 200; ++i) {
        const uint32_t p = rng();
        Bits f = encode_frame(p);
        for (size_t bit = 8; bit < kFrameBits; ++bit) {
            f[bit] ^= 1;
            const auto decoded = decode_frame(std::span<const uint8_t>(f.data() + 8, kBodyBits));
            CHECK_FALSE(decoded.has_value());
            f[bit] ^= 1;
        }
    }
}

TEST_CASE("every burst error of length <= 8 is detected") {
    std::mt19937 rng(4242);
    for (int i = 0; i < 50; ++i) {
        const uint32_t p = rng();
        const Bits clean = encode_frame(p);
        for (size_t burst = 2; burst <= 8; ++burst) {
            const size_t patterns = size_t{1} << (burst - 2);
            for (size_t pos = 8; pos + burst <= kFrameBits; ++pos) {
                for (size_t inner = 0; inner < patterns; ++inner) {
                    Bits f = clean;
                    f[pos] ^= 1;
                    f[pos + burst - 1] ^= 1;
                    for (size_t j = 0; j < burst - 2; ++j)
                        if (inner >> j & 1) f[pos + 1 + j] ^= 1;
                    const auto decoded =
                        decode_frame(std::span<const uint8_t>(f.data() + 8, kBodyBits));
                    CHECK_FALSE(decoded.has_value());
                }
            }
        }
    }
}

TEST_CASE("decode_frame rejects wrong lengths") {
    Bits short_bits(39, 0);
    CHECK_THROWS_AS(decode_frame(std::span<const uint8_t>(short_bits.data(), short_bits.size())),
                    std::invalid_argument);
}

TEST_CASE("payload segmentation pads the tail with zeros") {
    const std::vector<uint8_t> bytes{0xDE, 0xAD, 0xBE, 0xEF, 0x12, 0x34};
    const auto words = segment_payloads(std::span<const uint8_t>(bytes));
    REQUIRE(words.size() == 2);
    CHECK(words[0] == 0xDEADBEEFu);
    CHECK(words[1] == 0x12340000u);

    const std::vector<uint8_t> eight(8, 0xAB);
    CHECK(segment_payloads(std::span<const uint8_t>(eight)).size() == 2);

    const std::vector<uint8_t> none;
    CHECK_THROWS_AS(segment_payloads(std::span<const uint8_t>(none)), std::invalid_argument);
}
