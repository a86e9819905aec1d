#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "psumodem/wav.hpp"

using namespace psumodem;

namespace {

std::string tmp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

struct FileGuard {
    std::string path;
    ~FileGuard() { std::remove(path.c_str()); }
};

void write_raw(const std::string& path, const std::vector<uint8_t>& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

// hand-rolled little WAV builder so the reader is tested against an
// independent byte layout
std::vector<uint8_t> build_wav(uint16_t format, uint16_t channels, uint32_t rate, uint16_t bits,
                               const std::vector<uint8_t>& data) {
    std::vector<uint8_t> out;
    auto u32 = [&](uint32_t v) {
        for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
    };
    auto u16 = [&](uint16_t v) {
        out.push_back(static_cast<uint8_t>(v));
        out.push_back(static_cast<uint8_t>(v >> 8));
    };
    out.insert(out.end(), {'R', 'I', 'F', 'F'});
    u32(static_cast<uint32_t>(36 + data.size()));
    out.insert(out.end(), {'W', 'A', 'V', 'E'});
    out.insert(out.end(), {'f', 'm', 't', ' '});
    u32(16);
    u16(format);
    u16(channels);
    u32(rate);
    u32(rate * channels * bits / 8);
    u16(static_cast<uint16_t>(channels * bits / 8));
    u16(bits);
    out.insert(out.end(), {'d', 'a', 't', 'a'});
    u32(static_cast<uint32_t>(data.size()));
    out.insert(out.end(), data.begin(), data.end());
    return out;
}

}  // namespace

TEST_CASE("wav write/read round trip stays within one LSB") {
    FileGuard guard{tmp_path("psumodem_roundtrip.wav")};
    Waveform w;
    w.sample_rate = 44100.0;
    std::mt19937 rng(11);
    std::uniform_real_distribution<float> u(-0.9f, 0.9f);
    w.samples.resize(4000);
    for (auto& s : w.samples) s = u(rng);

    CHECK(write_wav(guard.path, w) == 0);
    const PcmWav back = read_wav(guard.path);
    CHECK(back.sample_rate == 44100.0);
    CHECK(back.source_bit_depth == 16);
    CHECK(back.source_channels == 1);
    REQUIRE(back.samples.size() == w.samples.size());
    for (size_t i = 0; i < w.samples.size(); ++i)
        CHECK(std::abs(back.samples[i] - w.samples[i]) <= 1.5f / 32768.0f);
}

TEST_CASE("wav writer clamps and reports out-of-range samples") {
    FileGuard guard{tmp_path("psumodem_clip.wav")};
    Waveform w;
    w.sample_rate = 44100.0;
    w.samples = {0.0f, 2.0f, -3.0f, 0.5f};
    CHECK(write_wav(guard.path, w) == 2);
    const PcmWav back = read_wav(guard.path);
    CHECK(back.samples[1] == Catch::Approx(32767.0 / 32768.0).margin(1e-4));
}

TEST_CASE("16-bit tone normalization preserves the peak") {
    FileGuard guard{tmp_path("psumodem_tone.wav")};
    std::vector<uint8_t> data;
    const int peak = 16000;
    for (int i = 0; i < 441; ++i) {
        const auto v = static_cast<int16_t>(
            std::lround(peak * std::sin(2.0 * std::numbers::pi * 440.0 * i / 44100.0)));
        data.push_back(static_cast<uint8_t>(v & 0xFF));
        data.push_back(static_cast<uint8_t>((v >> 8) & 0xFF));
    }
    write_raw(guard.path, build_wav(1, 1, 44100, 16, data));
    const PcmWav wav = read_wav(guard.path);
    float max_abs = 0.0f;
    for (float s : wav.samples) max_abs = std::max(max_abs, std::abs(s));
    CHECK(max_abs == Catch::Approx(peak / 32768.0).margin(1e-3));
}

TEST_CASE("stereo is down-mixed by averaging") {
    FileGuard guard{tmp_path("psumodem_stereo.wav")};
    std::vector<uint8_t> data;
    auto push16 = [&](int16_t v) {
        data.push_back(static_cast<uint8_t>(v & 0xFF));
        data.push_back(static_cast<uint8_t>((v >> 8) & 0xFF));
    };
    push16(16384);
    push16(-16384);  // frame 0: L+R average to 0
    push16(8192);
    push16(8192);  // frame 1: average 8192
    write_raw(guard.path, build_wav(1, 2, 44100, 16, data));
    const PcmWav wav = read_wav(guard.path);
    REQUIRE(wav.samples.size() == 2);
    CHECK(wav.samples[0] == Catch::Approx(0.0).margin(1e-6));
    CHECK(wav.samples[1] == Catch::Approx(0.25).margin(1e-6));
    CHECK(wav.source_channels == 2);
}

TEST_CASE("8-bit samples decode around the 128 midpoint") {
    FileGuard guard{tmp_path("psumodem_8bit.wav")};
    write_raw(guard.path, build_wav(1, 1, 22050, 8, {128, 255, 0}));
    const PcmWav wav = read_wav(guard.path);
    REQUIRE(wav.samples.size() == 3);
    CHECK(wav.samples[0] == Catch::Approx(0.0).margin(1e-6));
    CHECK(wav.samples[1] == Catch::Approx(127.0 / 128.0).margin(1e-6));
    CHECK(wav.samples[2] == Catch::Approx(-1.0).margin(1e-6));
}

TEST_CASE("empty data chunk is a valid empty stream") {
    FileGuard guard{tmp_path("psumodem_empty.wav")};
    write_raw(guard.path, build_wav(1, 1, 44100, 16, {}));
    const PcmWav wav = read_wav(guard.path);
    CHECK(wav.samples.empty());
    CHECK(wav.sample_rate == 44100.0);
}

TEST_CASE("non-PCM format tag is rejected") {
    FileGuard guard{tmp_path("psumodem_codec.wav")};
    write_raw(guard.path, build_wav(3, 1, 44100, 16, {0, 0}));  // IEEE float tag
    CHECK_THROWS_AS(read_wav(guard.path), WavError);
}

TEST_CASE("malformed container is rejected") {
    FileGuard guard{tmp_path("psumodem_bad.wav")};
    write_raw(guard.path, {'N', 'O', 'P', 'E', 0, 0, 0, 0});
    CHECK_THROWS_AS(read_wav(guard.path), WavError);
    CHECK_THROWS_AS(read_wav(tmp_path("psumodem_does_not_exist.wav")), WavError);
}

TEST_CASE("truncated chunk is rejected") {
    FileGuard guard{tmp_path("psumodem_trunc.wav")};
    auto bytes = build_wav(1, 1, 44100, 16, std::vector<uint8_t>(100, 0));
    bytes.resize(bytes.size() - 50);
    write_raw(guard.path, bytes);
    CHECK_THROWS_AS(read_wav(guard.path), WavError);
}

TEST_CASE("unknown chunks are skipped") {
    FileGuard guard{tmp_path("psumodem_list.wav")};
    // RIFF + LIST chunk + fmt + data
    std::vector<uint8_t> out;
    auto u32 = [&](uint32_t v) {
        for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
    };
    auto u16 = [&](uint16_t v) {
        out.push_back(static_cast<uint8_t>(v));
        out.push_back(static_cast<uint8_t>(v >> 8));
    };
    out.insert(out.end(), {'R', 'I', 'F', 'F'});
    u32(0);  // sloppy size, reader tolerates
    out.insert(out.end(), {'W', 'A', 'V', 'E'});
    out.insert(out.end(), {'L', 'I', 'S', 'T'});
    u32(4);
    out.insert(out.end(), {'I', 'N', 'F', 'O'});
    out.insert(out.end(), {'f', 'm', 't', ' '});
    u32(16);
    u16(1);
    u16(1);
    u32(44100);
    u32(88200);
    u16(2);
    u16(16);
    out.insert(out.end(), {'d', 'a', 't', 'a'});
    u32(2);
    u16(0x4000);
    write_raw(guard.path, out);
    const PcmWav wav = read_wav(guard.path);
    REQUIRE(wav.samples.size() == 1);
    CHECK(wav.samples[0] == Catch::Approx(0.5).margin(1e-4));
}
