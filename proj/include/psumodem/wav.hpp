#pragma once

// Minimal RIFF/WAVE PCM reader and writer. Reads 8/16-bit mono or stereo
// (stereo is down-mixed by averaging); writes 16-bit mono little-endian.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "psumodem/types.hpp"

namespace psumodem {

struct WavError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PcmWav {
    std::vector<float> samples;  // normalized mono
    double sample_rate = 0.0;
    int source_bit_depth = 0;
    int source_channels = 0;
};

namespace detail {

inline uint32_t read_u32le(const uint8_t* p) {
    return static_cast<uint32_t>(p[0]) | static_cast<uint32_t>(p[1]) << 8 |
           static_cast<uint32_t>(p[2]) << 16 | static_cast<uint32_t>(p[3]) << 24;
}
inline uint16_t read_u16le(const uint8_t* p) {
    return static_cast<uint16_t>(p[0] | p[1] << 8);
}
inline void put_u32le(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v));
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v >> 16));
    out.push_back(static_cast<uint8_t>(v >> 24));
}
inline void put_u16le(std::vector<uint8_t>& out, uint16_t v) {
    out.push_back(static_cast<uint8_t>(v));
    out.push_back(static_cast<uint8_t>(v >> 8));
}

}  // namespace detail

inline PcmWav read_wav(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw WavError("cannot open WAV file: " + path);
    std::vector<uint8_t> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    if (raw.size() < 12 || std::memcmp(raw.data(), "RIFF", 4) != 0 ||
        std::memcmp(raw.data() + 8, "WAVE", 4) != 0)
        throw WavError("malformed WAV container: " + path);

    bool have_fmt = false;
    uint16_t format = 0, channels = 0, bits = 0;
    uint32_t rate = 0;
    const uint8_t* data = nullptr;
    size_t data_size = 0;
    bool have_data = false;

    size_t pos = 12;
    while (pos + 8 <= raw.size()) {
        const char* id = reinterpret_cast<const char*>(raw.data() + pos);
        const uint32_t size = detail::read_u32le(raw.data() + pos + 4);
        pos += 8;
        if (pos + size > raw.size()) throw WavError("truncated WAV chunk: " + path);
        if (std::memcmp(id, "fmt ", 4) == 0) {
            if (size < 16) throw WavError("malformed fmt chunk: " + path);
            format = detail::read_u16le(raw.data() + pos);
            channels = detail::read_u16le(raw.data() + pos + 2);
            rate = detail::read_u32le(raw.data() + pos + 4);
            bits = detail::read_u16le(raw.data() + pos + 14);
            have_fmt = true;
        } else if (std::memcmp(id, "data", 4) == 0) {
            data = raw.data() + pos;
            data_size = size;
            have_data = true;
        }
        pos += size + (size & 1);  // chunks are word aligned
    }

    if (!have_fmt || !have_data) throw WavError("missing fmt/data chunk: " + path);
    if (format != 1) throw WavError("unsupported WAV codec (PCM only): " + path);
    if (channels != 1 && channels != 2) throw WavError("unsupported channel count: " + path);
    if (bits != 8 && bits != 16) throw WavError("unsupported bit depth (8/16 only): " + path);

    PcmWav out;
    out.sample_rate = rate;
    out.source_bit_depth = bits;
    out.source_channels = channels;

    const size_t bytes_per_sample = bits / 8;
    const size_t frame_bytes = bytes_per_sample * channels;
    const size_t frames = frame_bytes ? data_size / frame_bytes : 0;
    out.samples.resize(frames);
    for (size_t i = 0; i < frames; ++i) {
        double acc = 0.0;
        for (size_t c = 0; c < channels; ++c) {
            const uint8_t* p = data + i * frame_bytes + c * bytes_per_sample;
            if (bits == 8) {
                acc += (static_cast<int>(*p) - 128) / 128.0;
            } else {
                const int16_t v = static_cast<int16_t>(detail::read_u16le(p));
                acc += v / 32768.0;
            }
        }
        out.samples[i] = static_cast<float>(acc / channels);
    }
    return out;
}

// Writes 16-bit signed mono PCM. Out-of-range samples are clamped; the
// number of clamped samples is returned.
inline uint64_t write_wav(const std::string& path, const Waveform& w) {
    if (w.sample_rate <= 0.0) throw WavError("waveform sample rate must be positive");
    const uint32_t rate = static_cast<uint32_t>(std::llround(w.sample_rate));
    const uint32_t data_size = static_cast<uint32_t>(w.samples.size() * 2);

    std::vector<uint8_t> out;
    out.reserve(44 + data_size);
    out.insert(out.end(), {'R', 'I', 'F', 'F'});
    detail::put_u32le(out, 36 + data_size);
    out.insert(out.end(), {'W', 'A', 'V', 'E'});
    out.insert(out.end(), {'f', 'm', 't', ' '});
    detail::put_u32le(out, 16);
    detail::put_u16le(out, 1);  // PCM
    detail::put_u16le(out, 1);  // mono
    detail::put_u32le(out, rate);
    detail::put_u32le(out, rate * 2);
    detail::put_u16le(out, 2);
    detail::put_u16le(out, 16);
    out.insert(out.end(), {'d', 'a', 't', 'a'});
    detail::put_u32le(out, data_size);

    uint64_t clipped = 0;
    for (float s : w.samples) {
        double v = s;
        if (v > 1.0) {
            v = 1.0;
            ++clipped;
        } else if (v < -1.0) {
            v = -1.0;
            ++clipped;
        }
        detail::put_u16le(out, static_cast<uint16_t>(static_cast<int16_t>(std::lround(v * 32767.0))));
    }

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw WavError("cannot open WAV file for writing: " + path);
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!f) throw WavError("short write: " + path);
    return clipped;
}

}  // namespace psumodem
