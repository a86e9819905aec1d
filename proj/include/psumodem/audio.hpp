#pragma once

// WAV/PCM playback through the carrier: converts audio samples into AM
// (active core count) or PWM (duty cycle) switching schedules.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "psumodem/modem.hpp"
#include "psumodem/types.hpp"
#include "psumodem/wav.hpp"

namespace psumodem {

struct AudioStream {
    std::vector<float> samples;  // normalized to [-1, 1]
    double sample_rate = 44100.0;
    int bit_depth = 16;  // source depth, informational

    void validate() const {
        if (sample_rate < 8000.0 || sample_rate > 48000.0)
            throw std::invalid_argument("audio stream: sample rate out of [8000, 48000] Hz");
    }
};

enum class PlaybackMode { kAm, kPwm };

inline AudioStream load_wav_stream(const std::string& path) {
    const PcmWav wav = read_wav(path);
    AudioStream s;
    s.samples = wav.samples;
    s.sample_rate = wav.sample_rate;
    s.bit_depth = wav.source_bit_depth;
    s.validate();
    return s;
}

// Each effective audio sample must span at least two carrier cycles, so the
// playback rate is capped at carrier/2; streams above the cap are decimated
// by boxcar averaging.
inline constexpr double kMinCarrierCyclesPerSample = 2.0;

inline AudioStream decimate_for_carrier(const AudioStream& in, double carrier_hz) {
    const double max_rate = carrier_hz / kMinCarrierCyclesPerSample;
    if (in.sample_rate <= max_rate) return in;
    const auto factor = static_cast<size_t>(std::ceil(in.sample_rate / max_rate));
    AudioStream out;
    out.sample_rate = in.sample_rate / static_cast<double>(factor);
    out.bit_depth = in.bit_depth;
    out.samples.reserve(in.samples.size() / factor + 1);
    for (size_t i = 0; i + factor <= in.samples.size(); i += factor) {
        double acc = 0.0;
        for (size_t j = 0; j < factor; ++j) acc += in.samples[i + j];
        out.samples.push_back(static_cast<float>(acc / static_cast<double>(factor)));
    }
    return out;
}

// AM: round(|s| * N) of N cores carry the tone for the sample period.
// The channel is magnitude-only, so negative samples render as their
// envelope.
inline SymbolSchedule render_am(const AudioStream& stream, double carrier_hz, int levels) {
    stream.validate();
    if (carrier_hz <= 0.0 || carrier_hz > kMaxToneHz)
        throw std::invalid_argument("render: carrier out of (0, 24000] Hz");
    if (levels < 1) throw std::invalid_argument("render: need at least one AM level");

    const AudioStream s = decimate_for_carrier(stream, carrier_hz);
    SymbolSchedule out;
    out.slots.reserve(s.samples.size());
    const double slot_ms = 1000.0 / s.sample_rate;
    for (float v : s.samples) {
        const int k = am_quantize(v, levels);
        Slot slot;
        slot.duration_ms = slot_ms;
        slot.cores.reserve(static_cast<size_t>(levels));
        for (int c = 0; c < levels; ++c)
            slot.cores.push_back(c < k ? ToneAssignment::tone(carrier_hz)
                                       : ToneAssignment::off());
        out.slots.push_back(std::move(slot));
    }
    return out;
}

// PWM: the sample sets the duty cycle of the carrier cycle. Negative
// samples clip to duty 0 (the pulse train cannot go below silence), so a
// tone still reproduces at its own frequency, and silence renders as no
// signal.
inline SymbolSchedule render_pwm(const AudioStream& stream, double carrier_hz, int resolution) {
    stream.validate();
    if (carrier_hz <= 0.0 || carrier_hz > kMaxToneHz)
        throw std::invalid_argument("render: carrier out of (0, 24000] Hz");
    if (resolution < 2) throw std::invalid_argument("render: PWM resolution must be >= 2");

    const AudioStream s = decimate_for_carrier(stream, carrier_hz);
    SymbolSchedule out;
    out.slots.reserve(s.samples.size());
    const double slot_ms = 1000.0 / s.sample_rate;
    for (float v : s.samples) {
        const double duty = pwm_quantize(std::max(0.0, static_cast<double>(v)), resolution);
        Slot slot;
        slot.duration_ms = slot_ms;
        slot.cores.push_back(duty > 0.0 ? ToneAssignment::pulse(carrier_hz, duty)
                                        : ToneAssignment::off());
        out.slots.push_back(std::move(slot));
    }
    return out;
}

inline SymbolSchedule render(const AudioStream& stream, PlaybackMode mode, double carrier_hz,
                             int levels_or_resolution) {
    return mode == PlaybackMode::kAm ? render_am(stream, carrier_hz, levels_or_resolution)
                                     : render_pwm(stream, carrier_hz, levels_or_resolution);
}

}  // namespace psumodem
