#pragma once

// Parametric stand-in for the PSU and the acoustic path: renders switching
// schedules into audio with a per-harmonic band mask, applies noise or
// distance attenuation, and provides the evaluation instruments (sweep
// analysis, SNR and BER measurement).

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "psumodem/fft.hpp"
#include "psumodem/modem.hpp"
#include "psumodem/scheduler.hpp"
#include "psumodem/types.hpp"

namespace psumodem {

enum class Waveshape { kSquare, kSine };

struct Passband {
    double low_hz = 0.0;
    double high_hz = 0.0;
    double gain_db = 0.0;
};

// Emission model: each active core contributes a carrier at its switching
// frequency with amplitude level * amplitude_per_core; the band mask shapes
// every rendered harmonic, frequencies outside all passbands fall to
// stop_gain_db. An empty mask is a flat response.
struct PsuModel {
    std::string name = "full";
    std::vector<Passband> band_mask;
    double amplitude_per_core = 0.1;
    double stop_gain_db = -80.0;
    Waveshape waveshape = Waveshape::kSquare;
    std::string snr_grade;

    void validate() const {
        if (!(amplitude_per_core > 0.0))
            throw std::invalid_argument("PSU model: amplitude per core must be positive");
        auto sorted = band_mask;
        std::sort(sorted.begin(), sorted.end(),
                  [](const Passband& a, const Passband& b) { return a.low_hz < b.low_hz; });
        for (size_t i = 0; i < sorted.size(); ++i) {
            if (sorted[i].low_hz < 0.0 || sorted[i].high_hz > kMaxToneHz ||
                sorted[i].low_hz >= sorted[i].high_hz)
                throw std::invalid_argument("PSU model: passband out of [0, 24000] Hz");
            if (i > 0 && sorted[i].low_hz <= sorted[i - 1].high_hz)
                throw std::invalid_argument("PSU model: passbands must not overlap");
        }
    }

    double gain_db_at(double f) const {
        if (band_mask.empty()) return 0.0;
        for (const auto& b : band_mask)
            if (f >= b.low_hz && f <= b.high_hz) return b.gain_db;
        return stop_gain_db;
    }
    double gain_at(double f) const { return db_to_amplitude(gain_db_at(f)); }
};

inline std::vector<std::string> psu_preset_names() {
    return {"full", "pc1", "pc2", "pc3", "server", "nuk", "iot"};
}

// Profiles for the measured machines: published passbands and SNR grades;
// amplitudes are model parameters, not measurements.
inline PsuModel psu_preset(const std::string& name) {
    PsuModel m;
    m.name = name;
    if (name == "full") {
        m.snr_grade = "ideal (flat response)";
    } else if (name == "pc1") {
        m.band_mask = {{2300.0, 22000.0, 0.0}};
        m.snr_grade = "high (30-35 dB)";
    } else if (name == "pc2") {
        m.band_mask = {{2200.0, 22000.0, 0.0}};
        m.snr_grade = "high (30-35 dB)";
    } else if (name == "pc3") {
        m.band_mask = {{5491.0, 6223.0, 0.0}, {8300.0, 9000.0, 0.0}};
        m.snr_grade = "low (20-30 dB)";
    } else if (name == "server") {
        m.band_mask = {{8000.0, 17000.0, 0.0}};
        m.snr_grade = "low (10-20 dB)";
    } else if (name == "nuk") {
        m.band_mask = {{1800.0, 24000.0, 0.0}};
        m.snr_grade = "high (30-40 dB)";
    } else if (name == "iot") {
        m.band_mask = {{3100.0, 24000.0, 0.0}};
        m.snr_grade = "intermediate (20-30 dB)";
    } else {
        throw std::invalid_argument("unknown PSU preset: " + name);
    }
    return m;
}

inline void save_psu_profile(const std::string& path, const PsuModel& m) {
    nlohmann::json j;
    j["name"] = m.name;
    j["amplitude_per_core"] = m.amplitude_per_core;
    j["stop_gain_db"] = m.stop_gain_db;
    j["waveshape"] = m.waveshape == Waveshape::kSquare ? "square" : "sine";
    j["snr_grade"] = m.snr_grade;
    j["passbands"] = nlohmann::json::array();
    for (const auto& b : m.band_mask)
        j["passbands"].push_back({{"low_hz", b.low_hz}, {"high_hz", b.high_hz}, {"gain_db", b.gain_db}});
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write PSU profile: " + path);
    f << j.dump(2) << "\n";
}

inline PsuModel load_psu_profile(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read PSU profile: " + path);
    nlohmann::json j = nlohmann::json::parse(f);
    PsuModel m;
    m.name = j.value("name", "custom");
    m.amplitude_per_core = j.value("amplitude_per_core", 0.1);
    m.stop_gain_db = j.value("stop_gain_db", -80.0);
    m.waveshape = j.value("waveshape", "square") == "sine" ? Waveshape::kSine : Waveshape::kSquare;
    m.snr_grade = j.value("snr_grade", "");
    for (const auto& b : j.value("passbands", nlohmann::json::array()))
        m.band_mask.push_back(
            {b.at("low_hz").get<double>(), b.at("high_hz").get<double>(), b.value("gain_db", 0.0)});
    m.validate();
    return m;
}

namespace detail {

inline constexpr int kMaxHarmonics = 64;

struct Harmonic {
    double freq = 0.0;
    double amp = 0.0;
    int order = 1;
    double phase_off = 0.0;
};

// Fourier components of one core's slot rendering, band mask applied per
// harmonic so no out-of-band energy is synthesized.
inline void slot_harmonics(const ToneAssignment& a, const PsuModel& m, double sample_rate,
                           std::vector<Harmonic>& out, double& dc) {
    out.clear();
    dc = 0.0;
    if (a.silent() || a.level <= 0.0) return;
    const double base = a.level * m.amplitude_per_core;
    const double nyquist = sample_rate / 2.0;

    if (m.waveshape == Waveshape::kSine) {
        const double scale = a.pulsed ? std::sin(std::numbers::pi * a.duty) : 1.0;
        if (a.freq_hz <= nyquist)
            out.push_back({a.freq_hz, base * m.gain_at(a.freq_hz) * scale, 1, 0.0});
        return;
    }

    if (!a.pulsed) {
        // zero-mean square carrier, odd harmonics 4/(pi k)
        for (int k = 1; k <= kMaxHarmonics; k += 2) {
            const double f = k * a.freq_hz;
            if (f >= nyquist) break;
            out.push_back({f, base * (4.0 / (std::numbers::pi * k)) * m.gain_at(f), k, 0.0});
        }
    } else {
        // unipolar pulse train with duty d: dc = d, harmonics 2 sin(pi k d)/(pi k)
        dc = base * a.duty * m.gain_at(0.0);
        for (int k = 1; k <= kMaxHarmonics; ++k) {
            const double f = k * a.freq_hz;
            if (f >= nyquist) break;
            const double c = 2.0 * std::sin(std::numbers::pi * k * a.duty) / (std::numbers::pi * k);
            out.push_back({f, base * c * m.gain_at(f), k,
                           -std::numbers::pi * k * a.duty});
        }
    }
}

}  // namespace detail

// Renders a symbol schedule through the PSU model. Per-core carrier phases
// are continuous across slot boundaries. Samples exceeding [-1, 1] are
// counted in the result's `clipped` but kept unclamped.
inline Waveform synthesize(const SymbolSchedule& schedule, const PsuModel& model,
                           double sample_rate) {
    model.validate();
    schedule.validate();
    if (schedule.slots.empty()) throw std::invalid_argument("synthesize: empty schedule");
    double max_freq = 0.0;
    for (const auto& slot : schedule.slots)
        for (const auto& c : slot.cores)
            if (!c.silent()) max_freq = std::max(max_freq, c.freq_hz);
    if (sample_rate < 2.0 * max_freq)
        throw std::invalid_argument("synthesize: sample rate below Nyquist for the schedule");

    const size_t cores = schedule.core_count();
    std::vector<double> phase(cores, 0.0);

    Waveform wave;
    wave.sample_rate = sample_rate;
    const size_t total =
        static_cast<size_t>(std::llround(schedule.total_ms() * sample_rate / 1000.0));
    wave.samples.resize(total, 0.0f);

    std::vector<std::vector<detail::Harmonic>> harmonics(cores);
    std::vector<double> dc(cores, 0.0);

    double cum_ms = 0.0;
    size_t start = 0;
    for (const auto& slot : schedule.slots) {
        cum_ms += slot.duration_ms;
        const size_t end = std::min(
            total, static_cast<size_t>(std::llround(cum_ms * sample_rate / 1000.0)));
        for (size_t c = 0; c < cores; ++c)
            detail::slot_harmonics(slot.cores[c], model, sample_rate, harmonics[c], dc[c]);

        for (size_t i = start; i < end; ++i) {
            double s = 0.0;
            for (size_t c = 0; c < cores; ++c) {
                const auto& a = slot.cores[c];
                if (a.silent()) continue;
                s += dc[c];
                for (const auto& h : harmonics[c]) {
                    const double arg = h.order * phase[c] + h.phase_off;
                    s += h.amp * (a.pulsed ? std::cos(arg) : std::sin(arg));
                }
                phase[c] += 2.0 * std::numbers::pi * a.freq_hz / sample_rate;
                if (phase[c] > 2.0 * std::numbers::pi)
                    phase[c] -= 2.0 * std::numbers::pi *
                                std::floor(phase[c] / (2.0 * std::numbers::pi));
            }
            if (s > 1.0 || s < -1.0) ++wave.clipped;
            wave.samples[i] = static_cast<float>(s);
        }
        start = end;
    }
    return wave;
}

// Renders the realized switching trace directly: each core contributes a
// two-level waveform (+a busy, -a idle); the band mask, when present, is
// applied as an FFT-domain filter.
inline Waveform synthesize(const WorkloadTrace& trace, const PsuModel& model,
                           double sample_rate) {
    model.validate();
    if (trace.empty()) throw std::invalid_argument("synthesize: empty trace");

    int64_t t_max = 0;
    for (const auto& core : trace.per_core)
        if (!core.empty()) t_max = std::max(t_max, core.back().t_ns);
    const size_t total = static_cast<size_t>(std::llround(t_max * 1e-9 * sample_rate));

    Waveform wave;
    wave.sample_rate = sample_rate;
    wave.samples.resize(total, 0.0f);
    const double a = model.amplitude_per_core;

    for (const auto& core : trace.per_core) {
        for (size_t e = 0; e + 1 < core.size(); ++e) {
            const auto i0 = static_cast<size_t>(std::llround(core[e].t_ns * 1e-9 * sample_rate));
            const auto i1 = std::min(
                total, static_cast<size_t>(std::llround(core[e + 1].t_ns * 1e-9 * sample_rate)));
            const float v = core[e].state == Phase::kBusy ? static_cast<float>(a)
                                                          : static_cast<float>(-a);
            for (size_t i = i0; i < i1; ++i) wave.samples[i] += v;
        }
    }

    if (!model.band_mask.empty()) {
        size_t nfft = 1;
        while (nfft < total) nfft <<= 1;
        std::vector<std::complex<double>> x(nfft, 0.0);
        for (size_t i = 0; i < total; ++i) x[i] = wave.samples[i];
        fft(x);
        for (size_t k = 0; k <= nfft / 2; ++k) {
            const double g = model.gain_at(bin_to_freq(static_cast<double>(k), sample_rate, nfft));
            x[k] *= g;
            if (k != 0 && k != nfft / 2) x[nfft - k] *= g;
        }
        ifft(x);
        for (size_t i = 0; i < total; ++i) wave.samples[i] = static_cast<float>(x[i].real());
    }
    for (float s : wave.samples)
        if (s > 1.0f || s < -1.0f) ++wave.clipped;
    return wave;
}

enum class ChannelMode { kSnrTarget, kDistance };

// SNR here is the ratio of average signal power to the noise power that
// falls within `reference_bandwidth_hz` (the band a receiver integrates
// over); noise itself is white across the whole Nyquist band.
struct ChannelConfig {
    ChannelMode mode = ChannelMode::kSnrTarget;
    double snr_db = std::numeric_limits<double>::infinity();
    double reference_bandwidth_hz = 50.0;
    double distance_cm = 20.0;
    double reference_distance_cm = 20.0;
    double attenuation_exponent = 2.0;
    double noise_floor_db = -60.0;  // noise power in the reference bandwidth, re full scale
    uint64_t noise_seed = 1;
};

inline Waveform apply_channel(const Waveform& wave, const ChannelConfig& cfg) {
    if (wave.empty()) throw std::invalid_argument("apply_channel: empty waveform");

    Waveform out = wave;
    double sigma = 0.0;
    if (cfg.mode == ChannelMode::kSnrTarget) {
        if (std::isinf(cfg.snr_db)) return out;  // noise off
        double p = 0.0;
        for (float s : wave.samples) p += static_cast<double>(s) * s;
        p /= static_cast<double>(wave.samples.size());
        const double noise_in_band = p / db_to_power(cfg.snr_db);
        sigma = std::sqrt(noise_in_band * (wave.sample_rate / 2.0) / cfg.reference_bandwidth_hz);
    } else {
        const double d = std::max(cfg.distance_cm, 1e-6);
        const double scale = std::pow(cfg.reference_distance_cm / d, cfg.attenuation_exponent);
        for (auto& s : out.samples) s = static_cast<float>(s * scale);
        const double noise_in_band = db_to_power(cfg.noise_floor_db);
        sigma = std::sqrt(noise_in_band * (wave.sample_rate / 2.0) / cfg.reference_bandwidth_hz);
    }
    if (sigma > 0.0) {
        std::mt19937_64 rng(cfg.noise_seed);
        std::normal_distribution<double> dist(0.0, sigma);
        for (auto& s : out.samples) s = static_cast<float>(s + dist(rng));
    }
    out.clipped = 0;
    for (float s : out.samples)
        if (s > 1.0f || s < -1.0f) ++out.clipped;
    return out;
}

// Linear chirp schedule from f_low to f_high, single core, fine slots.
inline SymbolSchedule sweep_signal(double f_low, double f_high, double duration_s) {
    if (!(f_low > 0.0) || !(f_high > f_low) || f_high > kMaxToneHz)
        throw std::invalid_argument("sweep_signal: need 0 < f_low < f_high <= 24000");
    if (!(duration_s > 0.0)) throw std::invalid_argument("sweep_signal: duration must be positive");

    const size_t n = std::max<size_t>(64, static_cast<size_t>(std::llround(duration_s * 100.0)));
    SymbolSchedule out;
    out.slots.reserve(n);
    const double step = (f_high - f_low) / static_cast<double>(n);
    for (size_t k = 0; k < n; ++k) {
        Slot slot;
        slot.duration_ms = duration_s * 1000.0 / static_cast<double>(n);
        slot.cores = {ToneAssignment::tone(f_low + (static_cast<double>(k) + 0.5) * step)};
        out.slots.push_back(std::move(slot));
    }
    return out;
}

namespace detail {

// Welch-style mean power inside a band, Hann windowed. Normalized so a tone
// fully inside the band reads its time-domain mean-square power.
inline double band_power(const std::vector<float>& x, double fs, BandHz band) {
    if (x.empty()) return 0.0;
    size_t nfft = 4096;
    while (nfft > x.size() && nfft > 64) nfft >>= 1;

    const auto w = hann_window(nfft);
    double wsq = 0.0;
    for (double v : w) wsq += v * v;

    const size_t lo = static_cast<size_t>(std::ceil(band.low / bin_width(fs, nfft)));
    const size_t hi = std::min(nfft / 2,
                               static_cast<size_t>(std::floor(band.high / bin_width(fs, nfft))));
    if (hi < lo) return 0.0;

    double acc = 0.0;
    size_t segments = 0;
    for (size_t start = 0; start + nfft <= x.size() || start == 0; start += nfft / 2) {
        std::vector<std::complex<double>> seg(nfft, 0.0);
        const size_t avail = std::min(nfft, x.size() - start);
        for (size_t i = 0; i < avail; ++i) seg[i] = x[start + i] * w[i];
        fft(seg);
        double p = 0.0;
        for (size_t k = lo; k <= hi; ++k) {
            const double m2 = std::norm(seg[k]);
            p += (k == 0 || k == nfft / 2) ? m2 : 2.0 * m2;
        }
        acc += p / (static_cast<double>(nfft) * wsq);
        ++segments;
        if (start + nfft >= x.size()) break;
    }
    return segments ? acc / static_cast<double>(segments) : 0.0;
}

}  // namespace detail

// 10 log10 of in-band signal power over in-band noise power; +inf when the
// reference band holds no noise energy.
inline double measure_snr(const Waveform& wave, BandHz signal_band, const Waveform& noise_ref) {
    if (wave.sample_rate != noise_ref.sample_rate)
        throw std::invalid_argument("measure_snr: sample rates differ");
    const double ps = detail::band_power(wave.samples, wave.sample_rate, signal_band);
    const double pn = detail::band_power(noise_ref.samples, noise_ref.sample_rate, signal_band);
    if (pn <= 0.0) return std::numeric_limits<double>::infinity();
    return power_to_db(ps / pn);
}

// Hamming distance over the sent length; missing received bits count as
// errors.
inline double measure_ber(const Bits& sent, const Bits& received) {
    if (sent.empty()) return 0.0;
    size_t errors = 0;
    const size_t common = std::min(sent.size(), received.size());
    for (size_t i = 0; i < common; ++i)
        if ((sent[i] & 1u) != (received[i] & 1u)) ++errors;
    if (received.size() < sent.size()) errors += sent.size() - received.size();
    return static_cast<double>(errors) / static_cast<double>(sent.size());
}

// Drives a chirp through the model and reports the passbands it reveals.
// Edges are refined to 1 Hz by bisection with short probe tones, so a report
// closes the loop on the model's configured mask.
inline std::vector<BandHz> analyze_band_response(const PsuModel& model, double f_low,
                                                 double f_high, double sample_rate = 50000.0,
                                                 double threshold_db = -40.0) {
    if (sample_rate < 2.0 * f_high)
        throw std::invalid_argument("analyze_band_response: sample rate below Nyquist");

    auto probe = [&](double f) {
        SymbolSchedule s;
        Slot slot;
        slot.duration_ms = 40.0;
        slot.cores = {ToneAssignment::tone(f)};
        s.slots.push_back(slot);
        const Waveform w = synthesize(s, model, sample_rate);
        return goertzel_power(std::span<const float>(w.samples), f, sample_rate);
    };

    const size_t n = 1200;
    const SymbolSchedule chirp = sweep_signal(f_low, f_high, 12.0);
    const Waveform wave = synthesize(chirp, model, sample_rate);
    const size_t slot_len = wave.samples.size() / n;

    std::vector<double> freq(n), response(n);
    double peak = 0.0;
    for (size_t k = 0; k < n; ++k) {
        freq[k] = chirp.slots[k].cores[0].freq_hz;
        const size_t start = k * slot_len + slot_len / 10;
        const size_t len = slot_len - slot_len / 5;
        response[k] = goertzel_power(
            std::span<const float>(wave.samples.data() + start, len), freq[k], sample_rate);
        peak = std::max(peak, response[k]);
    }
    if (peak <= 0.0) return {};
    const double threshold = peak * db_to_power(threshold_db);

    auto refine_low = [&](double below, double above) {
        int64_t lo = static_cast<int64_t>(std::floor(below));
        int64_t hi = static_cast<int64_t>(std::ceil(above));
        if (probe(static_cast<double>(lo)) >= threshold) return static_cast<double>(lo);
        while (hi - lo > 1) {
            const int64_t mid = (lo + hi) / 2;
            (probe(static_cast<double>(mid)) >= threshold ? hi : lo) = mid;
        }
        return static_cast<double>(hi);
    };
    auto refine_high = [&](double above, double below) {
        int64_t lo = static_cast<int64_t>(std::floor(above));
        int64_t hi = static_cast<int64_t>(std::ceil(below));
        if (probe(static_cast<double>(hi)) >= threshold) return static_cast<double>(hi);
        while (hi - lo > 1) {
            const int64_t mid = (lo + hi) / 2;
            (probe(static_cast<double>(mid)) >= threshold ? lo : hi) = mid;
        }
        return static_cast<double>(lo);
    };

    std::vector<BandHz> bands;
    size_t k = 0;
    while (k < n) {
        if (response[k] < threshold) {
            ++k;
            continue;
        }
        size_t end = k;
        while (end + 1 < n && response[end + 1] >= threshold) ++end;
        BandHz band;
        band.low = k == 0 ? std::ceil(f_low) : refine_low(freq[k - 1], freq[k]);
        band.high = end == n - 1 ? std::floor(f_high) : refine_high(freq[end], freq[end + 1]);
        bands.push_back(band);
        k = end + 1;
    }
    return bands;
}

}  // namespace psumodem
