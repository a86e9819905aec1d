#pragma once

// Bit-to-carrier mapping: B-FSK and OFDM-OOK modulators, the AM / PWM
// sample quantizers, and the SymbolSchedule bridge consumed by both the
// workload scheduler and the channel simulator.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "psumodem/types.hpp"

namespace psumodem {

inline constexpr double kMaxToneHz = 24000.0;

struct FskConfig {
    double f0_hz = 8500.0;  // symbol '0'
    double f1_hz = 8750.0;  // symbol '1'
    double symbol_time_ms = 20.0;

    void validate() const {
        if (f0_hz == f1_hz) throw std::invalid_argument("FSK requires f0 != f1");
        for (double f : {f0_hz, f1_hz})
            if (f <= 0.0 || f > kMaxToneHz)
                throw std::invalid_argument("FSK frequency out of (0, 24000] Hz");
        if (symbol_time_ms <= 0.0) throw std::invalid_argument("symbol time must be positive");
    }
};

struct OfdmConfig {
    std::vector<double> subcarriers_hz;  // one per transmitting core
    double symbol_time_ms = 20.0;

    void validate() const {
        if (subcarriers_hz.empty()) throw std::invalid_argument("OFDM needs at least one subcarrier");
        for (double f : subcarriers_hz)
            if (f <= 0.0 || f > kMaxToneHz)
                throw std::invalid_argument("subcarrier frequency out of (0, 24000] Hz");
        auto sorted = subcarriers_hz;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
            throw std::invalid_argument("subcarrier frequencies must be pairwise distinct");
        if (symbol_time_ms <= 0.0) throw std::invalid_argument("symbol time must be positive");
    }
};

// One per-core carrier assignment inside a slot. freq_hz == 0 means the
// core stays idle for the slot. `duty` is the BUSY fraction of each carrier
// cycle; `pulsed` selects unipolar pulse-train rendering (PWM playback)
// instead of the zero-mean square carrier.
struct ToneAssignment {
    double freq_hz = 0.0;
    double level = 1.0;
    double duty = 0.5;
    bool pulsed = false;

    bool silent() const { return freq_hz <= 0.0; }

    static ToneAssignment off() { return ToneAssignment{0.0, 0.0, 0.5, false}; }
    static ToneAssignment tone(double f, double lvl = 1.0) {
        return ToneAssignment{f, lvl, 0.5, false};
    }
    static ToneAssignment pulse(double f, double duty_cycle) {
        return ToneAssignment{f, 1.0, duty_cycle, true};
    }
};

struct Slot {
    double duration_ms = 0.0;
    std::vector<ToneAssignment> cores;
};

struct SymbolSchedule {
    std::vector<Slot> slots;
    size_t padded_bits = 0;  // zeros appended by ofdm_modulate to fill the last group

    double total_ms() const {
        double t = 0.0;
        for (const auto& s : slots) t += s.duration_ms;
        return t;
    }
    size_t core_count() const { return slots.empty() ? 0 : slots.front().cores.size(); }

    void validate() const {
        const size_t n = core_count();
        for (const auto& s : slots) {
            if (s.duration_ms <= 0.0) throw std::invalid_argument("slot duration must be positive");
            if (s.cores.size() != n)
                throw std::invalid_argument("per-slot core count must be constant");
        }
    }
};

// One slot per bit; every core carries f0 for '0' and f1 for '1'.
inline SymbolSchedule fsk_modulate(const Bits& bits, const FskConfig& cfg, int cores = 1) {
    cfg.validate();
    if (bits.empty()) throw std::invalid_argument("fsk_modulate: empty bit sequence");
    if (cores < 1) throw std::invalid_argument("fsk_modulate: core count must be >= 1");

    SymbolSchedule out;
    out.slots.reserve(bits.size());
    for (uint8_t b : bits) {
        Slot slot;
        slot.duration_ms = cfg.symbol_time_ms;
        slot.cores.assign(static_cast<size_t>(cores),
                          ToneAssignment::tone(b ? cfg.f1_hz : cfg.f0_hz));
        out.slots.push_back(std::move(slot));
    }
    return out;
}

// Positional on-off keying: per slot, subcarrier k is on iff its bit is '1'.
// The bit count is zero-padded up to a multiple of the subcarrier count; the
// padding is recorded on the returned schedule.
inline SymbolSchedule ofdm_modulate(const Bits& bits, const OfdmConfig& cfg) {
    cfg.validate();
    if (bits.empty()) throw std::invalid_argument("ofdm_modulate: empty bit sequence");

    const size_t group = cfg.subcarriers_hz.size();
    Bits padded = bits;
    while (padded.size() % group != 0) padded.push_back(0);

    SymbolSchedule out;
    out.padded_bits = padded.size() - bits.size();
    out.slots.reserve(padded.size() / group);
    for (size_t i = 0; i < padded.size(); i += group) {
        Slot slot;
        slot.duration_ms = cfg.symbol_time_ms;
        slot.cores.reserve(group);
        for (size_t k = 0; k < group; ++k)
            slot.cores.push_back(padded[i + k] ? ToneAssignment::tone(cfg.subcarriers_hz[k])
                                               : ToneAssignment::off());
        out.slots.push_back(std::move(slot));
    }
    return out;
}

// Number of cores to activate for a sample: round(|s| * N).
inline int am_quantize(double sample, int n_levels) {
    if (n_levels < 1) throw std::invalid_argument("am_quantize: need at least one level");
    const int k = static_cast<int>(std::lround(std::abs(sample) * n_levels));
    return std::clamp(k, 0, n_levels);
}

// Duty cycle for a sample: round(s * R) / R.
inline double pwm_quantize(double sample, int resolution) {
    if (resolution < 2) throw std::invalid_argument("pwm_quantize: resolution must be >= 2");
    const double s = std::clamp(sample, 0.0, 1.0);
    return std::lround(s * resolution) / static_cast<double>(resolution);
}

// Line-oriented debug/fixture form: "<ms> <freq>:<level>:<duty>[:p] ..." with
// '-' for idle cores.
inline std::string schedule_to_text(const SymbolSchedule& s) {
    std::ostringstream os;
    os.precision(12);
    if (s.padded_bits) os << "# padded_bits " << s.padded_bits << "\n";
    for (const auto& slot : s.slots) {
        os << slot.duration_ms;
        for (const auto& c : slot.cores) {
            if (c.silent())
                os << " -";
            else {
                os << ' ' << c.freq_hz << ':' << c.level << ':' << c.duty;
                if (c.pulsed) os << ":p";
            }
        }
        os << '\n';
    }
    return os.str();
}

inline SymbolSchedule schedule_from_text(const std::string& text) {
    SymbolSchedule out;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream hs(line.substr(1));
            std::string key;
            if (hs >> key && key == "padded_bits") hs >> out.padded_bits;
            continue;
        }
        std::istringstream ls(line);
        Slot slot;
        if (!(ls >> slot.duration_ms)) throw std::invalid_argument("schedule: bad slot line: " + line);
        std::string tok;
        while (ls >> tok) {
            if (tok == "-") {
                slot.cores.push_back(ToneAssignment::off());
                continue;
            }
            ToneAssignment a;
            std::replace(tok.begin(), tok.end(), ':', ' ');
            std::istringstream ts(tok);
            std::string flag;
            if (!(ts >> a.freq_hz >> a.level >> a.duty))
                throw std::invalid_argument("schedule: bad tone entry: " + line);
            if (ts >> flag && flag == "p") a.pulsed = true;
            slot.cores.push_back(a);
        }
        out.slots.push_back(std::move(slot));
    }
    out.validate();
    return out;
}

}  // namespace psumodem
