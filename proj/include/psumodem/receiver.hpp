#pragma once

// FFT-based receiver: streaming spectral analysis with noise smoothing, a
// preamble detector that learns the channel parameters (T, f0, f1 and tone
// amplitudes), an FSK demodulator, and the PREAMBLE/DEMODULATE frame state
// machine with signal-lost handling.
//
// Carrier tones are classified per analysis hop; symbols are recovered by
// run-length decoding of the classification stream, re-anchoring the symbol
// clock at every observed transition. The symbol length learned from the
// preamble is refined while demodulating (decision-directed), so timing
// drift does not accumulate across a 40-bit frame body.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "psumodem/fft.hpp"
#include "psumodem/framing.hpp"
#include "psumodem/types.hpp"

namespace psumodem {

struct ReceiverConfig {
    double sample_rate = 44100.0;
    size_t fft_size = 4096;
    size_t hop = 1024;
    size_t smoothing_window = 4;  // w
    double lost_signal_timeout_s = 3.0;
    double detection_margin_db = 6.0;
    BandHz search_band{2000.0, 24000.0};
    size_t min_symbol_hops = 2;

    void validate() const {
        if (!is_power_of_two(fft_size))
            throw std::invalid_argument("receiver: fft_size must be a power of two");
        if (hop == 0 || hop > fft_size) throw std::invalid_argument("receiver: need 0 < hop <= fft_size");
        if (smoothing_window < 1) throw std::invalid_argument("receiver: smoothing window must be >= 1");
        if (!(lost_signal_timeout_s > 0.0))
            throw std::invalid_argument("receiver: lost-signal timeout must be positive");
        if (!(sample_rate > 0.0)) throw std::invalid_argument("receiver: sample rate must be positive");
        if (search_band.low < 0.0 || search_band.high <= search_band.low)
            throw std::invalid_argument("receiver: bad search band");
    }
};

// Channel parameters learned from the preamble.
struct ChannelParams {
    double symbol_time_s = 0.0;  // T
    double f0_hz = 0.0;
    double f1_hz = 0.0;
    double amp0 = 0.0;  // measured magnitude of the '0' tone
    double amp1 = 0.0;
};

enum class RxState { kPreamble, kDemodulate };

enum class RxEventType { kPreambleDetected, kPayload, kCrcError, kSignalLost };

struct RxEvent {
    RxEventType type = RxEventType::kPayload;
    double t_s = 0.0;
    uint32_t payload = 0;  // kPayload only
};

inline const char* to_string(RxEventType t) {
    switch (t) {
        case RxEventType::kPreambleDetected: return "preamble";
        case RxEventType::kPayload: return "payload";
        case RxEventType::kCrcError: return "crc_error";
        case RxEventType::kSignalLost: return "signal_lost";
    }
    return "?";
}

// Per-bin moving average over the last w spectra (fewer at stream start).
class Smoother {
  public:
    explicit Smoother(size_t w) : w_(w) {}

    const std::vector<double>& push(const std::vector<double>& spec) {
        if (sum_.size() != spec.size()) {
            sum_.assign(spec.size(), 0.0);
            hist_.clear();
        }
        hist_.push_back(spec);
        for (size_t i = 0; i < spec.size(); ++i) sum_[i] += spec[i];
        if (hist_.size() > w_) {
            for (size_t i = 0; i < spec.size(); ++i) sum_[i] -= hist_.front()[i];
            hist_.pop_front();
        }
        out_.resize(spec.size());
        const double inv = 1.0 / static_cast<double>(hist_.size());
        for (size_t i = 0; i < spec.size(); ++i) out_[i] = sum_[i] * inv;
        return out_;
    }

    void reset() {
        hist_.clear();
        sum_.clear();
    }

  private:
    size_t w_;
    std::deque<std::vector<double>> hist_;
    std::vector<double> sum_;
    std::vector<double> out_;
};

inline double neighborhood_max(const std::vector<double>& spec, size_t bin) {
    double m = spec[bin];
    if (bin > 0) m = std::max(m, spec[bin - 1]);
    if (bin + 1 < spec.size()) m = std::max(m, spec[bin + 1]);
    return m;
}

// Per-hop tone decision: '1' iff the f1 bin region out-powers the f0 one.
// Ties break to '0'.
inline int classify_spectrum(const std::vector<double>& spec, size_t bin0, size_t bin1) {
    return neighborhood_max(spec, bin1) > neighborhood_max(spec, bin0) ? 1 : 0;
}

// Per-symbol decision over a time-domain window of length T: compares the
// tone energies at f0 and f1. Ties break to '0'.
inline int demodulate_symbol(std::span<const float> window, const ChannelParams& params,
                             double sample_rate) {
    const double e0 = goertzel_power(window, params.f0_hz, sample_rate);
    const double e1 = goertzel_power(window, params.f1_hz, sample_rate);
    return e1 > e0 ? 1 : 0;
}

// Reference demodulator for instrumentation (BER sweeps): symbol timing and
// tone frequencies are known, only the decisions are under test.
inline Bits demodulate_known(const Waveform& wave, const ChannelParams& params, size_t nbits,
                             double start_s = 0.0) {
    Bits out;
    out.reserve(nbits);
    for (size_t n = 0; n < nbits; ++n) {
        const auto i0 = static_cast<size_t>(
            std::llround((start_s + static_cast<double>(n) * params.symbol_time_s) * wave.sample_rate));
        auto i1 = static_cast<size_t>(std::llround(
            (start_s + static_cast<double>(n + 1) * params.symbol_time_s) * wave.sample_rate));
        i1 = std::min(i1, wave.samples.size());
        if (i0 >= i1) break;
        out.push_back(static_cast<uint8_t>(demodulate_symbol(
            std::span<const float>(wave.samples.data() + i0, i1 - i0), params, wave.sample_rate)));
    }
    return out;
}

// OFDM-OOK slot detector over a known slot grid: a subcarrier is ON when its
// slot energy clears a quarter of the strongest observed slot energy.
inline std::vector<std::vector<uint8_t>> detect_ook_slots(const Waveform& wave,
                                                          const std::vector<double>& subcarriers,
                                                          double slot_ms, size_t nslots,
                                                          double start_s = 0.0) {
    std::vector<std::vector<double>> power(nslots, std::vector<double>(subcarriers.size(), 0.0));
    double peak = 0.0;
    for (size_t n = 0; n < nslots; ++n) {
        const double t0 = start_s + static_cast<double>(n) * slot_ms / 1000.0;
        auto i0 = static_cast<size_t>(std::llround(t0 * wave.sample_rate));
        auto i1 = static_cast<size_t>(
            std::llround((t0 + slot_ms / 1000.0) * wave.sample_rate));
        i1 = std::min(i1, wave.samples.size());
        if (i0 >= i1) break;
        const size_t guard = (i1 - i0) / 10;  // skip slot-edge transients
        const std::span<const float> win(wave.samples.data() + i0 + guard, i1 - i0 - 2 * guard);
        for (size_t k = 0; k < subcarriers.size(); ++k) {
            power[n][k] = goertzel_power(win, subcarriers[k], wave.sample_rate);
            peak = std::max(peak, power[n][k]);
        }
    }
    const double threshold = peak / 4.0;
    std::vector<std::vector<uint8_t>> on(nslots, std::vector<uint8_t>(subcarriers.size(), 0));
    for (size_t n = 0; n < nslots; ++n)
        for (size_t k = 0; k < subcarriers.size(); ++k)
            on[n][k] = power[n][k] >= threshold ? 1 : 0;
    return on;
}

// Searches the smoothed spectrum stream for eight alternating tone runs of
// consistent duration between two stable bins. On a match it reports the
// learned channel parameters and the hop position where the payload starts.
class PreambleDetector {
  public:
    struct Run {
        double start = 0.0;
        double end = 0.0;  // exclusive
        double bin_sum = 0.0;
        double amp_sum = 0.0;
        int hops = 0;
        bool silent = true;

        double len() const { return end - start; }
        double mean_bin() const { return hops ? bin_sum / hops : -1.0; }
        double mean_amp() const { return hops ? amp_sum / hops : 0.0; }
    };

    struct Detection {
        ChannelParams params;
        size_t bin0 = 0;
        size_t bin1 = 0;
        double t_hops = 0.0;      // symbol length in hops
        double anchor_hop = 0.0;  // payload start
    };

    PreambleDetector(const ReceiverConfig& cfg)
        : margin_(db_to_amplitude(cfg.detection_margin_db)),
          min_hops_(static_cast<double>(cfg.min_symbol_hops)),
          bin_hz_(bin_width(cfg.sample_rate, cfg.fft_size)) {
        b_lo_ = static_cast<size_t>(std::max(1.0, std::ceil(cfg.search_band.low / bin_hz_)));
        b_hi_ = static_cast<size_t>(
            std::min(static_cast<double>(cfg.fft_size / 2), std::floor(cfg.search_band.high / bin_hz_)));
        if (b_hi_ <= b_lo_) throw std::invalid_argument("receiver: search band has no FFT bins");
    }

    void reset() {
        done_.clear();
        has_cur_ = false;
    }

    // Re-arms the detector mid-stream with the tail of a decoded frame: the
    // leftover of the closing run (already the next preamble's first symbol)
    // and the run in progress. Keeps bin alignment across back-to-back frames.
    void seed(std::optional<Run> prev, Run cur) {
        reset();
        if (prev) done_.push_back(*prev);
        cur_ = cur;
        has_cur_ = true;
    }

    std::optional<Detection> feed(const std::vector<double>& spec, size_t hop_index) {
        const double k = static_cast<double>(hop_index);
        double mean = 0.0, peak = 0.0;
        size_t peak_bin = b_lo_;
        for (size_t b = b_lo_; b <= b_hi_; ++b) {
            mean += spec[b];
            if (spec[b] > peak) {
                peak = spec[b];
                peak_bin = b;
            }
        }
        mean /= static_cast<double>(b_hi_ - b_lo_ + 1);
        if (!nf_init_) {
            noise_floor_ = mean;
            nf_init_ = true;
        } else {
            noise_floor_ += 0.05 * (mean - noise_floor_);
        }

        const bool active = peak > 1e-12 && peak >= noise_floor_ * margin_;
        if (!has_cur_) {
            cur_ = new_run(k, active, peak_bin, peak);
            has_cur_ = true;
            return std::nullopt;
        }

        const bool same = active == !cur_.silent &&
                          (!active || std::abs(static_cast<double>(peak_bin) - cur_ref_bin()) <= 1.0);
        if (same) {
            cur_.end = k + 1.0;
            if (active) {
                cur_.bin_sum += static_cast<double>(peak_bin);
                cur_.amp_sum += peak;
                ++cur_.hops;
            }
        } else {
            done_.push_back(cur_);
            if (done_.size() > 8) done_.pop_front();
            cur_ = new_run(k, active, peak_bin, peak);
        }
        return try_match();
    }

  private:
    static Run new_run(double k, bool active, size_t bin, double amp) {
        Run r;
        r.start = k;
        r.end = k + 1.0;
        r.silent = !active;
        if (active) {
            r.bin_sum = static_cast<double>(bin);
            r.amp_sum = amp;
            r.hops = 1;
        }
        return r;
    }

    double cur_ref_bin() const { return cur_.hops ? cur_.bin_sum / cur_.hops : -10.0; }

    static bool group_consistent(const std::vector<double>& bins) {
        for (double b : bins)
            for (double c : bins)
                if (std::abs(b - c) > 2.0) return false;
        return true;
    }

    std::optional<Detection> try_match() {
        if (done_.size() < 7 || cur_.silent) return std::nullopt;
        const size_t base = done_.size() - 7;
        const Run* r[7];
        for (size_t i = 0; i < 7; ++i) {
            r[i] = &done_[base + i];
            if (r[i]->silent) return std::nullopt;
        }

        // '10101010': runs r[0],r[2],r[4],r[6] carry f1; r[1],r[3],r[5] and
        // the ongoing run carry f0.
        const std::vector<double> bins_a{r[0]->mean_bin(), r[2]->mean_bin(), r[4]->mean_bin(),
                                         r[6]->mean_bin()};
        const std::vector<double> bins_b{r[1]->mean_bin(), r[3]->mean_bin(), r[5]->mean_bin(),
                                         cur_ref_bin()};
        if (!group_consistent(bins_a) || !group_consistent(bins_b)) return std::nullopt;
        const double mean_a = (bins_a[0] + bins_a[1] + bins_a[2] + bins_a[3]) / 4.0;
        const double mean_b = (bins_b[0] + bins_b[1] + bins_b[2] + bins_b[3]) / 4.0;
        if (std::abs(mean_a - mean_b) < 2.0) return std::nullopt;

        // r[1]..r[6] are complete symbols; r[0] may be clipped or merged.
        double m = 0.0;
        for (size_t i = 1; i < 7; ++i) m += r[i]->len();
        m /= 6.0;
        if (m < min_hops_) return std::nullopt;
        for (size_t i = 1; i < 7; ++i)
            if (r[i]->len() < 0.55 * m || r[i]->len() > 1.45 * m) return std::nullopt;
        if (cur_.len() < m - 0.25) return std::nullopt;

        const double t_hops = (cur_.start - r[1]->start) / 6.0;
        Detection d;
        d.t_hops = t_hops;
        d.anchor_hop = cur_.start + t_hops;
        d.bin1 = static_cast<size_t>(std::llround(mean_a));
        d.bin0 = static_cast<size_t>(std::llround(mean_b));
        d.params.f1_hz = mean_a * bin_hz_;
        d.params.f0_hz = mean_b * bin_hz_;
        d.params.amp1 =
            (r[0]->mean_amp() + r[2]->mean_amp() + r[4]->mean_amp() + r[6]->mean_amp()) / 4.0;
        d.params.amp0 = (r[1]->mean_amp() + r[3]->mean_amp() + r[5]->mean_amp()) / 3.0;
        return d;
    }

    std::deque<Run> done_;
    Run cur_;
    bool has_cur_ = false;
    double noise_floor_ = 0.0;
    bool nf_init_ = false;
    double margin_ = 2.0;
    double min_hops_ = 2.0;
    double bin_hz_ = 0.0;
    size_t b_lo_ = 1, b_hi_ = 2;
};

// Streaming frame receiver. Feed samples with push(); call finish() at end
// of stream to flush (appends silence so open runs close).
class Receiver {
  public:
    explicit Receiver(const ReceiverConfig& cfg)
        : cfg_(cfg), smoother_(cfg.smoothing_window), detector_(cfg) {
        cfg_.validate();
    }

    void push(std::span<const float> samples) {
        buf_.insert(buf_.end(), samples.begin(), samples.end());
        process_frames();
    }

    void finish() {
        if (finished_) return;
        finished_ = true;
        const size_t pad = cfg_.fft_size + cfg_.hop * (cfg_.smoothing_window + 8);
        const std::vector<float> zeros(pad, 0.0f);
        push(std::span<const float>(zeros));
    }

    const std::vector<RxEvent>& events() const { return events_; }
    RxState state() const { return state_; }
    const ChannelParams& params() const { return params_; }

  private:
    static constexpr int kDebounceHops = 2;
    static constexpr int kUnset = -2;
    static constexpr int kSilent = -1;

    void process_frames() {
        while (true) {
            const size_t frame_start = next_frame_ * cfg_.hop;
            if (frame_start < buf_offset_) break;  // cannot happen, defensive
            const size_t idx = frame_start - buf_offset_;
            if (idx + cfg_.fft_size > buf_.size()) break;
            const auto raw =
                spectral_frame(std::span<const float>(buf_.data() + idx, cfg_.fft_size));
            const auto& smoothed = smoother_.push(raw);
            process_spectrum(smoothed, next_frame_);
            ++next_frame_;
            // drop samples no frame will need again
            const size_t keep_from = next_frame_ * cfg_.hop;
            if (keep_from > buf_offset_ + 65536) {
                const size_t drop = keep_from - buf_offset_;
                buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(drop));
                buf_offset_ = keep_from;
            }
        }
    }

    double hop_seconds(double hop_pos) const {
        return (hop_pos * static_cast<double>(cfg_.hop) + static_cast<double>(cfg_.fft_size) / 2.0) /
               cfg_.sample_rate;
    }

    void process_spectrum(const std::vector<double>& spec, size_t k) {
        if (state_ == RxState::kPreamble) {
            if (auto det = detector_.feed(spec, k)) enter_demodulate(*det);
        } else {
            demodulate_hop(spec, k);
        }
    }

    void enter_demodulate(const PreambleDetector::Detection& d) {
        state_ = RxState::kDemodulate;
        params_ = d.params;
        bin0_ = d.bin0;
        bin1_ = d.bin1;
        t_hops_ = d.t_hops;
        params_.symbol_time_s = d.t_hops * static_cast<double>(cfg_.hop) / cfg_.sample_rate;
        run_start_ = d.anchor_hop;
        run_bit_ = kUnset;
        pend_bit_ = kUnset;
        pend_n_ = 0;
        bits_.clear();
        lost_threshold_ = params_.amp0 * db_to_amplitude(-cfg_.detection_margin_db);
        events_.push_back({RxEventType::kPreambleDetected, hop_seconds(d.anchor_hop), 0});
    }

    void reset_to_preamble() {
        state_ = RxState::kPreamble;
        bits_.clear();
        detector_.reset();
    }

    void demodulate_hop(const std::vector<double>& spec, size_t hop_index) {
        const double k = static_cast<double>(hop_index);
        const double m0 = neighborhood_max(spec, bin0_);
        const double m1 = neighborhood_max(spec, bin1_);
        const int c = std::max(m0, m1) < lost_threshold_ ? kSilent : (m1 > m0 ? 1 : 0);

        if (run_bit_ == kUnset) {
            run_bit_ = c;  // run_start_ stays at the preamble anchor
        } else if (c == run_bit_) {
            pend_bit_ = kUnset;
            pend_n_ = 0;
        } else {
            if (c == pend_bit_) {
                ++pend_n_;
            } else {
                pend_bit_ = c;
                pend_n_ = 1;
                pend_start_ = k;
            }
            if (pend_n_ >= kDebounceHops) {
                close_run(pend_start_, k, pend_bit_);
                if (state_ == RxState::kPreamble) return;
                run_bit_ = pend_bit_;
                run_start_ = pend_start_;
                pend_bit_ = kUnset;
                pend_n_ = 0;
            }
        }

        if (state_ == RxState::kDemodulate && run_bit_ == kSilent) {
            const double silent_s = (k - run_start_ + 1.0) * static_cast<double>(cfg_.hop) / cfg_.sample_rate;
            if (silent_s >= cfg_.lost_signal_timeout_s) {
                events_.push_back({RxEventType::kSignalLost, hop_seconds(k), 0});
                reset_to_preamble();
            }
        }
    }

    // A tone run [run_start_, t_end) ended. Emit its bits; silent runs emit
    // nothing, which freezes the symbol clock across short dropouts.
    void close_run(double t_end, double now_hop, int next_bit) {
        if (run_bit_ != 0 && run_bit_ != 1) return;
        const double len = t_end - run_start_;
        const int n = static_cast<int>(std::llround(len / t_hops_));
        if (n <= 0) return;

        // decision-directed symbol clock refinement
        const double t_obs = len / n;
        if (n <= 8 && std::abs(t_obs - t_hops_) < 0.35 * t_hops_)
            t_hops_ += 0.25 * (t_obs - t_hops_);

        for (int i = 0; i < n; ++i) {
            bits_.push_back(static_cast<uint8_t>(run_bit_));
            if (bits_.size() == kBodyBits) {
                finish_frame(t_end, now_hop, i + 1, next_bit);
                return;
            }
        }
    }

    void finish_frame(double t_end, double now_hop, int symbols_consumed, int next_bit) {
        const auto payload = decode_frame(std::span<const uint8_t>(bits_.data(), kBodyBits));
        if (payload)
            events_.push_back({RxEventType::kPayload, hop_seconds(t_end), *payload});
        else
            events_.push_back({RxEventType::kCrcError, hop_seconds(t_end), 0});

        // Hand the unconsumed tail of the closing run (the next preamble's
        // first symbol, when frames are back to back) to the detector.
        const double leftover_start = run_start_ + symbols_consumed * t_hops_;
        const double leftover = t_end - leftover_start;
        const int old_bit = run_bit_;
        const double old_amp = old_bit == 1 ? params_.amp1 : params_.amp0;

        reset_to_preamble();

        std::optional<PreambleDetector::Run> prev;
        if (leftover > 0.5) {
            PreambleDetector::Run p;
            p.start = leftover_start;
            p.end = t_end;
            p.silent = false;
            p.bin_sum = static_cast<double>(old_bit == 1 ? bin1_ : bin0_);
            p.amp_sum = old_amp;
            p.hops = 1;
            prev = p;
        }
        PreambleDetector::Run cur;
        cur.start = t_end;
        cur.end = now_hop + 1.0;
        cur.silent = next_bit == kSilent;
        if (!cur.silent) {
            cur.bin_sum = static_cast<double>(next_bit == 1 ? bin1_ : bin0_);
            cur.amp_sum = next_bit == 1 ? params_.amp1 : params_.amp0;
            cur.hops = 1;
        }
        detector_.seed(prev, cur);
    }

    ReceiverConfig cfg_;
    Smoother smoother_;
    PreambleDetector detector_;

    std::vector<float> buf_;
    size_t buf_offset_ = 0;
    size_t next_frame_ = 0;
    bool finished_ = false;

    RxState state_ = RxState::kPreamble;
    ChannelParams params_;
    std::vector<RxEvent> events_;

    size_t bin0_ = 0, bin1_ = 0;
    double t_hops_ = 0.0;
    double run_start_ = 0.0;
    int run_bit_ = kUnset;
    int pend_bit_ = kUnset;
    int pend_n_ = 0;
    double pend_start_ = 0.0;
    double lost_threshold_ = 0.0;
    Bits bits_;
};

// Runs the state machine over a whole recording and returns the event list.
inline std::vector<RxEvent> receive_stream(const Waveform& wave, const ReceiverConfig& cfg) {
    cfg.validate();
    if (!wave.empty() && std::llround(wave.sample_rate) != std::llround(cfg.sample_rate))
        throw std::invalid_argument("receive_stream: waveform sample rate does not match the config");
    Receiver rx(cfg);
    if (wave.empty()) return rx.events();
    rx.push(std::span<const float>(wave.samples));
    rx.finish();
    return rx.events();
}

}  // namespace psumodem
