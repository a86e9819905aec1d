#pragma once

// Carrier generation by duty-cycled CPU load. A plan fixes the half-cycle
// timing for a core set; run_workload either drives the host CPU (one pinned
// worker per core, rendezvousing at half-cycle barriers) or produces the
// ideal switching trace without loading anything.

#include <algorithm>
#include <atomic>
#include <barrier>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#if defined(__linux__)
#include <pthread.h>
#include <sched.h>
#endif

#include "psumodem/types.hpp"

namespace psumodem {

inline constexpr double kDefaultMaxToggleHz = 50000.0;
inline constexpr double kNanosPerSecond = 1e9;

struct SchedulerError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct WorkloadPlan {
    int cores = 1;
    double freq_hz = 0.0;
    double duration_ms = 0.0;
    std::vector<double> per_core_freq_hz;  // optional, one entry per core
    double duty = 0.5;

    int64_t half_cycle_ns = 0;  // round(0.5e9 / freq)
    int64_t cycle_ns = 0;       // round(1e9 / freq)

    double core_freq(int core) const {
        return per_core_freq_hz.empty() ? freq_hz : per_core_freq_hz[static_cast<size_t>(core)];
    }
    int64_t core_half_cycle_ns(int core) const {
        return std::llround(0.5 * kNanosPerSecond / core_freq(core));
    }
    int64_t busy_span_ns(int core) const {
        return std::llround(2.0 * static_cast<double>(core_half_cycle_ns(core)) * duty);
    }
    int64_t idle_span_ns(int core) const {
        return 2 * core_half_cycle_ns(core) - busy_span_ns(core);
    }
    int64_t full_cycles(int core) const {
        return static_cast<int64_t>(std::floor(duration_ms * core_freq(core) / 1000.0 + 1e-9));
    }
};

enum class Phase : uint8_t { kBusy, kIdle };
enum class RunMode { kReal, kTraceOnly };

struct TraceEvent {
    int64_t t_ns = 0;
    Phase state = Phase::kBusy;
};

// Per-core ordered transition record; states strictly alternate and
// timestamps strictly increase within a core.
struct WorkloadTrace {
    std::vector<std::vector<TraceEvent>> per_core;

    bool empty() const {
        for (const auto& c : per_core)
            if (!c.empty()) return false;
        return true;
    }
};

inline WorkloadPlan plan_transmission(int cores, double freq_hz, double duration_ms,
                                      double duty = 0.5,
                                      double max_toggle_hz = kDefaultMaxToggleHz) {
    if (cores < 1) throw std::invalid_argument("plan_transmission: need at least one core");
    if (!(freq_hz > 0.0)) throw std::invalid_argument("plan_transmission: frequency must be positive");
    if (freq_hz > max_toggle_hz)
        throw std::invalid_argument("plan_transmission: frequency above the maximum toggle rate");
    if (!(duration_ms > 0.0)) throw std::invalid_argument("plan_transmission: duration must be positive");
    if (duty <= 0.0 || duty > 1.0) throw std::invalid_argument("plan_transmission: duty out of (0, 1]");

    WorkloadPlan plan;
    plan.cores = cores;
    plan.freq_hz = freq_hz;
    plan.duration_ms = duration_ms;
    plan.duty = duty;
    plan.half_cycle_ns = std::llround(0.5 * kNanosPerSecond / freq_hz);
    plan.cycle_ns = std::llround(kNanosPerSecond / freq_hz);
    return plan;
}

// Per-core carrier variant (one OFDM subcarrier per core).
inline WorkloadPlan plan_multicarrier(const std::vector<double>& freqs_hz, double duration_ms,
                                      double duty = 0.5,
                                      double max_toggle_hz = kDefaultMaxToggleHz) {
    if (freqs_hz.empty()) throw std::invalid_argument("plan_multicarrier: no frequencies");
    for (double f : freqs_hz)
        if (!(f > 0.0) || f > max_toggle_hz)
            throw std::invalid_argument("plan_multicarrier: frequency out of range");
    WorkloadPlan plan = plan_transmission(static_cast<int>(freqs_hz.size()), freqs_hz.front(),
                                          duration_ms, duty, max_toggle_hz);
    plan.per_core_freq_hz = freqs_hz;
    return plan;
}

namespace detail {

inline std::atomic<bool>& workload_active_flag() {
    static std::atomic<bool> flag{false};
    return flag;
}

inline int64_t now_ns(std::chrono::steady_clock::time_point origin) {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() -
                                                                origin)
        .count();
}

inline bool bind_to_core(unsigned core) {
#if defined(__linux__)
    cpu_set_t set;
    CPU_ZERO(&set);
    CPU_SET(core, &set);
    return pthread_setaffinity_np(pthread_self(), sizeof(set), &set) == 0;
#else
    (void)core;
    return false;
#endif
}

inline WorkloadTrace ideal_trace(const WorkloadPlan& plan) {
    WorkloadTrace trace;
    trace.per_core.resize(static_cast<size_t>(plan.cores));
    for (int c = 0; c < plan.cores; ++c) {
        const int64_t busy = plan.busy_span_ns(c);
        const int64_t idle = plan.idle_span_ns(c);
        const int64_t cycles = plan.full_cycles(c);
        auto& events = trace.per_core[static_cast<size_t>(c)];
        events.reserve(static_cast<size_t>(2 * cycles));
        int64_t t = 0;
        for (int64_t k = 0; k < cycles; ++k) {
            events.push_back({t, Phase::kBusy});
            events.push_back({t + busy, Phase::kIdle});
            t += busy + idle;
        }
    }
    return trace;
}

// Algorithm-style synchronized run: a coordinator thread keeps the half-cycle
// clock by spinning on the monotonic clock; workers pinned to distinct cores
// busy-loop through the BUSY half and block on the barrier through the IDLE
// half. The phase flag uses release/acquire so edges are visible immediately.
inline WorkloadTrace real_trace_common(const WorkloadPlan& plan) {
    const unsigned workers = static_cast<unsigned>(plan.cores);
    WorkloadTrace trace;
    trace.per_core.resize(workers);

    std::barrier lo_barrier(static_cast<std::ptrdiff_t>(workers + 1));
    std::barrier hi_barrier(static_cast<std::ptrdiff_t>(workers + 1));
    std::atomic<int> lo_flag{0};
    std::atomic<bool> stop{false};
    std::atomic<unsigned> bound{0};
    std::mutex error_mutex;
    std::vector<std::string> bind_errors;

    const auto origin = std::chrono::steady_clock::now();

    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (unsigned c = 0; c < workers; ++c) {
        threads.emplace_back([&, c] {
            if (!bind_to_core(c)) {
                std::lock_guard<std::mutex> lock(error_mutex);
                bind_errors.push_back("core " + std::to_string(c));
            }
            bound.fetch_add(1, std::memory_order_release);
            auto& events = trace.per_core[c];
            while (true) {
                lo_barrier.arrive_and_wait();
                if (stop.load(std::memory_order_acquire)) break;
                events.push_back({now_ns(origin), Phase::kBusy});
                while (!lo_flag.load(std::memory_order_acquire)) {
                    // busy half: full utilization of the pinned core
                }
                hi_barrier.arrive_and_wait();
                events.push_back({now_ns(origin), Phase::kIdle});
            }
        });
    }

    while (bound.load(std::memory_order_acquire) < workers) std::this_thread::yield();
    {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!bind_errors.empty()) {
            stop.store(true, std::memory_order_release);
            lo_barrier.arrive_and_wait();
            for (auto& t : threads) t.join();
            std::string msg = "core binding failed:";
            for (const auto& e : bind_errors) msg += " " + e;
            throw SchedulerError(msg);
        }
    }

    const int64_t end_ns = std::llround(plan.duration_ms * 1e6);
    const int64_t cycle = 2 * plan.half_cycle_ns;
    const int64_t busy = plan.busy_span_ns(0);
    while (now_ns(origin) < end_ns) {
        lo_flag.store(0, std::memory_order_release);
        lo_barrier.arrive_and_wait();
        while (now_ns(origin) % cycle < busy) {
        }
        lo_flag.store(1, std::memory_order_release);
        hi_barrier.arrive_and_wait();
        while (now_ns(origin) % cycle >= busy && now_ns(origin) < end_ns) {
        }
    }
    stop.store(true, std::memory_order_release);
    lo_barrier.arrive_and_wait();
    for (auto& t : threads) t.join();
    return trace;
}

// Independent per-core carriers (OFDM): no common cycle exists, so each
// worker keeps its own half-cycle clock.
inline WorkloadTrace real_trace_multicarrier(const WorkloadPlan& plan) {
    const unsigned workers = static_cast<unsigned>(plan.cores);
    WorkloadTrace trace;
    trace.per_core.resize(workers);

    std::mutex error_mutex;
    std::vector<std::string> bind_errors;
    const auto origin = std::chrono::steady_clock::now();
    const int64_t end_ns = std::llround(plan.duration_ms * 1e6);

    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (unsigned c = 0; c < workers; ++c) {
        threads.emplace_back([&, c] {
            if (!bind_to_core(c)) {
                std::lock_guard<std::mutex> lock(error_mutex);
                bind_errors.push_back("core " + std::to_string(c));
                return;
            }
            const int64_t cycle = 2 * plan.core_half_cycle_ns(static_cast<int>(c));
            const int64_t busy = plan.busy_span_ns(static_cast<int>(c));
            auto& events = trace.per_core[c];
            while (now_ns(origin) < end_ns) {
                events.push_back({now_ns(origin), Phase::kBusy});
                while (now_ns(origin) % cycle < busy && now_ns(origin) < end_ns) {
                }
                events.push_back({now_ns(origin), Phase::kIdle});
                const int64_t idle_until = (now_ns(origin) / cycle + 1) * cycle;
                while (now_ns(origin) < idle_until && now_ns(origin) < end_ns) {
                }
            }
        });
    }
    for (auto& t : threads) t.join();
    if (!bind_errors.empty()) {
        std::string msg = "core binding failed:";
        for (const auto& e : bind_errors) msg += " " + e;
        throw SchedulerError(msg);
    }
    return trace;
}

}  // namespace detail

inline void validate_plan(const WorkloadPlan& plan) {
    if (plan.cores < 1) throw std::invalid_argument("plan: need at least one core");
    if (!(plan.freq_hz > 0.0)) throw std::invalid_argument("plan: frequency must be positive");
    if (!plan.per_core_freq_hz.empty()) {
        if (plan.per_core_freq_hz.size() != static_cast<size_t>(plan.cores))
            throw std::invalid_argument("plan: per-core frequency list length must equal cores");
        for (double f : plan.per_core_freq_hz)
            if (!(f > 0.0)) throw std::invalid_argument("plan: per-core frequency must be positive");
    }
    if (plan.half_cycle_ns <= 0) throw std::invalid_argument("plan: half cycle must be positive");
}

// REAL mode spawns plan.cores pinned workers and loads the CPU; TRACE_ONLY
// returns the exact half-period edges without touching the host, for
// deterministic simulator input. Only one REAL run may be active at a time.
inline WorkloadTrace run_workload(const WorkloadPlan& plan, RunMode mode) {
    validate_plan(plan);
    if (mode == RunMode::kTraceOnly) return detail::ideal_trace(plan);

    if (std::thread::hardware_concurrency() < static_cast<unsigned>(plan.cores))
        throw SchedulerError("host exposes fewer schedulable cores than the plan requires");
    bool expected = false;
    if (!detail::workload_active_flag().compare_exchange_strong(expected, true))
        throw SchedulerError("another workload run is already active");
    struct Release {
        ~Release() { detail::workload_active_flag().store(false); }
    } release;

    WorkloadTrace trace = plan.per_core_freq_hz.empty() ? detail::real_trace_common(plan)
                                                        : detail::real_trace_multicarrier(plan);
    for (const auto& core : trace.per_core) {
        int64_t prev = -1;
        for (const auto& e : core) {
            if (e.t_ns <= prev) throw SchedulerError("clock monotonicity violation in trace");
            prev = e.t_ns;
        }
    }
    return trace;
}

struct TimingReport {
    struct PerCore {
        double duty_cycle = 0.0;       // measured busy fraction
        double duty_error = 0.0;       // |measured - planned|
        double median_spacing_ns = 0.0;
        double median_error = 0.0;     // |median - expected span| / expected span
        double p50_jitter = 0.0;       // percentiles of per-edge relative error
        double p90_jitter = 0.0;
        double p99_jitter = 0.0;
        size_t transitions = 0;
        bool pass = false;
    };
    std::vector<PerCore> per_core;
    double max_phase_skew_ns = 0.0;  // worst k-th busy-start disparity across cores
    bool pass = false;
};

namespace detail {

inline double percentile(std::vector<double> v, double p) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const double idx = p * static_cast<double>(v.size() - 1);
    const size_t lo = static_cast<size_t>(idx);
    const size_t hi = std::min(lo + 1, v.size() - 1);
    const double frac = idx - static_cast<double>(lo);
    return v[lo] * (1.0 - frac) + v[hi] * frac;
}

}  // namespace detail

// Compares realized edge spacings against the plan. PASS iff every core's
// median edge spacing is within `tolerance` (fraction) of its expected span.
inline TimingReport validate_trace(const WorkloadTrace& trace, const WorkloadPlan& plan,
                                   double tolerance) {
    if (trace.empty()) throw std::invalid_argument("validate_trace: empty trace");

    TimingReport report;
    report.pass = true;
    for (size_t c = 0; c < trace.per_core.size(); ++c) {
        const auto& events = trace.per_core[c];
        TimingReport::PerCore stats;
        stats.transitions = events.size();

        const double busy_span = static_cast<double>(plan.busy_span_ns(static_cast<int>(c)));
        const double idle_span = static_cast<double>(plan.idle_span_ns(static_cast<int>(c)));
        const double half = static_cast<double>(plan.core_half_cycle_ns(static_cast<int>(c)));

        std::vector<double> spacings;
        std::vector<double> rel_errors;
        double busy_total = 0.0, total = 0.0;
        for (size_t i = 0; i + 1 < events.size(); ++i) {
            const double dt = static_cast<double>(events[i + 1].t_ns - events[i].t_ns);
            spacings.push_back(dt);
            const double expected = events[i].state == Phase::kBusy ? busy_span : idle_span;
            rel_errors.push_back(std::abs(dt - expected) / expected);
            if (events[i].state == Phase::kBusy) busy_total += dt;
            total += dt;
        }
        if (!spacings.empty()) {
            stats.median_spacing_ns = detail::percentile(spacings, 0.5);
            stats.median_error = std::abs(stats.median_spacing_ns - half) / half;
            stats.p50_jitter = detail::percentile(rel_errors, 0.5);
            stats.p90_jitter = detail::percentile(rel_errors, 0.9);
            stats.p99_jitter = detail::percentile(rel_errors, 0.99);
            stats.duty_cycle = total > 0.0 ? busy_total / total : 0.0;
            stats.duty_error = std::abs(stats.duty_cycle - plan.duty);
            stats.pass = stats.median_error <= tolerance;
        }
        report.pass = report.pass && stats.pass;
        report.per_core.push_back(stats);
    }

    // cross-core phase skew at the k-th busy start (common-frequency runs)
    if (plan.per_core_freq_hz.empty() && trace.per_core.size() > 1) {
        size_t min_busy = SIZE_MAX;
        for (const auto& core : trace.per_core) min_busy = std::min(min_busy, (core.size() + 1) / 2);
        for (size_t k = 0; k < min_busy; ++k) {
            int64_t lo = INT64_MAX, hi = INT64_MIN;
            for (const auto& core : trace.per_core) {
                const int64_t t = core[2 * k].t_ns;
                lo = std::min(lo, t);
                hi = std::max(hi, t);
            }
            report.max_phase_skew_ns =
                std::max(report.max_phase_skew_ns, static_cast<double>(hi - lo));
        }
    }
    return report;
}

}  // namespace psumodem
