#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "psumodem/types.hpp"

namespace psumodem {

inline bool is_power_of_two(size_t n) { return n != 0 && (n & (n - 1)) == 0; }

namespace detail {

// Iterative radix-2 Cooley-Tukey, in place. Size must be a power of two.
inline void fft_radix2(std::vector<std::complex<double>>& x, bool inverse) {
    const size_t n = x.size();
    if (!is_power_of_two(n)) throw std::invalid_argument("fft size must be a power of two");

    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(x[i], x[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? 2.0 : -2.0) * std::numbers::pi / static_cast<double>(len);
        const std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (size_t k = 0; k < len / 2; ++k) {
                std::complex<double> u = x[i + k];
                std::complex<double> v = x[i + k + len / 2] * w;
                x[i + k] = u + v;
                x[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
    if (inverse)
        for (auto& v : x) v /= static_cast<double>(n);
}

}  // namespace detail

inline void fft(std::vector<std::complex<double>>& x) { detail::fft_radix2(x, false); }
inline void ifft(std::vector<std::complex<double>>& x) { detail::fft_radix2(x, true); }

inline std::vector<double> hann_window(size_t n) {
    std::vector<double> w(n);
    for (size_t i = 0; i < n; ++i)
        w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                    static_cast<double>(n));
    return w;
}

inline double bin_width(double sample_rate, size_t fft_size) {
    return sample_rate / static_cast<double>(fft_size);
}

inline size_t freq_to_bin(double freq, double sample_rate, size_t fft_size) {
    return static_cast<size_t>(std::llround(freq / bin_width(sample_rate, fft_size)));
}

inline double bin_to_freq(double bin, double sample_rate, size_t fft_size) {
    return bin * bin_width(sample_rate, fft_size);
}

// Magnitude spectrum of one analysis frame over fft_size/2+1 bins.
// Magnitudes are normalized so a bin-centered tone of amplitude `a` reads
// close to `a` regardless of fft_size or windowing.
inline std::vector<double> spectral_frame(std::span<const float> samples, bool window = true) {
    const size_t n = samples.size();
    if (!is_power_of_two(n)) throw std::invalid_argument("spectral_frame: window length must be a power of two");

    std::vector<std::complex<double>> x(n);
    double wsum = 0.0;
    if (window) {
        const auto w = hann_window(n);
        for (size_t i = 0; i < n; ++i) {
            x[i] = samples[i] * w[i];
            wsum += w[i];
        }
    } else {
        for (size_t i = 0; i < n; ++i) x[i] = samples[i];
        wsum = static_cast<double>(n);
    }
    fft(x);

    const double scale = 2.0 / wsum;
    std::vector<double> mag(n / 2 + 1);
    for (size_t k = 0; k < mag.size(); ++k) mag[k] = std::abs(x[k]) * scale;
    return mag;
}

// Goertzel single-tone power over an arbitrary rectangular window. Returns
// the squared amplitude estimate: a bin-aligned tone of amplitude `a`
// measures close to a^2.
inline double goertzel_power(std::span<const float> x, double freq, double sample_rate) {
    const size_t n = x.size();
    if (n == 0) return 0.0;
    const double w = 2.0 * std::numbers::pi * freq / sample_rate;
    const double coeff = 2.0 * std::cos(w);
    double s1 = 0.0, s2 = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double s0 = x[i] + coeff * s1 - s2;
        s2 = s1;
        s1 = s0;
    }
    const double power = s1 * s1 + s2 * s2 - coeff * s1 * s2;
    const double half = static_cast<double>(n) / 2.0;
    return power / (half * half);
}

}  // namespace psumodem
