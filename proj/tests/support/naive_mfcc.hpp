#pragma once

// Brute-force MFCC heat map written straight from the formulas: direct-sum
// DFT, double-loop filterbank, double-loop DCT. Shares no code with the
// library so it can serve as an oracle.

#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

namespace oracle {

struct NaiveMfcc {
    int rate = 2000;
    std::size_t window = 50;  // N = window length in samples
    std::size_t step = 20;
    std::size_t dft = 64;     // K
    std::size_t filters = 26; // J
    std::size_t kept = 6;
    std::size_t first = 1;    // first kept DCT index k
    std::size_t windows = 300;
    double low_hz = 0, high_hz = 1000;

    static double mel(double hz) { return 1125.0 * std::log(1.0 + hz / 700.0); }
    static double inv_mel(double m) { return 700.0 * (std::exp(m / 1125.0) - 1.0); }

    std::vector<double> power(const std::vector<double>& frame) const {
        const double pi = std::acos(-1.0);
        std::vector<double> p(dft);
        for (std::size_t k = 0; k < dft; ++k) {
            std::complex<double> s = 0;
            for (std::size_t n = 0; n < window; ++n) {
                const double h = 0.54 - 0.46 * std::cos(2 * pi * double(n) / double(window - 1));
                s += frame[n] * h * std::polar(1.0, -2 * pi * double(n) * double(k) / double(dft));
            }
            p[k] = std::norm(s) / double(window);
        }
        return p;
    }

    double weight(std::size_t j, std::size_t k) const {
        if (k > dft / 2) return 0.0;
        const double m_lo = mel(low_hz), m_hi = mel(high_hz);
        const double a = inv_mel(m_lo + (m_hi - m_lo) * double(j) / double(filters + 1));
        const double b = inv_mel(m_lo + (m_hi - m_lo) * double(j + 1) / double(filters + 1));
        const double c = inv_mel(m_lo + (m_hi - m_lo) * double(j + 2) / double(filters + 1));
        const double f = double(k) * rate / double(dft);
        if (f < a || f > c) return 0.0;
        return f <= b ? (f - a) / (b - a) : (c - f) / (c - b);
    }

    std::vector<double> log_energies(const std::vector<double>& p) const {
        std::vector<double> e(filters);
        for (std::size_t j = 0; j < filters; ++j) {
            double s = 0;
            for (std::size_t k = 0; k < dft; ++k) s += weight(j, k) * p[k];
            e[j] = std::log(s + 1e-12);
        }
        return e;
    }

    // c_k = sum_{j=1..J} e_j cos(k (2j - 1) pi / (2J))
    std::vector<double> dct(const std::vector<double>& e) const {
        const double pi = std::acos(-1.0);
        std::vector<double> c(kept);
        for (std::size_t r = 0; r < kept; ++r) {
            const double k = double(first + r);
            double s = 0;
            for (std::size_t j = 1; j <= filters; ++j) {
                s += e[j - 1] * std::cos(k * double(2 * j - 1) * pi / (2.0 * double(filters)));
            }
            c[r] = s;
        }
        return c;
    }

    /// rows = kept coefficients, cols = windows; row-major.
    std::vector<double> heatmap(const std::vector<double>& segment) const {
        std::vector<double> out(kept * windows);
        for (std::size_t i = 0; i < windows; ++i) {
            std::vector<double> frame(window, 0.0);
            for (std::size_t n = 0; n < window; ++n) {
                const std::size_t at = i * step + n;
                if (at < segment.size()) frame[n] = segment[at];
            }
            const auto c = dct(log_energies(power(frame)));
            for (std::size_t r = 0; r < kept; ++r) out[r * windows + i] = c[r];
        }
        return out;
    }
};

}  // namespace oracle
