#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ausc/pcg_io.hpp"
#include "ausc/segmentation.hpp"
#include "ausc/tensor.hpp"

namespace ausc {

/// MFCC heat-map settings. Times are in seconds, frequencies in Hz.
struct MfccConfig {
    double segment_seconds = 3.0;
    double window_length = 0.025;
    double step = 0.01;
    std::size_t dft_length = 0;        // 0: smallest power of two >= window samples
    std::size_t filter_count = 26;
    std::size_t kept_coefficients = 6;
    std::size_t first_coefficient = 1;  // 1-based DCT output index of the first kept row
    double freq_low = 0.0;
    double freq_high = -1.0;           // < 0: Nyquist

    /// Throws ConfigError on inconsistent settings for sample rate `rate`.
    void validate(int rate) const;

    std::size_t window_samples(int rate) const;
    std::size_t step_samples(int rate) const;
    std::size_t segment_samples(int rate) const;
    std::size_t dft_size(int rate) const;
    std::size_t window_count() const;  // floor(T / step)
    double high_hz(int rate) const { return freq_high < 0 ? rate / 2.0 : freq_high; }
};

/// kept_coefficients x window_count matrix c(row = coefficient, col = window).
struct MfccHeatMap {
    Tensor<double> values;
    std::string source_id;
    std::size_t start_sample = 0;
    Label label = Label::Unknown;
    Quality quality = Quality::Unknown;

    std::size_t rows() const { return values.dim(0); }
    std::size_t cols() const { return values.dim(1); }
};

struct NormalizationStats {
    std::vector<double> mean;
    std::vector<double> std;  // raw population std; the floor is applied when standardizing
    friend bool operator==(const NormalizationStats&, const NormalizationStats&) = default;
};

inline constexpr double kLogFloor = 1e-12;
inline constexpr double kStdFloor = 1e-6;

double hz_to_mel(double hz);
double mel_to_hz(double mel);

std::vector<double> hamming_window(std::size_t n);

/// window_count x window_samples; window i starts at i * step samples and
/// is zero-padded past the end of the segment.
Tensor<double> frame_windows(std::span<const double> segment, const MfccConfig& cfg, int rate);

/// Hamming-weighted K-point DFT power |S(k)|^2 / N, returned for
/// k = 0 .. K-1 (index 0 is the DC bin, equal to the k = K term).
std::vector<double> dft_power(std::span<const double> window, const MfccConfig& cfg, int rate);

/// J x K triangular filters; peaks at J points spaced evenly in Mel between
/// M(low) and M(high), zero weight above Nyquist.
Tensor<double> build_mel_filterbank(const MfccConfig& cfg, int rate);

/// log(sum_k d(j,k) P(k) + floor) for every filter j.
std::vector<double> log_filter_energies(std::span<const double> power, const Tensor<double>& filters);

/// c_k = sum_j e_j cos(k (2j - 1) pi / 2J) for k = first .. first + count - 1
/// (1-based j and k).
std::vector<double> dct_coefficients(std::span<const double> log_energies, std::size_t count,
                                     std::size_t first = 1);

/// Precomputes the window, filterbank, DCT table and FFT twiddles once.
class MfccExtractor {
public:
    MfccExtractor(MfccConfig cfg, int rate);

    MfccHeatMap operator()(const Segment& segment) const;
    /// Heat-map values only, for a raw sample span.
    Tensor<double> compute(std::span<const double> samples) const;

    const MfccConfig& config() const { return cfg_; }
    int rate() const { return rate_; }

private:
    void power_spectrum(const double* window, std::vector<std::complex<double>>& buf, double* power) const;

    MfccConfig cfg_;
    int rate_;
    std::size_t n_, k_, step_, windows_;
    std::vector<double> hamming_;
    Tensor<double> filters_;
    std::vector<std::size_t> filter_lo_, filter_hi_;  // nonzero bin range per filter
    std::vector<double> dct_;                         // kept x J
    std::vector<std::complex<double>> twiddle_;       // K/2 roots, radix-2 path
    std::vector<std::size_t> bitrev_;
    std::vector<std::complex<double>> dft_table_;     // K x N, non-power-of-two path
};

MfccHeatMap segment_to_heatmap(const Segment& segment, const MfccConfig& cfg, int rate);

/// Fit mode (stats == nullopt) computes per-row mean/std over every map;
/// apply mode uses the given stats. Output (x - mean) / max(std, 1e-6).
std::pair<std::vector<MfccHeatMap>, NormalizationStats> standardize(std::vector<MfccHeatMap> maps,
                                                                    const std::optional<NormalizationStats>& stats);

// --- heat-map file ("MFHM") --------------------------------------------------

void write_heatmap(std::ostream& out, const MfccHeatMap& map);
MfccHeatMap read_heatmap(std::istream& in);
void save_heatmap(const std::filesystem::path& path, const MfccHeatMap& map);
MfccHeatMap load_heatmap(const std::filesystem::path& path);

// --- rendering ------------------------------------------------------------------

struct Rgb {
    std::uint8_t r, g, b;
    friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Viridis-like ramp through five anchors, t clamped to [0, 1].
Rgb color_ramp(double t);

/// Binary PPM (P6): width = cols * scale, height = rows * scale. Row 0 (the
/// first kept coefficient) is drawn at the top. Values are min-max scaled.
std::vector<std::uint8_t> render_ppm(const MfccHeatMap& map, std::size_t scale = 1);

}  // namespace ausc
