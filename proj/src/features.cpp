#include "ausc/features.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "ausc/binio.hpp"
#include "ausc/error.hpp"

namespace ausc {

namespace {

constexpr double kPi = std::numbers::pi;

std::size_t to_samples(double seconds, int rate, const char* what) {
    const double v = seconds * rate;
    const auto n = static_cast<std::size_t>(std::llround(v));
    if (n == 0 || std::abs(v - double(n)) > 1e-6) {
        throw ConfigError(std::string(what) + " must be a positive whole number of samples at " +
                          std::to_string(rate) + " Hz");
    }
    return n;
}

bool is_pow2(std::size_t n) { return n && !(n & (n - 1)); }

}  // namespace

// --- config -------------------------------------------------------------------------

std::size_t MfccConfig::window_samples(int rate) const { return to_samples(window_length, rate, "window_length"); }
std::size_t MfccConfig::step_samples(int rate) const { return to_samples(step, rate, "step"); }
std::size_t MfccConfig::segment_samples(int rate) const { return to_samples(segment_seconds, rate, "segment_seconds"); }

std::size_t MfccConfig::dft_size(int rate) const {
    if (dft_length) return dft_length;
    return std::bit_ceil(window_samples(rate));
}

std::size_t MfccConfig::window_count() const {
    return static_cast<std::size_t>(std::floor(segment_seconds / step + 1e-9));
}

void MfccConfig::validate(int rate) const {
    if (rate <= 0) throw ConfigError("sample rate must be positive");
    if (!(step > 0 && window_length > 0 && segment_seconds > 0)) throw ConfigError("times must be positive");
    if (step > window_length) throw ConfigError("step must not exceed window_length");
    if (filter_count == 0) throw ConfigError("filter_count must be positive");
    if (kept_coefficients == 0 || first_coefficient == 0 ||
        first_coefficient + kept_coefficients - 1 > filter_count) {
        throw ConfigError("kept coefficients must lie within 1..filter_count");
    }
    const std::size_t n = window_samples(rate);
    step_samples(rate);
    segment_samples(rate);
    if (dft_size(rate) < n) throw ConfigError("dft_length must be at least the window length in samples");
    if (window_count() == 0) throw ConfigError("segment shorter than one step");
    const double hi = high_hz(rate);
    if (freq_low < 0 || hi > rate / 2.0 + 1e-9 || !(freq_low < hi)) {
        throw ConfigError("filterbank range must satisfy 0 <= low < high <= Nyquist");
    }
}

// --- steps ------------------------------------------------------------------------------

double hz_to_mel(double hz) { return 1125.0 * std::log(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::exp(mel / 1125.0) - 1.0); }

std::vector<double> hamming_window(std::size_t n) {
    std::vector<double> h(n, 1.0);
    if (n == 1) return h;
    for (std::size_t i = 0; i < n; ++i) h[i] = 0.54 - 0.46 * std::cos(2.0 * kPi * double(i) / double(n - 1));
    return h;
}

Tensor<double> frame_windows(std::span<const double> segment, const MfccConfig& cfg, int rate) {
    cfg.validate(rate);
    const std::size_t n = cfg.window_samples(rate), step = cfg.step_samples(rate), count = cfg.window_count();
    Tensor<double> w({count, n});
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t start = i * step;
        for (std::size_t j = 0; j < n && start + j < segment.size(); ++j) w.at(i, j) = segment[start + j];
    }
    return w;
}

std::vector<double> dft_power(std::span<const double> window, const MfccConfig& cfg, int rate) {
    const std::size_t n = cfg.window_samples(rate), k = cfg.dft_size(rate);
    if (window.size() != n) throw ShapeError("dft_power: window must hold " + std::to_string(n) + " samples");
    const auto h = hamming_window(n);
    std::vector<double> p(k);
    for (std::size_t bin = 0; bin < k; ++bin) {
        std::complex<double> s{0, 0};
        for (std::size_t i = 0; i < n; ++i) {
            const double ang = -2.0 * kPi * double(i) * double(bin) / double(k);
            s += window[i] * h[i] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        p[bin] = std::norm(s) / double(n);
    }
    return p;
}

Tensor<double> build_mel_filterbank(const MfccConfig& cfg, int rate) {
    cfg.validate(rate);
    const std::size_t J = cfg.filter_count, K = cfg.dft_size(rate);
    const double mlo = hz_to_mel(cfg.freq_low), mhi = hz_to_mel(cfg.high_hz(rate));
    std::vector<double> edge(J + 2);
    for (std::size_t i = 0; i < J + 2; ++i) edge[i] = mel_to_hz(mlo + (mhi - mlo) * double(i) / double(J + 1));

    Tensor<double> d({J, K});
    for (std::size_t j = 0; j < J; ++j) {
        const double lo = edge[j], mid = edge[j + 1], hi = edge[j + 2];
        for (std::size_t k = 0; k <= K / 2; ++k) {
            const double f = double(k) * rate / double(K);
            double w = 0.0;
            if (f >= lo && f <= mid) w = (f - lo) / (mid - lo);
            else if (f > mid && f <= hi) w = (hi - f) / (hi - mid);
            d.at(j, k) = w;
        }
    }
    return d;
}

std::vector<double> log_filter_energies(std::span<const double> power, const Tensor<double>& filters) {
    if (filters.rank() != 2 || filters.dim(1) != power.size()) {
        throw ShapeError("log_filter_energies: filter width must equal the spectrum length");
    }
    const std::size_t J = filters.dim(0), K = filters.dim(1);
    std::vector<double> e(J);
    for (std::size_t j = 0; j < J; ++j) {
        double s = 0;
        for (std::size_t k = 0; k < K; ++k) s += filters.at(j, k) * power[k];
        e[j] = std::log(s + kLogFloor);
    }
    return e;
}

std::vector<double> dct_coefficients(std::span<const double> e, std::size_t count, std::size_t first) {
    const std::size_t J = e.size();
    if (first == 0 || first + count - 1 > J) throw ConfigError("dct: coefficient range outside 1..J");
    std::vector<double> c(count);
    for (std::size_t r = 0; r < count; ++r) {
        const double k = double(first + r);
        double s = 0;
        for (std::size_t j = 1; j <= J; ++j) s += e[j - 1] * std::cos(k * (2.0 * double(j) - 1.0) * kPi / (2.0 * double(J)));
        c[r] = s;
    }
    return c;
}

// --- extractor ------------------------------------------------------------------

MfccExtractor::MfccExtractor(MfccConfig cfg, int rate) : cfg_(cfg), rate_(rate) {
    cfg_.validate(rate_);
    n_ = cfg_.window_samples(rate_);
    k_ = cfg_.dft_size(rate_);
    step_ = cfg_.step_samples(rate_);
    windows_ = cfg_.window_count();
    hamming_ = hamming_window(n_);
    filters_ = build_mel_filterbank(cfg_, rate_);

    const std::size_t J = cfg_.filter_count;
    filter_lo_.assign(J, 0);
    filter_hi_.assign(J, 0);
    for (std::size_t j = 0; j < J; ++j) {
        std::size_t lo = k_, hi = 0;
        for (std::size_t k = 0; k < k_; ++k) {
            if (filters_.at(j, k) != 0.0) {
                lo = std::min(lo, k);
                hi = k + 1;
            }
        }
        filter_lo_[j] = lo < hi ? lo : 0;
        filter_hi_[j] = hi;
    }

    const std::size_t kept = cfg_.kept_coefficients;
    dct_.resize(kept * J);
    for (std::size_t r = 0; r < kept; ++r) {
        const double k = double(cfg_.first_coefficient + r);
        for (std::size_t j = 1; j <= J; ++j) {
            dct_[r * J + (j - 1)] = std::cos(k * (2.0 * double(j) - 1.0) * kPi / (2.0 * double(J)));
        }
    }

    if (is_pow2(k_)) {
        twiddle_.resize(k_ / 2);
        for (std::size_t i = 0; i < k_ / 2; ++i) twiddle_[i] = std::polar(1.0, -2.0 * kPi * double(i) / double(k_));
        bitrev_.resize(k_);
        const int bits = std::countr_zero(k_);
        for (std::size_t i = 0; i < k_; ++i) {
            std::size_t r = 0;
            for (int b = 0; b < bits; ++b) r |= ((i >> b) & 1u) << (bits - 1 - b);
            bitrev_[i] = r;
        }
    } else {
        dft_table_.resize(k_ * n_);
        for (std::size_t k = 0; k < k_; ++k)
            for (std::size_t i = 0; i < n_; ++i)
                dft_table_[k * n_ + i] = std::polar(1.0, -2.0 * kPi * double((k * i) % k_) / double(k_));
    }
}

void MfccExtractor::power_spectrum(const double* window, std::vector<std::complex<double>>& buf,
                                   double* power) const {
    if (!bitrev_.empty()) {
        std::fill(buf.begin(), buf.end(), std::complex<double>{});
        for (std::size_t i = 0; i < n_; ++i) buf[bitrev_[i]] = window[i] * hamming_[i];
        for (std::size_t len = 2; len <= k_; len <<= 1) {
            const std::size_t half = len / 2, tstep = k_ / len;
            for (std::size_t s = 0; s < k_; s += len) {
                for (std::size_t j = 0; j < half; ++j) {
                    const auto t = twiddle_[j * tstep] * buf[s + j + half];
                    buf[s + j + half] = buf[s + j] - t;
                    buf[s + j] += t;
                }
            }
        }
        for (std::size_t k = 0; k < k_; ++k) power[k] = std::norm(buf[k]) / double(n_);
    } else {
        for (std::size_t k = 0; k < k_; ++k) {
            std::complex<double> s{};
            for (std::size_t i = 0; i < n_; ++i) s += window[i] * hamming_[i] * dft_table_[k * n_ + i];
            power[k] = std::norm(s) / double(n_);
        }
    }
}

Tensor<double> MfccExtractor::compute(std::span<const double> samples) const {
    const std::size_t J = cfg_.filter_count, kept = cfg_.kept_coefficients;
    Tensor<double> out({kept, windows_});
    std::vector<double> window(n_), power(k_), energy(J);
    std::vector<std::complex<double>> buf(k_);
    for (std::size_t i = 0; i < windows_; ++i) {
        const std::size_t start = i * step_;
        for (std::size_t j = 0; j < n_; ++j) window[j] = start + j < samples.size() ? samples[start + j] : 0.0;
        power_spectrum(window.data(), buf, power.data());
        for (std::size_t j = 0; j < J; ++j) {
            const double* row = filters_.data() + j * k_;
            double s = 0;
            for (std::size_t k = filter_lo_[j]; k < filter_hi_[j]; ++k) s += row[k] * power[k];
            energy[j] = std::log(s + kLogFloor);
        }
        for (std::size_t r = 0; r < kept; ++r) {
            const double* c = dct_.data() + r * J;
            double s = 0;
            for (std::size_t j = 0; j < J; ++j) s += energy[j] * c[j];
            out.at(r, i) = s;
        }
    }
    return out;
}

MfccHeatMap MfccExtractor::operator()(const Segment& segment) const {
    return {compute(segment.samples), segment.source_id, segment.start_sample, segment.label, segment.quality};
}

MfccHeatMap segment_to_heatmap(const Segment& segment, const MfccConfig& cfg, int rate) {
    return MfccExtractor(cfg, rate)(segment);
}

// --- standardization --------------------------------------------------------------

std::pair<std::vector<MfccHeatMap>, NormalizationStats> standardize(std::vector<MfccHeatMap> maps,
                                                                    const std::optional<NormalizationStats>& stats) {
    NormalizationStats st;
    if (stats) {
        st = *stats;
    } else {
        if (maps.empty()) throw ConfigError("standardize: cannot fit statistics on zero maps");
        const std::size_t rows = maps.front().rows();
        st.mean.assign(rows, 0.0);
        st.std.assign(rows, 0.0);
        std::vector<double> count(rows, 0.0);
        for (const auto& m : maps) {
            require_shape(m.values.shape(), maps.front().values.shape(), "standardize");
            for (std::size_t r = 0; r < rows; ++r) {
                for (std::size_t c = 0; c < m.cols(); ++c) st.mean[r] += m.values.at(r, c);
                count[r] += double(m.cols());
            }
        }
        for (std::size_t r = 0; r < rows; ++r) st.mean[r] /= count[r];
        for (const auto& m : maps) {
            for (std::size_t r = 0; r < rows; ++r) {
                for (std::size_t c = 0; c < m.cols(); ++c) {
                    const double d = m.values.at(r, c) - st.mean[r];
                    st.std[r] += d * d;
                }
            }
        }
        for (std::size_t r = 0; r < rows; ++r) st.std[r] = std::sqrt(st.std[r] / count[r]);
    }
    for (auto& m : maps) {
        if (m.rows() != st.mean.size()) throw ShapeError("standardize: row count differs from statistics");
        for (std::size_t r = 0; r < m.rows(); ++r) {
            const double sd = std::max(st.std[r], kStdFloor);
            for (std::size_t c = 0; c < m.cols(); ++c) m.values.at(r, c) = (m.values.at(r, c) - st.mean[r]) / sd;
        }
    }
    return {std::move(maps), std::move(st)};
}

// --- MFHM ---------------------------------------------------------------------------

namespace {

constexpr std::uint16_t kHeatmapVersion = 1;

std::uint8_t label_code(Label l) { return l == Label::Normal ? 0 : l == Label::Abnormal ? 1 : 255; }
std::uint8_t quality_code(Quality q) { return q == Quality::Good ? 0 : q == Quality::Poor ? 1 : 255; }
Label label_from(std::uint8_t c) {
    if (c == 0) return Label::Normal;
    if (c == 1) return Label::Abnormal;
    if (c == 255) return Label::Unknown;
    throw FormatError("invalid label code " + std::to_string(c));
}
Quality quality_from(std::uint8_t c) {
    if (c == 0) return Quality::Good;
    if (c == 1) return Quality::Poor;
    if (c == 255) return Quality::Unknown;
    throw FormatError("invalid quality code " + std::to_string(c));
}

}  // namespace

void write_heatmap(std::ostream& out, const MfccHeatMap& map) {
    binio::put_magic(out, "MFHM");
    binio::put_uint<std::uint16_t>(out, kHeatmapVersion);
    binio::put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(map.rows()));
    binio::put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(map.cols()));
    binio::put_uint<std::uint8_t>(out, label_code(map.label));
    binio::put_uint<std::uint8_t>(out, quality_code(map.quality));
    for (double v : map.values.vec()) binio::put_f32(out, static_cast<float>(v));
}

MfccHeatMap read_heatmap(std::istream& in) {
    binio::expect_magic(in, "MFHM");
    const auto version = binio::get_uint<std::uint16_t>(in);
    if (version != kHeatmapVersion) throw FormatError("unsupported MFHM version " + std::to_string(version));
    const auto rows = binio::get_uint<std::uint32_t>(in);
    const auto cols = binio::get_uint<std::uint32_t>(in);
    if (rows == 0 || cols == 0) throw FormatError("MFHM with empty dimensions");
    MfccHeatMap m;
    m.label = label_from(binio::get_uint<std::uint8_t>(in));
    m.quality = quality_from(binio::get_uint<std::uint8_t>(in));
    m.values = Tensor<double>({rows, cols});
    for (auto& v : m.values.vec()) v = binio::get_f32(in);
    return m;
}

void save_heatmap(const std::filesystem::path& path, const MfccHeatMap& map) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path.string());
    write_heatmap(out, map);
}

MfccHeatMap load_heatmap(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    auto m = read_heatmap(in);
    m.source_id = path.stem().string();
    return m;
}

// --- rendering -------------------------------------------------------------------

Rgb color_ramp(double t) {
    static constexpr std::array<std::array<double, 3>, 5> anchors = {{
        {68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37},
    }};
    t = std::clamp(std::isfinite(t) ? t : 0.0, 0.0, 1.0);
    const double x = t * double(anchors.size() - 1);
    const auto i = std::min<std::size_t>(static_cast<std::size_t>(x), anchors.size() - 2);
    const double f = x - double(i);
    auto mix = [&](int c) {
        return static_cast<std::uint8_t>(std::lround(anchors[i][c] + f * (anchors[i + 1][c] - anchors[i][c])));
    };
    return {mix(0), mix(1), mix(2)};
}

std::vector<std::uint8_t> render_ppm(const MfccHeatMap& map, std::size_t scale) {
    if (scale == 0) throw ConfigError("render scale must be at least 1");
    const std::size_t rows = map.rows(), cols = map.cols();
    const auto [lo_it, hi_it] = std::minmax_element(map.values.vec().begin(), map.values.vec().end());
    const double lo = *lo_it, range = *hi_it - *lo_it;
    const std::size_t W = cols * scale, H = rows * scale;

    std::ostringstream header;
    header << "P6\n" << W << ' ' << H << "\n255\n";
    const auto hs = header.str();
    std::vector<std::uint8_t> out(hs.begin(), hs.end());
    out.reserve(out.size() + 3 * W * H);
    for (std::size_t y = 0; y < H; ++y) {
        const std::size_t r = y / scale;  // coefficient 1 on top
        for (std::size_t x = 0; x < W; ++x) {
            const double v = map.values.at(r, x / scale);
            const auto c = color_ramp(range > 0 ? (v - lo) / range : 0.0);
            out.push_back(c.r);
            out.push_back(c.g);
            out.push_back(c.b);
        }
    }
    return out;
}

}  // namespace ausc
