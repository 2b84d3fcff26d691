#include "ausc/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace ausc {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr int kMurmurComponents = 48;

double hann(double u) { return u <= 0.0 || u >= 1.0 ? 0.0 : 0.5 - 0.5 * std::cos(kTwoPi * u); }

void add_burst(std::vector<double>& x, int rate, double start, double duration, double freq, double amp,
               double phase) {
    const auto n0 = static_cast<std::ptrdiff_t>(std::ceil(start * rate));
    const auto n1 = static_cast<std::ptrdiff_t>(std::floor((start + duration) * rate));
    for (auto n = std::max<std::ptrdiff_t>(0, n0); n <= n1 && n < static_cast<std::ptrdiff_t>(x.size()); ++n) {
        const double t = double(n) / rate;
        x[n] += amp * hann((t - start) / duration) * std::sin(kTwoPi * freq * (t - start) + phase);
    }
}

}  // namespace

SynthRecording synthesize(Label label, std::uint64_t seed, const SynthOptions& opt) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto between = [&](double a, double b) { return a + (b - a) * unit(rng); };

    const int rate = opt.sample_rate;
    const auto n = static_cast<std::size_t>(std::llround(opt.duration * rate));
    std::vector<double> x(n, 0.0);

    const double s1_freq = between(opt.tone_low, opt.tone_high);
    const double s2_freq = between(opt.tone_low, opt.tone_high);
    const double amp = between(0.45, 0.7);

    // murmur spectrum is fixed per recording
    std::vector<double> mfreq(kMurmurComponents), mphase(kMurmurComponents);
    for (int k = 0; k < kMurmurComponents; ++k) {
        mfreq[k] = between(opt.murmur_low, opt.murmur_high);
        mphase[k] = between(0.0, kTwoPi);
    }
    const double mnorm = opt.murmur_level * amp * std::sqrt(2.0 / kMurmurComponents);

    SynthRecording out;
    struct Beat {
        double onset, s2_start, end;
    };
    std::vector<Beat> beats;
    double onset = between(0.05, opt.beat_period);
    while (onset < opt.duration) {
        const double period = opt.beat_period * (1.0 + opt.period_jitter * between(-1.0, 1.0));
        const double s2_start = onset + opt.s1_duration + opt.systole_duration;
        beats.push_back({onset, s2_start, onset + period});
        out.s1_onsets.push_back(static_cast<std::size_t>(std::llround(onset * rate)));

        add_burst(x, rate, onset, opt.s1_duration, s1_freq, amp, between(0.0, kTwoPi));
        add_burst(x, rate, s2_start, opt.s2_duration, s2_freq, amp * between(0.6, 0.8), between(0.0, kTwoPi));
        if (label == Label::Abnormal) {
            const double m0 = onset + opt.s1_duration;
            const auto a = static_cast<std::size_t>(std::ceil(m0 * rate));
            const auto b = std::min(n, static_cast<std::size_t>(std::floor(s2_start * rate)));
            for (std::size_t i = a; i < b; ++i) {
                const double t = double(i) / rate;
                const double env = std::sqrt(hann(0.5 * (t - m0) / opt.systole_duration + 0.25));
                double v = 0.0;
                for (int k = 0; k < kMurmurComponents; ++k) v += std::sin(kTwoPi * mfreq[k] * t + mphase[k]);
                x[i] += mnorm * env * v;
            }
        }
        onset += period;
    }

    std::normal_distribution<double> noise(0.0, opt.noise_level);
    for (auto& v : x) v = std::clamp(v + noise(rng), -1.0, 32767.0 / 32768.0);

    // truth states by frame centre
    const auto frames = static_cast<std::size_t>(std::floor(opt.duration * kDecodeFrameRate));
    out.frame_states.assign(frames, HeartState::Diastole);
    for (std::size_t f = 0; f < frames; ++f) {
        const double t = (double(f) + 0.5) / kDecodeFrameRate;
        for (const auto& b : beats) {
            if (t < b.onset || t >= b.end) continue;
            if (t < b.onset + opt.s1_duration) out.frame_states[f] = HeartState::S1;
            else if (t < b.s2_start) out.frame_states[f] = HeartState::Systole;
            else if (t < b.s2_start + opt.s2_duration) out.frame_states[f] = HeartState::S2;
            break;
        }
    }

    out.recording.samples = std::move(x);
    out.recording.sample_rate = rate;
    out.recording.label = label;
    out.recording.quality = Quality::Good;
    return out;
}

}  // namespace ausc
