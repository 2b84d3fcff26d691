#pragma once

// Synthetic phonocardiogram generator used by tests, the acceptance suite,
// the default emission model, and the `synth` CLI subcommand.
//
// Normal recording: per beat, an S1 tone burst (carrier drawn from 50-150 Hz,
// Hann envelope) at the onset and an S2 burst after systole, plus faint white
// noise. Abnormal recording: the same, plus band-limited noise (200-400 Hz,
// sum of random-phase sinusoids) filling systole.

#include <cstdint>
#include <vector>

#include "ausc/pcg_io.hpp"
#include "ausc/segmentation.hpp"

namespace ausc {

struct SynthOptions {
    int sample_rate = kCanonicalRate;
    double duration = 8.0;        // seconds
    double beat_period = 1.0;     // seconds
    double period_jitter = 0.0;   // uniform +/- fraction of beat_period per beat
    double s1_duration = 0.11;
    double systole_duration = 0.20;
    double s2_duration = 0.09;
    double tone_low = 50.0, tone_high = 150.0;
    double murmur_low = 200.0, murmur_high = 400.0;
    double murmur_level = 0.25;   // relative to the S1 amplitude
    double noise_level = 0.01;
};

struct SynthRecording {
    PcgRecording recording;
    std::vector<std::size_t> s1_onsets;  // true onset samples
    std::vector<HeartState> frame_states;  // truth at kDecodeFrameRate, by frame centre
};

/// Deterministic for a given (label, seed, options).
SynthRecording synthesize(Label label, std::uint64_t seed, const SynthOptions& opt = {});

}  // namespace ausc
