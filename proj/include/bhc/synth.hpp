#pragma once

#include "bhc/types.hpp"

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace bhc::synth {

/// Per-stage signal recipe: heart rate, RRI modulation depths at 0.3 Hz
/// (HF) and 0.05 Hz (LF), and EEG oscillation amplitudes (uV).
struct StageProfile {
    double bpm = 70.0;
    double hf_depth_ms = 20.0;
    double lf_depth_ms = 20.0;
    double delta_uv = 10.0;
    double theta_uv = 5.0;
    double alpha_uv = 5.0;
    double beta_uv = 3.0;
    double gamma_uv = 1.0;
};

StageProfile default_stage_profile(SleepStage s);

/// N2 epochs can be drawn from distinct subtype recipes to create
/// separable brain-heart coupling clusters.
struct SubtypeProfile {
    StageProfile profile;
    double weight = 1.0; // sampling propensity
};

std::vector<SubtypeProfile> default_n2_subtypes();

struct SynthSpec {
    std::string subject_id = "S001";
    double hours = 1.0;
    double fs = 256.0;
    double epoch_len_s = 30.0;
    std::uint64_t seed = 1;
    double ecg_noise_uv = 8.0;
    double wander_amp_uv = 0.0;  // baseline wander sine amplitude
    double wander_freq_hz = 0.3;
    double eeg_noise_uv = 12.0;  // 1/f background scale
    bool n2_subtypes = false;
};

struct SynthTruth {
    std::vector<double> beat_times_s;
    std::vector<int> stage_codes;  // per epoch
    std::vector<int> n2_subtype;   // per epoch; -1 where not applicable
    std::vector<double> hf_depth;  // per epoch, ms
};

struct SynthResult {
    Recording recording;
    SynthTruth truth;
};

/// Deterministic in (spec.seed, parameters): same spec, same bytes.
SynthResult generate_recording(const SynthSpec& spec);

/// Beat times from a time-varying RR function (ms), starting at t0.
std::vector<double> make_beat_times(double duration_s, double t0,
                                    const std::function<double(double)>& rr_ms_of_t);

/// ECG waveform (uV) from beat times: P-QRS-T Gaussian template train
/// plus white noise and optional baseline wander.
std::vector<double> make_ecg(const std::vector<double>& beat_times_s, double fs, double duration_s,
                             double noise_uv, double wander_amp_uv, double wander_freq_hz,
                             std::mt19937_64& rng);

/// 1/f-shaped Gaussian noise, unit RMS.
std::vector<double> pink_noise(size_t n, std::mt19937_64& rng);

/// One 30 s EEG epoch: pink background plus per-band oscillations.
std::vector<double> make_eeg_epoch(const StageProfile& p, double fs, double epoch_len_s,
                                   double noise_uv, std::mt19937_64& rng);

/// Repeating overnight stage pattern (epochs).
std::vector<SleepStage> staged_hypnogram(size_t n_epochs);

} // namespace bhc::synth
