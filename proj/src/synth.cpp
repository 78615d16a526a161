#include "bhc/synth.hpp"

#include "bhc/dsp.hpp"
#include "bhc/error.hpp"

#include <cmath>
#include <functional>
#include <numbers>

namespace bhc::synth {

namespace {

constexpr double kPi = std::numbers::pi;

void add_gaussian(std::vector<double>& x, double fs, double center_s, double amp, double sigma_s) {
    const double half = 4.0 * sigma_s;
    const long lo = std::max<long>(0, static_cast<long>(std::floor((center_s - half) * fs)));
    const long hi = std::min<long>(static_cast<long>(x.size()) - 1,
                                   static_cast<long>(std::ceil((center_s + half) * fs)));
    for (long i = lo; i <= hi; ++i) {
        const double dt = static_cast<double>(i) / fs - center_s;
        x[static_cast<size_t>(i)] += amp * std::exp(-0.5 * dt * dt / (sigma_s * sigma_s));
    }
}

} // namespace

StageProfile default_stage_profile(SleepStage s) {
    StageProfile p;
    switch (s) {
        case SleepStage::Wake:
            p = {74.0, 12.0, 35.0, 6.0, 5.0, 16.0, 9.0, 3.0};
            break;
        case SleepStage::N1:
            p = {70.0, 20.0, 30.0, 10.0, 14.0, 8.0, 5.0, 1.5};
            break;
        case SleepStage::N2:
            p = {66.0, 35.0, 25.0, 22.0, 10.0, 6.0, 4.0, 1.0};
            break;
        case SleepStage::N3:
            p = {62.0, 55.0, 18.0, 42.0, 9.0, 4.0, 2.5, 0.8};
            break;
        case SleepStage::Rem:
            p = {72.0, 18.0, 40.0, 9.0, 13.0, 6.0, 6.0, 2.0};
            break;
        default:
            break;
    }
    return p;
}

std::vector<SubtypeProfile> default_n2_subtypes() {
    // 0: moderate delta, mid HF; 1: delta-dominant, high HF; 2: beta-rich, low HF
    std::vector<SubtypeProfile> subs(3);
    subs[0].profile = {66.0, 30.0, 25.0, 20.0, 12.0, 7.0, 4.0, 1.0};
    subs[0].weight = 0.45;
    subs[1].profile = {60.0, 85.0, 15.0, 55.0, 8.0, 3.5, 2.0, 0.6};
    subs[1].weight = 0.30;
    subs[2].profile = {75.0, 8.0, 30.0, 8.0, 7.0, 6.0, 18.0, 6.0};
    subs[2].weight = 0.25;
    return subs;
}

std::vector<double> make_beat_times(double duration_s, double t0,
                                    const std::function<double(double)>& rr_ms_of_t) {
    std::vector<double> beats;
    double t = t0;
    while (t < duration_s) {
        beats.push_back(t);
        const double rr = rr_ms_of_t(t) / 1000.0;
        if (!(rr > 0.05)) throw ValidationError("make_beat_times: RR collapsed below 50 ms");
        t += rr;
    }
    return beats;
}

std::vector<double> make_ecg(const std::vector<double>& beat_times_s, double fs, double duration_s,
                             double noise_uv, double wander_amp_uv, double wander_freq_hz,
                             std::mt19937_64& rng) {
    const auto n = static_cast<size_t>(std::llround(duration_s * fs));
    std::vector<double> x(n, 0.0);
    for (double tb : beat_times_s) {
        add_gaussian(x, fs, tb - 0.20, 120.0, 0.035);  // P
        add_gaussian(x, fs, tb - 0.028, -120.0, 0.010); // Q
        add_gaussian(x, fs, tb, 1000.0, 0.012);         // R
        add_gaussian(x, fs, tb + 0.030, -180.0, 0.010); // S
        add_gaussian(x, fs, tb + 0.26, 280.0, 0.050);   // T
    }
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (size_t i = 0; i < n; ++i) {
        double v = noise_uv > 0 ? noise_uv * gauss(rng) : 0.0;
        if (wander_amp_uv > 0)
            v += wander_amp_uv * std::sin(2.0 * kPi * wander_freq_hz * static_cast<double>(i) / fs);
        x[i] += v;
    }
    return x;
}

std::vector<double> pink_noise(size_t n, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<std::complex<double>> spec(n / 2 + 1, {0.0, 0.0});
    for (size_t k = 1; k < spec.size(); ++k) {
        const double mag = 1.0 / std::sqrt(static_cast<double>(k));
        spec[k] = {mag * gauss(rng), mag * gauss(rng)};
    }
    std::vector<double> x = dsp::irfft(spec, n);
    double rms = 0.0;
    for (double v : x) rms += v * v;
    rms = std::sqrt(rms / static_cast<double>(n));
    if (rms > 0)
        for (double& v : x) v /= rms;
    return x;
}

std::vector<double> make_eeg_epoch(const StageProfile& p, double fs, double epoch_len_s,
                                   double noise_uv, std::mt19937_64& rng) {
    const auto n = static_cast<size_t>(std::llround(epoch_len_s * fs));
    std::vector<double> x = pink_noise(n, rng);
    for (double& v : x) v *= noise_uv;

    std::uniform_real_distribution<double> uni(0.0, 1.0);
    struct Osc {
        double amp, f_lo, f_hi;
    };
    const Osc oscs[] = {
        {p.delta_uv, 1.2, 3.5}, {p.theta_uv, 4.5, 7.5}, {p.alpha_uv, 8.5, 11.5},
        {p.beta_uv, 13.0, 25.0}, {p.gamma_uv, 32.0, 60.0},
    };
    for (const auto& o : oscs) {
        if (o.amp <= 0) continue;
        const double f = o.f_lo + (o.f_hi - o.f_lo) * uni(rng);
        const double phase = 2.0 * kPi * uni(rng);
        for (size_t i = 0; i < n; ++i)
            x[i] += o.amp * std::sin(2.0 * kPi * f * static_cast<double>(i) / fs + phase);
    }
    return x;
}

std::vector<SleepStage> staged_hypnogram(size_t n_epochs) {
    // one sleep cycle: wake, descent, deep, lighter, REM
    std::vector<SleepStage> cycle;
    auto push = [&](SleepStage s, int count) {
        for (int i = 0; i < count; ++i) cycle.push_back(s);
    };
    push(SleepStage::Wake, 8);
    push(SleepStage::N1, 4);
    push(SleepStage::N2, 22);
    push(SleepStage::N3, 20);
    push(SleepStage::N2, 10);
    push(SleepStage::Rem, 16);

    std::vector<SleepStage> out;
    out.reserve(n_epochs);
    for (size_t i = 0; i < n_epochs; ++i) out.push_back(cycle[i % cycle.size()]);
    return out;
}

SynthResult generate_recording(const SynthSpec& spec) {
    const auto n_epochs = static_cast<size_t>(std::llround(spec.hours * 3600.0 / spec.epoch_len_s));
    if (n_epochs == 0) throw ValidationError("generate_recording: zero epochs");
    const double duration_s = static_cast<double>(n_epochs) * spec.epoch_len_s;

    std::mt19937_64 rng(spec.seed);
    SynthResult res;
    res.recording.subject_id = spec.subject_id;
    res.recording.hypnogram.epoch_len_s = spec.epoch_len_s;
    res.recording.hypnogram.stages = staged_hypnogram(n_epochs);

    // per-epoch profiles (N2 optionally from subtype recipes)
    const auto subtypes = default_n2_subtypes();
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::vector<StageProfile> epoch_profile(n_epochs);
    res.truth.n2_subtype.assign(n_epochs, -1);
    for (size_t e = 0; e < n_epochs; ++e) {
        const SleepStage st = res.recording.hypnogram.stages[e];
        res.truth.stage_codes.push_back(stage_code(st));
        StageProfile p = default_stage_profile(st);
        if (spec.n2_subtypes && st == SleepStage::N2) {
            double total = 0.0;
            for (const auto& s : subtypes) total += s.weight;
            double u = uni(rng) * total;
            size_t pick = 0;
            for (; pick + 1 < subtypes.size(); ++pick) {
                if (u < subtypes[pick].weight) break;
                u -= subtypes[pick].weight;
            }
            p = subtypes[pick].profile;
            res.truth.n2_subtype[e] = static_cast<int>(pick);
        }
        epoch_profile[e] = p;
        res.truth.hf_depth.push_back(p.hf_depth_ms);
    }

    auto profile_at = [&](double t) -> const StageProfile& {
        size_t e = static_cast<size_t>(t / spec.epoch_len_s);
        if (e >= n_epochs) e = n_epochs - 1;
        return epoch_profile[e];
    };
    auto rr_ms = [&](double t) {
        const StageProfile& p = profile_at(t);
        return 60000.0 / p.bpm + p.hf_depth_ms * std::sin(2.0 * kPi * 0.3 * t) +
               p.lf_depth_ms * std::sin(2.0 * kPi * 0.05 * t);
    };
    res.truth.beat_times_s = make_beat_times(duration_s, 0.35, rr_ms);

    ChannelSignal ecg_ch;
    ecg_ch.label = "ECG";
    ecg_ch.sample_rate_hz = spec.fs;
    ecg_ch.samples = make_ecg(res.truth.beat_times_s, spec.fs, duration_s, spec.ecg_noise_uv,
                              spec.wander_amp_uv, spec.wander_freq_hz, rng);

    ChannelSignal c3, c4;
    c3.label = "EEG C3-M2";
    c4.label = "EEG C4-M1";
    c3.sample_rate_hz = c4.sample_rate_hz = spec.fs;
    c3.samples.reserve(ecg_ch.samples.size());
    c4.samples.reserve(ecg_ch.samples.size());
    for (size_t e = 0; e < n_epochs; ++e) {
        const auto a = make_eeg_epoch(epoch_profile[e], spec.fs, spec.epoch_len_s, spec.eeg_noise_uv, rng);
        const auto b = make_eeg_epoch(epoch_profile[e], spec.fs, spec.epoch_len_s, spec.eeg_noise_uv, rng);
        c3.samples.insert(c3.samples.end(), a.begin(), a.end());
        c4.samples.insert(c4.samples.end(), b.begin(), b.end());
    }

    res.recording.channels.push_back(std::move(c3));
    res.recording.channels.push_back(std::move(c4));
    res.recording.channels.push_back(std::move(ecg_ch));
    return res;
}

} // namespace bhc::synth
