#pragma once

#include "bhc/dsp.hpp"
#include "bhc/types.hpp"

#include <span>
#include <string>
#include <vector>

namespace bhc::ecg {

/// R-peak times in seconds, strictly increasing.
struct BeatSeries {
    std::vector<double> beat_times_s;
};

enum class EpochStatus {
    Ok,
    NoEcgData,
    InsufficientBeats,
    RriOutOfRange,
};

const char* epoch_status_name(EpochStatus s);

/// Per-epoch high-frequency HRV summary. hf_abs / total_abs are band
/// energies of the 4 Hz interpolated RRI series (ms^2 scale); hf_norm is
/// their ratio and is only meaningful when valid.
struct HrvEpoch {
    long epoch_index = 0;
    double hf_abs = 0.0;
    double total_abs = 0.0;
    double hf_norm = 0.0;
    int n_beats = 0;
    bool valid = false;
    EpochStatus status = EpochStatus::NoEcgData;
};

struct EcgConfig {
    double minmax_window_s = 2.0;    // moving min-max normalization window
    double interp_rate_hz = 4.0;     // RRI resampling rate
    double band_lo_hz = 0.04;        // analysis band
    double band_hi_hz = 0.4;
    double hf_lo_hz = 0.15;          // HF band inside the analysis band
    double hf_hi_hz = 0.4;
    int butterworth_order = 4;       // low-pass prototype order
    int modwpt_level = 4;            // 0.125 Hz nodes at 4 Hz
    int min_beats_per_epoch = 10;    // validity gate
    double rri_min_ms = 300.0;       // physiologic RRI range gate
    double rri_max_ms = 2000.0;
    double detector_context_s = 2.0; // extra signal fed to the detector per window
    double dedup_window_s = 0.2;     // cross-window duplicate / refractory spacing
};

/// Pan-Tompkins beat detector over one preprocessed window: 5-15 Hz
/// band-pass, five-point derivative, squaring, 150 ms moving-window
/// integration, adaptive signal/noise thresholds with a 200 ms refractory
/// period and RR-gap search-back. Returns window-local beat times.
BeatSeries detect_beats(std::span<const double> ecg_window, double fs);

/// RRI knots from beats: knot i sits at beat i+1 with value
/// (t[i+1]-t[i])*1000 ms. Requires >= 3 beats.
std::pair<std::vector<double>, std::vector<double>> rri_series(const BeatSeries& beats);

/// HF power for one epoch from RRI knots: 4 Hz linear interpolation over
/// [epoch_start, epoch_end), mean subtraction, 0.04-0.4 Hz band-pass,
/// level-4 MODWPT, fractional node-energy sums for the HF and total bands.
HrvEpoch epoch_hf_power(std::span<const double> knot_times_s, std::span<const double> knot_rri_ms,
                        long epoch_index, double epoch_start_s, double epoch_len_s,
                        const EcgConfig& cfg = {});

/// Full per-recording chain: per hypnogram epoch, baseline removal,
/// min-max normalization, beat detection (with context margins and
/// cross-window dedup), RRI assembly and HF extraction.
std::vector<HrvEpoch> process_ecg(const Recording& rec, const EcgConfig& cfg = {});

/// Detected beats for a whole recording (the detection half of
/// process_ecg); exposed for calibration and tests.
BeatSeries detect_beats_recording(const ChannelSignal& ecg, double epoch_len_s, size_t n_epochs,
                                  const EcgConfig& cfg = {});

} // namespace bhc::ecg
