#pragma once

#include "bhc/dsp.hpp"
#include "bhc/types.hpp"

#include <array>
#include <span>
#include <vector>

namespace bhc::eeg {

enum class Band : int { Delta = 0, Theta = 1, Alpha = 2, Beta = 3, Gamma = 4 };
constexpr size_t kNumBands = 5;

struct BandDefinition {
    Band band;
    double lo_hz;
    double hi_hz;
};

/// Delta [1,4), theta [4,8), alpha [8,12), beta [12,30), gamma [30,80).
/// The five bands tile [1, 80), so relative powers sum to 1.
const std::array<BandDefinition, kNumBands>& default_bands();

const char* band_name(Band b);

enum class Electrode { C3, C4 };
const char* electrode_name(Electrode e);

struct EegEpoch {
    long epoch_index = 0;
    Electrode electrode = Electrode::C3;
    std::array<double, kNumBands> rel_power{}; // each in [0,1], summing to 1
    double total_abs = 0.0;                    // sum of absolute band powers
    bool valid = false;
};

struct EegConfig {
    dsp::WelchConfig welch{};
    std::array<BandDefinition, kNumBands> bands = default_bands();
};

/// Median-Welch band powers for one epoch window. Non-finite or all-zero
/// windows yield valid == false.
EegEpoch epoch_band_powers(std::span<const double> eeg_window, double fs, const EegConfig& cfg = {});

/// One EegEpoch per hypnogram epoch for the requested electrode.
std::vector<EegEpoch> process_eeg(const Recording& rec, Electrode electrode,
                                  const EegConfig& cfg = {});

} // namespace bhc::eeg
