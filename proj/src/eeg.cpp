#include "bhc/eeg.hpp"

#include "bhc/error.hpp"

#include <cmath>

namespace bhc::eeg {

const std::array<BandDefinition, kNumBands>& default_bands() {
    static const std::array<BandDefinition, kNumBands> bands = {{
        {Band::Delta, 1.0, 4.0},
        {Band::Theta, 4.0, 8.0},
        {Band::Alpha, 8.0, 12.0},
        {Band::Beta, 12.0, 30.0},
        {Band::Gamma, 30.0, 80.0},
    }};
    return bands;
}

const char* band_name(Band b) {
    switch (b) {
        case Band::Delta: return "delta";
        case Band::Theta: return "theta";
        case Band::Alpha: return "alpha";
        case Band::Beta: return "beta";
        case Band::Gamma: return "gamma";
    }
    return "?";
}

const char* electrode_name(Electrode e) {
    return e == Electrode::C3 ? "C3" : "C4";
}

EegEpoch epoch_band_powers(std::span<const double> eeg_window, double fs, const EegConfig& cfg) {
    EegEpoch ep;
    bool finite = true;
    bool any_nonzero = false;
    for (double v : eeg_window) {
        if (!std::isfinite(v)) {
            finite = false;
            break;
        }
        if (v != 0.0) any_nonzero = true;
    }
    if (!finite || !any_nonzero || eeg_window.empty()) return ep;

    const dsp::Spectrum spec = dsp::welch_median_psd(eeg_window, fs, cfg.welch);
    double total = 0.0;
    std::array<double, kNumBands> abs{};
    for (size_t i = 0; i < kNumBands; ++i) {
        abs[i] = dsp::band_power(spec, cfg.bands[i].lo_hz, cfg.bands[i].hi_hz);
        total += abs[i];
    }
    if (!(total > 0.0)) return ep;

    for (size_t i = 0; i < kNumBands; ++i) ep.rel_power[i] = abs[i] / total;
    ep.total_abs = total;
    ep.valid = true;
    return ep;
}

std::vector<EegEpoch> process_eeg(const Recording& rec, Electrode electrode, const EegConfig& cfg) {
    const ChannelSignal* ch = rec.find_channel(electrode_name(electrode));
    if (!ch)
        throw ValidationError(rec.subject_id + ": recording has no " +
                              std::string(electrode_name(electrode)) + " channel");

    const double fs = ch->sample_rate_hz;
    const auto win_samples = static_cast<size_t>(std::llround(rec.hypnogram.epoch_len_s * fs));
    std::vector<EegEpoch> out;
    out.reserve(rec.hypnogram.n_epochs());
    for (size_t e = 0; e < rec.hypnogram.n_epochs(); ++e) {
        const size_t lo = e * win_samples;
        EegEpoch ep;
        if (lo + win_samples <= ch->samples.size()) {
            std::span<const double> win(ch->samples.data() + lo, win_samples);
            ep = epoch_band_powers(win, fs, cfg);
        }
        ep.epoch_index = static_cast<long>(e);
        ep.electrode = electrode;
        out.push_back(ep);
    }
    return out;
}

} // namespace bhc::eeg
