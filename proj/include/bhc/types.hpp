#pragma once

#include <optional>
#include <string>
#include <vector>

namespace bhc {

/// Sleep stage with the conventional integer scoring codes 0-4.
/// Unscored covers everything a technician did not label with 0-4.
enum class SleepStage : int { Wake = 0, N1 = 1, N2 = 2, N3 = 3, Rem = 4, Unscored = 5 };

/// Code -> stage; anything outside 0-4 maps to Unscored.
SleepStage stage_from_code(int code);

/// Stage -> code. The mapping is a bijection on codes 0-4; Unscored
/// serializes as 5 (never analyzed downstream).
int stage_code(SleepStage s);

const char* stage_name(SleepStage s);

/// One physical-unit channel of a polysomnography recording.
struct ChannelSignal {
    std::string label;
    std::vector<double> samples; // physical units (uV or mV), calibration applied
    double sample_rate_hz = 0.0;

    double duration_s() const {
        return sample_rate_hz > 0 ? static_cast<double>(samples.size()) / sample_rate_hz : 0.0;
    }
};

/// Per-epoch technician scoring.
struct Hypnogram {
    double epoch_len_s = 30.0;
    std::vector<SleepStage> stages;

    size_t n_epochs() const { return stages.size(); }
};

/// A validated single-subject recording: channels plus hypnogram.
struct Recording {
    std::string subject_id;
    std::vector<ChannelSignal> channels;
    Hypnogram hypnogram;

    /// Case-insensitive prefix match against a canonical label list
    /// ("C3", "C3-M2", "C4", "C4-M1", "ECG"); labels are normalized by
    /// stripping a leading "EEG " qualifier so that e.g. "EEG C3-M2",
    /// "C3/M2" and "c3" all resolve to the C3 derivation.
    const ChannelSignal* find_channel(const std::string& wanted) const;
};

/// Checks structural invariants (non-empty id, finite samples, positive
/// rates, hypnogram length vs duration). Throws ValidationError.
void validate_recording(const Recording& rec);

} // namespace bhc
