#include "bhc/types.hpp"

#include "bhc/error.hpp"
#include "bhc/log.hpp"

#include <cctype>
#include <cmath>

namespace bhc {

SleepStage stage_from_code(int code) {
    switch (code) {
        case 0: return SleepStage::Wake;
        case 1: return SleepStage::N1;
        case 2: return SleepStage::N2;
        case 3: return SleepStage::N3;
        case 4: return SleepStage::Rem;
        default: return SleepStage::Unscored;
    }
}

int stage_code(SleepStage s) {
    return static_cast<int>(s);
}

const char* stage_name(SleepStage s) {
    switch (s) {
        case SleepStage::Wake: return "Wake";
        case SleepStage::N1: return "N1";
        case SleepStage::N2: return "N2";
        case SleepStage::N3: return "N3";
        case SleepStage::Rem: return "REM";
        default: return "Unscored";
    }
}

namespace {

std::string normalize_label(const std::string& raw) {
    std::string s;
    s.reserve(raw.size());
    for (char c : raw) s.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    // strip a leading modality qualifier such as "EEG "
    if (s.rfind("EEG ", 0) == 0) s = s.substr(4);
    while (!s.empty() && s.front() == ' ') s.erase(s.begin());
    while (!s.empty() && s.back() == ' ') s.pop_back();
    return s;
}

} // namespace

const ChannelSignal* Recording::find_channel(const std::string& wanted) const {
    const std::string want = normalize_label(wanted);
    for (const auto& ch : channels) {
        const std::string have = normalize_label(ch.label);
        if (have.rfind(want, 0) == 0) return &ch;
    }
    return nullptr;
}

void validate_recording(const Recording& rec) {
    if (rec.subject_id.empty()) throw ValidationError("recording has empty subject_id");
    if (rec.channels.empty()) throw ValidationError(rec.subject_id + ": recording has no channels");
    double max_dur = 0.0;
    for (const auto& ch : rec.channels) {
        if (ch.sample_rate_hz <= 0)
            throw ValidationError(rec.subject_id + ": channel '" + ch.label + "' has non-positive sample rate");
        for (double v : ch.samples)
            if (!std::isfinite(v))
                throw ValidationError(rec.subject_id + ": channel '" + ch.label + "' contains non-finite samples");
        max_dur = std::max(max_dur, ch.duration_s());
    }
    if (rec.hypnogram.epoch_len_s <= 0)
        throw ValidationError(rec.subject_id + ": non-positive epoch length");
    const double scored = static_cast<double>(rec.hypnogram.n_epochs()) * rec.hypnogram.epoch_len_s;
    if (scored > max_dur + rec.hypnogram.epoch_len_s)
        throw ValidationError(log::cat(rec.subject_id, ": hypnogram covers ", scored,
                                       " s but longest channel is ", max_dur, " s"));
}

} // namespace bhc
