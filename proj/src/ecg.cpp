#include "bhc/ecg.hpp"

#include "bhc/error.hpp"
#include "bhc/log.hpp"
#include "bhc/modwpt.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

namespace bhc::ecg {

namespace {

constexpr double kRefractoryS = 0.2;
constexpr double kSearchBackFactor = 1.66;

struct Peak {
    int idx;
    double val;
};

std::vector<Peak> local_maxima(const std::vector<double>& x) {
    std::vector<Peak> peaks;
    for (size_t i = 1; i + 1 < x.size(); ++i) {
        if (x[i] >= x[i - 1] && x[i] > x[i + 1] && x[i] > 0.0)
            peaks.push_back({static_cast<int>(i), x[i]});
    }
    return peaks;
}

/// Localize the R peak: first find the band-passed maximum in the MWI
/// window, then the largest deviation from the local median in the input.
int refine_peak(std::span<const double> raw, const std::vector<double>& bp, int mwi_idx, double fs,
                int mwi_len) {
    const int n = static_cast<int>(raw.size());
    const int b_lo = std::max(0, mwi_idx - mwi_len);
    const int b_hi = std::min(n - 1, mwi_idx);
    int b = b_lo;
    for (int j = b_lo; j <= b_hi; ++j)
        if (std::fabs(bp[static_cast<size_t>(j)]) > std::fabs(bp[static_cast<size_t>(b)])) b = j;

    const int r_half = static_cast<int>(std::lround(0.06 * fs));
    const int r_lo = std::max(0, b - r_half);
    const int r_hi = std::min(n - 1, b + r_half);
    std::vector<double> seg(raw.begin() + r_lo, raw.begin() + r_hi + 1);
    std::nth_element(seg.begin(), seg.begin() + static_cast<long>(seg.size() / 2), seg.end());
    const double med = seg[seg.size() / 2];
    int r = r_lo;
    for (int j = r_lo; j <= r_hi; ++j)
        if (std::fabs(raw[static_cast<size_t>(j)] - med) > std::fabs(raw[static_cast<size_t>(r)] - med))
            r = j;
    return r;
}

} // namespace

const char* epoch_status_name(EpochStatus s) {
    switch (s) {
        case EpochStatus::Ok: return "ok";
        case EpochStatus::NoEcgData: return "no_ecg_data";
        case EpochStatus::InsufficientBeats: return "insufficient_beats";
        case EpochStatus::RriOutOfRange: return "rri_out_of_range";
    }
    return "?";
}

BeatSeries detect_beats(std::span<const double> ecg_window, double fs) {
    if (fs < 100.0) throw ValidationError("detect_beats: sample rate must be >= 100 Hz");
    BeatSeries out;
    if (ecg_window.size() < static_cast<size_t>(fs)) return out;

    const auto [mn_it, mx_it] = std::minmax_element(ecg_window.begin(), ecg_window.end());
    if (!(*mx_it > *mn_it)) return out; // flat window

    dsp::FilterSpec spec;
    spec.order = 2;
    spec.low_hz = 5.0;
    spec.high_hz = 15.0;
    spec.sample_rate_hz = fs;
    const std::vector<double> bp = dsp::filter_apply(dsp::design_bandpass(spec), ecg_window);

    const size_t n = bp.size();
    std::vector<double> sq(n, 0.0);
    for (size_t i = 4; i < n; ++i) {
        const double d = (2.0 * bp[i] + bp[i - 1] - bp[i - 3] - 2.0 * bp[i - 4]) / 8.0;
        sq[i] = d * d;
    }

    const int mwi_len = std::max(1, static_cast<int>(std::lround(0.15 * fs)));
    std::vector<double> mwi(n, 0.0);
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) {
        acc += sq[i];
        if (i >= static_cast<size_t>(mwi_len)) acc -= sq[i - static_cast<size_t>(mwi_len)];
        mwi[i] = acc / mwi_len;
    }

    const auto peaks = local_maxima(mwi);
    if (peaks.empty()) return out;

    // threshold bootstrap from the first two seconds (whole window if shorter)
    const size_t learn = std::min(n, static_cast<size_t>(std::lround(2.0 * fs)));
    double learn_max = 0.0, learn_mean = 0.0;
    for (size_t i = 0; i < learn; ++i) {
        learn_max = std::max(learn_max, mwi[i]);
        learn_mean += mwi[i];
    }
    learn_mean /= static_cast<double>(learn);
    double spki = 0.5 * learn_max;
    double npki = 0.5 * learn_mean;

    const int refractory = static_cast<int>(std::lround(kRefractoryS * fs));
    std::vector<int> beat_idx;
    std::vector<Peak> since_last; // sub-threshold peaks since the last beat
    std::deque<double> recent_rr;
    double rr_avg = 0.0;

    auto accept = [&](const Peak& p) {
        if (!beat_idx.empty()) {
            const double rr = static_cast<double>(p.idx - beat_idx.back());
            recent_rr.push_back(rr);
            if (recent_rr.size() > 8) recent_rr.pop_front();
            rr_avg = std::accumulate(recent_rr.begin(), recent_rr.end(), 0.0) /
                     static_cast<double>(recent_rr.size());
        }
        beat_idx.push_back(p.idx);
        since_last.clear();
    };

    for (const auto& p : peaks) {
        if (!beat_idx.empty() && p.idx - beat_idx.back() < refractory) continue;
        const double thr1 = npki + 0.25 * (spki - npki);
        if (p.val >= thr1) {
            accept(p);
            spki = 0.125 * p.val + 0.875 * spki;
            continue;
        }
        npki = 0.125 * p.val + 0.875 * npki;
        since_last.push_back(p);

        if (!beat_idx.empty() && rr_avg > 0.0 &&
            static_cast<double>(p.idx - beat_idx.back()) > kSearchBackFactor * rr_avg) {
            const double thr2 = 0.5 * thr1;
            const Peak* best = nullptr;
            for (const auto& c : since_last) {
                if (c.idx - beat_idx.back() < refractory) continue;
                if (c.val >= thr2 && (!best || c.val > best->val)) best = &c;
            }
            if (best) {
                const Peak found = *best;
                accept(found);
                spki = 0.25 * found.val + 0.75 * spki;
            }
        }
    }

    std::vector<int> refined;
    refined.reserve(beat_idx.size());
    for (int i : beat_idx) refined.push_back(refine_peak(ecg_window, bp, i, fs, mwi_len));
    std::sort(refined.begin(), refined.end());
    for (int i : refined) {
        const double t = static_cast<double>(i) / fs;
        if (out.beat_times_s.empty() || t - out.beat_times_s.back() >= kRefractoryS)
            out.beat_times_s.push_back(t);
    }
    return out;
}

std::pair<std::vector<double>, std::vector<double>> rri_series(const BeatSeries& beats) {
    const auto& t = beats.beat_times_s;
    if (t.size() < 3) throw ValidationError("rri_series: need at least 3 beats");
    std::vector<double> times(t.size() - 1), rri(t.size() - 1);
    for (size_t i = 0; i + 1 < t.size(); ++i) {
        times[i] = t[i + 1];
        rri[i] = (t[i + 1] - t[i]) * 1000.0;
    }
    return {std::move(times), std::move(rri)};
}

HrvEpoch epoch_hf_power(std::span<const double> knot_times_s, std::span<const double> knot_rri_ms,
                        long epoch_index, double epoch_start_s, double epoch_len_s,
                        const EcgConfig& cfg) {
    HrvEpoch ep;
    ep.epoch_index = epoch_index;
    ep.n_beats = static_cast<int>(knot_times_s.size()) + 1;
    if (knot_times_s.size() < 2) {
        ep.status = EpochStatus::InsufficientBeats;
        return ep;
    }

    const double rate = cfg.interp_rate_hz;
    const double t1 = epoch_start_s + epoch_len_s - 1.0 / rate;
    std::vector<double> x = dsp::linear_interp(knot_times_s, knot_rri_ms, rate, epoch_start_s, t1);

    double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    for (auto& v : x) v -= mean;

    dsp::FilterSpec spec;
    spec.order = cfg.butterworth_order;
    spec.low_hz = cfg.band_lo_hz;
    spec.high_hz = cfg.band_hi_hz;
    spec.sample_rate_hz = rate;
    const std::vector<double> filtered = dsp::filter_apply(dsp::design_bandpass(spec), x);

    const auto wpt = dsp::modwpt(filtered, rate, cfg.modwpt_level);
    double hf = 0.0, total = 0.0;
    for (size_t k = 0; k < wpt.n_nodes(); ++k) {
        const double e = wpt.node_energy(k);
        hf += dsp::node_band_weight(cfg.modwpt_level, rate, k, cfg.hf_lo_hz, cfg.hf_hi_hz) * e;
        total += dsp::node_band_weight(cfg.modwpt_level, rate, k, cfg.band_lo_hz, cfg.band_hi_hz) * e;
    }
    ep.hf_abs = hf;
    ep.total_abs = total;
    if (total > 0.0) {
        ep.hf_norm = hf / total;
        ep.valid = true;
        ep.status = EpochStatus::Ok;
    } else {
        ep.status = EpochStatus::NoEcgData;
    }
    return ep;
}

BeatSeries detect_beats_recording(const ChannelSignal& ecg, double epoch_len_s, size_t n_epochs,
                                  const EcgConfig& cfg) {
    const double fs = ecg.sample_rate_hz;
    const long n = static_cast<long>(ecg.samples.size());
    std::vector<double> all;

    for (size_t e = 0; e < n_epochs; ++e) {
        const double t0 = static_cast<double>(e) * epoch_len_s;
        const long want_lo = static_cast<long>(std::llround((t0 - cfg.detector_context_s) * fs));
        const long want_hi =
            static_cast<long>(std::llround((t0 + epoch_len_s + cfg.detector_context_s) * fs));
        const long lo = std::max<long>(0, want_lo);
        const long hi = std::min<long>(n, want_hi);
        if (hi - lo < static_cast<long>(fs)) continue;

        std::span<const double> win(ecg.samples.data() + lo, static_cast<size_t>(hi - lo));
        std::vector<double> pre = dsp::baseline_remove(win, fs);
        pre = dsp::moving_minmax_norm(pre, cfg.minmax_window_s, fs);
        const BeatSeries local = detect_beats(pre, fs);

        const double base = static_cast<double>(lo) / fs;
        const double keep_lo = t0 - cfg.dedup_window_s;
        const double keep_hi = t0 + epoch_len_s + cfg.dedup_window_s;
        for (double t : local.beat_times_s) {
            const double abs_t = base + t;
            if (abs_t >= keep_lo && abs_t < keep_hi) all.push_back(abs_t);
        }
    }

    std::sort(all.begin(), all.end());
    BeatSeries out;
    for (double t : all) {
        if (out.beat_times_s.empty() || t - out.beat_times_s.back() >= cfg.dedup_window_s)
            out.beat_times_s.push_back(t);
    }
    return out;
}

std::vector<HrvEpoch> process_ecg(const Recording& rec, const EcgConfig& cfg) {
    const ChannelSignal* ecg_ch = rec.find_channel("ECG");
    if (!ecg_ch) throw ValidationError(rec.subject_id + ": recording has no ECG channel");

    const double epoch_len = rec.hypnogram.epoch_len_s;
    const size_t n_epochs = rec.hypnogram.n_epochs();
    const BeatSeries beats = detect_beats_recording(*ecg_ch, epoch_len, n_epochs, cfg);

    std::vector<HrvEpoch> out;
    out.reserve(n_epochs);
    for (size_t e = 0; e < n_epochs; ++e) {
        const double t0 = static_cast<double>(e) * epoch_len;
        const double t1 = t0 + epoch_len;
        const auto first = std::lower_bound(beats.beat_times_s.begin(), beats.beat_times_s.end(), t0);
        const auto last = std::lower_bound(first, beats.beat_times_s.end(), t1);
        BeatSeries in_epoch;
        in_epoch.beat_times_s.assign(first, last);
        const int n_beats = static_cast<int>(in_epoch.beat_times_s.size());

        HrvEpoch ep;
        if (n_beats < 3) {
            ep.epoch_index = static_cast<long>(e);
            ep.n_beats = n_beats;
            ep.status = EpochStatus::InsufficientBeats;
        } else {
            const auto [times, rri] = rri_series(in_epoch);
            ep = epoch_hf_power(times, rri, static_cast<long>(e), t0, epoch_len, cfg);
            ep.n_beats = n_beats;
            if (ep.valid && n_beats < cfg.min_beats_per_epoch) {
                ep.valid = false;
                ep.status = EpochStatus::InsufficientBeats;
            }
            if (ep.valid) {
                for (double r : rri) {
                    if (r < cfg.rri_min_ms || r > cfg.rri_max_ms) {
                        ep.valid = false;
                        ep.status = EpochStatus::RriOutOfRange;
                        break;
                    }
                }
            }
        }
        out.push_back(ep);
    }
    return out;
}

} // namespace bhc::ecg
