#include "bhc/dsp.hpp"

#include "bhc/error.hpp"
#include "bhc/log.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <deque>
#include <mutex>
#include <numbers>
#include <set>

namespace bhc::dsp {

namespace {

constexpr double kPi = std::numbers::pi;

// FFTW's planner is not thread-safe; execution is.
std::mutex g_fftw_mutex;

class RfftPlan {
public:
    explicit RfftPlan(int n) : n_(n) {
        in_ = static_cast<double*>(fftw_malloc(sizeof(double) * static_cast<size_t>(n)));
        out_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (static_cast<size_t>(n) / 2 + 1)));
        std::lock_guard lock(g_fftw_mutex);
        plan_ = fftw_plan_dft_r2c_1d(n, in_, out_, FFTW_ESTIMATE);
    }
    ~RfftPlan() {
        {
            std::lock_guard lock(g_fftw_mutex);
            fftw_destroy_plan(plan_);
        }
        fftw_free(in_);
        fftw_free(out_);
    }
    RfftPlan(const RfftPlan&) = delete;
    RfftPlan& operator=(const RfftPlan&) = delete;

    double* input() { return in_; }
    void execute() { fftw_execute(plan_); }
    std::complex<double> bin(size_t k) const { return {out_[k][0], out_[k][1]}; }
    size_t n_bins() const { return static_cast<size_t>(n_) / 2 + 1; }

private:
    int n_;
    double* in_;
    fftw_complex* out_;
    fftw_plan plan_;
};

/// Odd-sized running median over a window whose bounds move monotonically.
class RunningMedian {
public:
    void insert(double x) {
        if (low_.empty() || x <= *low_.rbegin()) low_.insert(x);
        else high_.insert(x);
        rebalance();
    }
    void erase(double x) {
        auto it = low_.find(x);
        if (it != low_.end()) low_.erase(it);
        else high_.erase(high_.find(x));
        rebalance();
    }
    double median() const { return *low_.rbegin(); }

private:
    void rebalance() {
        while (low_.size() > high_.size() + 1) {
            high_.insert(*low_.rbegin());
            low_.erase(std::prev(low_.end()));
        }
        while (low_.size() < high_.size()) {
            low_.insert(*high_.begin());
            high_.erase(high_.begin());
        }
    }
    std::multiset<double> low_, high_; // low_ holds the max-side half incl. median
};

int odd_window_samples(double window_s, double fs) {
    int w = static_cast<int>(std::lround(window_s * fs));
    if (w < 1) w = 1;
    if (w % 2 == 0) ++w;
    return w;
}

// scipy-compatible correction for the bias of median-of-periodograms
// relative to the mean; equals 1 for n <= 2 and tends to ln 2.
double median_bias(size_t n) {
    double b = 1.0;
    for (size_t k = 1; 2 * k + 1 <= n; ++k)
        b += 1.0 / static_cast<double>(2 * k + 1) - 1.0 / static_cast<double>(2 * k);
    return b;
}

} // namespace

std::vector<std::complex<double>> rfft(std::span<const double> x) {
    if (x.empty()) throw ValidationError("rfft: empty input");
    RfftPlan plan(static_cast<int>(x.size()));
    std::copy(x.begin(), x.end(), plan.input());
    plan.execute();
    std::vector<std::complex<double>> out(plan.n_bins());
    for (size_t k = 0; k < out.size(); ++k) out[k] = plan.bin(k);
    return out;
}

std::vector<double> irfft(std::span<const std::complex<double>> half_spectrum, size_t n) {
    if (half_spectrum.size() != n / 2 + 1) throw ValidationError("irfft: spectrum length must be n/2+1");
    auto* in = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * half_spectrum.size()));
    auto* out = static_cast<double*>(fftw_malloc(sizeof(double) * n));
    fftw_plan plan;
    {
        std::lock_guard lock(g_fftw_mutex);
        plan = fftw_plan_dft_c2r_1d(static_cast<int>(n), in, out, FFTW_ESTIMATE);
    }
    for (size_t k = 0; k < half_spectrum.size(); ++k) {
        in[k][0] = half_spectrum[k].real();
        in[k][1] = half_spectrum[k].imag();
    }
    fftw_execute(plan);
    std::vector<double> result(n);
    for (size_t i = 0; i < n; ++i) result[i] = out[i] / static_cast<double>(n);
    {
        std::lock_guard lock(g_fftw_mutex);
        fftw_destroy_plan(plan);
    }
    fftw_free(in);
    fftw_free(out);
    return result;
}

std::vector<double> median_filter(std::span<const double> signal, double window_s, double fs) {
    if (signal.empty()) throw ValidationError("median_filter: empty signal");
    if (window_s * fs < 1.0) throw ValidationError("median_filter: window shorter than one sample");
    const int n = static_cast<int>(signal.size());
    const int h = (odd_window_samples(window_s, fs) - 1) / 2;

    auto half = [&](int i) { return std::min({h, i, n - 1 - i}); };

    std::vector<double> out(signal.size());
    RunningMedian rm;
    int lo = 0, hi = -1; // current window [lo, hi]
    for (int i = 0; i < n; ++i) {
        const int hw = half(i);
        const int nlo = i - hw, nhi = i + hw;
        while (hi < nhi) rm.insert(signal[static_cast<size_t>(++hi)]);
        while (lo < nlo) rm.erase(signal[static_cast<size_t>(lo++)]);
        out[static_cast<size_t>(i)] = rm.median();
    }
    return out;
}

std::vector<double> baseline_remove(std::span<const double> signal, double fs) {
    const int w_long = odd_window_samples(1.25, fs);
    if (signal.size() < static_cast<size_t>(2 * w_long))
        throw ValidationError(log::cat("baseline_remove: signal of ", signal.size(),
                                       " samples is shorter than twice the ", w_long, "-sample window"));
    std::vector<double> baseline = median_filter(signal, 0.8, fs);
    baseline = median_filter(baseline, 1.25, fs);
    std::vector<double> out(signal.size());
    for (size_t i = 0; i < signal.size(); ++i) out[i] = signal[i] - baseline[i];
    return out;
}

std::vector<double> moving_minmax_norm(std::span<const double> signal, double window_s, double fs) {
    if (signal.empty()) return {};
    if (window_s * fs < 2.0) throw ValidationError("moving_minmax_norm: window shorter than two samples");
    const int n = static_cast<int>(signal.size());
    int w = static_cast<int>(std::lround(window_s * fs));
    if (w > n) w = n;
    const int hl = (w - 1) / 2, hr = w / 2;

    // monotonic deques over the clipped window [i-hl, i+hr]
    std::deque<int> mins, maxs;
    std::vector<double> out(signal.size());
    int right = -1;
    for (int i = 0; i < n; ++i) {
        const int lo = std::max(0, i - hl), hi = std::min(n - 1, i + hr);
        while (right < hi) {
            ++right;
            const double v = signal[static_cast<size_t>(right)];
            while (!mins.empty() && signal[static_cast<size_t>(mins.back())] >= v) mins.pop_back();
            mins.push_back(right);
            while (!maxs.empty() && signal[static_cast<size_t>(maxs.back())] <= v) maxs.pop_back();
            maxs.push_back(right);
        }
        while (!mins.empty() && mins.front() < lo) mins.pop_front();
        while (!maxs.empty() && maxs.front() < lo) maxs.pop_front();
        const double mn = signal[static_cast<size_t>(mins.front())];
        const double mx = signal[static_cast<size_t>(maxs.front())];
        out[static_cast<size_t>(i)] = (mx > mn) ? (signal[static_cast<size_t>(i)] - mn) / (mx - mn) : 0.5;
    }
    return out;
}

std::complex<double> BiquadCascade::response(double f_hz, double fs) const {
    const std::complex<double> z1 = std::exp(std::complex<double>(0.0, -2.0 * kPi * f_hz / fs));
    const std::complex<double> z2 = z1 * z1;
    std::complex<double> h(1.0, 0.0);
    for (const auto& s : sections)
        h *= (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
    return h;
}

bool BiquadCascade::stable() const {
    for (const auto& s : sections) {
        // Schur conditions for z^2 + a1 z + a2
        if (!(std::abs(s.a2) < 1.0 && std::abs(s.a1) < 1.0 + s.a2)) return false;
    }
    return true;
}

BiquadCascade design_bandpass(const FilterSpec& spec) {
    const double fs = spec.sample_rate_hz;
    if (spec.order < 1) throw ValidationError("design_bandpass: order must be >= 1");
    if (!(spec.low_hz > 0 && spec.low_hz < spec.high_hz && spec.high_hz < fs / 2))
        throw ValidationError(log::cat("design_bandpass: band [", spec.low_hz, ", ", spec.high_hz,
                                       "] violates 0 < lo < hi < fs/2 with fs = ", fs));

    const int N = spec.order;
    const double w1 = 2.0 * fs * std::tan(kPi * spec.low_hz / fs);
    const double w2 = 2.0 * fs * std::tan(kPi * spec.high_hz / fs);
    const double w0 = std::sqrt(w1 * w2);
    const double bw = w2 - w1;

    // analog band-pass poles from the low-pass prototype
    std::vector<std::complex<double>> zpoles;
    zpoles.reserve(static_cast<size_t>(2 * N));
    for (int k = 0; k < N; ++k) {
        const double ang = kPi * (2.0 * k + N + 1.0) / (2.0 * N);
        const std::complex<double> p(std::cos(ang), std::sin(ang));
        const std::complex<double> bp = bw * p;
        const std::complex<double> disc = std::sqrt(bp * bp - 4.0 * w0 * w0);
        for (const std::complex<double> s : {(bp + disc) / 2.0, (bp - disc) / 2.0})
            zpoles.push_back((2.0 * fs + s) / (2.0 * fs - s)); // bilinear
    }

    // group into conjugate pairs
    constexpr double kImagTol = 1e-12;
    std::vector<std::complex<double>> cplx;
    std::vector<double> reals;
    for (const auto& z : zpoles) {
        if (std::abs(z.imag()) > kImagTol) {
            if (z.imag() > 0) cplx.push_back(z);
        } else {
            reals.push_back(z.real());
        }
    }
    std::sort(reals.begin(), reals.end());
    std::sort(cplx.begin(), cplx.end(),
              [](const auto& a, const auto& b) { return std::abs(a) > std::abs(b); });

    BiquadCascade cascade;
    for (const auto& z : cplx) {
        Biquad s;
        s.b0 = 1.0;
        s.b1 = 0.0;
        s.b2 = -1.0; // zeros at z = +1 and z = -1
        s.a1 = -2.0 * z.real();
        s.a2 = std::norm(z);
        cascade.sections.push_back(s);
    }
    for (size_t i = 0; i + 1 < reals.size(); i += 2) {
        Biquad s;
        s.b0 = 1.0;
        s.b1 = 0.0;
        s.b2 = -1.0;
        s.a1 = -(reals[i] + reals[i + 1]);
        s.a2 = reals[i] * reals[i + 1];
        cascade.sections.push_back(s);
    }

    // unity gain at the (digital image of the) analog center frequency
    const double fc = fs / kPi * std::atan(w0 / (2.0 * fs));
    const double mag = std::abs(cascade.response(fc, fs));
    if (!(mag > 0.0)) throw ValidationError("design_bandpass: degenerate response at center");
    const double per_section = std::pow(1.0 / mag, 1.0 / static_cast<double>(cascade.sections.size()));
    for (auto& s : cascade.sections) {
        s.b0 *= per_section;
        s.b1 *= per_section;
        s.b2 *= per_section;
    }
    return cascade;
}

std::vector<double> filter_apply(const BiquadCascade& cascade, std::span<const double> signal) {
    std::vector<double> y(signal.begin(), signal.end());
    for (const auto& s : cascade.sections) {
        double z1 = 0.0, z2 = 0.0;
        for (auto& v : y) {
            const double x = v;
            const double out = s.b0 * x + z1;
            z1 = s.b1 * x - s.a1 * out + z2;
            z2 = s.b2 * x - s.a2 * out;
            v = out;
        }
    }
    return y;
}

std::vector<double> linear_interp(std::span<const double> times_s, std::span<const double> values,
                                  double out_rate_hz, double t0, double t1) {
    if (times_s.size() < 2) throw ValidationError("linear_interp: need at least 2 knots");
    if (times_s.size() != values.size()) throw ValidationError("linear_interp: times/values length mismatch");
    for (size_t i = 1; i < times_s.size(); ++i)
        if (!(times_s[i] > times_s[i - 1])) throw ValidationError("linear_interp: knot times not increasing");
    if (!(out_rate_hz > 0) || t1 < t0) throw ValidationError("linear_interp: bad sampling range");

    const size_t n_out = static_cast<size_t>(std::floor((t1 - t0) * out_rate_hz + 1e-9)) + 1;
    std::vector<double> out(n_out);
    for (size_t k = 0; k < n_out; ++k) {
        const double t = t0 + static_cast<double>(k) / out_rate_hz;
        if (t <= times_s.front()) {
            out[k] = values.front();
        } else if (t >= times_s.back()) {
            out[k] = values.back();
        } else {
            const auto it = std::upper_bound(times_s.begin(), times_s.end(), t);
            const size_t j = static_cast<size_t>(it - times_s.begin());
            const double ta = times_s[j - 1], tb = times_s[j];
            out[k] = values[j - 1] + (values[j] - values[j - 1]) * (t - ta) / (tb - ta);
        }
    }
    return out;
}

Spectrum welch_median_psd(std::span<const double> signal, double fs, const WelchConfig& cfg) {
    const int L = static_cast<int>(std::lround(cfg.seg_len_s * fs));
    if (L < 8) throw ValidationError("welch_median_psd: segment shorter than 8 samples");
    if (!(cfg.overlap_frac >= 0.0 && cfg.overlap_frac < 1.0))
        throw ValidationError("welch_median_psd: overlap_frac must be in [0,1)");
    if (signal.size() < static_cast<size_t>(L))
        throw ValidationError(log::cat("welch_median_psd: signal of ", signal.size(),
                                       " samples shorter than one ", L, "-sample segment"));

    int step = L - static_cast<int>(std::floor(cfg.overlap_frac * L));
    if (step < 1) step = 1;
    const size_t nseg = 1 + (signal.size() - static_cast<size_t>(L)) / static_cast<size_t>(step);

    std::vector<double> window(static_cast<size_t>(L));
    double u = 0.0;
    for (int i = 0; i < L; ++i) {
        window[static_cast<size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / L);
        u += window[static_cast<size_t>(i)] * window[static_cast<size_t>(i)];
    }

    const size_t n_bins = static_cast<size_t>(L) / 2 + 1;
    std::vector<std::vector<double>> seg_psd(nseg, std::vector<double>(n_bins));

    RfftPlan plan(L);
    for (size_t s = 0; s < nseg; ++s) {
        const size_t off = s * static_cast<size_t>(step);
        double* in = plan.input();
        for (int i = 0; i < L; ++i) in[i] = signal[off + static_cast<size_t>(i)] * window[static_cast<size_t>(i)];
        plan.execute();
        for (size_t k = 0; k < n_bins; ++k) {
            double p = std::norm(plan.bin(k)) / (fs * u);
            const bool interior = k > 0 && !(L % 2 == 0 && k == n_bins - 1);
            if (interior) p *= 2.0;
            seg_psd[s][k] = p;
        }
    }

    const double bias = median_bias(nseg);
    Spectrum spec;
    spec.freqs_hz.resize(n_bins);
    spec.power.resize(n_bins);
    std::vector<double> scratch(nseg);
    for (size_t k = 0; k < n_bins; ++k) {
        spec.freqs_hz[k] = static_cast<double>(k) * fs / L;
        for (size_t s = 0; s < nseg; ++s) scratch[s] = seg_psd[s][k];
        const size_t mid = nseg / 2;
        std::nth_element(scratch.begin(), scratch.begin() + static_cast<long>(mid), scratch.end());
        double med = scratch[mid];
        if (nseg % 2 == 0) {
            const double lower = *std::max_element(scratch.begin(), scratch.begin() + static_cast<long>(mid));
            med = 0.5 * (med + lower);
        }
        spec.power[k] = med / bias;
    }
    return spec;
}

double band_power(const Spectrum& spec, double lo_hz, double hi_hz) {
    if (!(lo_hz < hi_hz)) throw ValidationError("band_power: lo must be < hi");
    if (spec.freqs_hz.size() < 2 || spec.freqs_hz.size() != spec.power.size())
        throw ValidationError("band_power: malformed spectrum");
    const double f0 = spec.freqs_hz.front(), f1 = spec.freqs_hz.back();
    if (hi_hz <= f0 || lo_hz >= f1) {
        log::warn(log::cat("band_power: band [", lo_hz, ", ", hi_hz, "] outside spectrum range [",
                           f0, ", ", f1, "]"));
        return 0.0;
    }
    const double lo = std::max(lo_hz, f0), hi = std::min(hi_hz, f1);

    auto value_at = [&](double f) {
        const auto it = std::upper_bound(spec.freqs_hz.begin(), spec.freqs_hz.end(), f);
        size_t j = static_cast<size_t>(it - spec.freqs_hz.begin());
        if (j == 0) return spec.power.front();
        if (j >= spec.freqs_hz.size()) return spec.power.back();
        const double fa = spec.freqs_hz[j - 1], fb = spec.freqs_hz[j];
        return spec.power[j - 1] + (spec.power[j] - spec.power[j - 1]) * (f - fa) / (fb - fa);
    };

    double acc = 0.0;
    double prev_f = lo, prev_p = value_at(lo);
    for (size_t k = 0; k < spec.freqs_hz.size(); ++k) {
        const double f = spec.freqs_hz[k];
        if (f <= lo) continue;
        if (f >= hi) break;
        acc += 0.5 * (prev_p + spec.power[k]) * (f - prev_f);
        prev_f = f;
        prev_p = spec.power[k];
    }
    acc += 0.5 * (prev_p + value_at(hi)) * (hi - prev_f);
    return acc;
}

} // namespace bhc::dsp
