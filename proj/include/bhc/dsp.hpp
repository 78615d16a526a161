#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace bhc::dsp {

/// Sliding-window median with the window kept centered and odd: near the
/// edges the half-width shrinks symmetrically, so the first and last
/// samples are their own medians. window_s * fs must be >= 1.
std::vector<double> median_filter(std::span<const double> signal, double window_s, double fs);

/// Two-pass median baseline estimate (0.8 s then 1.25 s windows),
/// subtracted from the input. Removes baseline wander while leaving
/// QRS-scale transients intact.
std::vector<double> baseline_remove(std::span<const double> signal, double fs);

/// Per-sample min-max normalization over a centered moving window,
/// clipped at the edges. Output in [0,1]; a flat window maps to 0.5.
std::vector<double> moving_minmax_norm(std::span<const double> signal, double window_s, double fs);

struct FilterSpec {
    enum class Kind { ButterworthBandpass };
    Kind kind = Kind::ButterworthBandpass;
    int order = 4; // analog low-pass prototype order; the band-pass has 2*order poles
    double low_hz = 0.0;
    double high_hz = 0.0;
    double sample_rate_hz = 0.0;
};

struct Biquad {
    double b0 = 0, b1 = 0, b2 = 0; // numerator
    double a1 = 0, a2 = 0;         // denominator (a0 == 1)
};

/// Cascaded second-order sections. Kept as SOS because the 0.04 Hz edge
/// at fs = 4 Hz puts poles very close to the unit circle.
struct BiquadCascade {
    std::vector<Biquad> sections;

    /// Complex frequency response at f (Hz) for the given sample rate.
    std::complex<double> response(double f_hz, double fs) const;

    /// True when every pole lies strictly inside the unit circle.
    bool stable() const;
};

/// Digital Butterworth band-pass via analog prototype + bilinear transform
/// with both band edges prewarped, so |H| = 1/sqrt(2) lands exactly on
/// low_hz and high_hz. Throws on edges violating 0 < lo < hi < fs/2.
BiquadCascade design_bandpass(const FilterSpec& spec);

/// Single-pass causal filtering with zero initial conditions
/// (direct form II transposed per section). Output length == input length.
std::vector<double> filter_apply(const BiquadCascade& cascade, std::span<const double> signal);

/// Sample a piecewise-linear curve through (times_s, values) at out_rate_hz
/// on [t0, t1]. Queries outside the knot span hold the nearest knot value.
/// Requires >= 2 knots with strictly increasing times.
std::vector<double> linear_interp(std::span<const double> times_s, std::span<const double> values,
                                  double out_rate_hz, double t0, double t1);

struct Spectrum {
    std::vector<double> freqs_hz; // increasing, spacing 1/seg_len_s
    std::vector<double> power;    // one-sided density, signal^2/Hz
};

enum class WelchWindow { Hann };

struct WelchConfig {
    double seg_len_s = 4.0;
    double overlap_frac = 0.5;
    WelchWindow window = WelchWindow::Hann;
};

/// Welch PSD with per-bin median reduction across segments. The median is
/// rescaled by the median-of-chi^2 bias factor so that for stationary noise
/// the estimate is level with the mean-reduced PSD; with a single segment
/// the factor is 1 and the result equals the plain one-segment PSD.
Spectrum welch_median_psd(std::span<const double> signal, double fs, const WelchConfig& cfg);

/// Trapezoidal integral of the density over [lo_hz, hi_hz], clipped to the
/// spectrum's range. A band entirely outside the range yields 0 with a warning.
double band_power(const Spectrum& spec, double lo_hz, double hi_hz);

/// Real-input FFT (thread-safe wrapper over the FFTW backend).
/// Returns n/2+1 complex bins.
std::vector<std::complex<double>> rfft(std::span<const double> x);

/// Inverse of rfft, scaled so irfft(rfft(x), x.size()) == x.
std::vector<double> irfft(std::span<const std::complex<double>> half_spectrum, size_t n);

} // namespace bhc::dsp
