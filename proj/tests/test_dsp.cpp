#include "bhc/dsp.hpp"
#include "bhc/error.hpp"
#include "bhc/synth.hpp"

#include <doctest.h>

#include "oracles.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace bhc;

namespace {
constexpr double kPi = std::numbers::pi;

std::vector<double> sine(double f, double fs, size_t n, double amp = 1.0, double phase = 0.0) {
    std::vector<double> x(n);
    for (size_t i = 0; i < n; ++i) x[i] = amp * std::sin(2.0 * kPi * f * static_cast<double>(i) / fs + phase);
    return x;
}
} // namespace

TEST_CASE("median_filter keeps constants and removes impulses") {
    std::vector<double> c(100, 3.25);
    CHECK(dsp::median_filter(c, 0.1, 100.0) == c);

    std::vector<double> x = {1, 9, 1, 1, 1};
    const std::vector<double> want = {1, 1, 1, 1, 1};
    CHECK(dsp::median_filter(x, 3.0, 1.0) == want);
}

TEST_CASE("median_filter matches the brute-force per-index median") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-5, 5);
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<double> x(257);
        for (auto& v : x) v = u(rng);
        const int w = 2 * (trial + 1) + 1; // 3,5,7,9,11
        const auto got = dsp::median_filter(x, static_cast<double>(w), 1.0);
        const auto want = oracle::median_filter(x, (w - 1) / 2);
        REQUIRE(got.size() == want.size());
        for (size_t i = 0; i < got.size(); ++i) CHECK(got[i] == want[i]);
    }
}

TEST_CASE("median_filter rejects empty input") {
    CHECK_THROWS_AS(dsp::median_filter(std::vector<double>{}, 1.0, 10.0), ValidationError);
}

TEST_CASE("baseline_remove zeroes constants and kills slow drift") {
    const double fs = 256.0;
    std::vector<double> dc(static_cast<size_t>(10 * fs), 42.0);
    for (double v : dsp::baseline_remove(dc, fs)) CHECK(std::fabs(v) <= 1e-12 * 42.0);

    std::vector<double> zero(static_cast<size_t>(5 * fs), 0.0);
    for (double v : dsp::baseline_remove(zero, fs)) CHECK(v == 0.0);

    // QRS-like train plus 0.3 Hz drift; drift-band power must drop >= 90%
    std::mt19937_64 rng(11);
    const double dur = 30.0;
    auto beats = synth::make_beat_times(dur, 0.4, [](double) { return 1000.0; });
    auto ecg = synth::make_ecg(beats, fs, dur, 0.0, 0.0, 0.3, rng);
    std::vector<double> drifted = ecg;
    for (size_t i = 0; i < drifted.size(); ++i)
        drifted[i] += 0.5 * 1000.0 * std::sin(2.0 * kPi * 0.3 * static_cast<double>(i) / fs);

    const auto cleaned = dsp::baseline_remove(drifted, fs);
    const double before = oracle::periodogram_band_power(drifted, fs, 0.2, 0.4);
    const double after = oracle::periodogram_band_power(cleaned, fs, 0.2, 0.4);
    CHECK(after <= 0.1 * before);

    CHECK_THROWS_AS(dsp::baseline_remove(std::vector<double>(10, 1.0), fs), ValidationError);
}

TEST_CASE("moving_minmax_norm maps ramps to [0,1] and constants to 0.5") {
    std::vector<double> ramp(50);
    for (size_t i = 0; i < ramp.size(); ++i) ramp[i] = static_cast<double>(i);
    const auto out = dsp::moving_minmax_norm(ramp, 50.0, 1.0);
    CHECK(out.front() == 0.0);
    CHECK(out.back() == 1.0);
    for (double v : out) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }

    std::vector<double> flat(32, 7.0);
    for (double v : dsp::moving_minmax_norm(flat, 4.0, 1.0)) CHECK(v == 0.5);
}

TEST_CASE("moving_minmax_norm is invariant under positive affine maps") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-2, 2);
    std::vector<double> x(300);
    for (auto& v : x) v = u(rng);
    std::vector<double> y(x.size());
    for (size_t i = 0; i < x.size(); ++i) y[i] = 3.7 * x[i] - 11.0;
    const auto nx = dsp::moving_minmax_norm(x, 0.25, 100.0);
    const auto ny = dsp::moving_minmax_norm(y, 0.25, 100.0);
    for (size_t i = 0; i < nx.size(); ++i) CHECK(nx[i] == doctest::Approx(ny[i]).epsilon(1e-12));
}

TEST_CASE("design_bandpass hits the analytic Butterworth response") {
    dsp::FilterSpec spec;
    spec.order = 4;
    spec.low_hz = 0.04;
    spec.high_hz = 0.4;
    spec.sample_rate_hz = 4.0;
    const auto cascade = dsp::design_bandpass(spec);
    CHECK(cascade.stable());
    CHECK(cascade.sections.size() == 4);

    const double center = std::sqrt(0.04 * 0.4);
    const double mag_c = std::abs(cascade.response(center, 4.0));
    CHECK(mag_c >= 0.95);
    CHECK(mag_c <= 1.0 + 1e-9);

    CHECK(std::abs(cascade.response(0.0, 4.0)) == doctest::Approx(0.0).epsilon(0));
    CHECK(std::abs(cascade.response(2.0, 4.0)) <= 1e-6);

    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    CHECK(std::abs(cascade.response(0.04, 4.0)) == doctest::Approx(inv_sqrt2).epsilon(0.05 / inv_sqrt2));
    CHECK(std::abs(cascade.response(0.4, 4.0)) == doctest::Approx(inv_sqrt2).epsilon(0.05 / inv_sqrt2));

    for (double f : {0.02, 0.05, 0.1, 0.1265, 0.2, 0.3, 0.4, 0.6, 1.0, 1.5}) {
        const double want = oracle::butterworth_bp_magnitude(f, 0.04, 0.4, 4.0, 4);
        CHECK(std::abs(cascade.response(f, 4.0)) == doctest::Approx(want).epsilon(1e-9));
    }

    spec.high_hz = 3.0; // above Nyquist
    CHECK_THROWS_AS(dsp::design_bandpass(spec), ValidationError);
}

TEST_CASE("design_bandpass stays stable across orders and bands") {
    for (int order : {1, 2, 3, 4, 6}) {
        for (auto [lo, hi, fs] : {std::tuple{0.04, 0.4, 4.0}, {5.0, 15.0, 256.0}, {0.5, 30.0, 128.0}}) {
            dsp::FilterSpec spec;
            spec.order = order;
            spec.low_hz = lo;
            spec.high_hz = hi;
            spec.sample_rate_hz = fs;
            const auto c = dsp::design_bandpass(spec);
            CHECK(c.stable());
            CHECK(c.sections.size() == static_cast<size_t>(order));
        }
    }
}

TEST_CASE("filter_apply: zero input, impulse response, linearity, shift invariance") {
    dsp::FilterSpec spec;
    spec.order = 4;
    spec.low_hz = 0.04;
    spec.high_hz = 0.4;
    spec.sample_rate_hz = 4.0;
    const auto cascade = dsp::design_bandpass(spec);

    std::vector<double> zeros(64, 0.0);
    for (double v : dsp::filter_apply(cascade, zeros)) CHECK(v == 0.0);

    // long impulse response: DTFT magnitude must match the analytic curve
    std::vector<double> impulse(16384, 0.0);
    impulse[0] = 1.0;
    const auto h = dsp::filter_apply(cascade, impulse);
    for (double f : {0.02, 0.04, 0.1265, 0.3, 0.4, 0.8}) {
        const double want = oracle::butterworth_bp_magnitude(f, 0.04, 0.4, 4.0, 4);
        CHECK(std::abs(oracle::dtft_at(h, f, 4.0)) == doctest::Approx(want).epsilon(1e-6));
    }

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<double> x(200), y(200);
    for (auto& v : x) v = u(rng);
    for (auto& v : y) v = u(rng);
    std::vector<double> combo(200);
    for (size_t i = 0; i < combo.size(); ++i) combo[i] = 2.5 * x[i] - 0.75 * y[i];
    const auto fx = dsp::filter_apply(cascade, x);
    const auto fy = dsp::filter_apply(cascade, y);
    const auto fc = dsp::filter_apply(cascade, combo);
    for (size_t i = 0; i < combo.size(); ++i)
        CHECK(fc[i] == doctest::Approx(2.5 * fx[i] - 0.75 * fy[i]).epsilon(1e-9));

    // time invariance: shifted input -> shifted output on interior samples
    const int shift = 7;
    std::vector<double> xs(x.size() + shift, 0.0);
    std::copy(x.begin(), x.end(), xs.begin() + shift);
    const auto fxs = dsp::filter_apply(cascade, xs);
    for (size_t i = 0; i + shift < x.size(); ++i)
        CHECK(fxs[i + shift] == doctest::Approx(fx[i]).epsilon(1e-9));
}

TEST_CASE("linear_interp: flat knots, ramp, oracle equality, errors") {
    {
        const std::vector<double> t = {0.0, 1.0}, v = {800.0, 800.0};
        const auto out = dsp::linear_interp(t, v, 4.0, 0.0, 1.0);
        REQUIRE(out.size() == 5);
        for (double o : out) CHECK(o == 800.0);
    }
    {
        const std::vector<double> t = {0.0, 1.0}, v = {0.0, 1.0};
        const auto out = dsp::linear_interp(t, v, 4.0, 0.0, 1.0);
        const std::vector<double> want = {0.0, 0.25, 0.5, 0.75, 1.0};
        REQUIRE(out.size() == want.size());
        for (size_t i = 0; i < out.size(); ++i) CHECK(out[i] == doctest::Approx(want[i]).epsilon(1e-15));
    }
    {
        std::mt19937_64 rng(17);
        std::uniform_real_distribution<double> u(0, 1);
        std::vector<double> t, v;
        double tt = 0.0;
        for (int i = 0; i < 20; ++i) {
            tt += 0.2 + u(rng);
            t.push_back(tt);
            v.push_back(u(rng) * 100.0);
        }
        const auto out = dsp::linear_interp(t, v, 4.0, 0.0, tt + 1.0);
        for (size_t k = 0; k < out.size(); ++k) {
            const double q = 0.0 + static_cast<double>(k) / 4.0;
            CHECK(out[k] == oracle::interp_at(t, v, q));
        }
    }
    CHECK_THROWS_AS(dsp::linear_interp(std::vector<double>{1.0}, std::vector<double>{2.0}, 4.0, 0, 1),
                    ValidationError);
}

TEST_CASE("welch_median_psd: sine peak, Parseval, grid spacing") {
    const double fs = 256.0;
    const auto x = sine(10.0, fs, static_cast<size_t>(30 * fs));
    dsp::WelchConfig cfg;
    const auto spec = dsp::welch_median_psd(x, fs, cfg);

    CHECK(spec.freqs_hz[1] - spec.freqs_hz[0] == doctest::Approx(0.25).epsilon(1e-12));
    for (double p : spec.power) CHECK(p >= 0.0);

    size_t peak = 0;
    for (size_t k = 0; k < spec.power.size(); ++k)
        if (spec.power[k] > spec.power[peak]) peak = k;
    CHECK(spec.freqs_hz[peak] == doctest::Approx(10.0).epsilon(1e-9));

    const double total = dsp::band_power(spec, 0.0, fs / 2);
    CHECK(total == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("welch_median_psd with one segment equals the plain periodogram") {
    const double fs = 64.0;
    std::mt19937_64 rng(23);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> x(256);
    for (auto& v : x) v = g(rng);

    dsp::WelchConfig cfg;
    cfg.seg_len_s = 4.0; // = full signal, single segment
    cfg.overlap_frac = 0.0;
    const auto spec = dsp::welch_median_psd(x, fs, cfg);

    // independent Hann periodogram via naive DFT
    const size_t n = x.size();
    std::vector<double> w(n), xw(n);
    double u = 0.0;
    for (size_t i = 0; i < n; ++i) {
        w[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(i) / static_cast<double>(n));
        u += w[i] * w[i];
        xw[i] = x[i] * w[i];
    }
    for (size_t k = 0; k <= n / 2; ++k) {
        double want = std::norm(oracle::dtft_at(xw, static_cast<double>(k) * fs / static_cast<double>(n), fs)) /
                      (fs * u);
        if (k != 0 && 2 * k != n) want *= 2.0;
        CHECK(spec.power[k] == doctest::Approx(want).epsilon(1e-9));
    }
}

TEST_CASE("welch_median_psd on white noise is flat and integrates to the variance") {
    const double fs = 128.0;
    std::mt19937_64 rng(31);
    std::normal_distribution<double> g(0.0, 2.0);
    std::vector<double> x(static_cast<size_t>(120 * fs));
    for (auto& v : x) v = g(rng);

    dsp::WelchConfig cfg;
    const auto spec = dsp::welch_median_psd(x, fs, cfg);
    const double total = dsp::band_power(spec, 0.0, fs / 2);
    CHECK(total == doctest::Approx(4.0).epsilon(0.15));

    // flatness: low vs high half within statistical tolerance
    const double lo = dsp::band_power(spec, 1.0, 32.0) / 31.0;
    const double hi = dsp::band_power(spec, 32.0, 63.0) / 31.0;
    CHECK(lo == doctest::Approx(hi).epsilon(0.1));

    CHECK_THROWS_AS(dsp::welch_median_psd(std::vector<double>(10, 1.0), fs, cfg), ValidationError);
}

TEST_CASE("band_power: totals, tiling additivity, narrowband capture") {
    const double fs = 256.0;
    const auto x = sine(10.0, fs, static_cast<size_t>(20 * fs));
    const auto spec = dsp::welch_median_psd(x, fs, {});

    const double total = dsp::band_power(spec, spec.freqs_hz.front(), spec.freqs_hz.back());
    double tiled = 0.0;
    const std::vector<double> edges = {0.0, 1.0, 4.0, 8.0, 12.0, 30.0, 80.0, 128.0};
    for (size_t i = 0; i + 1 < edges.size(); ++i) tiled += dsp::band_power(spec, edges[i], edges[i + 1]);
    CHECK(tiled == doctest::Approx(total).epsilon(1e-9));

    const double alpha = dsp::band_power(spec, 8.0, 12.0);
    CHECK(alpha >= 0.95 * total);

    CHECK(dsp::band_power(spec, 300.0, 400.0) == 0.0);
    CHECK_THROWS_AS(dsp::band_power(spec, 5.0, 5.0), ValidationError);
}

TEST_CASE("rfft/irfft round trip") {
    std::mt19937_64 rng(41);
    std::normal_distribution<double> g(0.0, 1.0);
    for (size_t n : {64u, 120u, 257u}) {
        std::vector<double> x(n);
        for (auto& v : x) v = g(rng);
        const auto back = dsp::irfft(dsp::rfft(x), n);
        for (size_t i = 0; i < n; ++i) CHECK(back[i] == doctest::Approx(x[i]).epsilon(1e-12));
    }
}
