#include "bhc/modwpt.hpp"

#include "bhc/error.hpp"
#include "bhc/log.hpp"

#include <cmath>

namespace bhc::dsp {

namespace {

// db2 orthonormal scaling filter; wavelet filter is its quadrature mirror.
constexpr int kTaps = 4;
const std::array<double, kTaps> kDb2Scaling = {
    0.48296291314453414, 0.8365163037378079, 0.22414386804201339, -0.12940952255126037};

std::array<double, kTaps> scaling_modwt() {
    std::array<double, kTaps> g{};
    const double s = std::sqrt(2.0);
    for (int i = 0; i < kTaps; ++i) g[static_cast<size_t>(i)] = kDb2Scaling[static_cast<size_t>(i)] / s;
    return g;
}

std::array<double, kTaps> wavelet_modwt() {
    std::array<double, kTaps> h{};
    const double s = std::sqrt(2.0);
    for (int i = 0; i < kTaps; ++i) {
        const double v = kDb2Scaling[static_cast<size_t>(kTaps - 1 - i)] / s;
        h[static_cast<size_t>(i)] = (i % 2 == 0) ? v : -v;
    }
    return h;
}

// circular convolution with the filter upsampled by `stride`
std::vector<double> filter_stage(const std::vector<double>& x, const std::array<double, kTaps>& f, size_t stride) {
    const size_t n = x.size();
    std::vector<double> y(n);
    for (size_t t = 0; t < n; ++t) {
        double acc = 0.0;
        size_t idx = t;
        for (int l = 0; l < kTaps; ++l) {
            acc += f[static_cast<size_t>(l)] * x[idx];
            idx = (idx + n - stride % n) % n;
        }
        y[t] = acc;
    }
    return y;
}

} // namespace

std::pair<double, double> WaveletPacketDecomposition::node_band_hz(size_t k) const {
    const double width = sample_rate_hz / std::pow(2.0, level + 1);
    return {static_cast<double>(k) * width, static_cast<double>(k + 1) * width};
}

double WaveletPacketDecomposition::node_energy(size_t k) const {
    double e = 0.0;
    for (double v : nodes[k]) e += v * v;
    return e;
}

WaveletPacketDecomposition modwpt(std::span<const double> signal, double fs, int level, Wavelet wavelet) {
    if (level < 1) throw ValidationError("modwpt: level must be >= 1");
    const size_t support = ((1ull << level) - 1) * (kTaps - 1) + 1;
    if (signal.size() < support)
        throw ValidationError(log::cat("modwpt: level ", level, " needs at least ", support,
                                       " samples, got ", signal.size()));

    const auto g = scaling_modwt();
    const auto h = wavelet_modwt();

    std::vector<std::vector<double>> current;
    current.emplace_back(signal.begin(), signal.end());

    for (int j = 1; j <= level; ++j) {
        const size_t stride = 1ull << (j - 1);
        std::vector<std::vector<double>> next(current.size() * 2);
        for (size_t n = 0; n < next.size(); ++n) {
            // sequency ordering: nodes n with n mod 4 in {0,3} take the
            // scaling filter, the rest the wavelet filter
            const size_t m = n % 4;
            const bool use_scaling = (m == 0 || m == 3);
            next[n] = filter_stage(current[n / 2], use_scaling ? g : h, stride);
        }
        current = std::move(next);
    }

    WaveletPacketDecomposition out;
    out.level = level;
    out.sample_rate_hz = fs;
    out.wavelet = wavelet;
    out.nodes = std::move(current);
    return out;
}

double node_band_weight(int level, double fs, size_t k, double band_lo_hz, double band_hi_hz) {
    const double width = fs / std::pow(2.0, level + 1);
    const double lo = static_cast<double>(k) * width;
    const double hi = lo + width;
    const double overlap = std::min(hi, band_hi_hz) - std::max(lo, band_lo_hz);
    return std::max(0.0, overlap) / width;
}

} // namespace bhc::dsp
