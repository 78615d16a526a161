#pragma once

#include <array>
#include <span>
#include <vector>

namespace bhc::dsp {

enum class Wavelet { Db2 };

/// Non-decimated (maximal-overlap) wavelet packet decomposition.
/// Every node keeps the input length; nodes are in sequency order, so
/// node k covers [k, k+1) * fs / 2^(level+1) Hz, and the node energies
/// sum to the input energy exactly (circular boundary handling).
struct WaveletPacketDecomposition {
    int level = 0;
    double sample_rate_hz = 0.0;
    Wavelet wavelet = Wavelet::Db2;
    std::vector<std::vector<double>> nodes; // 2^level sequences, input length each

    size_t n_nodes() const { return nodes.size(); }
    /// [lo, hi) frequency band of node k in Hz.
    std::pair<double, double> node_band_hz(size_t k) const;
    /// Sum of squared coefficients of node k.
    double node_energy(size_t k) const;
};

/// Requires signal length >= equivalent filter support (2^J - 1) * 3 + 1.
WaveletPacketDecomposition modwpt(std::span<const double> signal, double fs, int level,
                                  Wavelet wavelet = Wavelet::Db2);

/// Fraction of [band_lo, band_hi) overlapped by node k of a level-J
/// decomposition at sample rate fs, i.e. the node's weight in a
/// fractional band-energy sum. In [0, 1].
double node_band_weight(int level, double fs, size_t k, double band_lo_hz, double band_hi_hz);

} // namespace bhc::dsp
