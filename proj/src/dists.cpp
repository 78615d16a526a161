#include "bhc/dists.hpp"

#include "bhc/error.hpp"

#include <array>
#include <cmath>
#include <numbers>

namespace bhc::stats {

namespace {

constexpr double kPi = std::numbers::pi;

// 16-point Gauss-Legendre nodes/weights on [-1, 1]
constexpr std::array<double, 8> kGlNodes = {
    0.0950125098376374, 0.2816035507792589, 0.4580167776572274, 0.6178762444026438,
    0.7554044083550030, 0.8656312023878318, 0.9445750230732326, 0.9894009349916499};
constexpr std::array<double, 8> kGlWeights = {
    0.1894506104550685, 0.1826034150449236, 0.1691565193950025, 0.1495959888165767,
    0.1246289712555339, 0.0951585116824928, 0.0622535239386479, 0.0271524594117541};

/// Integrate f over [a, b] with composite 16-point Gauss-Legendre.
template <typename F>
double gl_integrate(F&& f, double a, double b, int panels) {
    const double h = (b - a) / panels;
    double acc = 0.0;
    for (int p = 0; p < panels; ++p) {
        const double mid = a + (p + 0.5) * h;
        const double half = 0.5 * h;
        for (size_t i = 0; i < kGlNodes.size(); ++i) {
            acc += kGlWeights[i] * half * (f(mid + half * kGlNodes[i]) + f(mid - half * kGlNodes[i]));
        }
    }
    return acc;
}

double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 400;
    constexpr double kEps = 3e-16, kFpMin = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return h;
}

/// CDF of the range of k independent standard normals.
double normal_range_cdf(double r, int k) {
    if (r <= 0.0) return 0.0;
    auto integrand = [&](double u) {
        const double phi = std::exp(-0.5 * u * u) / std::sqrt(2.0 * kPi);
        const double span = normal_cdf(u) - normal_cdf(u - r);
        return phi * std::pow(span, k - 1);
    };
    return k * gl_integrate(integrand, -8.5, 8.5, 16);
}

} // namespace

double normal_cdf(double z) {
    return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw ValidationError("normal_quantile: p must be in (0,1)");
    // Acklam's rational approximation, then one Halley refinement
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                               1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                               6.680131188771972e+01, -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                               -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                               3.754408661907416e+00};
    const double plow = 0.02425;
    double x;
    if (p < plow) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - plow) {
        const double q = p - 0.5, r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    const double e = normal_cdf(x) - p;
    const double u = e * std::sqrt(2.0 * kPi) * std::exp(0.5 * x * x);
    return x - u / (1.0 + 0.5 * x * u);
}

double incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0 && b > 0.0)) throw ValidationError("incomplete_beta: a, b must be positive");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    if (x < (a + 1.0) / (a + b + 2.0)) {
        const double ln_bt =
            std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
        return std::exp(ln_bt) * betacf(a, b, x) / a;
    }
    return 1.0 - incomplete_beta(b, a, 1.0 - x);
}

double t_cdf(double t, double df) {
    if (!(df > 0.0)) throw ValidationError("t_cdf: df must be positive");
    if (t == 0.0) return 0.5;
    const double x = df / (df + t * t);
    const double half_tail = 0.5 * incomplete_beta(0.5 * df, 0.5, x);
    return t > 0.0 ? 1.0 - half_tail : half_tail;
}

double t_two_sided_p(double t, double df) {
    if (!(df > 0.0)) throw ValidationError("t_two_sided_p: df must be positive");
    const double x = df / (df + t * t);
    return incomplete_beta(0.5 * df, 0.5, x);
}

double t_quantile(double p, double df) {
    if (!(df > 0.0)) throw ValidationError("t_quantile: df must be positive");
    if (!(p > 0.0 && p < 1.0)) throw ValidationError("t_quantile: p must be in (0,1)");
    if (p == 0.5) return 0.0;
    // bracket then bisect; the CDF is strictly increasing
    double lo = -1.0, hi = 1.0;
    while (t_cdf(lo, df) > p) lo *= 2.0;
    while (t_cdf(hi, df) < p) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (t_cdf(mid, df) < p) lo = mid;
        else hi = mid;
        if (hi - lo < 1e-12 * std::max(1.0, std::fabs(hi))) break;
    }
    return 0.5 * (lo + hi);
}

double studentized_range_cdf(double q, int k, double df) {
    if (k < 2) throw ValidationError("studentized_range_cdf: k must be >= 2");
    if (!(df > 0.0)) throw ValidationError("studentized_range_cdf: df must be positive");
    if (q <= 0.0) return 0.0;
    if (df > 1e5) return normal_range_cdf(q, k); // chi scale is 1 to O(1/df)

    // mix the range CDF over the distribution of s = sqrt(chi2_df / df)
    const double ln_norm =
        (1.0 - 0.5 * df) * std::log(2.0) + 0.5 * df * std::log(df) - std::lgamma(0.5 * df);
    auto outer = [&](double s) {
        if (s <= 0.0) return 0.0;
        const double ln_density = ln_norm + (df - 1.0) * std::log(s) - 0.5 * df * s * s;
        return std::exp(ln_density) * normal_range_cdf(q * s, k);
    };
    double s_lo = 0.0, s_hi = 5.0;
    if (df >= 40.0) {
        const double spread = 12.0 / std::sqrt(2.0 * df);
        s_lo = std::max(0.0, 1.0 - spread);
        s_hi = 1.0 + spread;
    }
    return gl_integrate(outer, s_lo, s_hi, 24);
}

double studentized_range_p(double q, int k, double df) {
    return std::min(1.0, std::max(0.0, 1.0 - studentized_range_cdf(q, k, df)));
}

double studentized_range_quantile(double p, int k, double df) {
    if (!(p > 0.0 && p < 1.0)) throw ValidationError("studentized_range_quantile: p must be in (0,1)");
    double lo = 1e-6, hi = 10.0;
    while (studentized_range_cdf(hi, k, df) < p) {
        hi *= 2.0;
        if (hi > 1e4) throw ValidationError("studentized_range_quantile: failed to bracket");
    }
    for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (studentized_range_cdf(mid, k, df) < p) lo = mid;
        else hi = mid;
        if (hi - lo < 1e-9 * std::max(1.0, hi)) break;
    }
    return 0.5 * (lo + hi);
}

} // namespace bhc::stats
