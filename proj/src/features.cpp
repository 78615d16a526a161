#include "bhc/features.hpp"

#include "bhc/csv.hpp"
#include "bhc/error.hpp"
#include "bhc/log.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace bhc::feat {

double yeo_johnson(double x, double lambda) {
    if (x >= 0.0) {
        if (std::fabs(lambda) < 1e-300) return std::log1p(x);
        return (std::pow(x + 1.0, lambda) - 1.0) / lambda;
    }
    const double two_ml = 2.0 - lambda;
    if (std::fabs(two_ml) < 1e-300) return -std::log1p(-x);
    return -(std::pow(1.0 - x, two_ml) - 1.0) / two_ml;
}

double yeo_johnson_inverse(double y, double lambda) {
    if (y >= 0.0) {
        if (std::fabs(lambda) < 1e-300) return std::expm1(y);
        return std::pow(lambda * y + 1.0, 1.0 / lambda) - 1.0;
    }
    const double two_ml = 2.0 - lambda;
    if (std::fabs(two_ml) < 1e-300) return -std::expm1(-y);
    return 1.0 - std::pow(1.0 - two_ml * y, 1.0 / two_ml);
}

double yj_profile_loglik(std::span<const double> values, double lambda) {
    const size_t n = values.size();
    double mean = 0.0;
    std::vector<double> z(n);
    for (size_t i = 0; i < n; ++i) {
        z[i] = yeo_johnson(values[i], lambda);
        mean += z[i];
    }
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : z) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    if (!(var > 0.0)) return -1e300;

    double jacobian = 0.0;
    for (double x : values) {
        const double s = (x >= 0.0) ? 1.0 : -1.0;
        jacobian += s * (lambda - 1.0) * std::log(std::fabs(x) + 1.0);
    }
    return -0.5 * static_cast<double>(n) * std::log(var) + jacobian;
}

double fit_lambda(std::span<const double> values) {
    if (values.size() < 10) throw ValidationError("fit_lambda: need at least 10 values");
    for (double v : values)
        if (!std::isfinite(v)) throw ValidationError("fit_lambda: non-finite input");
    const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    if (!(*mx > *mn)) {
        log::warn("fit_lambda: constant input, returning lambda = 1");
        return 1.0;
    }

    // golden-section maximization on [-5, 5]
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = -5.0, b = 5.0;
    double c = b - gr * (b - a), d = a + gr * (b - a);
    double fc = yj_profile_loglik(values, c), fd = yj_profile_loglik(values, d);
    while (b - a > 1e-6) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = yj_profile_loglik(values, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = yj_profile_loglik(values, d);
        }
    }
    return 0.5 * (a + b);
}

FeatureTable build_table(const std::vector<SubjectFeatures>& subjects) {
    FeatureTable table;
    for (const auto& s : subjects) {
        const size_t n_epochs = s.hypnogram.n_epochs();
        if (s.hrv.size() != n_epochs || s.eeg_c3.size() != n_epochs || s.eeg_c4.size() != n_epochs)
            throw ValidationError(s.subject_id + ": epoch streams not aligned with hypnogram");
        for (size_t e = 0; e < n_epochs; ++e) {
            const SleepStage st = s.hypnogram.stages[e];
            if (st == SleepStage::Unscored) continue;
            const auto& hrv = s.hrv[e];
            const auto& c3 = s.eeg_c3[e];
            const auto& c4 = s.eeg_c4[e];
            if (!hrv.valid || !c3.valid || !c4.valid) continue;
            FeatureRow row;
            row.subject_id = s.subject_id;
            row.epoch_index = static_cast<long>(e);
            row.stage = st;
            row.c3 = c3.rel_power;
            row.c4 = c4.rel_power;
            row.hf_abs = hrv.hf_abs;
            row.hf_norm = hrv.hf_norm;
            table.rows.push_back(std::move(row));
        }
    }
    if (table.rows.empty()) throw ValidationError("build_table: no analyzable rows");

    std::sort(table.rows.begin(), table.rows.end(), [](const FeatureRow& a, const FeatureRow& b) {
        if (a.subject_id != b.subject_id) return a.subject_id < b.subject_id;
        return a.epoch_index < b.epoch_index;
    });

    std::vector<double> pooled;
    pooled.reserve(table.rows.size());
    for (const auto& r : table.rows) pooled.push_back(r.hf_norm);
    table.lambda_yj = pooled.size() >= 10 ? fit_lambda(pooled) : 1.0;
    for (auto& r : table.rows) r.hf_yj = yeo_johnson(r.hf_norm, table.lambda_yj);
    return table;
}

namespace {

const char* kHeader =
    "subject,epoch,stage,"
    "c3_delta,c3_theta,c3_alpha,c3_beta,c3_gamma,"
    "c4_delta,c4_theta,c4_alpha,c4_beta,c4_gamma,"
    "hf_abs,hf_norm,hf_yj";

} // namespace

std::string format_table_csv(const FeatureTable& table) {
    std::string out(kHeader);
    out += '\n';
    for (const auto& r : table.rows) {
        out += r.subject_id;
        out += ',';
        out += csv::fmt(static_cast<std::int64_t>(r.epoch_index));
        out += ',';
        out += csv::fmt(static_cast<std::int64_t>(stage_code(r.stage)));
        for (double v : r.c3) {
            out += ',';
            out += csv::fmt(v);
        }
        for (double v : r.c4) {
            out += ',';
            out += csv::fmt(v);
        }
        out += ',';
        out += csv::fmt(r.hf_abs);
        out += ',';
        out += csv::fmt(r.hf_norm);
        out += ',';
        out += csv::fmt(r.hf_yj);
        out += '\n';
    }
    return out;
}

FeatureTable parse_table_csv(const std::string& path) {
    const auto rows = csv::read_file(path);
    if (rows.size() < 2) throw ParseError("feature table CSV empty or header-only: " + path);
    if (rows[0].size() != 16 || rows[0][0] != "subject")
        throw ParseError("feature table CSV has unexpected header: " + path);

    FeatureTable table;
    for (size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (r.size() != 16)
            throw ParseError(log::cat("feature table line ", i + 1, ": expected 16 columns, got ",
                                      r.size()));
        FeatureRow row;
        row.subject_id = r[0];
        row.epoch_index = csv::to_int(r[1], "epoch");
        row.stage = stage_from_code(static_cast<int>(csv::to_int(r[2], "stage")));
        for (size_t b = 0; b < eeg::kNumBands; ++b) {
            row.c3[b] = csv::to_double(r[3 + b], "c3 band");
            row.c4[b] = csv::to_double(r[8 + b], "c4 band");
        }
        row.hf_abs = csv::to_double(r[13], "hf_abs");
        row.hf_norm = csv::to_double(r[14], "hf_norm");
        row.hf_yj = csv::to_double(r[15], "hf_yj");
        table.rows.push_back(std::move(row));
    }
    return table;
}

} // namespace bhc::feat
