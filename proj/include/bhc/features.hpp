#pragma once

#include "bhc/ecg.hpp"
#include "bhc/eeg.hpp"
#include "bhc/types.hpp"

#include <array>
#include <span>
#include <string>
#include <vector>

namespace bhc::feat {

/// Yeo-Johnson power transform; total on finite reals for any lambda.
double yeo_johnson(double x, double lambda);

/// Analytic inverse of yeo_johnson in x.
double yeo_johnson_inverse(double y, double lambda);

/// Maximum-likelihood lambda under a Gaussian model of the transformed
/// values, profile log-likelihood with Jacobian, golden-section search
/// over [-5, 5] to 1e-6. Constant input yields lambda = 1 with a warning.
double fit_lambda(std::span<const double> values);

/// The profile log-likelihood itself (exposed for tests/diagnostics).
double yj_profile_loglik(std::span<const double> values, double lambda);

/// One analyzable epoch: joint EEG (both electrodes) + HRV features.
struct FeatureRow {
    std::string subject_id;
    long epoch_index = 0;
    SleepStage stage = SleepStage::Unscored;
    std::array<double, eeg::kNumBands> c3{}; // relative band powers
    std::array<double, eeg::kNumBands> c4{};
    double hf_abs = 0.0;
    double hf_norm = 0.0;
    double hf_yj = 0.0; // Yeo-Johnson transformed hf_norm
};

struct FeatureTable {
    std::vector<FeatureRow> rows; // sorted by (subject_id, epoch_index)
    double lambda_yj = 1.0;
    std::string provenance; // config hash + source manifest
};

/// Per-subject epoch features prior to joining.
struct SubjectFeatures {
    std::string subject_id;
    std::vector<ecg::HrvEpoch> hrv;
    std::vector<eeg::EegEpoch> eeg_c3;
    std::vector<eeg::EegEpoch> eeg_c4;
    Hypnogram hypnogram;
};

/// Inner-join per (subject, epoch): keeps epochs that are scored (not
/// Unscored) and valid in C3, C4 and HRV simultaneously; fits lambda once
/// on the pooled hf_norm and fills hf_yj. Throws if no rows survive.
FeatureTable build_table(const std::vector<SubjectFeatures>& subjects);

/// Canonical long-format CSV with header
/// subject,epoch,stage,c3_delta,...,c4_gamma,hf_abs,hf_norm,hf_yj.
std::string format_table_csv(const FeatureTable& table);
FeatureTable parse_table_csv(const std::string& path);

} // namespace bhc::feat
