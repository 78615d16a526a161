#pragma once

#include "bhc/eeg.hpp"
#include "bhc/features.hpp"
#include "bhc/types.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace bhc::stats {

/// Transformed HF power regressed on one electrode's five band powers,
/// stage indicators (reference Wake), and band x stage interactions, with
/// random intercepts for subject and for stage nested within subject.
struct ModelSpec {
    eeg::Electrode electrode = eeg::Electrode::C3;
    SleepStage reference = SleepStage::Wake;
    /// Pooled two-electrode model: both electrodes' five bands enter
    /// jointly (10 covariates + 40 interactions).
    bool pooled = false;
    /// Exactly tiled relative band powers sum to 1 and alias the
    /// intercept; Error preserves the strict contract, DropAliased
    /// removes dependent columns (left-to-right) like common LMM tooling.
    enum class RankPolicy { Error, DropAliased };
    RankPolicy rank_policy = RankPolicy::Error;
};

struct MixedDesign {
    Eigen::VectorXd y;
    Eigen::MatrixXd x;
    std::vector<std::string> col_names;
    std::vector<std::string> dropped_cols;

    struct Block {
        std::string name;
        std::vector<int> group_of_row; // row -> group index
        int n_groups = 0;
    };
    std::vector<Block> blocks;
};

MixedDesign build_design(const feat::FeatureTable& table, const ModelSpec& spec);

struct ModelFit {
    Eigen::VectorXd beta;
    Eigen::MatrixXd cov_beta;
    std::vector<std::string> col_names;

    std::vector<double> theta;         // variance ratios sigma2_block / sigma2_resid
    std::vector<double> sigma2_blocks; // per-block variance components
    std::vector<std::string> block_names;
    double sigma2_resid = 0.0;
    double reml_loglik = 0.0;

    long n_obs = 0;
    int rank_x = 0;
    long df_resid = 0;
    bool converged = false;

    /// Best objective after each accepted optimizer step (non-decreasing).
    std::vector<double> objective_trace;

    std::vector<Eigen::VectorXd> blups; // per block

    int col_index(const std::string& name) const; // -1 when absent
};

struct RemlOptions {
    double rel_tol = 1e-8;  // convergence tolerance on the variance ratios
    int max_polish_sweeps = 60;
    int max_simplex_iters = 600;
};

/// REML via the profiled log-likelihood over variance ratios, evaluated
/// through the mixed-model (Henderson) cross-products so the per-iteration
/// cost is independent of n. Variance ratios are optimized on a log scale
/// clamped to [e^-30, e^30]; boundary solutions are reported as such.
ModelFit fit_reml(const MixedDesign& design, const RemlOptions& opts = {});

/// One evaluation of the profiled REML log-likelihood at the given
/// variance ratios (exposed for tests).
double reml_loglik_at(const MixedDesign& design, const std::vector<double>& theta);

struct EffectRow {
    SleepStage stage;
    eeg::Electrode electrode;
    eeg::Band band;
    double estimate = 0.0;
    double std_error = 0.0;
    double t_ratio = 0.0;
    double p = 1.0;
};

struct EffectReport {
    std::vector<EffectRow> stage_slopes;   // per-stage slope = main + interaction
    std::vector<EffectRow> wake_contrasts; // interaction terms (difference from Wake)
    long df = 0;
};

/// Stage-specific band slopes with linear-combination standard errors and
/// two-sided t tests on the residual df.
EffectReport stage_slopes(const ModelFit& fit, const ModelSpec& spec);

std::string format_effects_csv(const std::vector<EffectRow>& rows);

struct Diagnostics {
    std::vector<double> hist_edges;
    std::vector<long> hist_counts;
    std::vector<std::pair<double, double>> qq;           // (theoretical, standardized sample)
    std::vector<std::pair<double, double>> fitted_resid; // (fitted, residual)
    double qq_correlation = 0.0;
    double resid_mean = 0.0;
    double resid_sd = 0.0;
};

/// Conditional residuals y - X beta - Z u with BLUP u.
Diagnostics residual_diagnostics(const ModelFit& fit, const MixedDesign& design);

/// Conditional residual vector itself (tests use it directly).
Eigen::VectorXd conditional_residuals(const ModelFit& fit, const MixedDesign& design);

} // namespace bhc::stats
