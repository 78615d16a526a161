#include "bhc/lmm.hpp"
#include "bhc/dists.hpp"
#include "bhc/error.hpp"

#include <doctest.h>

#include "oracles.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

using namespace bhc;

namespace {

/// Random full-rank feature table: bands are free uniforms (no sum-to-one
/// constraint), so all 30 design columns are estimable.
feat::FeatureTable random_table(int n_subjects, int epochs_per_subject, unsigned seed,
                                const std::vector<double>* beta = nullptr, double sd_subj = 0.0,
                                double sd_cell = 0.0, double sd_eps = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> stage_pick(0, 4);
    std::normal_distribution<double> g(0.0, 1.0);

    feat::FeatureTable table;
    for (int s = 0; s < n_subjects; ++s) {
        const double b_subj = sd_subj * g(rng);
        std::array<double, 5> b_cell{};
        for (auto& v : b_cell) v = sd_cell * g(rng);
        for (int e = 0; e < epochs_per_subject; ++e) {
            feat::FeatureRow row;
            row.subject_id = "S" + std::to_string(100 + s);
            row.epoch_index = e;
            row.stage = stage_from_code(stage_pick(rng));
            for (size_t b = 0; b < 5; ++b) {
                row.c3[b] = u(rng);
                row.c4[b] = u(rng);
            }
            double y = b_subj + b_cell[static_cast<size_t>(stage_code(row.stage))] + sd_eps * g(rng);
            if (beta) {
                // mirror the design layout: intercept, bands, stages, interactions
                const auto& bt = *beta;
                y += bt[0];
                for (size_t b = 0; b < 5; ++b) y += bt[1 + b] * row.c3[b];
                const int sc = stage_code(row.stage);
                if (sc > 0) {
                    y += bt[6 + static_cast<size_t>(sc - 1)];
                    for (size_t b = 0; b < 5; ++b)
                        y += bt[10 + static_cast<size_t>(sc - 1) * 5 + b] * row.c3[b];
                }
            }
            row.hf_norm = 0.5;
            row.hf_abs = 1.0;
            row.hf_yj = y;
            table.rows.push_back(row);
        }
    }
    std::sort(table.rows.begin(), table.rows.end(), [](const auto& a, const auto& b) {
        if (a.subject_id != b.subject_id) return a.subject_id < b.subject_id;
        return a.epoch_index < b.epoch_index;
    });
    return table;
}

std::vector<double> default_beta() {
    std::vector<double> beta(30, 0.0);
    beta[0] = 1.0;   // intercept
    beta[1] = -2.0;  // delta
    beta[4] = -5.0;  // beta band
    beta[6] = 0.5;   // N1 shift
    beta[7] = 1.5;   // N2 shift
    beta[11] = -1.0; // N1:theta? (layout: 10 + (s-1)*5 + b)
    beta[16] = -3.0; // N2:theta
    beta[23] = 4.0;  // N3:beta? index 10+2*5+3 = 23
    return beta;
}

} // namespace

TEST_CASE("build_design shapes, reference coding, zero-column dropping") {
    auto table = random_table(2, 40, 5);
    // keep only Wake and N2 so three stages are empty
    std::vector<feat::FeatureRow> keep;
    for (auto& r : table.rows)
        if (r.stage == SleepStage::Wake || r.stage == SleepStage::N2) keep.push_back(r);
    table.rows = keep;

    stats::ModelSpec spec;
    const auto design = stats::build_design(table, spec);
    REQUIRE(design.blocks.size() == 2);
    CHECK(design.blocks[0].n_groups == 2);  // Z1: subjects
    CHECK(design.blocks[1].n_groups <= 4);  // Z2: (subject, stage) cells
    // columns: intercept + 5 bands + 1 stage + 5 interactions
    CHECK(design.x.cols() == 12);

    // Wake rows have zero stage and interaction columns
    for (long i = 0; i < design.x.rows(); ++i) {
        if (table.rows[static_cast<size_t>(i)].stage != SleepStage::Wake) continue;
        for (long c = 6; c < design.x.cols(); ++c) CHECK(design.x(i, c) == 0.0);
    }
}

TEST_CASE("build_design matches brute-force column construction") {
    const auto table = random_table(3, 30, 6);
    stats::ModelSpec spec;
    spec.electrode = eeg::Electrode::C4;
    const auto design = stats::build_design(table, spec);
    REQUIRE(design.x.cols() == 30);

    for (long i = 0; i < design.x.rows(); ++i) {
        const auto& r = table.rows[static_cast<size_t>(i)];
        CHECK(design.x(i, 0) == 1.0);
        for (size_t b = 0; b < 5; ++b) CHECK(design.x(i, 1 + static_cast<long>(b)) == r.c4[b]);
        const int sc = stage_code(r.stage);
        for (int s = 1; s <= 4; ++s) {
            CHECK(design.x(i, 5 + s) == (sc == s ? 1.0 : 0.0));
            for (size_t b = 0; b < 5; ++b) {
                const long col = 10 + (s - 1) * 5 + static_cast<long>(b);
                CHECK(design.x(i, col) == (sc == s ? r.c4[b] : 0.0));
            }
        }
        CHECK(design.y(i) == r.hf_yj);
    }
}

TEST_CASE("build_design detects aliased columns") {
    auto table = random_table(2, 30, 7);
    // force exact collinearity: gamma = 1 - (delta+theta+alpha+beta)
    for (auto& r : table.rows) {
        r.c3[4] = 1.0 - (r.c3[0] + r.c3[1] + r.c3[2] + r.c3[3]);
        r.c4[4] = 1.0 - (r.c4[0] + r.c4[1] + r.c4[2] + r.c4[3]);
    }
    stats::ModelSpec strict;
    CHECK_THROWS_WITH_AS(stats::build_design(table, strict), doctest::Contains("aliased"),
                         ValidationError);

    stats::ModelSpec lax = strict;
    lax.rank_policy = stats::ModelSpec::RankPolicy::DropAliased;
    const auto design = stats::build_design(table, lax);
    CHECK(design.x.cols() < 30);
    CHECK(!design.dropped_cols.empty());
}

TEST_CASE("REML matches the closed-form balanced one-way ANOVA estimator") {
    const int g = 20, m = 10;
    std::mt19937_64 rng(11);
    std::normal_distribution<double> noise(0.0, 1.0), group(0.0, 2.0);

    stats::MixedDesign d;
    d.y.resize(g * m);
    d.x = Eigen::MatrixXd::Ones(g * m, 1);
    d.col_names = {"(intercept)"};
    stats::MixedDesign::Block blk;
    blk.name = "group";
    blk.n_groups = g;
    std::vector<double> group_means(static_cast<size_t>(g), 0.0);
    long row = 0;
    for (int i = 0; i < g; ++i) {
        const double a = group(rng);
        for (int j = 0; j < m; ++j) {
            d.y(row) = 5.0 + a + noise(rng);
            blk.group_of_row.push_back(i);
            ++row;
        }
    }
    d.blocks.push_back(blk);

    const auto fit = stats::fit_reml(d);
    REQUIRE(fit.converged);

    // ANOVA closed form
    double grand = d.y.mean();
    std::vector<double> means(static_cast<size_t>(g), 0.0);
    for (long r2 = 0; r2 < d.y.size(); ++r2) means[static_cast<size_t>(blk.group_of_row[static_cast<size_t>(r2)])] += d.y(r2);
    for (auto& v : means) v /= m;
    double msb = 0.0, msw = 0.0;
    for (int i = 0; i < g; ++i) msb += (means[static_cast<size_t>(i)] - grand) * (means[static_cast<size_t>(i)] - grand);
    msb *= m / static_cast<double>(g - 1);
    for (long r2 = 0; r2 < d.y.size(); ++r2) {
        const double e = d.y(r2) - means[static_cast<size_t>(blk.group_of_row[static_cast<size_t>(r2)])];
        msw += e * e;
    }
    msw /= static_cast<double>(g * (m - 1));

    const double sigma_g_anova = (msb - msw) / m;
    REQUIRE(sigma_g_anova > 0);
    CHECK(fit.sigma2_resid == doctest::Approx(msw).epsilon(1e-6));
    CHECK(fit.sigma2_blocks[0] == doctest::Approx(sigma_g_anova).epsilon(1e-6));
}

TEST_CASE("REML collapses to OLS when there is no group effect") {
    const auto table = random_table(15, 40, 21, nullptr, 0.0, 0.0, 1.0);
    stats::ModelSpec spec;
    const auto design = stats::build_design(table, spec);
    const auto fit = stats::fit_reml(design);

    CHECK(fit.sigma2_blocks[0] <= 1e-6 * fit.sigma2_resid);
    CHECK(fit.sigma2_blocks[1] <= 1e-6 * fit.sigma2_resid);

    const Eigen::VectorXd ols =
        (design.x.transpose() * design.x).ldlt().solve(design.x.transpose() * design.y);
    for (long c = 0; c < ols.size(); ++c)
        CHECK(fit.beta(c) == doctest::Approx(ols(c)).epsilon(1e-8));
}

TEST_CASE("REML objective trace is monotone and the optimum is stationary") {
    const auto table = random_table(12, 60, 31, nullptr, 0.8, 0.5, 1.0);
    stats::ModelSpec spec;
    const auto design = stats::build_design(table, spec);
    const auto fit = stats::fit_reml(design);
    REQUIRE(fit.converged);

    for (size_t i = 1; i < fit.objective_trace.size(); ++i)
        CHECK(fit.objective_trace[i] >= fit.objective_trace[i - 1]);

    // finite-difference gradient in theta at an interior optimum
    bool interior = true;
    for (double th : fit.theta)
        if (th < 1e-8) interior = false;
    if (interior) {
        const double h = 1e-5;
        double norm2 = 0.0;
        for (size_t b = 0; b < fit.theta.size(); ++b) {
            auto tp = fit.theta, tm = fit.theta;
            tp[b] += h;
            tm[b] -= h;
            const double gft = (stats::reml_loglik_at(design, tp) - stats::reml_loglik_at(design, tm)) /
                               (2.0 * h);
            norm2 += gft * gft;
        }
        CHECK(std::sqrt(norm2) <= 1e-4);
    }

    // cov_beta symmetric PSD
    const auto& c = fit.cov_beta;
    for (long i = 0; i < c.rows(); ++i)
        for (long j = 0; j < c.cols(); ++j) CHECK(std::fabs(c(i, j) - c(j, i)) <= 1e-12);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c);
    CHECK(es.eigenvalues().minCoeff() >= -1e-10 * c.trace());
}

TEST_CASE("fit is invariant to row permutation and response shifts") {
    auto table = random_table(8, 50, 41, nullptr, 0.6, 0.4, 0.8);
    stats::ModelSpec spec;
    const auto d1 = stats::build_design(table, spec);
    const auto f1 = stats::fit_reml(d1);

    // permute rows (deterministically)
    auto shuffled = table;
    std::mt19937_64 rng(5);
    std::shuffle(shuffled.rows.begin(), shuffled.rows.end(), rng);
    const auto d2 = stats::build_design(shuffled, spec);
    const auto f2 = stats::fit_reml(d2);
    for (long c2 = 0; c2 < f1.beta.size(); ++c2)
        CHECK(f1.beta(c2) == doctest::Approx(f2.beta(c2)).epsilon(1e-8));
    CHECK(f1.reml_loglik == doctest::Approx(f2.reml_loglik).epsilon(1e-8));

    // shift the response: only the intercept moves
    auto shifted = table;
    for (auto& r : shifted.rows) r.hf_yj += 11.25;
    const auto d3 = stats::build_design(shifted, spec);
    const auto f3 = stats::fit_reml(d3);
    CHECK(f3.beta(0) == doctest::Approx(f1.beta(0) + 11.25).epsilon(1e-7));
    for (long c2 = 1; c2 < f1.beta.size(); ++c2) {
        CHECK(f3.beta(c2) == doctest::Approx(f1.beta(c2)).epsilon(1e-7));
        CHECK(std::sqrt(f3.cov_beta(c2, c2)) ==
              doctest::Approx(std::sqrt(f1.cov_beta(c2, c2))).epsilon(1e-7));
    }
}

TEST_CASE("single-block REML matches a dense whole-matrix reference") {
    // small data so H can be formed explicitly
    const auto table = random_table(6, 20, 51, nullptr, 1.0, 0.0, 1.0);
    stats::ModelSpec spec;
    auto design = stats::build_design(table, spec);
    design.blocks.resize(1); // subject block only

    const auto fit = stats::fit_reml(design);

    // dense reference: profiled REML over a theta grid refined around the optimum
    const long n = design.y.size();
    const int p = static_cast<int>(design.x.cols());
    Eigen::MatrixXd zzt = Eigen::MatrixXd::Zero(n, n);
    for (long i = 0; i < n; ++i)
        for (long j = 0; j < n; ++j)
            if (design.blocks[0].group_of_row[static_cast<size_t>(i)] ==
                design.blocks[0].group_of_row[static_cast<size_t>(j)])
                zzt(i, j) = 1.0;

    auto dense_loglik = [&](double theta) {
        const Eigen::MatrixXd h = Eigen::MatrixXd::Identity(n, n) + theta * zzt;
        const Eigen::LLT<Eigen::MatrixXd> llt(h);
        const Eigen::MatrixXd hinv_x = llt.solve(design.x);
        const Eigen::VectorXd hinv_y = llt.solve(design.y);
        const Eigen::MatrixXd w = design.x.transpose() * hinv_x;
        const Eigen::VectorXd beta = w.ldlt().solve(design.x.transpose() * hinv_y);
        const double ypy = design.y.dot(hinv_y) - (design.x.transpose() * hinv_y).dot(beta);
        const double sigma2 = ypy / static_cast<double>(n - p);
        double logdet_h = 0.0;
        for (long i = 0; i < n; ++i) logdet_h += 2.0 * std::log(llt.matrixLLT()(i, i));
        const double logdet_w = std::log(w.determinant());
        return -0.5 * ((n - p) * (std::log(2.0 * std::numbers::pi * sigma2) + 1.0) + logdet_h + logdet_w);
    };

    CHECK(dense_loglik(fit.theta[0]) == doctest::Approx(fit.reml_loglik).epsilon(1e-9));
    // the implementation's optimum is no worse than a grid scan of the dense reference
    for (double theta : {0.05, 0.2, 0.5, 1.0, 2.0, 5.0})
        CHECK(fit.reml_loglik >= dense_loglik(theta) - 1e-7);
}

TEST_CASE("Monte Carlo: true coefficients fall within 3 SE") {
    const auto beta = default_beta();
    const int reps = 12;
    Eigen::MatrixXd covered = Eigen::MatrixXd::Zero(30, 1);
    for (int rep = 0; rep < reps; ++rep) {
        const auto table = random_table(30, 200, 1000 + static_cast<unsigned>(rep), &beta, 0.7, 0.5, 1.0);
        stats::ModelSpec spec;
        const auto design = stats::build_design(table, spec);
        const auto fit = stats::fit_reml(design);
        REQUIRE(fit.beta.size() == 30);
        for (long c = 0; c < 30; ++c) {
            const double se = std::sqrt(fit.cov_beta(c, c));
            if (std::fabs(fit.beta(c) - beta[static_cast<size_t>(c)]) <= 3.0 * se) covered(c, 0) += 1.0;
        }
    }
    for (long c = 0; c < 30; ++c) CHECK(covered(c, 0) / reps >= 0.9);
}

TEST_CASE("stage_slopes composes main effects and interactions") {
    const auto beta = default_beta();
    const auto table = random_table(20, 150, 77, &beta, 0.3, 0.2, 0.5);
    stats::ModelSpec spec;
    const auto design = stats::build_design(table, spec);
    const auto fit = stats::fit_reml(design);
    const auto rep = stats::stage_slopes(fit, spec);

    CHECK(rep.stage_slopes.size() == 25); // 5 stages x 5 bands
    CHECK(rep.wake_contrasts.size() == 20);
    for (const auto& row : rep.stage_slopes) {
        if (row.std_error > 0)
            CHECK(row.t_ratio == doctest::Approx(row.estimate / row.std_error).epsilon(1e-9));
        CHECK(row.p > 0.0);
        CHECK(row.p <= 1.0);
    }

    // wake slope equals the bare band coefficient
    const int cb = fit.col_index("beta");
    for (const auto& row : rep.stage_slopes) {
        if (row.stage == SleepStage::Wake && row.band == eeg::Band::Beta) {
            CHECK(row.estimate == doctest::Approx(fit.beta(cb)).epsilon(1e-12));
        }
        // N3 beta slope = main + interaction
        if (row.stage == SleepStage::N3 && row.band == eeg::Band::Beta) {
            const int ci = fit.col_index("N3:beta");
            CHECK(row.estimate == doctest::Approx(fit.beta(cb) + fit.beta(ci)).epsilon(1e-12));
        }
    }

    // recovered signs for the planted strong effects
    for (const auto& row : rep.stage_slopes) {
        if (row.stage == SleepStage::Wake && row.band == eeg::Band::Beta) CHECK(row.estimate < 0);
        if (row.stage == SleepStage::N3 && row.band == eeg::Band::Beta)
            CHECK(row.estimate < 0.0 + 1e-9); // -5 + 4 = -1
    }
}

TEST_CASE("zero interaction with zero covariance leaves the slope untouched") {
    stats::ModelFit fit;
    fit.col_names = {"(intercept)", "delta", "theta", "alpha", "beta", "gamma",
                     "stage:N1", "stage:N2", "stage:N3", "stage:REM"};
    for (int s = 1; s <= 4; ++s) {
        const char* names[] = {"N1", "N2", "N3", "REM"};
        for (const char* b : {"delta", "theta", "alpha", "beta", "gamma"})
            fit.col_names.push_back(std::string(names[s - 1]) + ":" + b);
    }
    const int p = static_cast<int>(fit.col_names.size());
    fit.beta = Eigen::VectorXd::Zero(p);
    fit.cov_beta = Eigen::MatrixXd::Zero(p, p);
    fit.beta(1) = -2.5;          // delta main effect
    fit.cov_beta(1, 1) = 0.25;   // se 0.5
    fit.df_resid = 1000;
    fit.n_obs = 1030;
    fit.rank_x = 30;
    fit.converged = true;

    stats::ModelSpec spec;
    const auto rep = stats::stage_slopes(fit, spec);
    for (const auto& row : rep.stage_slopes) {
        if (row.band != eeg::Band::Delta) continue;
        CHECK(row.estimate == doctest::Approx(-2.5).epsilon(1e-12));
        CHECK(row.std_error == doctest::Approx(0.5).epsilon(1e-12));
    }
}

TEST_CASE("residual diagnostics on Gaussian data") {
    const auto table = random_table(10, 80, 91, nullptr, 0.8, 0.3, 1.0);
    stats::ModelSpec spec;
    const auto design = stats::build_design(table, spec);
    const auto fit = stats::fit_reml(design);
    const auto diag = stats::residual_diagnostics(fit, design);

    CHECK(diag.qq_correlation >= 0.995);
    CHECK(std::fabs(diag.resid_mean) <= 1e-8 * diag.resid_sd);
    long total = 0;
    for (long c : diag.hist_counts) total += c;
    CHECK(total == fit.n_obs);

    // BLUP shrinkage: |u_g| <= |mean marginal residual of group g|
    const Eigen::VectorXd marg = design.y - design.x * fit.beta;
    for (size_t b = 0; b < design.blocks.size(); ++b) {
        const auto& blk = design.blocks[b];
        std::vector<double> sum(static_cast<size_t>(blk.n_groups), 0.0);
        std::vector<long> cnt(static_cast<size_t>(blk.n_groups), 0);
        for (long i = 0; i < marg.size(); ++i) {
            sum[static_cast<size_t>(blk.group_of_row[static_cast<size_t>(i)])] += marg(i);
            ++cnt[static_cast<size_t>(blk.group_of_row[static_cast<size_t>(i)])];
        }
        for (int gidx = 0; gidx < blk.n_groups; ++gidx) {
            const double gmean = sum[static_cast<size_t>(gidx)] / cnt[static_cast<size_t>(gidx)];
            CHECK(std::fabs(fit.blups[b](gidx)) <= std::fabs(gmean) + 1e-9);
        }
    }
}

TEST_CASE("fit_reml input guards") {
    stats::MixedDesign d;
    d.y = Eigen::VectorXd::Zero(5);
    d.x = Eigen::MatrixXd::Ones(5, 6);
    CHECK_THROWS_AS(stats::fit_reml(d), ValidationError); // no blocks / n <= p
}
