#include "bhc/lmm.hpp"

#include "bhc/csv.hpp"
#include "bhc/dists.hpp"
#include "bhc/error.hpp"
#include "bhc/log.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

namespace bhc::stats {

namespace {

constexpr double kLogThetaMin = -30.0;
constexpr double kLogThetaMax = 30.0;

const std::array<SleepStage, 4> kNonRefStages = {SleepStage::N1, SleepStage::N2, SleepStage::N3,
                                                 SleepStage::Rem};

std::string stage_col(SleepStage s) {
    return std::string("stage:") + stage_name(s);
}

std::string band_col(const ModelSpec& spec, eeg::Electrode e, eeg::Band b) {
    if (!spec.pooled) return eeg::band_name(b);
    return std::string(eeg::electrode_name(e)) + ":" + eeg::band_name(b);
}

std::string interaction_col(const ModelSpec& spec, eeg::Electrode e, SleepStage s, eeg::Band b) {
    return std::string(stage_name(s)) + ":" + band_col(spec, e, b);
}

} // namespace

int ModelFit::col_index(const std::string& name) const {
    for (size_t i = 0; i < col_names.size(); ++i)
        if (col_names[i] == name) return static_cast<int>(i);
    return -1;
}

MixedDesign build_design(const feat::FeatureTable& table, const ModelSpec& spec) {
    if (table.rows.empty()) throw ValidationError("build_design: empty feature table");
    const long n = static_cast<long>(table.rows.size());

    std::vector<eeg::Electrode> electrodes;
    if (spec.pooled) electrodes = {eeg::Electrode::C3, eeg::Electrode::C4};
    else electrodes = {spec.electrode};

    std::vector<std::string> names;
    names.push_back("(intercept)");
    for (auto e : electrodes)
        for (size_t b = 0; b < eeg::kNumBands; ++b)
            names.push_back(band_col(spec, e, static_cast<eeg::Band>(b)));
    for (SleepStage s : kNonRefStages)
        if (s != spec.reference) names.push_back(stage_col(s));
    for (SleepStage s : kNonRefStages) {
        if (s == spec.reference) continue;
        for (auto e : electrodes)
            for (size_t b = 0; b < eeg::kNumBands; ++b)
                names.push_back(interaction_col(spec, e, s, static_cast<eeg::Band>(b)));
    }
    const int p_full = static_cast<int>(names.size());

    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, p_full);
    Eigen::VectorXd y(n);
    for (long i = 0; i < n; ++i) {
        const auto& row = table.rows[static_cast<size_t>(i)];
        if (!std::isfinite(row.hf_yj))
            throw ValidationError("build_design: non-finite response at row " + std::to_string(i));
        y(i) = row.hf_yj;
        auto band_value = [&](eeg::Electrode e, size_t b) {
            return e == eeg::Electrode::C3 ? row.c3[b] : row.c4[b];
        };
        int c = 0;
        x(i, c++) = 1.0;
        for (auto e : electrodes)
            for (size_t b = 0; b < eeg::kNumBands; ++b) x(i, c++) = band_value(e, b);
        for (SleepStage s : kNonRefStages) {
            if (s == spec.reference) continue;
            x(i, c++) = row.stage == s ? 1.0 : 0.0;
        }
        for (SleepStage s : kNonRefStages) {
            if (s == spec.reference) continue;
            for (auto e : electrodes)
                for (size_t b = 0; b < eeg::kNumBands; ++b)
                    x(i, c++) = row.stage == s ? band_value(e, b) : 0.0;
        }
    }

    // left-to-right dependency scan (modified Gram-Schmidt, two passes)
    std::vector<int> keep;
    std::vector<std::string> aliased;
    std::vector<Eigen::VectorXd> basis;
    for (int j = 0; j < p_full; ++j) {
        Eigen::VectorXd v = x.col(j);
        const double norm0 = v.norm();
        if (norm0 == 0.0) continue; // empty cell (e.g. a stage with no rows)
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& u : basis) v -= u.dot(v) * u;
        if (v.norm() <= 1e-10 * norm0) {
            aliased.push_back(names[static_cast<size_t>(j)]);
            continue;
        }
        basis.push_back(v / v.norm());
        keep.push_back(j);
    }
    if (!aliased.empty()) {
        std::string list;
        for (const auto& a : aliased) list += (list.empty() ? "" : ", ") + a;
        if (spec.rank_policy == ModelSpec::RankPolicy::Error)
            throw ValidationError("build_design: rank-deficient design, aliased columns: " + list);
        log::warn("build_design: dropping aliased columns: " + list);
    }

    MixedDesign d;
    d.y = std::move(y);
    d.x.resize(n, static_cast<int>(keep.size()));
    for (size_t k = 0; k < keep.size(); ++k) {
        d.x.col(static_cast<int>(k)) = x.col(keep[k]);
        d.col_names.push_back(names[static_cast<size_t>(keep[k])]);
    }
    d.dropped_cols = std::move(aliased);

    // random-effect blocks: subject, then subject:stage cells
    MixedDesign::Block subj;
    subj.name = "subject";
    MixedDesign::Block cell;
    cell.name = "subject:stage";
    std::map<std::string, int> subj_idx;
    std::map<std::pair<std::string, int>, int> cell_idx;
    for (const auto& row : table.rows) {
        auto [it, inserted] = subj_idx.try_emplace(row.subject_id, static_cast<int>(subj_idx.size()));
        subj.group_of_row.push_back(it->second);
        auto key = std::make_pair(row.subject_id, stage_code(row.stage));
        auto [jt, ins2] = cell_idx.try_emplace(key, static_cast<int>(cell_idx.size()));
        cell.group_of_row.push_back(jt->second);
    }
    subj.n_groups = static_cast<int>(subj_idx.size());
    cell.n_groups = static_cast<int>(cell_idx.size());
    d.blocks.push_back(std::move(subj));
    d.blocks.push_back(std::move(cell));
    return d;
}

namespace {

struct CrossProducts {
    long n = 0;
    int p = 0;
    int q = 0;
    std::vector<int> offset, size;
    Eigen::MatrixXd xtx, ztz, ztx;
    Eigen::VectorXd xty, zty;
    double yty = 0.0;
};

CrossProducts make_cross_products(const MixedDesign& d) {
    CrossProducts cp;
    cp.n = d.y.size();
    cp.p = static_cast<int>(d.x.cols());
    for (const auto& b : d.blocks) {
        cp.offset.push_back(cp.q);
        cp.size.push_back(b.n_groups);
        cp.q += b.n_groups;
    }
    cp.xtx = d.x.transpose() * d.x;
    cp.xty = d.x.transpose() * d.y;
    cp.yty = d.y.squaredNorm();
    cp.ztz = Eigen::MatrixXd::Zero(cp.q, cp.q);
    cp.ztx = Eigen::MatrixXd::Zero(cp.q, cp.p);
    cp.zty = Eigen::VectorXd::Zero(cp.q);

    const size_t nb = d.blocks.size();
    std::vector<int> idx(nb);
    for (long i = 0; i < cp.n; ++i) {
        for (size_t b = 0; b < nb; ++b)
            idx[b] = cp.offset[b] + d.blocks[b].group_of_row[static_cast<size_t>(i)];
        for (size_t b1 = 0; b1 < nb; ++b1)
            for (size_t b2 = 0; b2 < nb; ++b2) cp.ztz(idx[b1], idx[b2]) += 1.0;
        for (size_t b = 0; b < nb; ++b) {
            cp.ztx.row(idx[b]) += d.x.row(i);
            cp.zty(idx[b]) += d.y(i);
        }
    }
    return cp;
}

struct EvalDetail {
    double loglik = -1e300;
    Eigen::VectorXd beta;
    Eigen::MatrixXd cov_unscaled; // (X' H^-1 X)^-1
    double sigma2 = 0.0;
    Eigen::LLT<Eigen::MatrixXd> chol_m;
    bool ok = false;
};

EvalDetail eval_reml(const CrossProducts& cp, const std::vector<double>& theta, bool want_detail) {
    EvalDetail out;
    Eigen::MatrixXd m = cp.ztz;
    for (size_t b = 0; b < theta.size(); ++b) {
        const double inv = 1.0 / theta[b];
        for (int j = cp.offset[b]; j < cp.offset[b] + cp.size[b]; ++j) m(j, j) += inv;
    }
    Eigen::LLT<Eigen::MatrixXd> llt_m(m);
    if (llt_m.info() != Eigen::Success) return out;

    const auto l = llt_m.matrixL();
    const Eigen::MatrixXd a = l.solve(cp.ztx);
    const Eigen::VectorXd av = l.solve(cp.zty);
    const Eigen::MatrixXd w = cp.xtx - a.transpose() * a;
    const Eigen::VectorXd wy = cp.xty - a.transpose() * av;
    const double yhy = cp.yty - av.squaredNorm();

    Eigen::LLT<Eigen::MatrixXd> llt_w(w);
    if (llt_w.info() != Eigen::Success) return out;
    const Eigen::VectorXd beta = llt_w.solve(wy);
    double ypy = yhy - wy.dot(beta);
    if (!(ypy > 0.0)) ypy = 1e-300;
    const double dfr = static_cast<double>(cp.n - cp.p);
    const double sigma2 = ypy / dfr;

    double logdet_m = 0.0;
    for (int j = 0; j < cp.q; ++j) logdet_m += 2.0 * std::log(llt_m.matrixLLT()(j, j));
    double logdet_w = 0.0;
    for (int j = 0; j < cp.p; ++j) logdet_w += 2.0 * std::log(llt_w.matrixLLT()(j, j));
    double logdet_h = logdet_m;
    for (size_t b = 0; b < theta.size(); ++b)
        logdet_h += static_cast<double>(cp.size[b]) * std::log(theta[b]);

    out.loglik = -0.5 * (dfr * (std::log(2.0 * std::numbers::pi * sigma2) + 1.0) + logdet_h + logdet_w);
    out.ok = true;
    if (want_detail) {
        out.beta = beta;
        out.sigma2 = sigma2;
        out.cov_unscaled = llt_w.solve(Eigen::MatrixXd::Identity(cp.p, cp.p));
        out.chol_m = std::move(llt_m);
    }
    return out;
}

} // namespace

double reml_loglik_at(const MixedDesign& design, const std::vector<double>& theta) {
    const CrossProducts cp = make_cross_products(design);
    return eval_reml(cp, theta, false).loglik;
}

ModelFit fit_reml(const MixedDesign& design, const RemlOptions& opts) {
    if (design.blocks.empty()) throw ValidationError("fit_reml: need at least one random-effect block");
    const CrossProducts cp = make_cross_products(design);
    if (cp.n <= cp.p) throw ValidationError("fit_reml: n_obs must exceed rank of X");

    const size_t d = design.blocks.size();
    ModelFit fit;

    auto clamp_log = [](double v) { return std::clamp(v, kLogThetaMin, kLogThetaMax); };
    auto objective = [&](const std::vector<double>& log_theta) {
        std::vector<double> theta(log_theta.size());
        for (size_t b = 0; b < d; ++b) theta[b] = std::exp(clamp_log(log_theta[b]));
        return eval_reml(cp, theta, false).loglik;
    };

    double best_f = -1e300;
    std::vector<double> best_x(d, 0.0);
    auto consider = [&](const std::vector<double>& x, double f) {
        if (f > best_f) {
            best_f = f;
            best_x = x;
            fit.objective_trace.push_back(f);
        }
    };

    // coarse grid
    const std::vector<double> grid = {-30.0, -8.0, -4.0, -2.0, 0.0, 2.0, 6.0};
    std::vector<size_t> gi(d, 0);
    while (true) {
        std::vector<double> x(d);
        for (size_t b = 0; b < d; ++b) x[b] = grid[gi[b]];
        consider(x, objective(x));
        size_t b = 0;
        while (b < d && ++gi[b] == grid.size()) gi[b++] = 0;
        if (b == d) break;
    }

    // Nelder-Mead (maximization) from the best grid point
    if (d >= 2) {
        const double alpha = 1.0, gamma = 2.0, rho = 0.5, sigma = 0.5;
        std::vector<std::vector<double>> pts(d + 1, best_x);
        for (size_t b = 0; b < d; ++b) pts[b + 1][b] = clamp_log(pts[b + 1][b] + 0.75);
        std::vector<double> fv(d + 1);
        for (size_t i = 0; i <= d; ++i) fv[i] = objective(pts[i]);

        for (int it = 0; it < opts.max_simplex_iters; ++it) {
            std::vector<size_t> ord(d + 1);
            for (size_t i = 0; i <= d; ++i) ord[i] = i;
            std::sort(ord.begin(), ord.end(), [&](size_t a, size_t b2) { return fv[a] > fv[b2]; });
            const size_t ib = ord[0], iw = ord[d], is = ord[d - 1];
            consider(pts[ib], fv[ib]);
            if (fv[ib] - fv[iw] < 1e-13 * (1.0 + std::fabs(fv[ib]))) break;

            std::vector<double> centroid(d, 0.0);
            for (size_t i = 0; i <= d; ++i) {
                if (i == iw) continue;
                for (size_t b = 0; b < d; ++b) centroid[b] += pts[i][b] / static_cast<double>(d);
            }
            auto blend = [&](double coef) {
                std::vector<double> x(d);
                for (size_t b = 0; b < d; ++b)
                    x[b] = clamp_log(centroid[b] + coef * (centroid[b] - pts[iw][b]));
                return x;
            };
            const auto xr = blend(alpha);
            const double fr = objective(xr);
            if (fr > fv[ib]) {
                const auto xe = blend(gamma);
                const double fe = objective(xe);
                if (fe > fr) {
                    pts[iw] = xe;
                    fv[iw] = fe;
                } else {
                    pts[iw] = xr;
                    fv[iw] = fr;
                }
            } else if (fr > fv[is]) {
                pts[iw] = xr;
                fv[iw] = fr;
            } else {
                const auto xc = blend(-rho);
                const double fc = objective(xc);
                if (fc > fv[iw]) {
                    pts[iw] = xc;
                    fv[iw] = fc;
                } else {
                    for (size_t i = 0; i <= d; ++i) {
                        if (i == ib) continue;
                        for (size_t b = 0; b < d; ++b)
                            pts[i][b] = pts[ib][b] + sigma * (pts[i][b] - pts[ib][b]);
                        fv[i] = objective(pts[i]);
                    }
                }
            }
        }
        for (size_t i = 0; i <= d; ++i) consider(pts[i], fv[i]);
    }

    // coordinate golden-section polish
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    bool converged = false;
    for (int sweep = 0; sweep < opts.max_polish_sweeps && !converged; ++sweep) {
        double max_move = 0.0;
        for (size_t b = 0; b < d; ++b) {
            double a = std::max(kLogThetaMin, best_x[b] - 1.0);
            double bb = std::min(kLogThetaMax, best_x[b] + 1.0);
            auto f1 = [&](double v) {
                std::vector<double> x = best_x;
                x[b] = v;
                return objective(x);
            };
            double c = bb - gr * (bb - a), e = a + gr * (bb - a);
            double fc = f1(c), fe = f1(e);
            while (bb - a > 1e-11) {
                if (fc > fe) {
                    bb = e;
                    e = c;
                    fe = fc;
                    c = bb - gr * (bb - a);
                    fc = f1(c);
                } else {
                    a = c;
                    c = e;
                    fc = fe;
                    e = a + gr * (bb - a);
                    fe = f1(e);
                }
            }
            const double xnew = 0.5 * (a + bb);
            const double fnew = f1(xnew);
            if (fnew > best_f) {
                max_move = std::max(max_move, std::fabs(xnew - best_x[b]));
                best_x[b] = xnew;
                best_f = fnew;
                fit.objective_trace.push_back(fnew);
            }
        }
        if (max_move < opts.rel_tol) converged = true;
    }

    std::vector<double> theta(d);
    for (size_t b = 0; b < d; ++b) theta[b] = std::exp(clamp_log(best_x[b]));
    EvalDetail detail = eval_reml(cp, theta, true);
    if (!detail.ok) throw Error("fit_reml: final evaluation failed");

    fit.beta = detail.beta;
    fit.cov_beta = detail.sigma2 * detail.cov_unscaled;
    fit.col_names = design.col_names;
    fit.theta = theta;
    fit.sigma2_resid = detail.sigma2;
    for (size_t b = 0; b < d; ++b) {
        fit.sigma2_blocks.push_back(theta[b] * detail.sigma2);
        fit.block_names.push_back(design.blocks[b].name);
    }
    fit.reml_loglik = detail.loglik;
    fit.n_obs = cp.n;
    fit.rank_x = cp.p;
    fit.df_resid = cp.n - cp.p;
    fit.converged = converged;

    // BLUPs: u = M^-1 Z'(y - X beta)
    const Eigen::VectorXd rz = cp.zty - cp.ztx * fit.beta;
    const Eigen::VectorXd u = detail.chol_m.solve(rz);
    for (size_t b = 0; b < d; ++b)
        fit.blups.emplace_back(u.segment(cp.offset[b], cp.size[b]));
    return fit;
}

EffectReport stage_slopes(const ModelFit& fit, const ModelSpec& spec) {
    EffectReport rep;
    rep.df = fit.df_resid;
    const double df = static_cast<double>(fit.df_resid);

    std::vector<eeg::Electrode> electrodes;
    if (spec.pooled) electrodes = {eeg::Electrode::C3, eeg::Electrode::C4};
    else electrodes = {spec.electrode};

    const std::array<SleepStage, 5> stages = {SleepStage::Wake, SleepStage::N1, SleepStage::N2,
                                              SleepStage::N3, SleepStage::Rem};
    for (SleepStage s : stages) {
        for (auto electrode : electrodes)
        for (size_t bi = 0; bi < eeg::kNumBands; ++bi) {
            const auto band = static_cast<eeg::Band>(bi);
            const int cb = fit.col_index(band_col(spec, electrode, band));
            if (cb < 0) continue;
            int ci = -1;
            double est, var;
            if (s == spec.reference) {
                est = fit.beta(cb);
                var = fit.cov_beta(cb, cb);
            } else {
                ci = fit.col_index(interaction_col(spec, electrode, s, band));
                if (ci < 0) continue;
                est = fit.beta(cb) + fit.beta(ci);
                var = fit.cov_beta(cb, cb) + fit.cov_beta(ci, ci) + 2.0 * fit.cov_beta(cb, ci);
            }
            EffectRow row;
            row.stage = s;
            row.electrode = electrode;
            row.band = band;
            row.estimate = est;
            row.std_error = std::sqrt(std::max(0.0, var));
            row.t_ratio = row.std_error > 0 ? est / row.std_error : 0.0;
            row.p = t_two_sided_p(row.t_ratio, df);
            rep.stage_slopes.push_back(row);

            if (s != spec.reference) {
                EffectRow ctr = row;
                ctr.estimate = fit.beta(ci);
                ctr.std_error = std::sqrt(std::max(0.0, fit.cov_beta(ci, ci)));
                ctr.t_ratio = ctr.std_error > 0 ? ctr.estimate / ctr.std_error : 0.0;
                ctr.p = t_two_sided_p(ctr.t_ratio, df);
                rep.wake_contrasts.push_back(ctr);
            }
        }
    }
    return rep;
}

std::string format_effects_csv(const std::vector<EffectRow>& rows) {
    std::string out = "stage,electrode,band,estimate,std_error,t_ratio,p\n";
    for (const auto& r : rows) {
        out += stage_name(r.stage);
        out += ',';
        out += eeg::electrode_name(r.electrode);
        out += ',';
        out += eeg::band_name(r.band);
        out += ',';
        out += csv::fmt(r.estimate);
        out += ',';
        out += csv::fmt(r.std_error);
        out += ',';
        out += csv::fmt(r.t_ratio);
        out += ',';
        out += csv::fmt(r.p);
        out += '\n';
    }
    return out;
}

Eigen::VectorXd conditional_residuals(const ModelFit& fit, const MixedDesign& design) {
    Eigen::VectorXd e = design.y - design.x * fit.beta;
    for (size_t b = 0; b < design.blocks.size(); ++b) {
        const auto& blk = design.blocks[b];
        for (long i = 0; i < e.size(); ++i)
            e(i) -= fit.blups[b](blk.group_of_row[static_cast<size_t>(i)]);
    }
    return e;
}

Diagnostics residual_diagnostics(const ModelFit& fit, const MixedDesign& design) {
    const Eigen::VectorXd e = conditional_residuals(fit, design);
    const Eigen::VectorXd fitted = design.y - e;
    const long n = e.size();

    Diagnostics diag;
    diag.resid_mean = e.mean();
    diag.resid_sd = std::sqrt((e.array() - diag.resid_mean).square().sum() / std::max<long>(1, n - 1));

    const double lo = e.minCoeff(), hi = e.maxCoeff();
    const int nbins = 41;
    diag.hist_counts.assign(nbins, 0);
    const double width = hi > lo ? (hi - lo) / nbins : 1.0;
    for (int b = 0; b <= nbins; ++b) diag.hist_edges.push_back(lo + b * width);
    for (long i = 0; i < n; ++i) {
        int b = static_cast<int>((e(i) - lo) / width);
        b = std::clamp(b, 0, nbins - 1);
        ++diag.hist_counts[static_cast<size_t>(b)];
    }

    std::vector<double> sorted(e.data(), e.data() + n);
    std::sort(sorted.begin(), sorted.end());
    const double sd = diag.resid_sd > 0 ? diag.resid_sd : 1.0;
    const long cap = 4000;
    const long qq_n = std::min(n, cap);
    double sxy = 0, sx = 0, sy = 0, sxx = 0, syy = 0;
    for (long j = 0; j < qq_n; ++j) {
        const long i = qq_n == n ? j : j * (n - 1) / (qq_n - 1);
        const double theo = normal_quantile((static_cast<double>(i) + 0.5) / static_cast<double>(n));
        const double samp = (sorted[static_cast<size_t>(i)] - diag.resid_mean) / sd;
        diag.qq.emplace_back(theo, samp);
        sx += theo;
        sy += samp;
        sxy += theo * samp;
        sxx += theo * theo;
        syy += samp * samp;
    }
    const double m = static_cast<double>(qq_n);
    const double cov = sxy - sx * sy / m;
    const double vx = sxx - sx * sx / m, vy = syy - sy * sy / m;
    diag.qq_correlation = (vx > 0 && vy > 0) ? cov / std::sqrt(vx * vy) : 0.0;

    const long fr_n = std::min(n, cap);
    for (long j = 0; j < fr_n; ++j) {
        const long i = fr_n == n ? j : j * (n - 1) / (fr_n - 1);
        diag.fitted_resid.emplace_back(fitted(i), e(i));
    }
    return diag;
}

} // namespace bhc::stats
