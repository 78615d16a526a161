#include "bhc/cluster.hpp"

#include "bhc/error.hpp"
#include "bhc/dists.hpp"
#include "bhc/log.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>

namespace bhc::cluster {

namespace {

double lance_williams(Linkage method, double d_ki, double d_kj, double d_ij, double ni, double nj,
                      double nk) {
    switch (method) {
        case Linkage::Ward: // on squared distances
            return ((ni + nk) * d_ki + (nj + nk) * d_kj - nk * d_ij) / (ni + nj + nk);
        case Linkage::Average:
            return (ni * d_ki + nj * d_kj) / (ni + nj);
        case Linkage::Complete:
            return std::max(d_ki, d_kj);
    }
    return 0.0;
}

} // namespace

LinkageTree hierarchical_cluster(const Eigen::MatrixXd& matrix, Linkage method) {
    const int n = static_cast<int>(matrix.rows());
    if (n < 2) throw ValidationError("hierarchical_cluster: need at least 2 rows");

    // working distances: squared Euclidean for Ward, plain otherwise
    std::vector<double> dist(static_cast<size_t>(n) * n, 0.0);
    auto d = [&](int i, int j) -> double& { return dist[static_cast<size_t>(i) * n + j]; };
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double sq = (matrix.row(i) - matrix.row(j)).squaredNorm();
            const double v = method == Linkage::Ward ? sq : std::sqrt(sq);
            d(i, j) = v;
            d(j, i) = v;
        }
    }

    std::vector<bool> active(static_cast<size_t>(n), true);
    std::vector<int> size(static_cast<size_t>(n), 1);
    std::vector<int> node_id(static_cast<size_t>(n));
    std::iota(node_id.begin(), node_id.end(), 0);

    // per-slot nearest active neighbor cache
    std::vector<int> nn_idx(static_cast<size_t>(n), -1);
    std::vector<double> nn_dist(static_cast<size_t>(n), 0.0);
    auto recompute_nn = [&](int i) {
        nn_idx[static_cast<size_t>(i)] = -1;
        double best = std::numeric_limits<double>::infinity();
        for (int j = 0; j < n; ++j) {
            if (j == i || !active[static_cast<size_t>(j)]) continue;
            const double v = d(i, j);
            const bool better =
                v < best ||
                (v == best && nn_idx[static_cast<size_t>(i)] >= 0 &&
                 std::min(node_id[static_cast<size_t>(j)], node_id[static_cast<size_t>(i)]) <
                     std::min(node_id[static_cast<size_t>(nn_idx[static_cast<size_t>(i)])],
                              node_id[static_cast<size_t>(i)]));
            if (better) {
                best = v;
                nn_idx[static_cast<size_t>(i)] = j;
            }
        }
        nn_dist[static_cast<size_t>(i)] = best;
    };
    for (int i = 0; i < n; ++i) recompute_nn(i);

    LinkageTree tree;
    tree.n_points = n;
    tree.method = method;

    for (int step = 0; step < n - 1; ++step) {
        // global minimum over the nn cache; ties break on smallest node ids
        int bi = -1;
        for (int i = 0; i < n; ++i) {
            if (!active[static_cast<size_t>(i)] || nn_idx[static_cast<size_t>(i)] < 0) continue;
            if (bi < 0 || nn_dist[static_cast<size_t>(i)] < nn_dist[static_cast<size_t>(bi)]) {
                bi = i;
            } else if (nn_dist[static_cast<size_t>(i)] == nn_dist[static_cast<size_t>(bi)]) {
                auto key = [&](int s) {
                    const int a = node_id[static_cast<size_t>(s)];
                    const int b = node_id[static_cast<size_t>(nn_idx[static_cast<size_t>(s)])];
                    return std::make_pair(std::min(a, b), std::max(a, b));
                };
                if (key(i) < key(bi)) bi = i;
            }
        }
        const int bj = nn_idx[static_cast<size_t>(bi)];
        const double best = nn_dist[static_cast<size_t>(bi)];

        const int ida = std::min(node_id[static_cast<size_t>(bi)], node_id[static_cast<size_t>(bj)]);
        const int idb = std::max(node_id[static_cast<size_t>(bi)], node_id[static_cast<size_t>(bj)]);
        Merge m;
        m.node_a = ida;
        m.node_b = idb;
        m.height = method == Linkage::Ward ? std::sqrt(std::max(0.0, 2.0 * best)) : best;
        m.size = size[static_cast<size_t>(bi)] + size[static_cast<size_t>(bj)];
        tree.merges.push_back(m);

        // fold bj into bi
        const double ni = size[static_cast<size_t>(bi)], nj = size[static_cast<size_t>(bj)];
        for (int k = 0; k < n; ++k) {
            if (!active[static_cast<size_t>(k)] || k == bi || k == bj) continue;
            const double upd =
                lance_williams(method, d(k, bi), d(k, bj), best, ni, nj, size[static_cast<size_t>(k)]);
            d(k, bi) = upd;
            d(bi, k) = upd;
        }
        active[static_cast<size_t>(bj)] = false;
        size[static_cast<size_t>(bi)] = m.size;
        node_id[static_cast<size_t>(bi)] = n + step;

        recompute_nn(bi);
        for (int k = 0; k < n; ++k) {
            if (!active[static_cast<size_t>(k)] || k == bi) continue;
            if (nn_idx[static_cast<size_t>(k)] == bi || nn_idx[static_cast<size_t>(k)] == bj)
                recompute_nn(k);
            else if (d(k, bi) < nn_dist[static_cast<size_t>(k)]) {
                nn_idx[static_cast<size_t>(k)] = bi;
                nn_dist[static_cast<size_t>(k)] = d(k, bi);
            }
        }
    }
    return tree;
}

std::vector<int> cut_tree(const LinkageTree& tree, int k) {
    const int n = tree.n_points;
    if (k < 1 || k > n) throw ValidationError(log::cat("cut_tree: k must be in [1, ", n, "]"));

    std::vector<int> parent(static_cast<size_t>(2 * n - 1));
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int v) {
        while (parent[static_cast<size_t>(v)] != v) {
            parent[static_cast<size_t>(v)] = parent[static_cast<size_t>(parent[static_cast<size_t>(v)])];
            v = parent[static_cast<size_t>(v)];
        }
        return v;
    };
    for (int s = 0; s < n - k; ++s) {
        const auto& m = tree.merges[static_cast<size_t>(s)];
        parent[static_cast<size_t>(find(m.node_a))] = n + s;
        parent[static_cast<size_t>(find(m.node_b))] = n + s;
    }

    std::map<int, int> root_to_label; // ordered by smallest leaf index
    std::vector<int> labels(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        const int r = find(i);
        auto [it, inserted] = root_to_label.try_emplace(r, static_cast<int>(root_to_label.size()));
        labels[static_cast<size_t>(i)] = it->second;
    }
    return labels;
}

int suggest_k(const LinkageTree& tree, int k_max) {
    const int n = tree.n_points;
    const auto& h = tree.merges;
    int best_k = 2;
    double best_ratio = -1.0;
    for (int k = 2; k <= std::min(k_max, n - 1); ++k) {
        const double removed = h[static_cast<size_t>(n - k)].height;
        const double kept = h[static_cast<size_t>(n - k - 1)].height;
        const double ratio = removed / std::max(kept, 1e-300);
        if (ratio > best_ratio) {
            best_ratio = ratio;
            best_k = k;
        }
    }
    return best_k;
}

PcaResult pca_project(const Eigen::MatrixXd& matrix, int dims) {
    const long n = matrix.rows(), p = matrix.cols();
    if (n < 2) throw ValidationError("pca_project: need at least 2 rows");
    Eigen::MatrixXd centered = matrix.rowwise() - matrix.colwise().mean();

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const double tol = std::max(n, p) * 1e-12 * sv(0);
    int rank = 0;
    for (long i = 0; i < sv.size(); ++i)
        if (sv(i) > tol) ++rank;
    if (dims > rank)
        throw ValidationError(log::cat("pca_project: requested ", dims, " dims but rank is ", rank));

    Eigen::MatrixXd v = svd.matrixV().leftCols(dims);
    for (int c = 0; c < dims; ++c) {
        long imax = 0;
        v.col(c).cwiseAbs().maxCoeff(&imax);
        if (v(imax, c) < 0) v.col(c) = -v.col(c);
    }

    PcaResult out;
    out.coords = centered * v;
    out.components = v;
    out.column_means = matrix.colwise().mean();
    double total = sv.array().square().sum();
    for (int c = 0; c < dims; ++c)
        out.explained_ratio.push_back(sv(c) * sv(c) / total);
    return out;
}

Eigen::MatrixXd cluster_means(const std::vector<int>& labels, const Eigen::MatrixXd& matrix) {
    if (static_cast<long>(labels.size()) != matrix.rows())
        throw ValidationError("cluster_means: labels not aligned with rows");
    const int k = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, matrix.cols());
    std::vector<long> counts(static_cast<size_t>(k), 0);
    for (long i = 0; i < matrix.rows(); ++i) {
        sums.row(labels[static_cast<size_t>(i)]) += matrix.row(i);
        ++counts[static_cast<size_t>(labels[static_cast<size_t>(i)])];
    }
    for (int c = 0; c < k; ++c) {
        if (counts[static_cast<size_t>(c)] == 0)
            throw ValidationError(log::cat("cluster_means: cluster ", c, " is empty"));
        sums.row(c) /= static_cast<double>(counts[static_cast<size_t>(c)]);
    }
    return sums;
}

std::vector<TukeyComparison> tukey_hsd(const std::vector<int>& labels, const Eigen::VectorXd& feature) {
    if (static_cast<long>(labels.size()) != feature.size())
        throw ValidationError("tukey_hsd: labels not aligned with feature column");

    const int k_all = *std::max_element(labels.begin(), labels.end()) + 1;
    std::vector<long> counts(static_cast<size_t>(k_all), 0);
    std::vector<double> means(static_cast<size_t>(k_all), 0.0);
    for (long i = 0; i < feature.size(); ++i) {
        ++counts[static_cast<size_t>(labels[static_cast<size_t>(i)])];
        means[static_cast<size_t>(labels[static_cast<size_t>(i)])] += feature(i);
    }
    std::vector<int> used;
    for (int c = 0; c < k_all; ++c) {
        if (counts[static_cast<size_t>(c)] >= 2) {
            means[static_cast<size_t>(c)] /= static_cast<double>(counts[static_cast<size_t>(c)]);
            used.push_back(c);
        } else {
            log::warn(log::cat("tukey_hsd: cluster ", c, " has fewer than 2 members, excluded"));
        }
    }
    const int k = static_cast<int>(used.size());
    if (k < 2) throw ValidationError("tukey_hsd: need at least 2 clusters of size >= 2");

    double sse = 0.0;
    long n_used = 0;
    for (long i = 0; i < feature.size(); ++i) {
        const int c = labels[static_cast<size_t>(i)];
        if (counts[static_cast<size_t>(c)] < 2) continue;
        const double r = feature(i) - means[static_cast<size_t>(c)];
        sse += r * r;
        ++n_used;
    }
    const long df = n_used - k;
    const double mse = sse / static_cast<double>(df);

    std::vector<TukeyComparison> out;
    for (int a = 0; a < k; ++a) {
        for (int b = a + 1; b < k; ++b) {
            const int ca = used[static_cast<size_t>(a)], cb = used[static_cast<size_t>(b)];
            TukeyComparison cmp;
            cmp.cluster_i = ca;
            cmp.cluster_j = cb;
            cmp.diff = means[static_cast<size_t>(ca)] - means[static_cast<size_t>(cb)];
            cmp.se = std::sqrt(mse / 2.0 * (1.0 / counts[static_cast<size_t>(ca)] +
                                            1.0 / counts[static_cast<size_t>(cb)]));
            if (cmp.se > 0.0) {
                cmp.q = std::fabs(cmp.diff) / cmp.se;
                cmp.p = stats::studentized_range_p(cmp.q, k, static_cast<double>(df));
            } else {
                cmp.q = cmp.diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
                cmp.p = cmp.diff == 0.0 ? 1.0 : 0.0;
            }
            out.push_back(cmp);
        }
    }
    return out;
}

std::vector<std::vector<DiscriminativeFeature>> discriminative_features(
    const std::vector<int>& labels, const Eigen::MatrixXd& matrix, int top_n) {
    const int k = *std::max_element(labels.begin(), labels.end()) + 1;
    const long p = matrix.cols();

    const Eigen::RowVectorXd grand = matrix.colwise().mean();
    Eigen::RowVectorXd sd(p);
    for (long f = 0; f < p; ++f) {
        const double var =
            (matrix.col(f).array() - grand(f)).square().sum() / std::max<long>(1, matrix.rows() - 1);
        sd(f) = std::sqrt(var);
    }
    const Eigen::MatrixXd means = cluster_means(labels, matrix);

    std::vector<std::vector<DiscriminativeFeature>> per_cluster(static_cast<size_t>(k));
    std::vector<std::vector<double>> max_p(static_cast<size_t>(k),
                                           std::vector<double>(static_cast<size_t>(p), 1.0));
    for (long f = 0; f < p; ++f) {
        const auto cmps = tukey_hsd(labels, matrix.col(f));
        std::vector<double> worst(static_cast<size_t>(k), 0.0);
        std::vector<bool> seen(static_cast<size_t>(k), false);
        for (const auto& c : cmps) {
            worst[static_cast<size_t>(c.cluster_i)] = std::max(worst[static_cast<size_t>(c.cluster_i)], c.p);
            worst[static_cast<size_t>(c.cluster_j)] = std::max(worst[static_cast<size_t>(c.cluster_j)], c.p);
            seen[static_cast<size_t>(c.cluster_i)] = seen[static_cast<size_t>(c.cluster_j)] = true;
        }
        for (int c = 0; c < k; ++c)
            max_p[static_cast<size_t>(c)][static_cast<size_t>(f)] =
                seen[static_cast<size_t>(c)] ? worst[static_cast<size_t>(c)] : 1.0;
    }

    for (int c = 0; c < k; ++c) {
        std::vector<DiscriminativeFeature> feats;
        for (long f = 0; f < p; ++f) {
            DiscriminativeFeature df;
            df.feature = static_cast<int>(f);
            df.above_grand_mean = means(c, f) > grand(f);
            df.max_pair_p = max_p[static_cast<size_t>(c)][static_cast<size_t>(f)];
            df.std_diff = sd(f) > 0 ? std::fabs(means(c, f) - grand(f)) / sd(f) : 0.0;
            feats.push_back(df);
        }
        std::sort(feats.begin(), feats.end(), [](const auto& a, const auto& b) {
            if (a.max_pair_p != b.max_pair_p) return a.max_pair_p < b.max_pair_p;
            if (a.std_diff != b.std_diff) return a.std_diff > b.std_diff;
            return a.feature < b.feature;
        });
        if (static_cast<int>(feats.size()) > top_n) feats.resize(static_cast<size_t>(top_n));
        per_cluster[static_cast<size_t>(c)] = std::move(feats);
    }
    return per_cluster;
}

std::vector<std::pair<std::string, std::vector<double>>> subject_distribution(
    const std::vector<int>& labels, const std::vector<std::string>& subject_ids) {
    if (labels.size() != subject_ids.size())
        throw ValidationError("subject_distribution: misaligned inputs");
    const int k = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;

    std::vector<std::pair<std::string, std::vector<double>>> out;
    std::map<std::string, size_t> index;
    for (size_t i = 0; i < labels.size(); ++i) {
        auto [it, inserted] = index.try_emplace(subject_ids[i], out.size());
        if (inserted) out.emplace_back(subject_ids[i], std::vector<double>(static_cast<size_t>(k), 0.0));
        out[it->second].second[static_cast<size_t>(labels[i])] += 1.0;
    }
    for (auto& [subj, counts] : out) {
        const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
        if (total > 0)
            for (auto& v : counts) v /= total;
    }
    return out;
}

StandardizedMatrix standardize_columns(const Eigen::MatrixXd& matrix) {
    StandardizedMatrix out;
    const long n = matrix.rows(), p = matrix.cols();
    std::vector<long> kept;
    for (long f = 0; f < p; ++f) {
        const double mean = matrix.col(f).mean();
        const double var = (matrix.col(f).array() - mean).square().sum() / std::max<long>(1, n - 1);
        const double sd = std::sqrt(var);
        if (sd > 0.0) {
            kept.push_back(f);
            out.mean.push_back(mean);
            out.sd.push_back(sd);
        } else {
            log::warn(log::cat("standardize_columns: dropping zero-variance column ", f));
        }
    }
    out.z.resize(n, static_cast<long>(kept.size()));
    for (size_t j = 0; j < kept.size(); ++j) {
        out.z.col(static_cast<long>(j)) = (matrix.col(kept[j]).array() - out.mean[j]) / out.sd[j];
        out.kept_cols.push_back(static_cast<int>(kept[j]));
    }
    return out;
}

ClusterResult analyze_stage(const feat::FeatureTable& table, SleepStage stage, int k, Linkage method) {
    ClusterResult res;
    res.stage = stage;

    std::vector<const feat::FeatureRow*> rows;
    for (const auto& r : table.rows)
        if (r.stage == stage) rows.push_back(&r);
    if (rows.size() < 2)
        throw ValidationError(log::cat("analyze_stage: fewer than 2 epochs in stage ",
                                       stage_name(stage)));

    const long n = static_cast<long>(rows.size());
    res.features.resize(n, 11);
    for (size_t b = 0; b < eeg::kNumBands; ++b) {
        res.feature_names.push_back(std::string("c3_") + eeg::band_name(static_cast<eeg::Band>(b)));
    }
    for (size_t b = 0; b < eeg::kNumBands; ++b) {
        res.feature_names.push_back(std::string("c4_") + eeg::band_name(static_cast<eeg::Band>(b)));
    }
    res.feature_names.push_back("hf");
    for (long i = 0; i < n; ++i) {
        const auto& r = *rows[static_cast<size_t>(i)];
        for (size_t b = 0; b < eeg::kNumBands; ++b) {
            res.features(i, static_cast<long>(b)) = r.c3[b];
            res.features(i, static_cast<long>(5 + b)) = r.c4[b];
        }
        res.features(i, 10) = r.hf_abs;
        res.subject_ids.push_back(r.subject_id);
        res.epoch_indices.push_back(r.epoch_index);
    }

    const StandardizedMatrix std_mat = standardize_columns(res.features);
    res.tree = hierarchical_cluster(std_mat.z, method);
    res.k = std::min<int>(k, static_cast<int>(n));
    res.labels = cut_tree(res.tree, res.k);
    res.means = cluster_means(res.labels, res.features);
    res.pca = pca_project(std_mat.z, 2);
    for (long f = 0; f < res.features.cols(); ++f)
        res.tukey.push_back(tukey_hsd(res.labels, res.features.col(f)));
    res.top_features = discriminative_features(res.labels, res.features, 5);
    res.distribution = subject_distribution(res.labels, res.subject_ids);
    return res;
}

} // namespace bhc::cluster
