#pragma once

#include "bhc/features.hpp"
#include "bhc/types.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace bhc::cluster {

enum class Linkage { Ward, Average, Complete };

struct Merge {
    int node_a = 0; // node ids: 0..n-1 leaves, n+k for the k-th merge
    int node_b = 0;
    double height = 0.0;
    int size = 0;
};

struct LinkageTree {
    int n_points = 0;
    Linkage method = Linkage::Ward;
    std::vector<Merge> merges; // n-1 entries, non-decreasing heights for Ward
};

/// Agglomerative clustering over rows of `matrix` (Euclidean metric).
/// Each step merges the globally closest pair under the Lance-Williams
/// update; ties break on the smallest (node_a, node_b). Ward heights
/// follow the sqrt(2 * merge cost) convention, so two singletons merge
/// at their Euclidean distance.
LinkageTree hierarchical_cluster(const Eigen::MatrixXd& matrix, Linkage method = Linkage::Ward);

/// Labels for a k-cluster cut (removes the k-1 tallest merges). Clusters
/// are numbered by smallest contained row index.
std::vector<int> cut_tree(const LinkageTree& tree, int k);

/// Suggested k in [2, k_max]: the cut whose removed/kept height ratio is
/// largest (dendrogram gap heuristic).
int suggest_k(const LinkageTree& tree, int k_max);

struct PcaResult {
    Eigen::MatrixXd coords;              // n x dims (scores)
    Eigen::MatrixXd components;          // p x dims (orthonormal loadings)
    Eigen::RowVectorXd column_means;     // for reconstruction
    std::vector<double> explained_ratio; // per component
};

/// Column-centered SVD projection. Components are sign-fixed so the
/// largest-magnitude loading is positive. dims > rank is an error.
PcaResult pca_project(const Eigen::MatrixXd& matrix, int dims = 2);

/// Arithmetic feature means per cluster, in the units of `matrix`.
Eigen::MatrixXd cluster_means(const std::vector<int>& labels, const Eigen::MatrixXd& matrix);

struct TukeyComparison {
    int cluster_i = 0;
    int cluster_j = 0;
    double diff = 0.0; // mean_i - mean_j
    double se = 0.0;   // Tukey-Kramer standard error
    double q = 0.0;
    double p = 1.0;
};

/// All-pairs Tukey HSD over one feature column; clusters of size < 2 are
/// excluded with a warning. df = n - k on the pooled within-cluster MSE.
std::vector<TukeyComparison> tukey_hsd(const std::vector<int>& labels,
                                       const Eigen::VectorXd& feature);

struct DiscriminativeFeature {
    int feature = 0;
    bool above_grand_mean = false;
    double max_pair_p = 1.0;
    double std_diff = 0.0; // |cluster mean - grand mean| / column sd
};

/// Per cluster: features ranked by smallest max-pairwise Tukey p, then by
/// largest standardized deviation from the grand mean.
std::vector<std::vector<DiscriminativeFeature>> discriminative_features(
    const std::vector<int>& labels, const Eigen::MatrixXd& matrix, int top_n = 5);

/// Row-normalized cluster counts per subject; each row sums to 1.
std::vector<std::pair<std::string, std::vector<double>>> subject_distribution(
    const std::vector<int>& labels, const std::vector<std::string>& subject_ids);

struct StandardizedMatrix {
    Eigen::MatrixXd z;
    std::vector<double> mean, sd;
    std::vector<int> kept_cols; // columns with positive sd
};

StandardizedMatrix standardize_columns(const Eigen::MatrixXd& matrix);

/// Full per-stage analysis over the feature table: 10 EEG relative powers
/// + absolute HF, z-scored for clustering/PCA, means in original units.
struct ClusterResult {
    SleepStage stage = SleepStage::Unscored;
    int k = 0;
    std::vector<int> labels;
    std::vector<std::string> subject_ids;  // per row
    std::vector<long> epoch_indices;       // per row
    LinkageTree tree;
    Eigen::MatrixXd features;              // original units, n x 11
    std::vector<std::string> feature_names;
    Eigen::MatrixXd means;                 // k x 11
    PcaResult pca;
    std::vector<std::vector<TukeyComparison>> tukey; // per feature
    std::vector<std::vector<DiscriminativeFeature>> top_features; // per cluster
    std::vector<std::pair<std::string, std::vector<double>>> distribution;
};

ClusterResult analyze_stage(const feat::FeatureTable& table, SleepStage stage, int k,
                            Linkage method = Linkage::Ward);

} // namespace bhc::cluster
