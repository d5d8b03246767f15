#pragma once

#include <vector>

#include <Eigen/Dense>

#include "fpdpm/model.hpp"

namespace fpdpm {

/// Retained memberships, R samples x n units x (J + 1) levels, labels >= 1.
struct MembershipTensor {
  int R = 0;
  int n = 0;
  int levels = 0;
  std::vector<int> labels;  // index (r * n + i) * levels + j

  int at(int r, int i, int j) const {
    return labels[(static_cast<std::size_t>(r) * n + i) * levels + j];
  }
  static MembershipTensor from_trace(const Trace& trace);
  /// Concatenates the samples of several traces of equal shape.
  static MembershipTensor from_traces(const std::vector<Trace>& traces);
};

/// Symmetric n x n matrix of averaged weighted label disagreements.
struct DistanceMatrix {
  Eigen::MatrixXd d;

  int n() const { return static_cast<int>(d.rows()); }
  double operator()(int i, int k) const { return d(i, k); }
};

/// w_0 = 2; w_j = 1/j when 2^j < n, else 1/(2j).
std::vector<double> level_weights(int levels, int n_units);

DistanceMatrix pairwise_distance(const MembershipTensor& mt, int n_units_for_weights);
/// Co-clustering distance of one level alone.
DistanceMatrix pairwise_distance_level(const MembershipTensor& mt, int level);

/// One agglomeration. Clusters 0..n-1 are singletons; merge t creates n + t.
struct Merge {
  int a = 0;
  int b = 0;
  double height = 0.0;
  int size = 0;
};

/// Complete linkage; among equal distances the pair with the smallest
/// (lowest member, lowest member) indices merges first.
std::vector<Merge> complete_linkage(const DistanceMatrix& dm);
/// Labels 1..k from the first n - k merges, numbered by first appearance.
std::vector<int> cut_tree(const std::vector<Merge>& merges, int n, int k);

std::vector<int> consolidate_clusters(const DistanceMatrix& dm, int k);
/// Chooses k in [k_min, k_max] by the average silhouette width (first maximum wins).
std::vector<int> consolidate_clusters_auto(const DistanceMatrix& dm, int k_min, int k_max);

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b);

struct MeanEstimate {
  Eigen::MatrixXd theta_hat;  // n x L
  double mse = 0.0;
};

/// theta_hat = average of the retained means; mse = sum (theta_hat - truth)^2 / (nL).
MeanEstimate posterior_mean_mse(const Trace& trace, const Eigen::MatrixXd& truth);

/// Potential scale reduction factor of equal-length chains.
double gelman_rubin(const std::vector<std::vector<double>>& chains);
/// Gelman-Rubin statistic for every theta entry, n x L. Traces need recorded means.
Eigen::MatrixXd gelman_rubin_means(const std::vector<Trace>& traces);

/// Per-unit silhouette values; singleton clusters score 0.
std::vector<double> silhouette_values(const DistanceMatrix& dm, const std::vector<int>& labels);
double silhouette_width(const DistanceMatrix& dm, const std::vector<int>& labels);

/// Euclidean distance matrix between the rows of `points`.
DistanceMatrix euclidean_distances(const Eigen::MatrixXd& points);

}  // namespace fpdpm
