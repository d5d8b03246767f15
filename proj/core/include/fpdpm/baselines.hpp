#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fpdpm/model.hpp"
#include "fpdpm/sampler.hpp"

namespace fpdpm {

struct BaselineResult {
  std::string method;
  std::vector<int> labels;  // 1..num_clusters
  int num_clusters = 0;
  double seconds = 0.0;
  std::vector<double> sweep_seconds;
  /// Number of membership parameters per unit.
  int membership_parameters = 0;
  /// PCA-KM only: retained principal components.
  int components = 0;
};

/// One DP over the whole detail vector with independent errors whose
/// variance shares the coefficient label.
SamplerOptions global_dpm_options();
/// One DP per scalar coefficient, independent errors, full-length density per candidate.
SamplerOptions lpp_timing_options();

struct DpmFit {
  BaselineResult result;
  Trace trace;
};

/// Labels come from complete linkage on the co-clustering distance, cut at
/// `k` clusters (k <= 0 picks k by silhouette over [2, min(n - 1, 20)]).
DpmFit fit_global_dpm(const FunctionalDataset& data, const Hyperparameters& hyper, const ChainConfig& config,
                      int k = 0);

DpmFit fit_lpp_timing_surrogate(const FunctionalDataset& data, const Hyperparameters& hyper,
                                const ChainConfig& config);

/// Mean wall time of `sweeps` sweeps after `warm` untimed ones, starting
/// from the usual initialization.
double mean_sweep_seconds(const FunctionalDataset& data, const Hyperparameters& hyper,
                          const SamplerOptions& options, int sweeps, int warm, std::uint64_t seed);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

struct PcaResult {
  Eigen::VectorXd mean;          // column means, length L
  Eigen::MatrixXd components;    // L x r, orthonormal columns
  Eigen::MatrixXd scores;        // n x r
  Eigen::VectorXd explained;     // variance ratio per component, length r
  int retained = 0;              // minimal count reaching the threshold

  Eigen::MatrixXd reconstruct(int count) const;
};

/// PCA of the rows of x (columns centered, not scaled). Keeps every component.
PcaResult pca(const Eigen::MatrixXd& x, double variance_threshold = 0.95);

/// PCA scores, then k-means (k-means++, 20 restarts) for each k in [k_min, k_max],
/// keeping the k with the largest mean silhouette.
BaselineResult fit_pca_kmeans(const Eigen::MatrixXd& x, double variance_threshold, int k_min, int k_max,
                              std::uint64_t seed);

}  // namespace fpdpm
