#include "fpdpm/baselines.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "fpdpm/errors.hpp"
#include "fpdpm/kmeans.hpp"
#include "fpdpm/postproc.hpp"

namespace fpdpm {
namespace {

constexpr int kPcaRestarts = 20;

double elapsed(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

int count_clusters(const std::vector<int>& labels) {
  int k = 0;
  for (int l : labels) k = std::max(k, l);
  return k;
}

}  // namespace

SamplerOptions global_dpm_options() {
  SamplerOptions o;
  o.errors = ErrorModel::Independent;
  o.blocks = BlockScheme::Tied;
  o.tie_covariance = true;
  o.adapt_factors = false;
  return o;
}

SamplerOptions lpp_timing_options() {
  SamplerOptions o;
  o.errors = ErrorModel::Independent;
  o.blocks = BlockScheme::PerCoefficient;
  o.density = MembershipDensity::FullVector;
  o.adapt_factors = false;
  return o;
}

DpmFit fit_global_dpm(const FunctionalDataset& data, const Hyperparameters& hyper, const ChainConfig& config,
                      int k) {
  const auto start = std::chrono::steady_clock::now();
  DpmFit fit;
  fit.trace = run_chain(data, hyper, config, global_dpm_options());
  fit.result.method = "dpm";
  fit.result.membership_parameters = 1;
  fit.result.sweep_seconds = fit.trace.sweep_seconds;
  if (fit.trace.retained > 0 && !fit.trace.memberships.empty() && data.n() >= 2) {
    const DistanceMatrix dm = pairwise_distance_level(MembershipTensor::from_trace(fit.trace), 0);
    if (k > 0) {
      fit.result.labels = consolidate_clusters(dm, std::min(k, data.n()));
    } else if (data.n() >= 3) {
      fit.result.labels = consolidate_clusters_auto(dm, 2, std::min(data.n() - 1, 20));
    } else {
      fit.result.labels = consolidate_clusters(dm, 1);
    }
    fit.result.num_clusters = count_clusters(fit.result.labels);
  }
  fit.result.seconds = elapsed(start);
  return fit;
}

DpmFit fit_lpp_timing_surrogate(const FunctionalDataset& data, const Hyperparameters& hyper,
                                const ChainConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  DpmFit fit;
  fit.trace = run_chain(data, hyper, config, lpp_timing_options());
  fit.result.method = "lpp-timing";
  fit.result.membership_parameters = data.L();
  fit.result.sweep_seconds = fit.trace.sweep_seconds;
  fit.result.seconds = elapsed(start);
  return fit;
}

double mean_sweep_seconds(const FunctionalDataset& data, const Hyperparameters& hyper,
                          const SamplerOptions& options, int sweeps, int warm, std::uint64_t seed) {
  if (sweeps < 1) throw ParameterError("need at least one timed sweep");
  SamplerOptions o = options;
  if (o.warmup_sweeps < 0) o.warmup_sweeps = 0;
  GibbsSampler sampler(data, hyper, o, seed);
  sampler.initialize();
  int t = 1;
  for (; t <= warm; ++t) sampler.sweep(t);
  const auto start = std::chrono::steady_clock::now();
  for (int k = 0; k < sweeps; ++k, ++t) sampler.sweep(t);
  return elapsed(start) / sweeps;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ParameterError("slope needs two or more matching points");
  const double m = static_cast<double>(x.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (!(x[k] > 0.0) || !(y[k] > 0.0)) throw ParameterError("log-log slope needs positive values");
    const double lx = std::log(x[k]);
    const double ly = std::log(y[k]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double den = m * sxx - sx * sx;
  if (!(den > 0.0)) throw ParameterError("x values must differ");
  return (m * sxy - sx * sy) / den;
}

Eigen::MatrixXd PcaResult::reconstruct(int count) const {
  const Eigen::MatrixXd approx = scores.leftCols(count) * components.leftCols(count).transpose();
  return approx.rowwise() + mean.transpose();
}

PcaResult pca(const Eigen::MatrixXd& x, double variance_threshold) {
  if (x.rows() < 2) throw DegenerateInputError("PCA needs at least two units");
  if (!(variance_threshold > 0.0 && variance_threshold <= 1.0)) {
    throw ParameterError("variance threshold must lie in (0, 1]");
  }
  PcaResult out;
  out.mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd centered = x.rowwise() - out.mean.transpose();
  const Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd sv = svd.singularValues();
  const double total = sv.squaredNorm();
  if (!(total > 0.0)) throw DegenerateInputError("data have zero variance");
  const Eigen::Index r = sv.size();
  out.components = svd.matrixV();
  out.scores = svd.matrixU() * sv.asDiagonal();
  out.explained = sv.array().square() / total;
  double cum = 0.0;
  out.retained = static_cast<int>(r);
  for (Eigen::Index c = 0; c < r; ++c) {
    cum += out.explained[c];
    if (cum >= variance_threshold - 1e-12) {
      out.retained = static_cast<int>(c) + 1;
      break;
    }
  }
  return out;
}

BaselineResult fit_pca_kmeans(const Eigen::MatrixXd& x, double variance_threshold, int k_min, int k_max,
                              std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  const int n = static_cast<int>(x.rows());
  if (n < 3) throw ParameterError("PCA-KM needs at least three units");
  k_min = std::max(k_min, 2);
  k_max = std::min(k_max, n - 1);
  if (k_min > k_max) throw ParameterError("k range is empty within [2, n - 1]");
  const PcaResult p = pca(x, variance_threshold);
  const Eigen::MatrixXd z = p.scores.leftCols(p.retained);
  const DistanceMatrix dm = euclidean_distances(z);

  BaselineResult best;
  double best_s = -std::numeric_limits<double>::infinity();
  for (int k = k_min; k <= k_max; ++k) {
    const KMeansResult km = kmeans(z, k, kPcaRestarts, seed + static_cast<std::uint64_t>(k));
    std::vector<int> labels = km.labels;
    compact_labels(labels);
    for (int& l : labels) ++l;
    if (count_clusters(labels) < 2) continue;
    const double s = silhouette_width(dm, labels);
    if (s > best_s) {
      best_s = s;
      best.labels = std::move(labels);
    }
  }
  if (best.labels.empty()) throw DegenerateInputError("k-means produced a single cluster for every k");
  best.method = "pca-km";
  best.num_clusters = count_clusters(best.labels);
  best.components = p.retained;
  best.membership_parameters = 1;
  best.seconds = elapsed(start);
  return best;
}

}  // namespace fpdpm
