#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fpdpm/random.hpp"
#include "fpdpm/wavelet.hpp"

namespace fpdpm {

enum class Scenario { Global, Local, Spatial };
enum class NoiseModel { Independent, LowRank, HighRank };

const char* to_string(Scenario s);
const char* to_string(NoiseModel m);
Scenario scenario_from_string(const std::string& name);
NoiseModel noise_model_from_string(const std::string& name);

struct ScenarioConfig {
  Scenario scenario = Scenario::Global;
  int n = 300;
  int side = 32;
  NoiseModel noise = NoiseModel::Independent;
  std::uint64_t seed = 1;
  /// Slab standard deviation of the loadings; negative picks 0.5 (global,
  /// local) or 0.15 (spatial).
  double sigma_lambda = -1.0;
  WaveletFamily family = WaveletFamily::Haar;

  Grid grid() const { return Grid::square(side); }
  double slab_sd() const;
  /// Throws ConfigError naming the offending field.
  void validate() const;
};

struct GeneratedErrors {
  Eigen::MatrixXd eps;        // n x L
  std::vector<int> labels;    // 1..3
  std::vector<Eigen::MatrixXd> loadings;  // per covariance cluster, L x K
  std::vector<double> sigma2;
};

struct GeneratedDataset {
  Grid grid;
  Eigen::MatrixXd y;      // n x L
  Eigen::MatrixXd theta;  // n x L
  /// Truth labels per resolution level, level_labels[j][i] (1-based).
  std::vector<std::vector<int>> level_labels;
  /// Global truth: one label per distinct mean pattern (1-based).
  std::vector<int> global_labels;
  std::vector<int> cov_labels;
  int num_global_clusters = 0;
  double snr_db = 0.0;
};

/// Eight level-0 patterns with entries from 0.5 N(2, 1) + 0.5 N(-2, 1).
GeneratedDataset gen_scenario_global(const ScenarioConfig& config, Rng& rng);
/// 27 clusters at each of levels 0-2 with atoms Z * N(mu_j 1, I).
GeneratedDataset gen_scenario_local(const ScenarioConfig& config, Rng& rng);
/// Four discs of constant +-0.5 on [0,1]^2; 16 patterns.
GeneratedDataset gen_scenario_spatial(const ScenarioConfig& config, Rng& rng);
/// Dispatches on config.scenario with a generator seeded from config.seed.
GeneratedDataset generate(const ScenarioConfig& config);

GeneratedErrors gen_errors(const ScenarioConfig& config, int n, Rng& rng);

/// Mean over units of 10 log10(|theta_i|^2 / |eps_i|^2); zero-noise units are skipped.
double snr(const Eigen::MatrixXd& theta, const Eigen::MatrixXd& eps);

/// Disc membership of grid point (r, c): centers at ((c + 0.5)/N, (r + 0.5)/N).
bool in_disc(int r, int c, int side, int disc);

}  // namespace fpdpm
