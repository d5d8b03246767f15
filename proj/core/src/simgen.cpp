#include "fpdpm/simgen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iostream>
#include <limits>
#include <map>
#include <numeric>

#include "fpdpm/errors.hpp"

namespace fpdpm {
namespace {

constexpr std::array<std::array<double, 2>, 4> kDiscCenters = {{{0.25, 0.25}, {0.75, 0.25}, {0.25, 0.75}, {0.75, 0.75}}};
constexpr double kDiscRadius2 = 0.025;
constexpr std::array<double, 3> kNoiseVariances = {0.001, 0.005, 0.01};

/// Numbers distinct rows of `keys` 1, 2, ... by first appearance.
template <typename Key>
std::vector<int> number_patterns(const std::vector<Key>& keys, int& count) {
  std::map<Key, int> seen;
  std::vector<int> out(keys.size());
  for (std::size_t i = 0; i < keys.size(); ++i) {
    auto it = seen.find(keys[i]);
    if (it == seen.end()) it = seen.emplace(keys[i], static_cast<int>(seen.size()) + 1).first;
    out[i] = it->second;
  }
  count = static_cast<int>(seen.size());
  return out;
}

void add_errors(GeneratedDataset& ds, const ScenarioConfig& config, Rng& rng) {
  GeneratedErrors e = gen_errors(config, static_cast<int>(ds.theta.rows()), rng);
  ds.y = ds.theta + e.eps;
  ds.cov_labels = e.labels;
  ds.snr_db = snr(ds.theta, e.eps);
}

}  // namespace

const char* to_string(Scenario s) {
  switch (s) {
    case Scenario::Global: return "global";
    case Scenario::Local: return "local";
    case Scenario::Spatial: return "spatial";
  }
  return "?";
}

const char* to_string(NoiseModel m) {
  switch (m) {
    case NoiseModel::Independent: return "independent";
    case NoiseModel::LowRank: return "lowrank";
    case NoiseModel::HighRank: return "highrank";
  }
  return "?";
}

Scenario scenario_from_string(const std::string& name) {
  if (name == "global") return Scenario::Global;
  if (name == "local") return Scenario::Local;
  if (name == "spatial") return Scenario::Spatial;
  throw ConfigError("scenario: unknown value '" + name + "' (expected global, local or spatial)");
}

NoiseModel noise_model_from_string(const std::string& name) {
  if (name == "independent") return NoiseModel::Independent;
  if (name == "lowrank") return NoiseModel::LowRank;
  if (name == "highrank") return NoiseModel::HighRank;
  throw ConfigError("errors: unknown value '" + name + "' (expected independent, lowrank or highrank)");
}

double ScenarioConfig::slab_sd() const {
  if (sigma_lambda > 0.0) return sigma_lambda;
  return scenario == Scenario::Spatial ? 0.15 : 0.5;
}

void ScenarioConfig::validate() const {
  if (n < 2) throw ConfigError("n must be at least 2");
  if (side < 2 || !is_power_of_two(side)) throw ConfigError("grid side must be a power of two >= 2");
  if (scenario == Scenario::Local && Grid::square(side).num_levels() < 3) {
    throw ConfigError("grid: the local scenario needs at least three resolution levels (side >= 8)");
  }
}

bool in_disc(int r, int c, int side, int disc) {
  const double x = (c + 0.5) / side;
  const double y = (r + 0.5) / side;
  const double dx = x - kDiscCenters[disc][0];
  const double dy = y - kDiscCenters[disc][1];
  return dx * dx + dy * dy < kDiscRadius2;
}

GeneratedDataset gen_scenario_global(const ScenarioConfig& config, Rng& rng) {
  config.validate();
  const Grid grid = config.grid();
  const int m0 = grid.level_size(0);
  constexpr int kClusters = 8;
  std::vector<Eigen::VectorXd> atoms(kClusters, Eigen::VectorXd(m0));
  for (auto& a : atoms) {
    for (int k = 0; k < m0; ++k) a[k] = rng.normal(rng.bernoulli(0.5) ? 2.0 : -2.0, 1.0);
  }
  GeneratedDataset ds;
  ds.grid = grid;
  ds.theta.resize(config.n, grid.size());
  ds.level_labels.assign(1, std::vector<int>(config.n));
  ds.global_labels.resize(config.n);
  std::vector<Eigen::VectorXd> images(kClusters);
  for (int h = 0; h < kClusters; ++h) {
    images[h] = synthesize_level(0, atoms[h], grid, config.family).reshaped();
  }
  for (int i = 0; i < config.n; ++i) {
    const int h = rng.uniform_int(0, kClusters - 1);
    ds.level_labels[0][i] = h + 1;
    ds.global_labels[i] = h + 1;
    ds.theta.row(i) = images[h].transpose();
  }
  ds.num_global_clusters = kClusters;
  add_errors(ds, config, rng);
  return ds;
}

GeneratedDataset gen_scenario_local(const ScenarioConfig& config, Rng& rng) {
  config.validate();
  const Grid grid = config.grid();
  constexpr int kClusters = 27;
  constexpr std::array<double, 3> mu = {2.0, 0.5, 0.15};
  constexpr std::array<double, 3> p_zero = {1.0 / 3.0, 0.15, 0.5};
  GeneratedDataset ds;
  ds.grid = grid;
  ds.level_labels.assign(3, std::vector<int>(config.n));
  std::vector<WaveletCoefficients> units(config.n, WaveletCoefficients::zeros(grid, config.family));
  for (int j = 0; j < 3; ++j) {
    const int m = grid.level_size(j);
    std::vector<Eigen::VectorXd> atoms(kClusters);
    std::vector<int> canonical(kClusters);
    int first_zero = -1;
    for (int h = 0; h < kClusters; ++h) {
      const double u = rng.uniform();
      const double z = u < p_zero[j] ? 0.0 : (u < p_zero[j] + 0.5 * (1.0 - p_zero[j]) ? -1.0 : 1.0);
      Eigen::VectorXd star(m);
      for (int k = 0; k < m; ++k) star[k] = rng.normal(mu[j], 1.0);
      atoms[h] = z * star;
      canonical[h] = h;
      if (z == 0.0) {
        if (first_zero < 0) first_zero = h;
        canonical[h] = first_zero;
      }
    }
    for (int i = 0; i < config.n; ++i) {
      const int h = rng.uniform_int(0, kClusters - 1);
      ds.level_labels[j][i] = canonical[h] + 1;
      units[i].levels[j] = atoms[h];
    }
  }
  ds.theta.resize(config.n, grid.size());
  std::vector<std::array<int, 3>> keys(config.n);
  for (int i = 0; i < config.n; ++i) {
    ds.theta.row(i) = inverse_dwt(units[i]).reshaped().transpose();
    keys[i] = {ds.level_labels[0][i], ds.level_labels[1][i], ds.level_labels[2][i]};
  }
  ds.global_labels = number_patterns(keys, ds.num_global_clusters);
  add_errors(ds, config, rng);
  return ds;
}

GeneratedDataset gen_scenario_spatial(const ScenarioConfig& config, Rng& rng) {
  config.validate();
  const Grid grid = config.grid();
  const int N = config.side;
  GeneratedDataset ds;
  ds.grid = grid;
  ds.theta = Eigen::MatrixXd::Zero(config.n, grid.size());
  ds.global_labels.resize(config.n);
  for (int i = 0; i < config.n; ++i) {
    int pattern = 0;
    std::array<double, 4> value{};
    for (int m = 0; m < 4; ++m) {
      const bool high = rng.bernoulli(0.5);
      value[m] = high ? 0.5 : -0.5;
      pattern |= (high ? 1 : 0) << m;
    }
    for (int c = 0; c < N; ++c) {
      for (int r = 0; r < N; ++r) {
        for (int m = 0; m < 4; ++m) {
          if (in_disc(r, c, N, m)) ds.theta(i, c * N + r) = value[m];
        }
      }
    }
    ds.global_labels[i] = pattern + 1;
  }
  ds.num_global_clusters = 16;
  add_errors(ds, config, rng);
  return ds;
}

GeneratedDataset generate(const ScenarioConfig& config) {
  Rng rng(config.seed);
  switch (config.scenario) {
    case Scenario::Global: return gen_scenario_global(config, rng);
    case Scenario::Local: return gen_scenario_local(config, rng);
    case Scenario::Spatial: return gen_scenario_spatial(config, rng);
  }
  throw ConfigError("scenario: unsupported");
}

GeneratedErrors gen_errors(const ScenarioConfig& config, int n, Rng& rng) {
  const int L = config.grid().size();
  constexpr int kClusters = 3;
  GeneratedErrors out;
  std::array<int, kClusters> order = {0, 1, 2};
  std::shuffle(order.begin(), order.end(), rng.engine());
  const int K = config.noise == NoiseModel::LowRank ? 1 : (config.noise == NoiseModel::HighRank ? 10 : 0);
  const double sd = config.slab_sd();
  for (int s = 0; s < kClusters; ++s) {
    out.sigma2.push_back(kNoiseVariances[order[s]]);
    Eigen::MatrixXd lam = Eigen::MatrixXd::Zero(L, K);
    for (int r = 0; r < K; ++r) {
      for (int l = 0; l < L; ++l) {
        if (rng.bernoulli(0.5)) lam(l, r) = rng.normal(0.0, sd);
      }
    }
    out.loadings.push_back(std::move(lam));
  }
  out.eps.resize(n, L);
  out.labels.resize(n);
  for (int i = 0; i < n; ++i) {
    const int s = rng.uniform_int(0, kClusters - 1);
    out.labels[i] = s + 1;
    Eigen::VectorXd e = std::sqrt(out.sigma2[s]) * rng.normal_vector(L);
    if (K > 0) e += out.loadings[s] * rng.normal_vector(K);
    out.eps.row(i) = e.transpose();
  }
  return out;
}

double snr(const Eigen::MatrixXd& theta, const Eigen::MatrixXd& eps) {
  if (theta.rows() != eps.rows() || theta.cols() != eps.cols()) throw ParameterError("SNR inputs differ in shape");
  double total = 0.0;
  int used = 0;
  for (Eigen::Index i = 0; i < theta.rows(); ++i) {
    const double noise = eps.row(i).squaredNorm();
    const double signal = theta.row(i).squaredNorm();
    if (!(noise > 0.0) || !(signal > 0.0)) {
      std::cerr << "fpdpm: warning: unit " << i << " has zero " << (noise > 0.0 ? "signal" : "noise")
                << "; excluded from the SNR\n";
      continue;
    }
    total += 10.0 * std::log10(signal / noise);
    ++used;
  }
  return used > 0 ? total / used : std::numeric_limits<double>::infinity();
}

}  // namespace fpdpm
