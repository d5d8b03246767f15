#pragma once

#include <string>
#include <vector>

#include "fpdpm/model.hpp"
#include "fpdpm/sampler.hpp"
#include "fpdpm/simgen.hpp"

namespace fpdpm::cli {

/// Every setting a command can read. Parsed from a flat `key = value` file;
/// blank lines and lines starting with '#' are ignored.
struct RunConfig {
  ScenarioConfig scenario;
  Hyperparameters hyper;
  ChainConfig chain;

  std::string method = "fpdpm";
  int chains = 1;
  /// Clusters for the consolidated labels; 0 means the true count when known,
  /// otherwise a silhouette choice.
  int k = 0;
  bool pad = false;
  /// Image shape of the data file; 0 infers a square grid from the column count.
  int rows = 0;
  int cols = 0;
  int init_clusters = 5;
  int warmup_sweeps = -1;
  std::string format = "csv";

  double pca_threshold = 0.95;
  int k_min = 2;
  int k_max = 20;

  /// Grid sides for the benchmark command.
  std::vector<int> bench_sides = {4, 8, 16};
  int bench_sweeps = 100;
  int bench_warm = 20;
  int bench_n = 100;

  /// Sets one key; throws ConfigError naming the key on unknown keys or bad values.
  void set(const std::string& key, const std::string& value);
  /// Canonical text form; parse_text(to_text()) reproduces the configuration.
  std::string to_text() const;
  static RunConfig parse_text(const std::string& text);
  static RunConfig load(const std::string& path);

  SamplerOptions sampler_options() const;
  void validate() const;

  bool operator==(const RunConfig& other) const { return to_text() == other.to_text(); }
};

const std::vector<std::string>& known_methods();

}  // namespace fpdpm::cli
