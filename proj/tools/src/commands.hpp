#pragma once

#include <exception>
#include <string>

#include "config.hpp"
#include "json.hpp"

namespace fpdpm::cli {

using Json = nlohmann::ordered_json;

/// Writes observed.csv, truth.csv, level_labels.csv (when the scenario has
/// per-level truth), global_labels.csv, cov_labels.csv, snr.json, snr.txt and
/// manifest.json. The `format` key switches the matrices to .bin.
Json cmd_simulate(const RunConfig& config, const std::string& out_dir);

/// Fits `config.method` to the matrix in `data_path`. Sampler methods write
/// memberships_chain<c>.csv, timings_chain<c>.csv, posterior_mean_chain<c>.csv
/// and, with record_means, means_chain<c>.bin; pca-km writes labels.csv.
/// Always writes fit.json and manifest.json.
Json cmd_fit(const RunConfig& config, const std::string& data_path, const std::string& out_dir);

/// Consolidates the traces of a fit directory. `truth_dir` (may be empty) is a
/// simulate output directory used for ARI and MSE.
Json cmd_summarize(const RunConfig& config, const std::string& fit_dir, const std::string& truth_dir,
                   const std::string& out_dir);

/// Gelman-Rubin statistic of every posterior mean entry across the chains of a fit directory.
Json cmd_diagnose(const std::string& fit_dir, const std::string& out_dir);

/// Per-sweep times of fpdpm and lpp-timing over config.bench_sides, with log-log slopes.
Json cmd_benchmark(const RunConfig& config, const std::string& out_dir);

/// 2 for usage and input errors, 3 for numeric aborts, 1 otherwise.
int exit_code_for(const std::exception& e);

const char* version();

}  // namespace fpdpm::cli
