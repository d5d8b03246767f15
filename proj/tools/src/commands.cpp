#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <optional>
#include <set>

#include "fpdpm/baselines.hpp"
#include "fpdpm/errors.hpp"
#include "fpdpm/postproc.hpp"
#include "fpdpm/sampler.hpp"
#include "fpdpm/simgen.hpp"
#include "io.hpp"
#include "manifest.hpp"

#ifndef FPDPM_VERSION
#define FPDPM_VERSION "unknown"
#endif

namespace fpdpm::cli {
namespace fs = std::filesystem;

namespace {

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

std::string in_dir(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

void make_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir + "': " + ec.message());
}

std::string matrix_name(const RunConfig& c, const std::string& stem) {
  return stem + (c.format == "binary" ? ".bin" : ".csv");
}

int distinct(const std::vector<int>& labels) { return static_cast<int>(std::set<int>(labels.begin(), labels.end()).size()); }

Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

struct Prepared {
  FunctionalDataset data;
  int rows = 0;
  int cols = 0;
};

/// Resolves the image shape of the data columns and pads to a dyadic grid when allowed.
Prepared prepare(const RunConfig& c, const Eigen::MatrixXd& y) {
  const int width = static_cast<int>(y.cols());
  if (y.rows() < 2) throw ConfigError("data: need at least two units");
  if (!y.allFinite()) throw ConfigError("data: contains NaN or Inf");
  Prepared p;
  p.rows = c.rows;
  p.cols = c.cols;
  if (p.rows == 0 && p.cols == 0) {
    const int s = static_cast<int>(std::lround(std::sqrt(static_cast<double>(width))));
    if (s * s != width) {
      throw ConfigError("data: " + std::to_string(width) + " columns are not a square image; set rows and cols");
    }
    p.rows = p.cols = s;
  } else if (p.rows == 0 || p.cols == 0) {
    throw ConfigError("rows and cols must be set together");
  }
  if (p.rows * p.cols != width) {
    throw ConfigError("rows x cols = " + std::to_string(p.rows * p.cols) + " does not match the " +
                      std::to_string(width) + " data columns");
  }
  const bool line = p.cols == 1;
  const bool dyadic = line ? is_power_of_two(p.rows) : (p.rows == p.cols && is_power_of_two(p.rows));
  const WaveletFamily family = c.scenario.family;
  if (dyadic) {
    p.data = FunctionalDataset::centered(line ? Grid::line(p.rows) : Grid::square(p.rows), y, family);
    return p;
  }
  if (!c.pad) {
    throw ConfigError("grid: data of shape " + std::to_string(p.rows) + "x" + std::to_string(p.cols) +
                      " is not dyadic; enable padding with --pad");
  }
  const int side = next_power_of_two(std::max(p.rows, p.cols));
  const std::vector<int> target = line ? std::vector<int>{next_power_of_two(p.rows)} : std::vector<int>{side, side};
  const Grid grid = line ? Grid::line(target[0]) : Grid::square(side);
  Eigen::MatrixXd padded(y.rows(), grid.size());
  PaddingRecord record;
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    const Image img = y.row(i).reshaped(p.rows, p.cols);
    PaddedImage pi = pad_to_dyadic(img, target);
    padded.row(i) = pi.image.reshaped().transpose();
    record = pi.record;
  }
  p.data = FunctionalDataset::centered(grid, padded, family);
  p.data.padding = record;
  return p;
}

/// Crops padded rows back to the original image shape.
Eigen::MatrixXd crop_rows(const Prepared& p, const Eigen::MatrixXd& m) {
  if (!p.data.padding) return m;
  const PaddingRecord& rec = *p.data.padding;
  const int prow = rec.padded_dims[0];
  const int pcol = rec.padded_dims.size() > 1 ? rec.padded_dims[1] : 1;
  Eigen::MatrixXd out(m.rows(), p.rows * p.cols);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const Image img = m.row(i).reshaped(prow, pcol);
    out.row(i) = rec.crop(img).reshaped().transpose();
  }
  return out;
}

Json read_json(const std::string& path) {
  try {
    return Json::parse(read_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path + ": " + e.what());
  }
}

}  // namespace

const char* version() { return FPDPM_VERSION; }

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const NumericAbort*>(&e) || dynamic_cast<const NumericError*>(&e)) return 3;
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ParameterError*>(&e) ||
      dynamic_cast<const DimensionError*>(&e) || dynamic_cast<const StructureError*>(&e) ||
      dynamic_cast<const DegenerateInputError*>(&e) || dynamic_cast<const IoError*>(&e)) {
    return 2;
  }
  return 1;
}

Json cmd_simulate(const RunConfig& config, const std::string& out_dir) {
  config.validate();
  Stopwatch clock;
  const GeneratedDataset ds = generate(config.scenario);
  const double t_gen = clock.lap();
  make_dir(out_dir);

  RunManifest man;
  man.command = "simulate";
  man.config = config.to_text();
  man.seeds = {config.scenario.seed};
  man.version = version();

  const std::string observed = matrix_name(config, "observed");
  const std::string truth = matrix_name(config, "truth");
  write_matrix(in_dir(out_dir, observed), ds.y);
  write_matrix(in_dir(out_dir, truth), ds.theta);
  std::vector<std::string> written = {observed, truth};
  if (!ds.level_labels.empty()) {
    std::vector<std::string> names;
    for (std::size_t j = 0; j < ds.level_labels.size(); ++j) names.push_back("level" + std::to_string(j));
    write_labels_csv(in_dir(out_dir, "level_labels.csv"), names, ds.level_labels);
    written.push_back("level_labels.csv");
  }
  write_labels_csv(in_dir(out_dir, "global_labels.csv"), {"global"}, {ds.global_labels});
  write_labels_csv(in_dir(out_dir, "cov_labels.csv"), {"cov"}, {ds.cov_labels});
  written.insert(written.end(), {"global_labels.csv", "cov_labels.csv"});

  Json report;
  report["scenario"] = to_string(config.scenario.scenario);
  report["errors"] = to_string(config.scenario.noise);
  report["n"] = config.scenario.n;
  report["grid"] = config.scenario.side;
  report["seed"] = config.scenario.seed;
  report["num_global_clusters"] = ds.num_global_clusters;
  report["snr_db"] = finite_or_null(ds.snr_db);
  write_text(in_dir(out_dir, "snr.json"), report.dump(2) + "\n");
  char line[160];
  std::snprintf(line, sizeof line, "scenario %s, errors %s, n %d, grid %dx%d: mean SNR %.4f dB\n",
                to_string(config.scenario.scenario), to_string(config.scenario.noise), config.scenario.n,
                config.scenario.side, config.scenario.side, ds.snr_db);
  write_text(in_dir(out_dir, "snr.txt"), line);
  written.insert(written.end(), {"snr.json", "snr.txt"});

  for (const auto& f : written) man.add_file(out_dir, f);
  man.phases = {{"generate", t_gen}, {"write", clock.lap()}};
  man.write(out_dir);
  return report;
}

Json cmd_fit(const RunConfig& config, const std::string& data_path, const std::string& out_dir) {
  config.validate();
  Stopwatch clock;
  const Eigen::MatrixXd y = read_matrix(data_path);
  const Prepared p = prepare(config, y);
  const double t_read = clock.lap();
  make_dir(out_dir);

  RunManifest man;
  man.command = "fit";
  man.config = config.to_text();
  man.version = version();

  Json report;
  report["method"] = config.method;
  report["data"] = fs::path(data_path).filename().string();
  report["n"] = p.data.n();
  report["rows"] = p.rows;
  report["cols"] = p.cols;
  report["L"] = p.data.L();
  report["padded"] = p.data.padding.has_value();
  std::vector<std::string> written;

  if (config.method == "pca-km") {
    const int kmax = std::min(config.k_max, p.data.n() - 1);
    const BaselineResult r = fit_pca_kmeans(y, config.pca_threshold, config.k_min, kmax, config.chain.seed);
    man.seeds = {config.chain.seed};
    write_labels_csv(in_dir(out_dir, "labels.csv"), {"cluster"}, {r.labels});
    written.push_back("labels.csv");
    report["chains"] = 0;
    report["num_clusters"] = r.num_clusters;
    report["components"] = r.components;
    report["membership_parameters"] = r.membership_parameters;
    man.phases = {{"read", t_read}, {"fit", clock.lap()}};
  } else {
    std::vector<std::uint64_t> seeds;
    for (int c = 0; c < config.chains; ++c) seeds.push_back(config.chain.seed + static_cast<std::uint64_t>(c));
    man.seeds = seeds;
    const SamplerOptions options = config.sampler_options();
    const std::vector<Trace> traces =
        run_chains(p.data, config.hyper, config.chain, options, seeds, worker_limit());
    const double t_fit = clock.lap();
    report["chains"] = config.chains;
    report["membership_parameters"] = config.method == "lpp-timing" ? p.data.L() : (config.method == "dpm" ? 1 : p.data.grid.num_levels());
    report["retained"] = traces.front().retained;
    report["record_means"] = config.chain.record_means;
    report["chain_runs"] = Json::array();
    for (std::size_t c = 0; c < traces.size(); ++c) {
      const Trace& tr = traces[c];
      const std::string tag = "_chain" + std::to_string(c);
      write_membership_trace(in_dir(out_dir, "memberships" + tag + ".csv"), tr);
      Eigen::MatrixXd times(static_cast<Eigen::Index>(tr.sweep_seconds.size()), 1);
      for (std::size_t t = 0; t < tr.sweep_seconds.size(); ++t) times(static_cast<Eigen::Index>(t), 0) = tr.sweep_seconds[t];
      write_matrix_csv(in_dir(out_dir, "timings" + tag + ".csv"), times);
      write_matrix(in_dir(out_dir, matrix_name(config, "posterior_mean" + tag)), crop_rows(p, tr.posterior_mean()));
      written.insert(written.end(), {"memberships" + tag + ".csv", "timings" + tag + ".csv",
                                     matrix_name(config, "posterior_mean" + tag)});
      if (config.chain.record_means) {
        Eigen::MatrixXd stacked(static_cast<Eigen::Index>(tr.retained) * tr.n, p.rows * p.cols);
        for (int r = 0; r < tr.retained; ++r) {
          stacked.middleRows(static_cast<Eigen::Index>(r) * tr.n, tr.n) = crop_rows(p, tr.means[r].cast<double>());
        }
        write_matrix_binary(in_dir(out_dir, "means" + tag + ".bin"), stacked);
        written.push_back("means" + tag + ".bin");
      }
      double total = 0.0;
      for (double s : tr.sweep_seconds) total += s;
      report["chain_runs"].push_back({{"seed", tr.seed},
                                      {"retained", tr.retained},
                                      {"seconds", total},
                                      {"mean_sweep_seconds", tr.sweep_seconds.empty() ? 0.0 : total / tr.sweep_seconds.size()}});
    }
    man.phases = {{"read", t_read}, {"fit", t_fit}, {"write", clock.lap()}};
  }
  write_text(in_dir(out_dir, "fit.json"), report.dump(2) + "\n");
  written.push_back("fit.json");
  for (const auto& f : written) man.add_file(out_dir, f);
  man.write(out_dir);
  return report;
}

Json cmd_summarize(const RunConfig& config, const std::string& fit_dir, const std::string& truth_dir,
                   const std::string& out_dir) {
  Stopwatch clock;
  const Json fit = read_json(in_dir(fit_dir, "fit.json"));
  const std::string method = fit.at("method").get<std::string>();
  const int chains = fit.at("chains").get<int>();
  make_dir(out_dir);

  std::optional<LabelTable> global_truth;
  std::optional<LabelTable> level_truth;
  if (!truth_dir.empty()) {
    global_truth = read_labels_csv(in_dir(truth_dir, "global_labels.csv"));
    if (fs::exists(in_dir(truth_dir, "level_labels.csv"))) level_truth = read_labels_csv(in_dir(truth_dir, "level_labels.csv"));
  }

  Json report;
  report["method"] = method;
  std::vector<std::string> written;
  std::vector<int> labels;
  if (method == "pca-km") {
    labels = read_labels_csv(in_dir(fit_dir, "labels.csv")).column("cluster");
    report["k"] = distinct(labels);
    report["k_source"] = "fit";
  } else {
    std::vector<Trace> traces;
    for (int c = 0; c < chains; ++c) {
      traces.push_back(read_membership_trace(in_dir(fit_dir, "memberships_chain" + std::to_string(c) + ".csv")));
    }
    const MembershipTensor mt = MembershipTensor::from_traces(traces);
    const DistanceMatrix dm = pairwise_distance(mt, mt.n);
    write_matrix_csv(in_dir(out_dir, "distance.csv"), dm.d);
    written.push_back("distance.csv");

    int k = config.k;
    std::string source = "requested";
    if (k == 0 && dm.d.maxCoeff() == 0.0) {
      k = 1;
      source = "all distances zero";
    } else if (k == 0 && global_truth) {
      k = distinct(global_truth->column("global"));
      source = "truth";
    }
    if (k > mt.n) throw ConfigError("k: " + std::to_string(k) + " exceeds the " + std::to_string(mt.n) + " units");
    if (k > 0) {
      labels = consolidate_clusters(dm, k);
    } else if (mt.n >= 3) {
      labels = consolidate_clusters_auto(dm, 2, std::min(mt.n - 1, 20));
      source = "silhouette";
    } else {
      labels = consolidate_clusters(dm, 1);
      source = "too few units";
    }
    report["k"] = distinct(labels);
    report["k_source"] = source;
    report["samples"] = mt.R;

    if (level_truth) {
      Json levels = Json::array();
      for (int j = 0; j < mt.levels; ++j) {
        const std::string name = "level" + std::to_string(j);
        if (!level_truth->has(name)) continue;
        const auto& truth = level_truth->column(name);
        const auto lj = consolidate_clusters(pairwise_distance_level(mt, j), distinct(truth));
        levels.push_back({{"level", j}, {"k", distinct(truth)}, {"ari", adjusted_rand_index(lj, truth)}});
      }
      report["ari_levels"] = levels;
    }
    if (!truth_dir.empty()) {
      std::string truth_path = in_dir(truth_dir, "truth.csv");
      if (!fs::exists(truth_path)) truth_path = in_dir(truth_dir, "truth.bin");
      if (fs::exists(truth_path)) {
        const Eigen::MatrixXd truth = read_matrix(truth_path);
        Eigen::MatrixXd mean;
        for (int c = 0; c < chains; ++c) {
          std::string path = in_dir(fit_dir, "posterior_mean_chain" + std::to_string(c) + ".csv");
          if (!fs::exists(path)) path = in_dir(fit_dir, "posterior_mean_chain" + std::to_string(c) + ".bin");
          const Eigen::MatrixXd m = read_matrix(path);
          mean = c == 0 ? m : Eigen::MatrixXd(mean + m);
        }
        mean /= chains;
        if (mean.rows() != truth.rows() || mean.cols() != truth.cols()) {
          throw DimensionError("posterior mean and truth differ in shape");
        }
        report["mse"] = (mean - truth).squaredNorm() / static_cast<double>(truth.size());
      }
    }
  }
  if (global_truth) {
    const auto& truth = global_truth->column("global");
    if (truth.size() != labels.size()) throw DimensionError("truth labels and fit disagree on the number of units");
    report["ari_global"] = adjusted_rand_index(labels, truth);
  }
  write_labels_csv(in_dir(out_dir, "labels.csv"), {"cluster"}, {labels});
  write_text(in_dir(out_dir, "metrics.json"), report.dump(2) + "\n");
  std::string text = "method " + method + ": " + std::to_string(report["k"].get<int>()) + " clusters\n";
  if (report.contains("ari_global")) text += "global ARI " + std::to_string(report["ari_global"].get<double>()) + "\n";
  if (report.contains("ari_levels")) {
    for (const auto& l : report["ari_levels"]) {
      text += "level " + std::to_string(l["level"].get<int>()) + " ARI " + std::to_string(l["ari"].get<double>()) + "\n";
    }
  }
  if (report.contains("mse")) text += "MSE " + std::to_string(report["mse"].get<double>()) + "\n";
  write_text(in_dir(out_dir, "summary.txt"), text);
  written.insert(written.end(), {"labels.csv", "metrics.json", "summary.txt"});

  RunManifest man;
  man.command = "summarize";
  man.config = config.to_text();
  man.version = version();
  for (const auto& f : written) man.add_file(out_dir, f);
  man.phases = {{"summarize", clock.lap()}};
  man.write(out_dir);
  return report;
}

Json cmd_diagnose(const std::string& fit_dir, const std::string& out_dir) {
  Stopwatch clock;
  const Json fit = read_json(in_dir(fit_dir, "fit.json"));
  const int chains = fit.at("chains").get<int>();
  if (chains < 2) throw ConfigError("chains: diagnose needs at least two chains");
  if (!fit.value("record_means", false)) throw ConfigError("record_means: the fit did not record mean functions");
  const int n = fit.at("n").get<int>();
  std::vector<Trace> traces;
  for (int c = 0; c < chains; ++c) {
    const Eigen::MatrixXd stacked = read_matrix_binary(in_dir(fit_dir, "means_chain" + std::to_string(c) + ".bin"));
    if (stacked.rows() % n != 0) throw IoError("mean trace of chain " + std::to_string(c) + " is not a whole number of samples");
    Trace tr;
    tr.n = n;
    tr.L = static_cast<int>(stacked.cols());
    tr.retained = static_cast<int>(stacked.rows() / n);
    for (int r = 0; r < tr.retained; ++r) tr.means.push_back(stacked.middleRows(static_cast<Eigen::Index>(r) * n, n).cast<float>());
    traces.push_back(std::move(tr));
  }
  const Eigen::MatrixXd g = gelman_rubin_means(traces);
  make_dir(out_dir);
  write_matrix_csv(in_dir(out_dir, "gelman_rubin.csv"), g);

  std::vector<double> finite;
  int below = 0;
  for (Eigen::Index k = 0; k < g.size(); ++k) {
    const double v = g.data()[k];
    if (v < 1.2) ++below;
    if (std::isfinite(v)) finite.push_back(v);
  }
  std::sort(finite.begin(), finite.end());
  Json report;
  report["chains"] = chains;
  report["entries"] = g.size();
  report["fraction_below_1_2"] = static_cast<double>(below) / static_cast<double>(g.size());
  report["median"] = finite.empty() ? Json(nullptr) : Json(finite[finite.size() / 2]);
  report["max"] = finite_or_null(g.maxCoeff());
  write_text(in_dir(out_dir, "diagnose.json"), report.dump(2) + "\n");

  RunManifest man;
  man.command = "diagnose";
  man.version = version();
  man.add_file(out_dir, "gelman_rubin.csv");
  man.add_file(out_dir, "diagnose.json");
  man.phases = {{"diagnose", clock.lap()}};
  man.write(out_dir);
  return report;
}

Json cmd_benchmark(const RunConfig& config, const std::string& out_dir) {
  config.validate();
  Stopwatch clock;
  const std::vector<std::string> methods = {"fpdpm", "lpp-timing"};
  std::vector<double> sizes;
  std::vector<std::vector<double>> times(methods.size());
  Json report;
  report["rows"] = Json::array();
  for (int side : config.bench_sides) {
    ScenarioConfig sc = config.scenario;
    sc.scenario = Scenario::Global;
    sc.side = side;
    sc.n = config.bench_n;
    const GeneratedDataset ds = generate(sc);
    const FunctionalDataset data = FunctionalDataset::centered(ds.grid, ds.y, sc.family);
    sizes.push_back(ds.grid.size());
    for (std::size_t m = 0; m < methods.size(); ++m) {
      RunConfig c = config;
      c.method = methods[m];
      SamplerOptions o = c.sampler_options();
      o.warmup_sweeps = 0;
      const double secs = mean_sweep_seconds(data, config.hyper, o, config.bench_sweeps, config.bench_warm, config.chain.seed);
      times[m].push_back(secs);
      report["rows"].push_back({{"grid", side}, {"L", ds.grid.size()}, {"method", methods[m]}, {"sweep_seconds", secs}});
    }
  }
  Json slopes;
  for (std::size_t m = 0; m < methods.size(); ++m) slopes[methods[m]] = loglog_slope(sizes, times[m]);
  report["slopes"] = slopes;
  report["slope_difference"] = slopes["lpp-timing"].get<double>() - slopes["fpdpm"].get<double>();

  make_dir(out_dir);
  std::string csv = "grid,L,method,sweep_seconds\n";
  for (const auto& r : report["rows"]) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%d,%d,%s,%.9g\n", r["grid"].get<int>(), r["L"].get<int>(),
                  r["method"].get<std::string>().c_str(), r["sweep_seconds"].get<double>());
    csv += buf;
  }
  write_text(in_dir(out_dir, "timing.csv"), csv);
  write_text(in_dir(out_dir, "benchmark.json"), report.dump(2) + "\n");

  RunManifest man;
  man.command = "benchmark";
  man.config = config.to_text();
  man.seeds = {config.chain.seed};
  man.version = version();
  man.add_file(out_dir, "timing.csv");
  man.add_file(out_dir, "benchmark.json");
  man.phases = {{"benchmark", clock.lap()}};
  man.write(out_dir);
  return report;
}

}  // namespace fpdpm::cli
