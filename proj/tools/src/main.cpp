#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "commands.hpp"
#include "config.hpp"

namespace {

using fpdpm::cli::RunConfig;

struct Flags {
  std::string config;
  std::string out_dir;
  std::optional<long long> seed;
  std::optional<int> chains;
  std::optional<int> k;
  std::optional<std::string> method;
  bool pad = false;
  std::string input;
  std::string truth;
};

RunConfig resolve(const Flags& f) {
  RunConfig c = f.config.empty() ? RunConfig{} : RunConfig::load(f.config);
  if (f.seed) c.set("seed", std::to_string(*f.seed));
  if (f.chains) c.set("chains", std::to_string(*f.chains));
  if (f.k) c.set("k", std::to_string(*f.k));
  if (f.method) c.set("method", *f.method);
  if (f.pad) c.pad = true;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Clustering of functional data with products of Dirichlet process mixtures"};
  app.set_version_flag("--version", fpdpm::cli::version());
  app.require_subcommand(1);
  Flags f;

  auto common = [&f](CLI::App* sub) {
    sub->add_option("--config", f.config, "key = value configuration file")->check(CLI::ExistingFile);
    sub->add_option("--out-dir", f.out_dir, "output directory")->required();
  };

  auto* simulate = app.add_subcommand("simulate", "generate a simulation scenario");
  common(simulate);
  simulate->add_option("--seed", f.seed, "random seed");

  auto* fit = app.add_subcommand("fit", "run a clustering method on a data matrix");
  common(fit);
  fit->add_option("data", f.input, "data matrix (.csv or .bin), one unit per row")->required()->check(CLI::ExistingFile);
  fit->add_option("--seed", f.seed, "seed of the first chain");
  fit->add_option("--chains", f.chains, "independent chains");
  fit->add_option("--method", f.method, "fpdpm, fpdpm-independent, dpm, pca-km or lpp-timing");
  fit->add_flag("--pad", f.pad, "zero-pad non-dyadic images");

  auto* summarize = app.add_subcommand("summarize", "consolidate clusters and score them");
  common(summarize);
  summarize->add_option("fit_dir", f.input, "output directory of fit")->required()->check(CLI::ExistingDirectory);
  summarize->add_option("--truth", f.truth, "output directory of simulate")->check(CLI::ExistingDirectory);
  summarize->add_option("--k", f.k, "clusters to cut the tree at");

  auto* diagnose = app.add_subcommand("diagnose", "Gelman-Rubin statistics across chains");
  diagnose->add_option("fit_dir", f.input, "output directory of fit")->required()->check(CLI::ExistingDirectory);
  diagnose->add_option("--out-dir", f.out_dir, "output directory")->required();

  auto* benchmark = app.add_subcommand("benchmark", "per-sweep timing against grid size");
  common(benchmark);
  benchmark->add_option("--seed", f.seed, "random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    fpdpm::cli::Json report;
    if (simulate->parsed()) {
      report = fpdpm::cli::cmd_simulate(resolve(f), f.out_dir);
    } else if (fit->parsed()) {
      report = fpdpm::cli::cmd_fit(resolve(f), f.input, f.out_dir);
    } else if (summarize->parsed()) {
      report = fpdpm::cli::cmd_summarize(resolve(f), f.input, f.truth, f.out_dir);
    } else if (diagnose->parsed()) {
      report = fpdpm::cli::cmd_diagnose(f.input, f.out_dir);
    } else if (benchmark->parsed()) {
      report = fpdpm::cli::cmd_benchmark(resolve(f), f.out_dir);
    }
    std::cout << report.dump(2) << '\n';
  } catch (const std::exception& e) {
    std::cerr << "fpdpm: error: " << e.what() << '\n';
    return fpdpm::cli::exit_code_for(e);
  }
  return 0;
}
