#include "config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "fpdpm/baselines.hpp"
#include "fpdpm/errors.hpp"

namespace fpdpm::cli {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return out;
}

long long to_integer(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return out;
}

int to_int(const std::string& key, const std::string& v) { return static_cast<int>(to_integer(key, v)); }

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::string join_doubles(const std::vector<double>& v) {
  std::string out;
  for (std::size_t k = 0; k < v.size(); ++k) out += (k ? "," : "") + fmt(v[k]);
  return out;
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct Key {
  std::string name;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> put;
};

#define FPDPM_DOUBLE_KEY(NAME, FIELD) \
  Key{NAME, [](const RunConfig& c) { return fmt(c.FIELD); }, \
      [](RunConfig& c, const std::string& v) { c.FIELD = to_double(NAME, v); }}
#define FPDPM_INT_KEY(NAME, FIELD) \
  Key{NAME, [](const RunConfig& c) { return std::to_string(c.FIELD); }, \
      [](RunConfig& c, const std::string& v) { c.FIELD = to_int(NAME, v); }}
#define FPDPM_BOOL_KEY(NAME, FIELD) \
  Key{NAME, [](const RunConfig& c) { return std::string(c.FIELD ? "true" : "false"); }, \
      [](RunConfig& c, const std::string& v) { c.FIELD = to_bool(NAME, v); }}

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      // simulation
      Key{"scenario", [](const RunConfig& c) { return std::string(to_string(c.scenario.scenario)); },
          [](RunConfig& c, const std::string& v) { c.scenario.scenario = scenario_from_string(v); }},
      FPDPM_INT_KEY("n", scenario.n),
      FPDPM_INT_KEY("grid", scenario.side),
      Key{"errors", [](const RunConfig& c) { return std::string(to_string(c.scenario.noise)); },
          [](RunConfig& c, const std::string& v) { c.scenario.noise = noise_model_from_string(v); }},
      FPDPM_DOUBLE_KEY("sigma_lambda", scenario.sigma_lambda),
      Key{"wavelet", [](const RunConfig& c) { return std::string(to_string(c.scenario.family)); },
          [](RunConfig& c, const std::string& v) {
            try {
              c.scenario.family = wavelet_family_from_string(v);
            } catch (const ParameterError&) {
              throw ConfigError("wavelet: unknown value '" + v + "' (expected haar or db4)");
            }
          }},
      Key{"seed", [](const RunConfig& c) { return std::to_string(c.chain.seed); },
          [](RunConfig& c, const std::string& v) {
            const long long s = to_integer("seed", v);
            if (s < 0) throw ConfigError("seed: must be non-negative");
            c.chain.seed = static_cast<std::uint64_t>(s);
            c.scenario.seed = c.chain.seed;
          }},
      // model
      FPDPM_DOUBLE_KEY("alpha", hyper.alpha),
      Key{"alpha_levels", [](const RunConfig& c) { return join_doubles(c.hyper.alpha_levels); },
          [](RunConfig& c, const std::string& v) {
            c.hyper.alpha_levels.clear();
            for (const auto& s : split_list(v)) c.hyper.alpha_levels.push_back(to_double("alpha_levels", s));
          }},
      FPDPM_DOUBLE_KEY("alpha_sigma", hyper.alpha_sigma),
      FPDPM_DOUBLE_KEY("omega2", hyper.omega2),
      FPDPM_DOUBLE_KEY("a_s", hyper.a_s),
      FPDPM_DOUBLE_KEY("b_s", hyper.b_s),
      FPDPM_DOUBLE_KEY("a1", hyper.mgp.a1),
      FPDPM_DOUBLE_KEY("a2", hyper.mgp.a2),
      FPDPM_DOUBLE_KEY("a_e", hyper.mgp.a_e),
      FPDPM_DOUBLE_KEY("b_e", hyper.mgp.b_e),
      FPDPM_DOUBLE_KEY("b0", hyper.adapt.b0),
      FPDPM_DOUBLE_KEY("b1", hyper.adapt.b1),
      FPDPM_DOUBLE_KEY("q", hyper.adapt.q),
      FPDPM_DOUBLE_KEY("delta_thresh", hyper.adapt.delta_thresh),
      FPDPM_INT_KEY("k_init", hyper.k_init),
      FPDPM_INT_KEY("k_max", hyper.k_max),
      // chain
      Key{"n_iter", [](const RunConfig& c) { return std::to_string(c.chain.n_iter); },
          [](RunConfig& c, const std::string& v) { c.hyper.n_iter = c.chain.n_iter = to_int("n_iter", v); }},
      Key{"burn_in", [](const RunConfig& c) { return fmt(c.chain.burn_in_fraction); },
          [](RunConfig& c, const std::string& v) {
            c.hyper.burn_in_fraction = c.chain.burn_in_fraction = to_double("burn_in", v);
          }},
      FPDPM_INT_KEY("thinning", chain.thinning),
      FPDPM_BOOL_KEY("record_means", chain.record_means),
      FPDPM_INT_KEY("init_clusters", init_clusters),
      FPDPM_INT_KEY("warmup", warmup_sweeps),
      // command
      Key{"method", [](const RunConfig& c) { return c.method; },
          [](RunConfig& c, const std::string& v) {
            const auto& m = known_methods();
            if (std::find(m.begin(), m.end(), v) == m.end()) {
              throw ConfigError("method: unknown value '" + v +
                                "' (expected fpdpm, fpdpm-independent, dpm, pca-km or lpp-timing)");
            }
            c.method = v;
          }},
      FPDPM_INT_KEY("chains", chains),
      FPDPM_INT_KEY("k", k),
      FPDPM_BOOL_KEY("pad", pad),
      FPDPM_INT_KEY("rows", rows),
      FPDPM_INT_KEY("cols", cols),
      Key{"format", [](const RunConfig& c) { return c.format; },
          [](RunConfig& c, const std::string& v) {
            if (v != "csv" && v != "binary") throw ConfigError("format: expected csv or binary, got '" + v + "'");
            c.format = v;
          }},
      FPDPM_DOUBLE_KEY("pca_threshold", pca_threshold),
      FPDPM_INT_KEY("k_min", k_min),
      FPDPM_INT_KEY("k_max_select", k_max),
      Key{"bench_sides",
          [](const RunConfig& c) {
            std::string out;
            for (std::size_t k = 0; k < c.bench_sides.size(); ++k) out += (k ? "," : "") + std::to_string(c.bench_sides[k]);
            return out;
          },
          [](RunConfig& c, const std::string& v) {
            c.bench_sides.clear();
            for (const auto& s : split_list(v)) c.bench_sides.push_back(to_int("bench_sides", s));
          }},
      FPDPM_INT_KEY("bench_sweeps", bench_sweeps),
      FPDPM_INT_KEY("bench_warm", bench_warm),
      FPDPM_INT_KEY("bench_n", bench_n),
  };
  return table;
}

}  // namespace

const std::vector<std::string>& known_methods() {
  static const std::vector<std::string> m = {"fpdpm", "fpdpm-independent", "dpm", "pca-km", "lpp-timing"};
  return m;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  for (const Key& k : keys()) {
    if (k.name == key) {
      k.put(*this, value);
      return;
    }
  }
  throw ConfigError("unknown configuration key '" + key + "'");
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const Key& k : keys()) out += k.name + " = " + k.get(*this) + "\n";
  return out;
}

RunConfig RunConfig::parse_text(const std::string& text) {
  RunConfig c;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_text(ss.str());
}

SamplerOptions RunConfig::sampler_options() const {
  SamplerOptions o;
  if (method == "fpdpm-independent") o.errors = ErrorModel::Independent;
  if (method == "dpm") o = global_dpm_options();
  if (method == "lpp-timing") o = lpp_timing_options();
  o.init_clusters = init_clusters;
  o.warmup_sweeps = warmup_sweeps;
  return o;
}

void RunConfig::validate() const {
  scenario.validate();
  hyper.validate();
  chain.validate();
  if (chains < 1) throw ConfigError("chains must be at least 1");
  if (k < 0) throw ConfigError("k must be non-negative");
  if (rows < 0 || cols < 0) throw ConfigError("rows and cols must be non-negative");
  if (init_clusters < 1) throw ConfigError("init_clusters must be at least 1");
  if (!(pca_threshold > 0.0 && pca_threshold <= 1.0)) throw ConfigError("pca_threshold must lie in (0, 1]");
  if (k_min < 2 || k_max < k_min) throw ConfigError("k_min/k_max_select must satisfy 2 <= k_min <= k_max");
  if (bench_sides.size() < 2) throw ConfigError("bench_sides needs at least two grid sides");
  for (int s : bench_sides) {
    if (s < 2 || !is_power_of_two(s)) throw ConfigError("bench_sides: " + std::to_string(s) + " is not a power of two >= 2");
  }
  if (bench_sweeps < 1 || bench_warm < 0 || bench_n < 2) throw ConfigError("bench_sweeps/bench_warm/bench_n out of range");
}

}  // namespace fpdpm::cli
