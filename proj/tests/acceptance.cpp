// Acceptance checks. Prints one PASS/FAIL line per check and a summary; the
// exit status is nonzero only when a check throws.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "fpdpm/baselines.hpp"
#include "fpdpm/model.hpp"
#include "fpdpm/postproc.hpp"
#include "fpdpm/sampler.hpp"
#include "fpdpm/simgen.hpp"
#include "fpdpm/wavelet.hpp"
#include "oracles.hpp"

using namespace fpdpm;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

int distinct(const std::vector<int>& v) { return static_cast<int>(std::set<int>(v.begin(), v.end()).size()); }

// ---------------------------------------------------------------- wavelets

Outcome wavelet_identities() {
  Rng rng(101);
  double worst = 0.0;
  int cases = 0;
  for (WaveletFamily fam : {WaveletFamily::Haar, WaveletFamily::Daubechies4}) {
    for (int side = 4; side <= 64; side *= 2) {
      for (int rep = 0; rep < 3; ++rep) {
        const Image img = Image::NullaryExpr(side, side, [&] { return rng.normal(); });
        const WaveletCoefficients w = forward_dwt(img, fam);
        worst = std::max(worst, (inverse_dwt(w) - img).cwiseAbs().maxCoeff());
        worst = std::max(worst, std::abs(w.squared_norm() - img.squaredNorm()) / std::max(1.0, img.squaredNorm()));
        ++cases;
      }
    }
    for (int len = 4; len <= 4096; len *= 4) {
      const Image sig = Image::NullaryExpr(len, 1, [&] { return rng.normal(); });
      const WaveletCoefficients w = forward_dwt(sig, fam);
      worst = std::max(worst, (inverse_dwt(w) - sig).cwiseAbs().maxCoeff());
      worst = std::max(worst, std::abs(w.squared_norm() - sig.squaredNorm()) / sig.squaredNorm());
      ++cases;
    }
  }
  return {worst < 1e-10, fmt("%.0f images, max error %.2e", cases, worst)};
}

// ---------------------------------------------------------------- density

Outcome density_oracle() {
  Rng rng(202);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const int L = 1 + static_cast<int>(rng.uniform() * 8);
    const int K = static_cast<int>(rng.uniform() * 4);
    Eigen::MatrixXd lam(L, K);
    for (int k = 0; k < K; ++k) lam.col(k) = rng.normal_vector(L) * (0.2 + 2.0 * rng.uniform());
    const double s2 = 0.01 + 3.0 * rng.uniform();
    const Eigen::VectorXd r = rng.normal_vector(L) * (0.5 + 2.0 * rng.uniform());
    const Eigen::MatrixXd S = lam * lam.transpose() + s2 * Eigen::MatrixXd::Identity(L, L);
    const double dense = oracle::dense_gaussian_logdensity(r, S);
    const double fast = LowRankGaussian(lam, s2).log_density(r);
    worst = std::max(worst, std::abs(fast - dense) / std::max(1.0, std::abs(dense)));
  }
  return {worst < 1e-8, fmt("1000 instances, max relative error %.2e", worst)};
}

// ---------------------------------------------------------------- calibration

void draw_family(StickFamily& f, int n, double alpha, Rng& rng) {
  f.nu.clear();
  f.labels.assign(n, 0);
  std::vector<double> w;
  double rem = 1.0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    int h = 0;
    double acc = 0.0;
    while (true) {
      if (h == static_cast<int>(f.nu.size())) {
        const double v = rng.beta(1.0, alpha);
        f.nu.push_back(v);
        w.push_back(rem * v);
        rem *= 1.0 - v;
      }
      acc += w[h];
      if (u < acc) break;
      ++h;
    }
    f.labels[i] = h;
  }
  f.u.assign(n, 0.0);
}

// Prior draw of every unknown, written from the generative model with one factor.
void draw_prior(MixtureState& st, const Hyperparameters& h, int n, int L, Rng& rng) {
  for (std::size_t b = 0; b < st.coef_families.size(); ++b) {
    draw_family(st.coef_families[b], n, h.alpha_for(b), rng);
    const auto& blk = st.layout.blocks[b];
    st.coef_atoms[b].clear();
    for (std::size_t g = 0; g < st.coef_families[b].nu.size(); ++g) {
      CoefficientAtom a;
      a.level = blk.level;
      a.value.resize(blk.size);
      a.tau2.resize(blk.size);
      for (int k = 0; k < blk.size; ++k) {
        a.tau2[k] = rng.exponential(h.omega2);
        a.value[k] = std::sqrt(a.tau2[k]) * rng.normal();
      }
      st.coef_atoms[b].push_back(a);
    }
  }
  draw_family(st.cov_family, n, h.alpha_sigma, rng);
  st.cov_atoms.clear();
  for (std::size_t g = 0; g < st.cov_family.nu.size(); ++g) {
    CovarianceAtom a;
    a.sigma2 = 1.0 / rng.gamma(h.a_s, h.b_s);
    a.e = rng.gamma(h.mgp.a_e, h.mgp.b_e);
    a.delta.resize(1);
    a.delta[0] = rng.gamma(h.mgp.a1, 1.0);
    a.phi.resize(L, 1);
    a.Lambda.resize(L, 1);
    for (int l = 0; l < L; ++l) {
      a.phi(l, 0) = rng.gamma(1.5, 1.5);
      a.Lambda(l, 0) = rng.normal() / std::sqrt(a.phi(l, 0) * a.delta[0] * a.e);
    }
    st.cov_atoms.push_back(a);
  }
  st.eta.assign(n, Eigen::VectorXd());
  for (int i = 0; i < n; ++i) st.eta[i] = rng.normal_vector(1);
}

Eigen::MatrixXd draw_data(const GibbsSampler& s, Rng& rng) {
  const auto& st = s.state();
  Eigen::MatrixXd y(s.n(), s.L());
  for (int i = 0; i < s.n(); ++i) {
    const auto& a = st.cov_atom_of(i);
    y.row(i) = (s.mean_function(i) + a.Lambda * st.eta[i] + std::sqrt(a.sigma2) * rng.normal_vector(s.L())).transpose();
  }
  return y;
}

const char* kFunctionalNames[] = {"beta0", "beta0^2", "beta1", "tau2_0", "tau2_1", "1/sigma2", "1/sigma2^2", "lambda"};

std::vector<double> functionals(const MixtureState& st) {
  const auto& a0 = st.coef_atoms[0][st.coef_families[0].labels[0]];
  const auto& a1 = st.coef_atoms[1][st.coef_families[1].labels[0]];
  const double prec = 1.0 / st.cov_atom_of(0).sigma2;
  return {a0.value[0], a0.value[0] * a0.value[0], a1.value[1], a0.tau2[0], a1.tau2[0], prec, prec * prec,
          st.cov_atom_of(1).Lambda(2, 0)};
}

Outcome sampler_calibration() {
  const int N = 20000, n = 3, L = 4, F = 8, batches = 50;
  Hyperparameters h;
  SamplerOptions o;
  o.adapt_factors = false;
  o.warmup_sweeps = 0;
  o.init_clusters = 1;
  FunctionalDataset data;
  data.grid = Grid::line(L);
  data.y = Eigen::MatrixXd::Zero(n, L);
  GibbsSampler s(data, h, o, 11);
  s.initialize();
  Rng rng(5);
  const MixtureState proto = s.state();
  std::vector<std::vector<double>> fw(F), gb(F);
  for (int t = 0; t < N; ++t) {
    MixtureState st = proto;
    draw_prior(st, h, n, L, rng);
    s.state() = st;
    s.sync_state();
    const auto f = functionals(s.state());
    for (int k = 0; k < F; ++k) fw[k].push_back(f[k]);
  }
  {
    MixtureState st = proto;
    draw_prior(st, h, n, L, rng);
    s.state() = st;
    s.sync_state();
    s.set_observations(draw_data(s, rng));
  }
  for (int t = 0; t < N; ++t) {
    s.sweep(t + 1);
    s.set_observations(draw_data(s, rng));
    const auto f = functionals(s.state());
    for (int k = 0; k < F; ++k) gb[k].push_back(f[k]);
  }
  double worst = 0.0;
  std::string detail = "z:";
  for (int k = 0; k < F; ++k) {
    const auto a = oracle::moments(fw[k]);
    std::vector<double> bm;
    const int bs = N / batches;
    for (int b = 0; b < batches; ++b) {
      bm.push_back(std::accumulate(gb[k].begin() + b * bs, gb[k].begin() + (b + 1) * bs, 0.0) / bs);
    }
    const auto g = oracle::moments(bm);
    const double z = (a.mean - g.mean) / std::sqrt(a.var / N + g.var / batches);
    worst = std::max(worst, std::abs(z));
    detail += std::string(" ") + kFunctionalNames[k] + fmt("=%.2f", z);
  }
  return {worst < 4.0, detail};
}

// ---------------------------------------------------------------- scenarios

struct SeedFit {
  Trace trace;
  GeneratedDataset ds;
};

GeneratedDataset scenario_data(Scenario sc, std::uint64_t seed) {
  ScenarioConfig c;
  c.scenario = sc;
  c.n = 100;
  c.side = 16;
  c.seed = seed;
  return generate(c);
}

Trace fit(const GeneratedDataset& ds, const SamplerOptions& o, std::uint64_t seed, bool record_means = false) {
  ChainConfig cc;
  cc.n_iter = 2000;
  cc.seed = seed;
  cc.record_means = record_means;
  return run_chain(FunctionalDataset::centered(ds.grid, ds.y), Hyperparameters{}, cc, o);
}

SamplerOptions independent_options() {
  SamplerOptions o;
  o.errors = ErrorModel::Independent;
  return o;
}

double global_ari(const Trace& tr, const std::vector<int>& truth, int k) {
  const auto mt = MembershipTensor::from_trace(tr);
  return adjusted_rand_index(consolidate_clusters(pairwise_distance(mt, tr.n), k), truth);
}

double level_ari(const Trace& tr, const std::vector<int>& truth, int j) {
  const auto mt = MembershipTensor::from_trace(tr);
  return adjusted_rand_index(consolidate_clusters(pairwise_distance_level(mt, j), distinct(truth)), truth);
}

Outcome global_scenario() {
  std::vector<double> f, d;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const GeneratedDataset ds = scenario_data(Scenario::Global, seed);
    f.push_back(global_ari(fit(ds, independent_options(), seed), ds.global_labels, ds.num_global_clusters));
    d.push_back(global_ari(fit(ds, global_dpm_options(), seed), ds.global_labels, ds.num_global_clusters));
  }
  return {mean(f) >= 0.85 && mean(d) < mean(f), fmt("fpdpm-independent ARI %.3f, dpm ARI %.3f", mean(f), mean(d))};
}

Outcome local_scenario() {
  std::vector<double> f1, d1, d2;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const GeneratedDataset ds = scenario_data(Scenario::Local, seed);
    const Trace tf = fit(ds, SamplerOptions{}, seed);
    const Trace td = fit(ds, global_dpm_options(), seed);
    f1.push_back(level_ari(tf, ds.level_labels[1], 1));
    d1.push_back(level_ari(td, ds.level_labels[1], 1));
    d2.push_back(level_ari(td, ds.level_labels[2], 2));
  }
  return {mean(f1) >= 0.9 && mean(d1) <= 0.3 && mean(d2) <= 0.3,
          fmt("fpdpm level-1 ARI %.3f, dpm level-1 ARI %.3f, dpm level-2 ARI %.3f", mean(f1), mean(d1), mean(d2))};
}

Outcome spatial_scenario() {
  std::vector<double> f, d;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const GeneratedDataset ds = scenario_data(Scenario::Spatial, seed);
    f.push_back(global_ari(fit(ds, independent_options(), seed), ds.global_labels, 16));
    d.push_back(global_ari(fit(ds, global_dpm_options(), seed), ds.global_labels, 16));
  }
  return {mean(f) >= 0.9 && mean(d) < mean(f), fmt("fpdpm-independent ARI %.3f, dpm ARI %.3f", mean(f), mean(d))};
}

Outcome complexity_curve() {
  std::vector<double> Ls, tf, tl;
  for (int side : {4, 8, 16}) {
    ScenarioConfig c;
    c.n = 100;
    c.side = side;
    c.seed = 3;
    const GeneratedDataset ds = generate(c);
    const FunctionalDataset data = FunctionalDataset::centered(ds.grid, ds.y);
    Ls.push_back(side * side);
    tf.push_back(mean_sweep_seconds(data, Hyperparameters{}, SamplerOptions{}, 20, 20, 1));
    tl.push_back(mean_sweep_seconds(data, Hyperparameters{}, lpp_timing_options(), 20, 20, 1));
  }
  const double sf = loglog_slope(Ls, tf), sl = loglog_slope(Ls, tl);
  return {sl >= sf + 0.5, fmt("slope fpdpm %.3f, slope lpp-timing %.3f, difference %.3f (need >= 0.5)", sf, sl, sl - sf)};
}

// ---------------------------------------------------------------- post-processing

std::vector<std::vector<int>> all_partitions(int n) {
  std::vector<std::vector<int>> out;
  std::vector<int> a(n, 0);
  std::function<void(int, int)> rec = [&](int i, int m) {
    if (i == n) {
      out.push_back(a);
      return;
    }
    for (int v = 0; v <= m + 1; ++v) {
      a[i] = v;
      rec(i + 1, std::max(m, v));
    }
  };
  a[0] = 0;
  rec(1, 0);
  return out;
}

double brute_silhouette(const Eigen::MatrixXd& d, const std::vector<int>& lab) {
  const int n = static_cast<int>(lab.size());
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    double a = 0.0;
    int na = 0;
    for (int k = 0; k < n; ++k)
      if (k != i && lab[k] == lab[i]) a += d(i, k), ++na;
    if (na == 0) continue;
    a /= na;
    double b = 1e300;
    for (int c : std::set<int>(lab.begin(), lab.end())) {
      if (c == lab[i]) continue;
      double s = 0.0;
      int m = 0;
      for (int k = 0; k < n; ++k)
        if (lab[k] == c) s += d(i, k), ++m;
      b = std::min(b, s / m);
    }
    total += (b - a) / std::max(a, b);
  }
  return total / n;
}

// Naive complete linkage: recompute every cluster-pair distance at each step.
std::vector<std::pair<std::set<int>, double>> brute_linkage(const Eigen::MatrixXd& d) {
  std::vector<std::set<int>> live;
  for (int i = 0; i < d.rows(); ++i) live.push_back({i});
  std::vector<std::pair<std::set<int>, double>> merges;
  while (live.size() > 1) {
    std::size_t ba = 0, bb = 1;
    double best = 1e300;
    std::pair<int, int> key{1 << 30, 1 << 30};
    for (std::size_t a = 0; a < live.size(); ++a) {
      for (std::size_t b = a + 1; b < live.size(); ++b) {
        double h = 0.0;
        for (int x : live[a])
          for (int y : live[b]) h = std::max(h, d(x, y));
        std::pair<int, int> k{std::min(*live[a].begin(), *live[b].begin()), std::max(*live[a].begin(), *live[b].begin())};
        if (h < best || (h == best && k < key)) best = h, key = k, ba = a, bb = b;
      }
    }
    std::set<int> u = live[ba];
    u.insert(live[bb].begin(), live[bb].end());
    merges.push_back({u, best});
    live.erase(live.begin() + bb);
    live[ba] = u;
  }
  return merges;
}

Outcome postprocessing_oracles() {
  double worst = 0.0;
  int failures = 0;
  // ARI against pair counting over every pair of partitions of five units.
  const auto parts = all_partitions(5);
  for (const auto& a : parts)
    for (const auto& b : parts) worst = std::max(worst, std::abs(adjusted_rand_index(a, b) - oracle::ari_pair_count(a, b)));

  Rng rng(404);
  for (int t = 0; t < 200; ++t) {
    const int n = 3 + t % 4, levels = 1 + t % 3, R = 1 + t % 5;
    MembershipTensor mt;
    mt.R = R;
    mt.n = n;
    mt.levels = levels;
    for (int q = 0; q < R * n * levels; ++q) mt.labels.push_back(1 + static_cast<int>(rng.uniform() * 3));
    // distance as weighted co-clustering frequency per level
    const auto w = level_weights(levels, n);
    const double ws = std::accumulate(w.begin(), w.end(), 0.0);
    const DistanceMatrix dm = pairwise_distance(mt, n);
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < n; ++k) {
        double expect = 0.0;
        for (int j = 0; j < levels; ++j) {
          int same = 0;
          for (int r = 0; r < R; ++r) same += mt.at(r, i, j) == mt.at(r, k, j);
          expect += w[j] / ws * (1.0 - static_cast<double>(same) / R);
        }
        worst = std::max(worst, std::abs(dm(i, k) - expect));
      }
    }
    // complete linkage on a random distance matrix with deliberate ties
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
      for (int k = i + 1; k < n; ++k) d(i, k) = d(k, i) = (t % 2 ? std::floor(rng.uniform() * 4) : rng.uniform());
    const auto merges = complete_linkage(DistanceMatrix{d});
    const auto expect = brute_linkage(d);
    std::vector<std::set<int>> members;
    for (int i = 0; i < n; ++i) members.push_back({i});
    for (std::size_t m = 0; m < merges.size(); ++m) {
      std::set<int> u = members[merges[m].a];
      u.insert(members[merges[m].b].begin(), members[merges[m].b].end());
      members.push_back(u);
      if (u != expect[m].first) ++failures;
      worst = std::max(worst, std::abs(merges[m].height - expect[m].second));
    }
    // silhouette of every labelling with at least two clusters
    for (const auto& lab : all_partitions(n)) {
      if (distinct(lab) < 2) continue;
      worst = std::max(worst, std::abs(silhouette_width(DistanceMatrix{d}, lab) - brute_silhouette(d, lab)));
    }
  }
  // hand-computed three-unit distances
  MembershipTensor hand;
  hand.R = 2;
  hand.n = 3;
  hand.levels = 2;
  hand.labels = {1, 1, 1, 2, 2, 2, 1, 1, 1, 1, 1, 2};
  const DistanceMatrix hd = pairwise_distance(hand, 3);
  worst = std::max({worst, std::abs(hd(0, 1) - 1.0 / 6.0), std::abs(hd(0, 2) - 2.0 / 3.0), std::abs(hd(1, 2) - 0.5)});
  return {worst <= 1e-12 && failures == 0, fmt("max error %.2e, linkage mismatches %.0f", worst, failures)};
}

// ---------------------------------------------------------------- diagnostics

Outcome gelman_rubin_check() {
  const GeneratedDataset ds = scenario_data(Scenario::Global, 1);
  ChainConfig cc;
  cc.n_iter = 2000;
  cc.record_means = true;
  const auto traces =
      run_chains(FunctionalDataset::centered(ds.grid, ds.y), Hyperparameters{}, cc, SamplerOptions{}, {1, 2}, 2);
  const Eigen::MatrixXd g = gelman_rubin_means(traces);
  const double frac = (g.array() < 1.2).cast<double>().mean();
  return {frac >= 0.8, fmt("fraction of entries below 1.2: %.3f", frac)};
}

struct Check {
  const char* name;
  double budget_seconds;
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Check> checks = {
      {"wavelet round trip and Parseval", 1.0, wavelet_identities},
      {"low-rank density against dense", 5.0, density_oracle},
      {"sampler calibration (forward vs Gibbs)", 120.0, sampler_calibration},
      {"global scenario ARI", 5 * 600.0, global_scenario},
      {"local scenario per-level ARI", 5 * 900.0, local_scenario},
      {"spatial scenario ARI at k=16", 5 * 900.0, spatial_scenario},
      {"per-sweep complexity slopes", 1200.0, complexity_curve},
      {"post-processing oracles", 1.0, postprocessing_oracles},
      {"Gelman-Rubin across two chains", 1200.0, gelman_rubin_check},
  };
  int passed = 0, errors = 0;
  for (std::size_t c = 0; c < checks.size(); ++c) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = checks[c].run();
    } catch (const std::exception& e) {
      out = {false, std::string("error: ") + e.what()};
      ++errors;
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < checks[c].budget_seconds;
    const bool ok = out.pass && in_time;
    passed += ok;
    std::printf("%s  [%zu] %s: %s; %.2f s (budget %.0f s)\n", ok ? "PASS" : "FAIL", c + 1, checks[c].name,
                out.detail.c_str(), secs, checks[c].budget_seconds);
    std::fflush(stdout);
  }
  std::printf("%d of %zu acceptance checks passed\n", passed, checks.size());
  return errors == 0 ? 0 : 1;
}
