#include <benchmark/benchmark.h>

#include "fpdpm/baselines.hpp"
#include "fpdpm/model.hpp"
#include "fpdpm/postproc.hpp"
#include "fpdpm/sampler.hpp"
#include "fpdpm/simgen.hpp"
#include "fpdpm/wavelet.hpp"

using namespace fpdpm;

namespace {

FunctionalDataset scenario(int side, int n) {
  ScenarioConfig c;
  c.n = n;
  c.side = side;
  c.seed = 3;
  const GeneratedDataset ds = generate(c);
  return FunctionalDataset::centered(ds.grid, ds.y);
}

void sweep_with(benchmark::State& state, const SamplerOptions& o) {
  const int side = static_cast<int>(state.range(0));
  const FunctionalDataset data = scenario(side, 100);
  GibbsSampler s(data, Hyperparameters{}, o, 1);
  s.initialize();
  int t = 0;
  for (int w = 0; w < 20; ++w) s.sweep(++t);
  for (auto _ : state) s.sweep(++t);
  state.counters["L"] = side * side;
}

void BM_SweepFpdpm(benchmark::State& state) { sweep_with(state, SamplerOptions{}); }

void BM_SweepFpdpmIndependent(benchmark::State& state) {
  SamplerOptions o;
  o.errors = ErrorModel::Independent;
  sweep_with(state, o);
}

void BM_SweepLppTiming(benchmark::State& state) { sweep_with(state, lpp_timing_options()); }

void BM_SweepDpm(benchmark::State& state) { sweep_with(state, global_dpm_options()); }

void BM_ForwardDwt(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  Rng rng(1);
  const Image img = Image::NullaryExpr(side, side, [&] { return rng.normal(); });
  for (auto _ : state) benchmark::DoNotOptimize(forward_dwt(img));
  state.SetItemsProcessed(state.iterations() * side * side);
}

void BM_LowRankDensity(benchmark::State& state) {
  const int L = static_cast<int>(state.range(0));
  Rng rng(2);
  Eigen::MatrixXd lam(L, 3);
  for (int k = 0; k < 3; ++k) lam.col(k) = rng.normal_vector(L);
  const LowRankGaussian g(lam, 0.5);
  const Eigen::VectorXd r = rng.normal_vector(L);
  for (auto _ : state) benchmark::DoNotOptimize(g.log_density(r));
}

void BM_PairwiseDistance(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(3);
  MembershipTensor mt;
  mt.R = 200;
  mt.n = n;
  mt.levels = 4;
  for (int q = 0; q < mt.R * n * mt.levels; ++q) mt.labels.push_back(1 + static_cast<int>(rng.uniform() * 5));
  for (auto _ : state) benchmark::DoNotOptimize(pairwise_distance(mt, n));
}

}  // namespace

BENCHMARK(BM_SweepFpdpm)->Arg(4)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SweepFpdpmIndependent)->Arg(4)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SweepLppTiming)->Arg(4)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SweepDpm)->Arg(4)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ForwardDwt)->Arg(16)->Arg(64)->Arg(256);
BENCHMARK(BM_LowRankDensity)->Arg(16)->Arg(64)->Arg(256);
BENCHMARK(BM_PairwiseDistance)->Arg(50)->Arg(100)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
