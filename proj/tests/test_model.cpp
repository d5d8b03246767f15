#include <cmath>
#include <limits>
#include <vector>

#include <gtest/gtest.h>

#include "fpdpm/errors.hpp"
#include "fpdpm/model.hpp"
#include "fpdpm/random.hpp"
#include "fpdpm/sampler.hpp"
#include "oracles.hpp"

using namespace fpdpm;

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

GibbsSampler small_sampler(int n, const Grid& grid, std::uint64_t seed = 3) {
  FunctionalDataset data;
  data.grid = grid;
  Rng rng(seed);
  data.y.resize(n, grid.size());
  for (int i = 0; i < n; ++i) data.y.row(i) = rng.normal_vector(grid.size()).transpose();
  SamplerOptions o;
  o.init_clusters = 1;
  o.warmup_sweeps = 0;
  GibbsSampler s(data, Hyperparameters{}, o, seed);
  s.initialize();
  return s;
}

}  // namespace

TEST(Rng, GammaUsesShapeRate) {
  Rng rng(1);
  std::vector<double> x;
  for (int t = 0; t < 100000; ++t) x.push_back(rng.gamma(2.5, 3.0));
  const auto m = oracle::moments(x);
  EXPECT_NEAR(m.mean, 2.5 / 3.0, 4 * m.se);
  EXPECT_NEAR(m.var, 2.5 / 9.0, 0.05 * 2.5 / 9.0);
}

TEST(Rng, BetaMean) {
  Rng rng(2);
  std::vector<double> x;
  for (int t = 0; t < 100000; ++t) x.push_back(rng.beta(1.0, 3.0));
  const auto m = oracle::moments(x);
  EXPECT_NEAR(m.mean, 0.25, 4 * m.se);
}

TEST(Rng, InverseGaussianMatchesAnalyticCdf) {
  Rng rng(3);
  const double mu = 0.7, lambda = 2.0;
  std::vector<double> x;
  for (int t = 0; t < 20000; ++t) x.push_back(rng.inverse_gaussian(mu, lambda));
  const auto cdf = [&](double v) {
    const double s = std::sqrt(lambda / v);
    return normal_cdf(s * (v / mu - 1.0)) + std::exp(2.0 * lambda / mu) * normal_cdf(-s * (v / mu + 1.0));
  };
  EXPECT_GT(oracle::ks_pvalue(x, cdf), 0.01);
}

TEST(LowRankDensity, StandardNormalAtOrigin) {
  CovarianceAtom a;
  a.Lambda = Eigen::MatrixXd::Zero(2, 0);
  a.sigma2 = 1.0;
  EXPECT_NEAR(lowrank_gaussian_logdensity(Eigen::VectorXd::Zero(2), a), -std::log(2.0 * oracle::kPi), 1e-14);
}

TEST(LowRankDensity, ZeroLoadingsGiveDiagonalDensity) {
  Rng rng(4);
  CovarianceAtom a;
  a.Lambda = Eigen::MatrixXd::Zero(6, 0);
  a.sigma2 = 0.3;
  const Eigen::VectorXd r = rng.normal_vector(6);
  double expect = 0.0;
  for (int l = 0; l < 6; ++l) expect += -0.5 * std::log(2.0 * oracle::kPi * 0.3) - r[l] * r[l] / (2.0 * 0.3);
  EXPECT_NEAR(lowrank_gaussian_logdensity(r, a), expect, 1e-12);
}

TEST(LowRankDensity, MatchesDenseCholesky) {
  Rng rng(5);
  for (int t = 0; t < 200; ++t) {
    const int L = rng.uniform_int(1, 8);
    const int K = rng.uniform_int(1, 3);
    CovarianceAtom a;
    a.Lambda = Eigen::MatrixXd::NullaryExpr(L, K, [&] { return rng.normal(); });
    a.sigma2 = rng.uniform(0.05, 2.0);
    const Eigen::VectorXd r = rng.normal_vector(L);
    const double dense = oracle::dense_gaussian_logdensity(r, a.dense_covariance());
    EXPECT_NEAR(lowrank_gaussian_logdensity(r, a), dense, 1e-8 * std::abs(dense));
    const LowRankGaussian g(a.Lambda, a.sigma2);
    EXPECT_NEAR(g.log_density(r), dense, 1e-8 * std::abs(dense));
    EXPECT_NEAR(g.log_density_from_stats(r.squaredNorm(), a.Lambda.transpose() * r), dense, 1e-8 * std::abs(dense));
  }
}

TEST(LowRankDensity, DiagonalBaseMatchesDense) {
  Rng rng(6);
  const Eigen::MatrixXd lam = Eigen::MatrixXd::NullaryExpr(5, 2, [&] { return rng.normal(); });
  Eigen::VectorXd d(5);
  for (int l = 0; l < 5; ++l) d[l] = rng.uniform(0.1, 1.0);
  const Eigen::VectorXd r = rng.normal_vector(5);
  const Eigen::MatrixXd S = lam * lam.transpose() + Eigen::MatrixXd(d.asDiagonal());
  EXPECT_NEAR(diag_lowrank_gaussian_logdensity(r, lam, d), oracle::dense_gaussian_logdensity(r, S), 1e-10);
}

TEST(StickWeights, ProductForm) {
  const auto w = stick_weights({0.5, 0.5, 1.0});
  ASSERT_EQ(w.size(), 3u);
  EXPECT_DOUBLE_EQ(w[0], 0.5);
  EXPECT_DOUBLE_EQ(w[1], 0.25);
  EXPECT_DOUBLE_EQ(w[2], 0.25);
}

TEST(CovarianceAtom, XiIsCumulativeProduct) {
  CovarianceAtom a;
  a.delta = Eigen::Vector3d(2.0, 3.0, 0.5);
  const Eigen::VectorXd xi = a.xi();
  EXPECT_DOUBLE_EQ(xi[0], 2.0);
  EXPECT_DOUBLE_EQ(xi[1], 6.0);
  EXPECT_DOUBLE_EQ(xi[2], 3.0);
}

TEST(ComposeMean, ZeroAtomsGiveZero) {
  GibbsSampler s = small_sampler(3, Grid::square(4));
  auto& st = s.state();
  for (auto& atoms : st.coef_atoms)
    for (auto& a : atoms) a.value.setZero();
  EXPECT_EQ(compose_mean(st, 0, s.basis()).norm(), 0.0);
}

TEST(ComposeMean, SingleLevelZeroAtom) {
  const Grid g = Grid::square(4);
  GibbsSampler s = small_sampler(3, g);
  auto& st = s.state();
  for (auto& atoms : st.coef_atoms)
    for (auto& a : atoms) a.value.setZero();
  const Eigen::VectorXd beta = Eigen::Vector3d(1.0, -2.0, 0.5);
  st.coef_atoms[0][st.coef_families[0].labels[1]].value = beta;
  const Image expect = synthesize_level(0, beta, g);
  const Eigen::VectorXd got = compose_mean(st, 1, s.basis());
  EXPECT_LT((got - Eigen::Map<const Eigen::VectorXd>(expect.data(), expect.size())).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ComposeMean, SharedMembershipsShareMeans) {
  GibbsSampler s = small_sampler(4, Grid::square(4));
  auto& st = s.state();
  for (auto& fam : st.coef_families) fam.labels[2] = fam.labels[3];
  EXPECT_EQ(compose_mean(st, 2, s.basis()), compose_mean(st, 3, s.basis()));
}

TEST(CompleteLikelihood, ViolatedIndicatorIsMinusInfinity) {
  GibbsSampler s = small_sampler(3, Grid::line(4));
  auto& st = s.state();
  const Eigen::VectorXd y = s.observations().col(0);
  st.coef_families[1].u[0] = 1.0;
  EXPECT_EQ(log_complete_likelihood(y, st, 0, s.basis()), -std::numeric_limits<double>::infinity());
}

TEST(CompleteLikelihood, ExactMeanUnitVariance) {
  GibbsSampler s = small_sampler(3, Grid::line(4));
  auto& st = s.state();
  for (auto& fam : st.coef_families) std::fill(fam.u.begin(), fam.u.end(), 0.0);
  std::fill(st.cov_family.u.begin(), st.cov_family.u.end(), 0.0);
  for (auto& a : st.cov_atoms) {
    a.Lambda = Eigen::MatrixXd::Zero(4, 0);
    a.sigma2 = 1.0;
  }
  const Eigen::VectorXd y = compose_mean(st, 0, s.basis());
  EXPECT_NEAR(log_complete_likelihood(y, st, 0, s.basis()), -2.0 * std::log(2.0 * oracle::kPi), 1e-12);
}

TEST(CompleteLikelihood, MatchesDenseDensity) {
  GibbsSampler s = small_sampler(3, Grid::line(4));
  auto& st = s.state();
  for (auto& fam : st.coef_families) std::fill(fam.u.begin(), fam.u.end(), 0.0);
  std::fill(st.cov_family.u.begin(), st.cov_family.u.end(), 0.0);
  Rng rng(8);
  for (auto& a : st.cov_atoms) {
    a.Lambda = Eigen::MatrixXd::NullaryExpr(4, 2, [&] { return rng.normal(); });
    a.sigma2 = 0.4;
  }
  const Eigen::VectorXd y = rng.normal_vector(4);
  const Eigen::VectorXd r = y - compose_mean(st, 1, s.basis());
  EXPECT_NEAR(log_complete_likelihood(y, st, 1, s.basis()),
              oracle::dense_gaussian_logdensity(r, st.cov_atom_of(1).dense_covariance()), 1e-8);
}

TEST(BaseMeasures, CoefficientVarianceMean) {
  Hyperparameters h;
  h.omega2 = 2.0;
  Rng rng(9);
  std::vector<double> tau2;
  for (int t = 0; t < 20000; ++t) {
    const CoefficientAtom a = draw_coefficient_atom(h, 0, 5, rng);
    for (int k = 0; k < 5; ++k) tau2.push_back(a.tau2[k]);
  }
  const auto m = oracle::moments(tau2);
  EXPECT_NEAR(m.mean, 0.5, 3 * m.se);
}

TEST(BaseMeasures, LargeRateCollapsesCoefficients) {
  Hyperparameters h;
  h.omega2 = 1e6;
  Rng rng(10);
  std::vector<double> beta;
  for (int t = 0; t < 10000; ++t) beta.push_back(draw_coefficient_atom(h, 1, 1, rng).value[0]);
  EXPECT_LT(oracle::moments(beta).var, 1e-4);
}

TEST(BaseMeasures, NoisePrecisionMean) {
  Hyperparameters h;
  Rng rng(11);
  std::vector<double> prec;
  for (int t = 0; t < 100000; ++t) prec.push_back(1.0 / draw_covariance_atom(h, 4, 0, rng).sigma2);
  const auto m = oracle::moments(prec);
  EXPECT_NEAR(m.mean, 2.5 / 3.0, 3 * m.se);
}

TEST(BaseMeasures, AppendedColumnExtendsShrinkage) {
  Hyperparameters h;
  Rng rng(12);
  CovarianceAtom a = draw_covariance_atom(h, 6, 2, rng);
  append_factor_column(a, h, rng);
  EXPECT_EQ(a.K(), 3);
  EXPECT_EQ(a.phi.cols(), 3);
  EXPECT_EQ(a.delta.size(), 3);
  EXPECT_EQ(a.Lambda.rows(), 6);
}

TEST(RetainedCount, NinetyPercentBurnIn) {
  EXPECT_EQ(retained_count(2000, 0.9), 200);
  EXPECT_EQ(retained_count(2000, 0.9, 2), 100);
}

TEST(Hyperparameters, ValidateRejectsBadValues) {
  Hyperparameters h;
  h.alpha = -1.0;
  EXPECT_THROW(h.validate(), ConfigError);
}
