#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "fpdpm/errors.hpp"
#include "fpdpm/simgen.hpp"
#include "oracles.hpp"

using namespace fpdpm;

namespace {

ScenarioConfig config(Scenario s, int n, int side, std::uint64_t seed, NoiseModel noise = NoiseModel::Independent) {
  ScenarioConfig c;
  c.scenario = s;
  c.n = n;
  c.side = side;
  c.seed = seed;
  c.noise = noise;
  return c;
}

WaveletCoefficients unit_coefficients(const GeneratedDataset& ds, int i) {
  const Eigen::VectorXd row = ds.theta.row(i).transpose();
  return forward_dwt(Eigen::Map<const Image>(row.data(), ds.grid.rows(), ds.grid.cols()));
}

}  // namespace

TEST(Global, SharedAtomsAndEightPatterns) {
  const GeneratedDataset ds = generate(config(Scenario::Global, 300, 16, 1));
  std::map<int, Eigen::VectorXd> seen;
  for (int i = 0; i < 300; ++i) {
    const int g = ds.global_labels[i];
    const Eigen::VectorXd th = ds.theta.row(i).transpose();
    auto [it, fresh] = seen.emplace(g, th);
    if (!fresh) EXPECT_EQ(it->second, th);
  }
  EXPECT_EQ(seen.size(), 8u);
  EXPECT_EQ(ds.num_global_clusters, 8);
  for (int i = 0; i < 300; ++i) {
    const WaveletCoefficients w = unit_coefficients(ds, i);
    EXPECT_NEAR(w.scaling, 0.0, 1e-10);
    for (int j = 1; j <= ds.grid.J(); ++j) EXPECT_LT(w.levels[j].cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Global, AtomEntriesFollowNormalMixture) {
  std::vector<double> entries;
  for (std::uint64_t seed = 1; seed <= 1500; ++seed) {
    const GeneratedDataset ds = generate(config(Scenario::Global, 40, 4, seed));
    std::set<int> done;
    for (int i = 0; i < 40; ++i) {
      if (!done.insert(ds.global_labels[i]).second) continue;
      const WaveletCoefficients w = unit_coefficients(ds, i);
      for (int k = 0; k < 3; ++k) entries.push_back(w.levels[0][k]);
    }
  }
  const auto m = oracle::moments(entries);
  EXPECT_NEAR(m.mean, 0.0, 3 * m.se);
  EXPECT_NEAR(m.var, 5.0, 3 * std::sqrt(18.0 / entries.size()) + 0.05);
}

TEST(Global, LabelsAreUniform) {
  const GeneratedDataset ds = generate(config(Scenario::Global, 10000, 4, 2));
  std::vector<double> counts(8, 0.0);
  for (int g : ds.global_labels) counts[g - 1] += 1.0;
  double chi2 = 0.0;
  for (double c : counts) chi2 += (c - 1250.0) * (c - 1250.0) / 1250.0;
  EXPECT_LT(chi2, 24.32);
}

TEST(Local, LevelLabelsIndependent) {
  const GeneratedDataset ds = generate(config(Scenario::Local, 10000, 8, 3));
  ASSERT_EQ(ds.level_labels.size(), 3u);
  Eigen::VectorXd a(10000), b(10000);
  for (int i = 0; i < 10000; ++i) {
    a[i] = ds.level_labels[0][i];
    b[i] = ds.level_labels[1][i];
  }
  const double ca = a.mean(), cb = b.mean();
  const double rho = ((a.array() - ca) * (b.array() - cb)).sum() /
                     std::sqrt((a.array() - ca).square().sum() * (b.array() - cb).square().sum());
  EXPECT_LT(std::abs(rho), 0.05);
}

TEST(Local, AtomsMatchLabelsAndZeroFrequencies) {
  double zero2 = 0.0, pos0 = 0.0, neg0 = 0.0, total = 0.0;
  for (std::uint64_t seed = 1; seed <= 400; ++seed) {
    const GeneratedDataset ds = generate(config(Scenario::Local, 200, 8, seed));
    std::vector<std::map<int, Eigen::VectorXd>> atoms(3);
    for (int i = 0; i < 200; ++i) {
      const WaveletCoefficients w = unit_coefficients(ds, i);
      for (int j = 0; j < 3; ++j) {
        const int h = ds.level_labels[j][i];
        ASSERT_GE(h, 1);
        ASSERT_LE(h, 27);
        auto [it, fresh] = atoms[j].emplace(h, w.levels[j]);
        if (!fresh) ASSERT_LT((it->second - w.levels[j]).cwiseAbs().maxCoeff(), 1e-10);
      }
      zero2 += w.levels[2].cwiseAbs().maxCoeff() < 1e-9 ? 1.0 : 0.0;
      const double m0 = w.levels[0].mean();
      pos0 += m0 > 1e-9 ? 1.0 : 0.0;
      neg0 += m0 < -1e-9 ? 1.0 : 0.0;
      total += 1.0;
    }
  }
  EXPECT_NEAR(zero2 / total, 0.5, 0.03);
  EXPECT_NEAR(pos0 / total, 1.0 / 3.0, 0.03);
  EXPECT_NEAR(neg0 / total, 1.0 / 3.0, 0.03);
}

TEST(Spatial, DiscMaskAndPatterns) {
  const int N = 32;
  const GeneratedDataset ds = generate(config(Scenario::Spatial, 300, N, 4));
  const double cx[4] = {0.25, 0.75, 0.25, 0.75};
  const double cy[4] = {0.25, 0.25, 0.75, 0.75};
  for (int m = 0; m < 4; ++m) {
    for (int r = 0; r < N; ++r) {
      for (int c = 0; c < N; ++c) {
        const double x = (c + 0.5) / N, y = (r + 0.5) / N;
        const bool inside = (x - cx[m]) * (x - cx[m]) + (y - cy[m]) * (y - cy[m]) < 0.025;
        EXPECT_EQ(in_disc(r, c, N, m), inside);
      }
    }
  }
  std::set<int> patterns;
  for (int i = 0; i < 300; ++i) {
    patterns.insert(ds.global_labels[i]);
    for (int c = 0; c < N; ++c) {
      for (int r = 0; r < N; ++r) {
        bool any = false;
        for (int m = 0; m < 4; ++m) any = any || in_disc(r, c, N, m);
        const double v = ds.theta(i, c * N + r);
        if (!any) ASSERT_EQ(v, 0.0);
        else ASSERT_EQ(std::abs(v), 0.5);
      }
    }
  }
  EXPECT_GE(patterns.size(), 14u);
  EXPECT_LE(patterns.size(), 16u);
}

TEST(Errors, IndependentVariancesByCluster) {
  const ScenarioConfig c = config(Scenario::Global, 300, 32, 5);
  Rng rng(5);
  const GeneratedErrors e = gen_errors(c, 300, rng);
  std::vector<double> sorted = e.sigma2;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(sorted, (std::vector<double>{0.001, 0.005, 0.01}));
  for (int s = 1; s <= 3; ++s) {
    double ss = 0.0, cnt = 0.0;
    for (int i = 0; i < 300; ++i) {
      if (e.labels[i] != s) continue;
      ss += e.eps.row(i).squaredNorm();
      cnt += e.eps.cols();
    }
    EXPECT_NEAR(ss / cnt, e.sigma2[s - 1], 0.1 * e.sigma2[s - 1]);
  }
}

TEST(Errors, LowRankSampleCovariance) {
  const ScenarioConfig c = config(Scenario::Global, 30000, 4, 6, NoiseModel::LowRank);
  Rng rng(6);
  const GeneratedErrors e = gen_errors(c, 30000, rng);
  const Eigen::MatrixXd truth =
      e.loadings[0] * e.loadings[0].transpose() + e.sigma2[0] * Eigen::MatrixXd::Identity(16, 16);
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(16, 16);
  double cnt = 0.0;
  for (int i = 0; i < 30000; ++i) {
    if (e.labels[i] != 1) continue;
    S += e.eps.row(i).transpose() * e.eps.row(i);
    cnt += 1.0;
  }
  S /= cnt;
  EXPECT_LT((S - truth).norm() / truth.norm(), 0.1);
}

TEST(Errors, SpikeAndSlabSparsity) {
  const ScenarioConfig c = config(Scenario::Global, 3, 16, 7, NoiseModel::HighRank);
  Rng rng(7);
  const GeneratedErrors e = gen_errors(c, 3, rng);
  double zeros = 0.0, total = 0.0;
  for (const auto& lam : e.loadings) {
    EXPECT_EQ(lam.cols(), 10);
    zeros += (lam.array() == 0.0).cast<double>().sum();
    total += lam.size();
  }
  EXPECT_NEAR(zeros / total, 0.5, 0.03);
}

TEST(Snr, Identities) {
  const Eigen::MatrixXd theta = (Eigen::MatrixXd(2, 2) << 3, 4, 1, 0).finished();
  const Eigen::MatrixXd eps = (Eigen::MatrixXd(2, 2) << 0, 5, 0, -1).finished();
  EXPECT_NEAR(snr(theta, eps), 0.0, 1e-12);
  EXPECT_NEAR(snr(10.0 * theta, eps), 20.0, 1e-12);
  EXPECT_THROW(snr(theta, Eigen::MatrixXd::Zero(3, 2)), ParameterError);
}

TEST(Snr, IndependentAboveHighRank) {
  const GeneratedDataset ind = generate(config(Scenario::Global, 300, 32, 8));
  const GeneratedDataset high = generate(config(Scenario::Global, 300, 32, 8, NoiseModel::HighRank));
  EXPECT_GT(ind.snr_db, 5.0);
  EXPECT_GT(ind.snr_db, high.snr_db);
}

TEST(Generate, DeterministicAndConsistent) {
  for (Scenario s : {Scenario::Global, Scenario::Local, Scenario::Spatial}) {
    const GeneratedDataset a = generate(config(s, 30, 8, 9, NoiseModel::LowRank));
    const GeneratedDataset b = generate(config(s, 30, 8, 9, NoiseModel::LowRank));
    EXPECT_EQ(a.y, b.y);
    EXPECT_EQ(a.theta, b.theta);
    EXPECT_EQ(a.global_labels, b.global_labels);
    EXPECT_EQ(a.cov_labels, b.cov_labels);
    EXPECT_EQ(a.y.rows(), 30);
    EXPECT_EQ(a.y.cols(), 64);
  }
}

TEST(ScenarioConfig, ValidationNamesField) {
  ScenarioConfig c;
  c.side = 12;
  try {
    c.validate();
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("grid"), std::string::npos);
  }
  c.side = 16;
  c.n = 1;
  EXPECT_THROW(c.validate(), ConfigError);
}
