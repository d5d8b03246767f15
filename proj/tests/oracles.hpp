#pragma once

// Reference computations written independently of the library, used as
// oracles by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

constexpr double kPi = 3.14159265358979323846;

/// log N(r; 0, S) through a dense Cholesky factor.
inline double dense_gaussian_logdensity(const Eigen::VectorXd& r, const Eigen::MatrixXd& S) {
  const Eigen::LLT<Eigen::MatrixXd> llt(S);
  const Eigen::VectorXd z = llt.matrixL().solve(r);
  double logdet = 0.0;
  for (Eigen::Index k = 0; k < S.rows(); ++k) logdet += 2.0 * std::log(llt.matrixL()(k, k));
  return -0.5 * (static_cast<double>(r.size()) * std::log(2.0 * kPi) + logdet + z.squaredNorm());
}

/// Orthonormal 1-D Haar analysis matrix (rows = basis functions) of size n,
/// ordered [scaling, level 0, level 1, ...], built by recursive averaging.
inline Eigen::MatrixXd haar_matrix_1d(int n) {
  if (n == 1) return Eigen::MatrixXd::Ones(1, 1);
  const Eigen::MatrixXd coarse = haar_matrix_1d(n / 2);
  Eigen::MatrixXd out(n, n);
  // Coarse rows (scaling and coarser details) act on pairwise averages.
  for (int r = 0; r < n / 2; ++r) {
    for (int c = 0; c < n / 2; ++c) {
      out(r, 2 * c) = coarse(r, c) / std::sqrt(2.0);
      out(r, 2 * c + 1) = coarse(r, c) / std::sqrt(2.0);
    }
  }
  out.bottomRows(n / 2).setZero();
  for (int k = 0; k < n / 2; ++k) {
    out(n / 2 + k, 2 * k) = 1.0 / std::sqrt(2.0);
    out(n / 2 + k, 2 * k + 1) = -1.0 / std::sqrt(2.0);
  }
  return out;
}

/// ARI by enumerating every unordered pair.
inline double ari_pair_count(const std::vector<int>& a, const std::vector<int>& b) {
  const std::size_t n = a.size();
  double both = 0, only_a = 0, only_b = 0, neither = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool sa = a[i] == a[j];
      const bool sb = b[i] == b[j];
      if (sa && sb) both += 1;
      else if (sa) only_a += 1;
      else if (sb) only_b += 1;
      else neither += 1;
    }
  }
  const double total = both + only_a + only_b + neither;
  const double pa = both + only_a;
  const double pb = both + only_b;
  const double expected = pa * pb / total;
  const double max_index = 0.5 * (pa + pb);
  if (max_index == expected) return 1.0;
  return (both - expected) / (max_index - expected);
}

/// Asymptotic Kolmogorov-Smirnov p-value of a one-sample test against `cdf`.
inline double ks_pvalue(std::vector<double> x, const std::function<double(double)>& cdf) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double f = cdf(x[k]);
    d = std::max({d, (k + 1) / n - f, f - k / n});
  }
  const double sn = std::sqrt(n);
  const double lambda = (sn + 0.12 + 0.11 / sn) * d;
  double p = 0.0;
  for (int k = 1; k <= 100; ++k) p += 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
  return std::clamp(p, 0.0, 1.0);
}

struct Moments {
  double mean = 0.0;
  double var = 0.0;
  double se = 0.0;  // standard error of the mean
};

inline Moments moments(const std::vector<double>& x) {
  Moments m;
  const double n = static_cast<double>(x.size());
  m.mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  for (double v : x) m.var += (v - m.mean) * (v - m.mean);
  m.var /= (n - 1.0);
  m.se = std::sqrt(m.var / n);
  return m;
}

}  // namespace oracle
