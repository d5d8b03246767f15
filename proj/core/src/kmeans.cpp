#include "fpdpm/kmeans.hpp"

#include <limits>
#include <map>

#include "fpdpm/errors.hpp"
#include "fpdpm/random.hpp"

namespace fpdpm {
namespace {

KMeansResult lloyd(const Eigen::MatrixXd& X, int k, Rng& rng, int max_iter) {
  const Eigen::Index n = X.rows();
  KMeansResult res;
  res.centers.resize(k, X.cols());

  // k-means++ seeding
  Eigen::VectorXd d2 = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
  int pick = rng.uniform_int(0, static_cast<int>(n) - 1);
  for (int c = 0; c < k; ++c) {
    res.centers.row(c) = X.row(pick);
    for (Eigen::Index i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], (X.row(i) - res.centers.row(c)).squaredNorm());
    }
    if (c + 1 == k) break;
    const double total = d2.sum();
    if (!(total > 0.0)) {
      pick = rng.uniform_int(0, static_cast<int>(n) - 1);
      continue;
    }
    double target = rng.uniform() * total;
    pick = static_cast<int>(n) - 1;
    for (Eigen::Index i = 0; i < n; ++i) {
      target -= d2[i];
      if (target <= 0.0) {
        pick = static_cast<int>(i);
        break;
      }
    }
  }

  res.labels.assign(n, -1);
  for (int it = 0; it < max_iter; ++it) {
    bool changed = false;
    res.inertia = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d = (X.row(i) - res.centers.row(c)).squaredNorm();
        if (d < bd) {
          bd = d;
          best = c;
        }
      }
      if (res.labels[i] != best) changed = true;
      res.labels[i] = best;
      res.inertia += bd;
    }
    if (!changed && it > 0) break;

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, X.cols());
    std::vector<int> counts(k, 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(res.labels[i]) += X.row(i);
      ++counts[res.labels[i]];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        res.centers.row(c) = sums.row(c) / counts[c];
        continue;
      }
      Eigen::Index far = 0;
      double fd = -1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double d = (X.row(i) - res.centers.row(res.labels[i])).squaredNorm();
        if (d > fd) {
          fd = d;
          far = i;
        }
      }
      res.centers.row(c) = X.row(far);
    }
  }
  return res;
}

}  // namespace

KMeansResult kmeans(const Eigen::MatrixXd& points, int k, int restarts, std::uint64_t seed, int max_iter) {
  if (points.rows() == 0) throw ParameterError("k-means needs at least one point");
  if (k < 1 || k > points.rows()) throw ParameterError("k must lie in [1, number of points]");
  if (restarts < 1) throw ParameterError("k-means needs at least one restart");
  Rng master(seed);
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    Rng sub(master.split());
    KMeansResult res = lloyd(points, k, sub, max_iter);
    if (res.inertia < best.inertia) best = std::move(res);
  }
  return best;
}

int compact_labels(std::vector<int>& labels) {
  std::map<int, int> remap;
  for (int& l : labels) {
    auto it = remap.find(l);
    if (it == remap.end()) it = remap.emplace(l, static_cast<int>(remap.size())).first;
    l = it->second;
  }
  return static_cast<int>(remap.size());
}

}  // namespace fpdpm
