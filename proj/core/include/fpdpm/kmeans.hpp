#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace fpdpm {

struct KMeansResult {
  std::vector<int> labels;  // 0-based
  Eigen::MatrixXd centers;  // k x p
  double inertia = 0.0;     // total within-cluster squared distance
};

/// Lloyd's algorithm with k-means++ seeding. Rows of `points` are observations.
/// Each restart draws from its own substream of `seed`; the lowest inertia wins
/// (earliest restart on ties). Clusters that empty out are reseeded at the point
/// farthest from its center.
KMeansResult kmeans(const Eigen::MatrixXd& points, int k, int restarts, std::uint64_t seed,
                    int max_iter = 100);

/// Relabels to 0..m-1 in order of first appearance; returns m.
int compact_labels(std::vector<int>& labels);

}  // namespace fpdpm
