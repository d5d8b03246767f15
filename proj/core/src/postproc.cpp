#include "fpdpm/postproc.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <string>

#include "fpdpm/errors.hpp"

namespace fpdpm {

MembershipTensor MembershipTensor::from_trace(const Trace& trace) {
  if (trace.memberships.empty()) throw ParameterError("trace has no recorded memberships");
  MembershipTensor mt;
  mt.R = static_cast<int>(trace.memberships.size());
  mt.n = trace.n;
  mt.levels = trace.num_levels;
  mt.labels.reserve(static_cast<std::size_t>(mt.R) * mt.n * mt.levels);
  for (const auto& row : trace.memberships) {
    for (int v : row) mt.labels.push_back(v + 1);
  }
  return mt;
}

MembershipTensor MembershipTensor::from_traces(const std::vector<Trace>& traces) {
  if (traces.empty()) throw ParameterError("no traces");
  MembershipTensor mt = from_trace(traces.front());
  for (std::size_t t = 1; t < traces.size(); ++t) {
    const MembershipTensor more = from_trace(traces[t]);
    if (more.n != mt.n || more.levels != mt.levels) throw ParameterError("traces differ in shape");
    mt.labels.insert(mt.labels.end(), more.labels.begin(), more.labels.end());
    mt.R += more.R;
  }
  return mt;
}

std::vector<double> level_weights(int levels, int n_units) {
  std::vector<double> w(levels);
  for (int j = 0; j < levels; ++j) {
    if (j == 0) {
      w[j] = 2.0;
    } else if (std::ldexp(1.0, j) < n_units) {
      w[j] = 1.0 / j;
    } else {
      w[j] = 1.0 / (2.0 * j);
    }
  }
  return w;
}

DistanceMatrix pairwise_distance(const MembershipTensor& mt, int n_units_for_weights) {
  if (mt.R < 1) throw ParameterError("membership tensor has no samples");
  const std::vector<double> w = level_weights(mt.levels, n_units_for_weights);
  double wsum = 0.0;
  for (double v : w) wsum += v;
  DistanceMatrix dm;
  dm.d = Eigen::MatrixXd::Zero(mt.n, mt.n);
  for (int i = 0; i < mt.n; ++i) {
    for (int k = i + 1; k < mt.n; ++k) {
      double acc = 0.0;
      for (int r = 0; r < mt.R; ++r) {
        double s = 0.0;
        for (int j = 0; j < mt.levels; ++j) {
          if (mt.at(r, i, j) != mt.at(r, k, j)) s += w[j];
        }
        acc += s / wsum;
      }
      dm.d(i, k) = dm.d(k, i) = acc / mt.R;
    }
  }
  return dm;
}

DistanceMatrix pairwise_distance_level(const MembershipTensor& mt, int level) {
  if (mt.R < 1) throw ParameterError("membership tensor has no samples");
  if (level < 0 || level >= mt.levels) throw ParameterError("level out of range");
  DistanceMatrix dm;
  dm.d = Eigen::MatrixXd::Zero(mt.n, mt.n);
  for (int i = 0; i < mt.n; ++i) {
    for (int k = i + 1; k < mt.n; ++k) {
      int diff = 0;
      for (int r = 0; r < mt.R; ++r) diff += mt.at(r, i, level) != mt.at(r, k, level);
      dm.d(i, k) = dm.d(k, i) = static_cast<double>(diff) / mt.R;
    }
  }
  return dm;
}

std::vector<Merge> complete_linkage(const DistanceMatrix& dm) {
  const int n = dm.n();
  Eigen::MatrixXd d = dm.d;
  std::vector<bool> active(n, true);
  std::vector<int> id(n), size(n, 1);
  for (int i = 0; i < n; ++i) id[i] = i;
  std::vector<Merge> merges;
  for (int t = 0; t + 1 < n; ++t) {
    int bi = -1, bk = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      if (!active[i]) continue;
      for (int k = i + 1; k < n; ++k) {
        if (active[k] && d(i, k) < best) {
          best = d(i, k);
          bi = i;
          bk = k;
        }
      }
    }
    // Slot i keeps the merged cluster, so slots stay keyed by their lowest member.
    merges.push_back({std::min(id[bi], id[bk]), std::max(id[bi], id[bk]), best, size[bi] + size[bk]});
    for (int m = 0; m < n; ++m) {
      if (active[m] && m != bi && m != bk) d(bi, m) = d(m, bi) = std::max(d(bi, m), d(bk, m));
    }
    active[bk] = false;
    size[bi] += size[bk];
    id[bi] = n + t;
  }
  return merges;
}

std::vector<int> cut_tree(const std::vector<Merge>& merges, int n, int k) {
  if (k < 1 || k > n) throw ParameterError("k must lie in [1, n]");
  std::vector<int> parent(2 * n, -1);
  for (int t = 0; t < n - k; ++t) {
    parent[merges[t].a] = n + t;
    parent[merges[t].b] = n + t;
  }
  std::vector<int> labels(n);
  std::map<int, int> number;
  for (int i = 0; i < n; ++i) {
    int root = i;
    while (parent[root] >= 0) root = parent[root];
    auto it = number.find(root);
    if (it == number.end()) it = number.emplace(root, static_cast<int>(number.size()) + 1).first;
    labels[i] = it->second;
  }
  return labels;
}

std::vector<int> consolidate_clusters(const DistanceMatrix& dm, int k) {
  if (k < 1 || k > dm.n()) {
    throw ParameterError("k = " + std::to_string(k) + " outside [1, " + std::to_string(dm.n()) + "]");
  }
  return cut_tree(complete_linkage(dm), dm.n(), k);
}

std::vector<int> consolidate_clusters_auto(const DistanceMatrix& dm, int k_min, int k_max) {
  const int n = dm.n();
  k_min = std::max(k_min, 2);
  k_max = std::min(k_max, n - 1);
  if (k_min > k_max) throw ParameterError("empty k range for automatic consolidation");
  const auto merges = complete_linkage(dm);
  std::vector<int> best;
  double best_s = -std::numeric_limits<double>::infinity();
  for (int k = k_min; k <= k_max; ++k) {
    auto labels = cut_tree(merges, n, k);
    const double s = silhouette_width(dm, labels);
    if (s > best_s) {
      best_s = s;
      best = std::move(labels);
    }
  }
  return best;
}

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) throw ParameterError("partitions differ in length");
  if (a.size() < 2) throw ParameterError("ARI needs at least two items");
  std::map<std::pair<int, int>, long long> cell;
  std::map<int, long long> ra, rb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++cell[{a[i], b[i]}];
    ++ra[a[i]];
    ++rb[b[i]];
  }
  auto c2 = [](long long x) { return 0.5 * static_cast<double>(x) * static_cast<double>(x - 1); };
  double index = 0.0, sa = 0.0, sb = 0.0;
  for (const auto& [k, v] : cell) index += c2(v);
  for (const auto& [k, v] : ra) sa += c2(v);
  for (const auto& [k, v] : rb) sb += c2(v);
  const double total = c2(static_cast<long long>(a.size()));
  const double expected = sa * sb / total;
  const double max_index = 0.5 * (sa + sb);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

MeanEstimate posterior_mean_mse(const Trace& trace, const Eigen::MatrixXd& truth) {
  if (truth.rows() != trace.n || truth.cols() != trace.L) throw ParameterError("truth shape does not match the trace");
  if (trace.retained < 1) throw ParameterError("trace holds no retained draws");
  MeanEstimate out;
  out.theta_hat = trace.posterior_mean();
  out.mse = (out.theta_hat - truth).squaredNorm() / static_cast<double>(truth.size());
  return out;
}

double gelman_rubin(const std::vector<std::vector<double>>& chains) {
  if (chains.size() < 2) throw ParameterError("Gelman-Rubin needs at least two chains");
  const std::size_t m = chains.front().size();
  if (m < 10) throw ParameterError("chains must hold at least 10 draws");
  for (const auto& c : chains) {
    if (c.size() != m) throw ParameterError("chains differ in length");
  }
  const double nc = static_cast<double>(chains.size());
  std::vector<double> means;
  double W = 0.0;
  for (const auto& c : chains) {
    double mu = 0.0;
    for (double v : c) mu += v;
    mu /= static_cast<double>(m);
    double ss = 0.0;
    for (double v : c) ss += (v - mu) * (v - mu);
    W += ss / static_cast<double>(m - 1);
    means.push_back(mu);
  }
  W /= nc;
  double grand = 0.0;
  for (double mu : means) grand += mu;
  grand /= nc;
  double B = 0.0;
  for (double mu : means) B += (mu - grand) * (mu - grand);
  B *= static_cast<double>(m) / (nc - 1.0);
  if (W == 0.0) return B > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
  const double md = static_cast<double>(m);
  return std::sqrt((W * (md - 1.0) / md + B / md) / W);
}

Eigen::MatrixXd gelman_rubin_means(const std::vector<Trace>& traces) {
  if (traces.size() < 2) throw ParameterError("Gelman-Rubin needs at least two chains");
  const int n = traces.front().n;
  const int L = traces.front().L;
  for (const auto& t : traces) {
    if (t.means.empty()) throw ParameterError("trace did not record mean functions");
    if (t.n != n || t.L != L || t.means.size() != traces.front().means.size()) {
      throw ParameterError("traces differ in shape");
    }
  }
  Eigen::MatrixXd out(n, L);
  std::vector<std::vector<double>> series(traces.size(), std::vector<double>(traces.front().means.size()));
  for (int i = 0; i < n; ++i) {
    for (int l = 0; l < L; ++l) {
      for (std::size_t c = 0; c < traces.size(); ++c) {
        for (std::size_t r = 0; r < traces[c].means.size(); ++r) series[c][r] = traces[c].means[r](i, l);
      }
      out(i, l) = gelman_rubin(series);
    }
  }
  return out;
}

std::vector<double> silhouette_values(const DistanceMatrix& dm, const std::vector<int>& labels) {
  const int n = dm.n();
  if (static_cast<int>(labels.size()) != n) throw ParameterError("label count does not match the distance matrix");
  std::map<int, int> size;
  for (int l : labels) ++size[l];
  if (size.size() < 2) throw DegenerateInputError("silhouette needs at least two clusters");
  std::vector<double> s(n, 0.0);
  for (int i = 0; i < n; ++i) {
    if (size[labels[i]] == 1) continue;
    std::map<int, double> sum;
    for (int k = 0; k < n; ++k) {
      if (k != i) sum[labels[k]] += dm(i, k);
    }
    const double a = sum[labels[i]] / (size[labels[i]] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (const auto& [c, v] : sum) {
      if (c != labels[i]) b = std::min(b, v / size[c]);
    }
    const double den = std::max(a, b);
    s[i] = den > 0.0 ? (b - a) / den : 0.0;
  }
  return s;
}

double silhouette_width(const DistanceMatrix& dm, const std::vector<int>& labels) {
  const auto s = silhouette_values(dm, labels);
  double total = 0.0;
  for (double v : s) total += v;
  return total / static_cast<double>(s.size());
}

DistanceMatrix euclidean_distances(const Eigen::MatrixXd& points) {
  const Eigen::Index n = points.rows();
  DistanceMatrix dm;
  dm.d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = i + 1; k < n; ++k) {
      dm.d(i, k) = dm.d(k, i) = (points.row(i) - points.row(k)).norm();
    }
  }
  return dm;
}

}  // namespace fpdpm
