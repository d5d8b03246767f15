#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace fpdpm {

/// Seeded random source shared by the sampler, the generators and the baselines.
///
/// Gamma variates use the shape/rate convention (mean shape/rate) throughout the
/// library. Distribution objects are created per call so the stream depends only
/// on the seed and on the order of calls.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  /// Uniform on the open interval (0, 1).
  double uniform_open();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }
  double normal(double mean, double sd) { return mean + sd * normal(); }
  double gamma(double shape, double rate);
  double inverse_gamma(double shape, double scale) { return 1.0 / gamma(shape, scale); }
  double exponential(double rate) { return std::exponential_distribution<double>(rate)(engine_); }
  double beta(double a, double b);
  bool bernoulli(double p) { return uniform() < p; }
  /// Inverse Gaussian with mean `mean` and shape `shape` (Michael, Schucany & Haas).
  double inverse_gaussian(double mean, double shape);
  int uniform_int(int lo, int hi_inclusive) {
    return std::uniform_int_distribution<int>(lo, hi_inclusive)(engine_);
  }
  Eigen::VectorXd normal_vector(Eigen::Index n);

  /// Derives an independent child seed; used for per-restart and per-chain streams.
  std::uint64_t split() { return engine_(); }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace fpdpm
