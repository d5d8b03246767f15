#include "fpdpm/random.hpp"

#include <cmath>

namespace fpdpm {

double Rng::uniform_open() {
  double u = uniform();
  while (u <= 0.0) u = uniform();
  return u;
}

double Rng::gamma(double shape, double rate) {
  return std::gamma_distribution<double>(shape, 1.0 / rate)(engine_);
}

double Rng::beta(double a, double b) {
  const double x = gamma(a, 1.0);
  const double y = gamma(b, 1.0);
  return x / (x + y);
}

double Rng::inverse_gaussian(double mean, double shape) {
  const double z = normal();
  const double w = mean * z * z;
  // Smaller root of the chi-square transform, written without cancellation.
  const double x = mean * 2.0 * shape / (2.0 * shape + w + std::sqrt(w) * std::sqrt(4.0 * shape + w));
  if (uniform() <= mean / (mean + x)) return x;
  return mean * (mean / x);
}

Eigen::VectorXd Rng::normal_vector(Eigen::Index n) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = normal();
  return v;
}

}  // namespace fpdpm
