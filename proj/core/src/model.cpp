#include "fpdpm/model.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "fpdpm/errors.hpp"

namespace fpdpm {
namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

void require_finite(const Eigen::VectorXd& v, const char* what) {
  if (!v.allFinite()) throw NumericError(std::string("non-finite values in ") + what);
}

}  // namespace

double Hyperparameters::alpha_for(int block) const {
  if (block >= 0 && block < static_cast<int>(alpha_levels.size())) return alpha_levels[block];
  return alpha;
}

void Hyperparameters::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(name) + " must be positive");
  };
  positive(alpha, "alpha");
  for (double a : alpha_levels) positive(a, "alpha_levels");
  positive(alpha_sigma, "alpha_sigma");
  positive(omega2, "omega2");
  positive(mgp.a_e, "a_e");
  positive(mgp.b_e, "b_e");
  positive(a_s, "a_s");
  positive(b_s, "b_s");
  positive(adapt.b0, "b0");
  positive(adapt.b1, "b1");
  positive(adapt.q, "q");
  positive(adapt.delta_thresh, "delta_thresh");
  if (!(mgp.a1 > 2.0)) throw ConfigError("a1 must exceed 2");
  if (!(mgp.a2 > 3.0)) throw ConfigError("a2 must exceed 3");
  if (adapt.q > 1.0) throw ConfigError("q must lie in (0, 1]");
  if (k_init < 1) throw ConfigError("k_init must be at least 1");
  if (k_max < 0) throw ConfigError("k_max must be non-negative");
  if (!(burn_in_fraction > 0.0 && burn_in_fraction < 1.0)) {
    throw ConfigError("burn_in_fraction must lie in (0, 1)");
  }
  if (n_iter < 1) throw ConfigError("n_iter must be at least 1");
}

BlockLayout BlockLayout::per_level(const Grid& grid) {
  BlockLayout layout;
  layout.length = grid.size();
  for (int j = 0; j < grid.num_levels(); ++j) {
    layout.blocks.push_back({grid.level_offset(j), grid.level_size(j), j});
  }
  return layout;
}

BlockLayout BlockLayout::tied(const Grid& grid) {
  BlockLayout layout;
  layout.length = grid.size();
  layout.blocks.push_back({1, grid.size() - 1, 0});
  return layout;
}

BlockLayout BlockLayout::per_coefficient(const Grid& grid) {
  BlockLayout layout;
  layout.length = grid.size();
  layout.blocks.push_back({0, 1, -1});
  for (int j = 0; j < grid.num_levels(); ++j) {
    const int off = grid.level_offset(j);
    for (int k = 0; k < grid.level_size(j); ++k) layout.blocks.push_back({off + k, 1, j});
  }
  return layout;
}

Eigen::VectorXd CovarianceAtom::xi() const {
  Eigen::VectorXd out(delta.size());
  double p = 1.0;
  for (Eigen::Index r = 0; r < delta.size(); ++r) {
    p *= delta[r];
    out[r] = p;
  }
  return out;
}

Eigen::MatrixXd CovarianceAtom::dense_covariance() const {
  Eigen::MatrixXd s = Lambda * Lambda.transpose();
  s.diagonal().array() += sigma2;
  return s;
}

void CovarianceAtom::refresh_basis_loadings(const WaveletBasis& basis) {
  Lambda_coef.resize(Lambda.rows(), Lambda.cols());
  for (Eigen::Index r = 0; r < Lambda.cols(); ++r) Lambda_coef.col(r) = basis.forward(Lambda.col(r));
}

std::vector<double> stick_weights(const std::vector<double>& nu) {
  std::vector<double> w(nu.size());
  double remaining = 1.0;
  for (std::size_t h = 0; h < nu.size(); ++h) {
    w[h] = nu[h] * remaining;
    remaining *= (1.0 - nu[h]);
  }
  return w;
}

double StickFamily::mass() const {
  double remaining = 1.0;
  for (double v : nu) remaining *= (1.0 - v);
  return 1.0 - remaining;
}

void StickFamily::recount() {
  counts.assign(nu.size(), 0);
  for (int l : labels) {
    if (l < 0 || l >= static_cast<int>(counts.size())) {
      throw StateCorruptionError("membership " + std::to_string(l) + " outside " +
                                 std::to_string(counts.size()) + " instantiated sticks");
    }
    ++counts[l];
  }
}

int StickFamily::last_occupied() const {
  for (int h = static_cast<int>(counts.size()) - 1; h >= 0; --h) {
    if (counts[h] > 0) return h;
  }
  return -1;
}

void MixtureState::check_labels() const {
  for (std::size_t b = 0; b < coef_families.size(); ++b) {
    for (int l : coef_families[b].labels) {
      if (l < 0 || l >= static_cast<int>(coef_atoms[b].size())) {
        throw StateCorruptionError("dangling membership " + std::to_string(l) + " in block " +
                                   std::to_string(b));
      }
    }
  }
  for (int i = 0; i < num_units(); ++i) {
    const int s = cov_label(i);
    if (s < 0 || s >= static_cast<int>(cov_atoms.size())) {
      throw StateCorruptionError("dangling covariance membership " + std::to_string(s));
    }
  }
}

FunctionalDataset FunctionalDataset::centered(const Grid& grid, const Eigen::MatrixXd& raw,
                                              WaveletFamily family) {
  if (raw.cols() != grid.size()) {
    throw DimensionError("data has " + std::to_string(raw.cols()) + " columns, grid has " +
                         std::to_string(grid.size()) + " points");
  }
  FunctionalDataset ds;
  ds.grid = grid;
  ds.family = family;
  ds.unit_means = raw.rowwise().mean();
  ds.y = raw.colwise() - ds.unit_means;
  return ds;
}

Eigen::MatrixXd Trace::posterior_mean() const {
  if (retained == 0) return Eigen::MatrixXd::Zero(n, L);
  return mean_sum / static_cast<double>(retained);
}

int retained_count(int n_iter, double burn_in_fraction, int thinning) {
  const int kept = static_cast<int>(std::floor(n_iter * (1.0 - burn_in_fraction) + 1e-9));
  return thinning <= 1 ? kept : kept / thinning;
}

LowRankGaussian::LowRankGaussian(const Eigen::MatrixXd& loadings, double sigma2)
    : loadings_(loadings), sigma2_(std::max(sigma2, kVarianceFloor)) {
  const int k = K();
  Eigen::MatrixXd c = loadings_.transpose() * loadings_;
  c.diagonal().array() += sigma2_;
  inner_.compute(c);
  if (inner_.info() != Eigen::Success) throw NumericError("inner Woodbury matrix is not positive definite");
  double logdet_c = 0.0;
  for (int r = 0; r < k; ++r) logdet_c += 2.0 * std::log(inner_.matrixL()(r, r));
  log_det_ = (L() - k) * std::log(sigma2_) + logdet_c;
}

Eigen::VectorXd LowRankGaussian::solve_inner(const Eigen::VectorXd& b) const { return inner_.solve(b); }

double LowRankGaussian::log_density_from_stats(double squared_norm, const Eigen::VectorXd& b) const {
  double quad = squared_norm;
  if (K() > 0) quad -= b.dot(inner_.solve(b));
  quad /= sigma2_;
  return -0.5 * (L() * kLog2Pi + log_det_ + quad);
}

double LowRankGaussian::log_density(const Eigen::VectorXd& residual) const {
  if (residual.size() != L()) throw DimensionError("residual length does not match loadings");
  const Eigen::VectorXd b = K() > 0 ? Eigen::VectorXd(loadings_.transpose() * residual) : Eigen::VectorXd();
  return log_density_from_stats(residual.squaredNorm(), b);
}

double lowrank_gaussian_logdensity(const Eigen::VectorXd& residual, const CovarianceAtom& atom) {
  require_finite(residual, "residual");
  if (!atom.Lambda.allFinite() || !std::isfinite(atom.sigma2)) {
    throw NumericError("non-finite covariance atom");
  }
  const int L = static_cast<int>(residual.size());
  if (atom.Lambda.rows() != L) throw DimensionError("residual length does not match the loading matrix");
  if (atom.K() > 0 && 2 * atom.K() >= L) {
    const Eigen::LLT<Eigen::MatrixXd> chol(atom.dense_covariance());
    if (chol.info() != Eigen::Success) throw NumericError("covariance is not positive definite");
    const Eigen::VectorXd z = chol.matrixL().solve(residual);
    double logdet = 0.0;
    for (int l = 0; l < L; ++l) logdet += 2.0 * std::log(chol.matrixL()(l, l));
    return -0.5 * (L * kLog2Pi + logdet + z.squaredNorm());
  }
  return LowRankGaussian(atom.Lambda, atom.sigma2).log_density(residual);
}

double diag_lowrank_gaussian_logdensity(const Eigen::VectorXd& residual, const Eigen::MatrixXd& loadings,
                                        const Eigen::VectorXd& diag) {
  const Eigen::Index L = residual.size();
  const Eigen::Index K = loadings.cols();
  const Eigen::ArrayXd inv = diag.array().inverse();
  double logdet = diag.array().log().sum();
  double quad = (residual.array().square() * inv).sum();
  if (K > 0) {
    const Eigen::MatrixXd scaled = loadings.array().colwise() * inv;  // D^-1 Lambda
    Eigen::MatrixXd inner = loadings.transpose() * scaled;
    inner.diagonal().array() += 1.0;
    const Eigen::LLT<Eigen::MatrixXd> chol(inner);
    if (chol.info() != Eigen::Success) throw NumericError("diagonal Woodbury matrix is not positive definite");
    for (Eigen::Index r = 0; r < K; ++r) logdet += 2.0 * std::log(chol.matrixL()(r, r));
    const Eigen::VectorXd b = scaled.transpose() * residual;
    quad -= b.dot(chol.solve(b));
  }
  return -0.5 * (static_cast<double>(L) * kLog2Pi + logdet + quad);
}

Eigen::VectorXd compose_coefficients(const MixtureState& state, int unit) {
  Eigen::VectorXd coef = Eigen::VectorXd::Zero(state.layout.length);
  for (int b = 0; b < state.layout.num_blocks(); ++b) {
    const auto& blk = state.layout.blocks[b];
    const int h = state.coef_families[b].labels.at(unit);
    if (h < 0 || h >= static_cast<int>(state.coef_atoms[b].size())) {
      throw StateCorruptionError("unit " + std::to_string(unit) + " points at missing atom " +
                                 std::to_string(h) + " in block " + std::to_string(b));
    }
    coef.segment(blk.offset, blk.size) = state.coef_atoms[b][h].value;
  }
  return coef;
}

Eigen::VectorXd compose_mean(const MixtureState& state, int unit, const WaveletBasis& basis) {
  return basis.inverse(compose_coefficients(state, unit));
}

double log_complete_likelihood(const Eigen::VectorXd& y, const MixtureState& state, int unit,
                               const WaveletBasis& basis) {
  for (int b = 0; b < state.layout.num_blocks(); ++b) {
    const StickFamily& fam = state.coef_families[b];
    if (!(fam.w.at(fam.labels.at(unit)) > fam.u.at(unit))) return -std::numeric_limits<double>::infinity();
  }
  if (!state.cov_tied) {
    const StickFamily& fam = state.cov_family;
    if (!(fam.w.at(fam.labels.at(unit)) > fam.u.at(unit))) return -std::numeric_limits<double>::infinity();
  }
  const Eigen::VectorXd residual = y - compose_mean(state, unit, basis);
  return lowrank_gaussian_logdensity(residual, state.cov_atom_of(unit));
}

CoefficientAtom draw_coefficient_atom(const Hyperparameters& hyper, int level, int size, Rng& rng) {
  CoefficientAtom atom;
  atom.level = level;
  atom.tau2.resize(size);
  atom.value.resize(size);
  for (int k = 0; k < size; ++k) {
    atom.tau2[k] = std::max(rng.exponential(hyper.omega2), kVarianceFloor);
    atom.value[k] = rng.normal(0.0, std::sqrt(atom.tau2[k]));
  }
  return atom;
}

void append_factor_column(CovarianceAtom& atom, const Hyperparameters& hyper, Rng& rng) {
  const int L = atom.L();
  const int K = atom.K();
  const double d = rng.gamma(K == 0 ? hyper.mgp.a1 : hyper.mgp.a2, 1.0);
  atom.delta.conservativeResize(K + 1);
  atom.delta[K] = d;
  const double xi = atom.xi()[K];
  atom.phi.conservativeResize(L, K + 1);
  atom.Lambda.conservativeResize(L, K + 1);
  for (int l = 0; l < L; ++l) {
    atom.phi(l, K) = rng.gamma(1.5, 1.5);
    atom.Lambda(l, K) = rng.normal(0.0, 1.0 / std::sqrt(atom.phi(l, K) * xi * atom.e));
  }
}

CovarianceAtom draw_covariance_atom(const Hyperparameters& hyper, int L, int K, Rng& rng) {
  CovarianceAtom atom;
  atom.sigma2 = std::max(1.0 / rng.gamma(hyper.a_s, hyper.b_s), kVarianceFloor);
  atom.Lambda.resize(L, 0);
  atom.phi.resize(L, 0);
  atom.delta.resize(0);
  atom.e = rng.gamma(hyper.mgp.a_e, hyper.mgp.b_e);
  atom.Lambda_coef.resize(L, 0);
  for (int r = 0; r < K; ++r) append_factor_column(atom, hyper, rng);
  return atom;
}

}  // namespace fpdpm
