#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "fpdpm/random.hpp"
#include "fpdpm/wavelet.hpp"

namespace fpdpm {

/// Multiplicative gamma process parameters for the loading shrinkage.
struct MgpParams {
  double a1 = 2.1;
  double a2 = 3.1;
  double a_e = 3.0;
  double b_e = 2.0;
};

/// Controls of the adaptive factor-count move.
struct AdaptParams {
  double b0 = 0.1;
  double b1 = 0.0005;
  double q = 1.0;
  double delta_thresh = 0.1;
};

struct Hyperparameters {
  /// DP concentration for every resolution level; `alpha_levels` overrides per level.
  double alpha = 1.0;
  std::vector<double> alpha_levels;
  double alpha_sigma = 1.0;
  /// Rate of the exponential mixing density of the coefficient variances.
  double omega2 = 1.0;
  MgpParams mgp;
  /// sigma^-2 ~ Ga(a_s, b_s).
  double a_s = 2.5;
  double b_s = 3.0;
  AdaptParams adapt;
  int k_init = 1;
  /// Hard cap on the factor count; 0 means "number of grid points".
  int k_max = 0;
  double burn_in_fraction = 0.9;
  int n_iter = 2000;

  double alpha_for(int block) const;
  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// Variance floor applied to sigma^2 and tau^2.
inline constexpr double kVarianceFloor = 1e-12;

/// Contiguous range of the flattened coefficient vector that shares one DP.
struct CoefficientBlock {
  int offset = 0;
  int size = 0;
  int level = 0;  // resolution level the block belongs to (-1 for the scaling coefficient)
};

/// How coefficient DPs tile the coefficient vector. The fPDPM uses one block per
/// resolution level and leaves the scaling coefficient at zero.
struct BlockLayout {
  std::vector<CoefficientBlock> blocks;
  int length = 0;  // total coefficient-vector length L

  static BlockLayout per_level(const Grid& grid);
  static BlockLayout tied(const Grid& grid);
  static BlockLayout per_coefficient(const Grid& grid);
  int num_blocks() const { return static_cast<int>(blocks.size()); }
};

struct CoefficientAtom {
  int level = 0;
  Eigen::VectorXd value;
  Eigen::VectorXd tau2;
};

struct CovarianceAtom {
  Eigen::MatrixXd Lambda;  // L x K, pixel domain
  double sigma2 = 1.0;
  Eigen::MatrixXd phi;     // L x K local shrinkage
  Eigen::VectorXd delta;   // K multiplicative increments
  double e = 1.0;          // cluster-level shrinkage
  /// Lambda expressed in the wavelet basis (Psi^T Lambda). Kept in sync by
  /// refresh_basis_loadings(); density evaluations run in coefficient space.
  Eigen::MatrixXd Lambda_coef;

  int K() const { return static_cast<int>(Lambda.cols()); }
  int L() const { return static_cast<int>(Lambda.rows()); }
  /// xi_r = prod_{m <= r} delta_m.
  Eigen::VectorXd xi() const;
  Eigen::MatrixXd dense_covariance() const;
  void refresh_basis_loadings(const WaveletBasis& basis);
};

/// Stick-breaking weights w_h = nu_h prod_{e<h}(1 - nu_e).
std::vector<double> stick_weights(const std::vector<double>& nu);

/// One truncated stick-breaking family: the instantiated sticks plus the
/// memberships and slice variables of every unit.
struct StickFamily {
  std::vector<double> nu;
  std::vector<double> w;
  std::vector<int> labels;  // 0-based atom index per unit
  std::vector<double> u;    // slice variable per unit
  std::vector<int> counts;  // units per atom

  int num_sticks() const { return static_cast<int>(nu.size()); }
  double mass() const;
  void recompute_weights() { w = stick_weights(nu); }
  void recount();
  int last_occupied() const;
};

struct MixtureState {
  BlockLayout layout;
  std::vector<StickFamily> coef_families;               // one per block
  std::vector<std::vector<CoefficientAtom>> coef_atoms;  // [block][atom]
  StickFamily cov_family;
  std::vector<CovarianceAtom> cov_atoms;
  /// When set the covariance labels mirror block 0's labels and share its sticks.
  bool cov_tied = false;
  std::vector<Eigen::VectorXd> eta;  // latent factors per unit

  int num_units() const { return static_cast<int>(eta.size()); }
  int cov_label(int unit) const {
    return cov_tied ? coef_families.at(0).labels.at(unit) : cov_family.labels.at(unit);
  }
  const CovarianceAtom& cov_atom_of(int unit) const { return cov_atoms.at(cov_label(unit)); }
  /// Throws StateCorruptionError when a label points past its atom list.
  void check_labels() const;
};

/// Observed functional data on a dyadic grid. Rows of `y` are units, columns
/// are column-major flattened pixels.
struct FunctionalDataset {
  Grid grid;
  WaveletFamily family = WaveletFamily::Haar;
  Eigen::MatrixXd y;
  /// Per-unit means removed by centering (zeros when not centered).
  Eigen::VectorXd unit_means;
  std::optional<PaddingRecord> padding;

  int n() const { return static_cast<int>(y.rows()); }
  int L() const { return static_cast<int>(y.cols()); }
  /// Subtracts each unit's mean and records it.
  static FunctionalDataset centered(const Grid& grid, const Eigen::MatrixXd& raw,
                                    WaveletFamily family = WaveletFamily::Haar);
};

/// Retained posterior output of one chain.
struct Trace {
  int n = 0;
  int L = 0;
  int num_levels = 0;
  int retained = 0;
  std::uint64_t seed = 0;
  /// memberships[r][i * num_levels + j], 0-based labels.
  std::vector<std::vector<int>> memberships;
  std::vector<std::vector<int>> cov_memberships;
  /// Factor count of each unit's covariance atom per retained sample.
  std::vector<std::vector<int>> factor_counts;
  /// Optional per-sample mean functions, each n x L.
  std::vector<Eigen::MatrixXf> means;
  /// Running sum of retained mean functions (n x L), uncentered.
  Eigen::MatrixXd mean_sum;
  std::vector<double> sweep_seconds;

  Eigen::MatrixXd posterior_mean() const;
  int membership(int r, int unit, int level) const {
    return memberships.at(r).at(static_cast<std::size_t>(unit) * num_levels + level);
  }
};

/// Number of retained draws for `n_iter` sweeps after discarding `burn_in_fraction`.
int retained_count(int n_iter, double burn_in_fraction, int thinning = 1);

/// Gaussian N(0, Lambda Lambda^T + sigma^2 I) prepared for repeated evaluation.
/// Works on any orthonormal representation of the residual as long as the
/// loadings are expressed in the same basis.
class LowRankGaussian {
 public:
  LowRankGaussian(const Eigen::MatrixXd& loadings, double sigma2);

  int L() const { return static_cast<int>(loadings_.rows()); }
  int K() const { return static_cast<int>(loadings_.cols()); }
  double sigma2() const { return sigma2_; }
  const Eigen::MatrixXd& loadings() const { return loadings_; }

  double log_density(const Eigen::VectorXd& residual) const;
  /// Evaluates from sufficient statistics: squared norm of the residual and
  /// b = loadings^T residual.
  double log_density_from_stats(double squared_norm, const Eigen::VectorXd& b) const;
  /// Solves C x = b with C = sigma^2 I_K + loadings^T loadings.
  Eigen::VectorXd solve_inner(const Eigen::VectorXd& b) const;
  const Eigen::LLT<Eigen::MatrixXd>& inner_cholesky() const { return inner_; }

 private:
  Eigen::MatrixXd loadings_;
  double sigma2_;
  Eigen::LLT<Eigen::MatrixXd> inner_;  // Cholesky of C
  double log_det_ = 0.0;               // log det(Lambda Lambda^T + sigma^2 I)
};

/// log N(residual; 0, Lambda Lambda^T + sigma^2 I) via Woodbury and the
/// matrix-determinant lemma; falls back to a dense Cholesky when K >= L / 2.
double lowrank_gaussian_logdensity(const Eigen::VectorXd& residual, const CovarianceAtom& atom);

/// log N(residual; 0, Lambda Lambda^T + diag(d)) by Woodbury with a diagonal base.
double diag_lowrank_gaussian_logdensity(const Eigen::VectorXd& residual,
                                        const Eigen::MatrixXd& loadings,
                                        const Eigen::VectorXd& diag);

/// Flattened coefficient vector sum_j beta_{h_ij j} of one unit (scaling left at 0
/// unless a block covers it).
Eigen::VectorXd compose_coefficients(const MixtureState& state, int unit);
/// theta_i = sum_j Psi_j beta_{h_ij j} as a column-major flattened image.
Eigen::VectorXd compose_mean(const MixtureState& state, int unit, const WaveletBasis& basis);

/// Complete-data log likelihood of one unit: Gaussian residual density times the
/// slice indicators. Returns -inf when any indicator fails.
double log_complete_likelihood(const Eigen::VectorXd& y, const MixtureState& state, int unit,
                               const WaveletBasis& basis);

CoefficientAtom draw_coefficient_atom(const Hyperparameters& hyper, int level, int size, Rng& rng);
/// K = 0 gives the independent-error atom (Lambda = 0).
CovarianceAtom draw_covariance_atom(const Hyperparameters& hyper, int L, int K, Rng& rng);
/// Appends one MGP column to an atom.
void append_factor_column(CovarianceAtom& atom, const Hyperparameters& hyper, Rng& rng);

}  // namespace fpdpm
