#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fpdpm/model.hpp"
#include "fpdpm/random.hpp"
#include "fpdpm/wavelet.hpp"

namespace fpdpm {

enum class ErrorModel {
  LowRank,      // Sigma = Lambda Lambda^T + sigma^2 I with adaptive K
  Independent,  // Lambda = 0
};

enum class BlockScheme {
  PerLevel,        // one DP per resolution level (fPDPM)
  Tied,            // one DP over the whole detail vector (global DPM)
  PerCoefficient,  // one DP per scalar coefficient (LPP timing surrogate)
};

enum class MembershipDensity {
  /// Re-evaluates only the block that changes; O(m_j K) per candidate.
  Incremental,
  /// Rebuilds and evaluates the full length-L residual density per candidate.
  FullVector,
};

struct SamplerOptions {
  ErrorModel errors = ErrorModel::LowRank;
  BlockScheme blocks = BlockScheme::PerLevel;
  /// Ties the covariance labels to the single coefficient DP (global DPM).
  bool tie_covariance = false;
  MembershipDensity density = MembershipDensity::Incremental;
  bool adapt_factors = true;
  /// Integrates out atoms that no other unit occupies when scoring a move to
  /// them, then draws the atom from its one-unit posterior.
  bool marginalize_empty_atoms = true;
  /// k for the k-means warm start of every family.
  int init_clusters = 5;
  /// Sweeps run with Lambda = 0 before the factors are switched on. Negative
  /// means a quarter of the burn-in in run_chain and none in GibbsSampler.
  int warmup_sweeps = -1;
};

struct ChainConfig {
  int n_iter = 2000;
  double burn_in_fraction = 0.9;
  std::uint64_t seed = 1;
  int thinning = 1;
  bool record_memberships = true;
  bool record_means = false;
  bool record_factor_counts = true;
  bool record_timings = true;

  void validate() const;
};

/// Truncated Beta(1, alpha) draw on [a, b] by inverse CDF. Returns `a` when
/// a > b (floating-point crossing).
double draw_truncated_stick(double a, double b, double alpha, Rng& rng);

/// Instantiates sticks until the family mass exceeds 1 - u_star. `on_new` is
/// called once per new stick so the caller can attach an atom. Returns the
/// number of sticks added; throws ConfigError after 10^6 extensions.
int extend_family(StickFamily& family, double alpha, double u_star, Rng& rng,
                  const std::function<void()>& on_new);

struct MembershipCandidates {
  std::vector<int> atoms;
  std::vector<double> log_weights;
  std::vector<double> probabilities;
  std::vector<bool> marginal;  // scored with the atom integrated out
};

/// Slice-sampled Gibbs sampler over a MixtureState.
///
/// All likelihood work runs in the wavelet domain: with an orthonormal basis
/// the Gaussian density of y - theta equals that of its coefficients, and
/// Psi^T Sigma Psi keeps the low-rank-plus-diagonal form with loadings
/// Psi^T Lambda.
class GibbsSampler {
 public:
  GibbsSampler(const FunctionalDataset& data, Hyperparameters hyper, SamplerOptions options,
               std::uint64_t seed);

  /// k-means warm start, prior draws for everything else.
  void initialize();
  /// One full sweep: slice variables, sticks, stick extension, memberships,
  /// coefficients, factors, loadings, factor adaptation, variances, shrinkage
  /// latents, then trailing-atom cleanup. Throws NumericAbort on NaN/Inf.
  void sweep(int iteration);

  void step_slice_aux();
  void step_update_weights();
  void extend_sticks();
  void step_update_memberships();
  void step_update_coefficients();
  void step_update_factors();
  void step_update_loadings();
  void adapt_factor_count(int iteration);
  void step_update_variance();
  void step_update_hyperlatents();
  /// Drops unoccupied sticks past the last occupied one, with their atoms.
  void collect_garbage();
  /// Gives every covariance atom k_init prior columns, draws eta from its
  /// prior and then the loadings from their conditional.
  void activate_factors();
  bool factors_active() const { return factors_active_; }

  /// Categorical distribution the membership update would draw from for one unit and block.
  MembershipCandidates membership_candidates(int unit, int block) const;
  MembershipCandidates covariance_candidates(int unit) const;

  /// Rebuilds derived fields (counts, weights, loadings in the wavelet basis)
  /// after external edits to the state.
  void sync_state();
  /// Replaces the observations, keeping the state.
  void set_observations(const Eigen::MatrixXd& y);

  MixtureState& state() { return state_; }
  const MixtureState& state() const { return state_; }
  const Hyperparameters& hyper() const { return hyper_; }
  Hyperparameters& mutable_hyper() { return hyper_; }
  const SamplerOptions& options() const { return options_; }
  Rng& rng() { return rng_; }
  const WaveletBasis& basis() const { return basis_; }
  /// Wavelet coefficients of the observations, one column per unit.
  const Eigen::MatrixXd& coefficients() const { return coef_; }
  /// Centered pixel data, one column per unit.
  const Eigen::MatrixXd& observations() const { return pixels_; }
  int n() const { return static_cast<int>(coef_.cols()); }
  int L() const { return static_cast<int>(coef_.rows()); }
  int k_max() const;
  /// Warnings raised by the a > b guard of the weight update.
  int crossing_warnings() const { return crossing_warnings_; }

  /// theta_i as a (centered) pixel vector.
  Eigen::VectorXd mean_function(int unit) const;

 private:
  struct CovCache;

  double alpha_of_block(int b) const;
  void ensure_finite(int iteration) const;
  void update_family_weights(StickFamily& fam, double alpha);
  std::vector<CovCache> build_cov_caches() const;
  /// `sqnorm` and `lt` are |residual|^2 and Lambda^T residual for the unit's own covariance atom.
  void score_block(int unit, int block, const Eigen::VectorXd& residual, double sqnorm, const Eigen::VectorXd& lt,
                   const std::vector<CovCache>& caches, MembershipCandidates& out) const;
  MembershipCandidates score_covariance(int unit, const Eigen::VectorXd& residual,
                                        const std::vector<CovCache>& caches) const;
  Eigen::VectorXd draw_one_unit_posterior(int block, int atom, const Eigen::VectorXd& residual_without,
                                          const CovCache& cache);
  void draw_eta(int unit, const Eigen::VectorXd& residual, const CovCache& cache);
  int sample_index(const std::vector<double>& probabilities);
  CovarianceAtom new_cov_atom();
  void remove_factor(CovarianceAtom& atom, int atom_index, int column);

  FunctionalDataset data_;
  Hyperparameters hyper_;
  SamplerOptions options_;
  Rng rng_;
  WaveletBasis basis_;
  Eigen::MatrixXd pixels_;  // L x n
  Eigen::MatrixXd coef_;    // L x n
  MixtureState state_;
  int crossing_warnings_ = 0;
  bool factors_active_ = false;
};

/// Runs one chain and collects the retained draws.
Trace run_chain(const FunctionalDataset& data, const Hyperparameters& hyper, const ChainConfig& config,
                const SamplerOptions& options = {});

/// Runs independent chains with the given seeds, at most `max_threads` at a time.
std::vector<Trace> run_chains(const FunctionalDataset& data, const Hyperparameters& hyper,
                              const ChainConfig& config, const SamplerOptions& options,
                              const std::vector<std::uint64_t>& seeds, int max_threads);

/// Worker cap from FPDPM_THREADS (defaults to the hardware concurrency).
int worker_limit();

}  // namespace fpdpm
