#include "fpdpm/sampler.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <iostream>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <thread>

#include "fpdpm/errors.hpp"
#include "fpdpm/kmeans.hpp"

namespace fpdpm {
namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;
constexpr int kMaxExtensions = 1000000;
constexpr int kInitRestarts = 5;

void normalize_log_weights(const std::vector<double>& logw, std::vector<double>& p) {
  const double mx = *std::max_element(logw.begin(), logw.end());
  p.resize(logw.size());
  if (!std::isfinite(mx)) {
    // Every candidate is impossible under finite precision; fall back to uniform.
    std::fill(p.begin(), p.end(), 1.0 / static_cast<double>(p.size()));
    return;
  }
  double total = 0.0;
  for (std::size_t k = 0; k < logw.size(); ++k) {
    p[k] = std::exp(logw[k] - mx);
    total += p[k];
  }
  for (double& v : p) v /= total;
}

double noise_estimate(const Eigen::VectorXd& coef, const Grid& grid) {
  const int J = grid.J();
  Eigen::VectorXd fine = coef.segment(grid.level_offset(J), grid.level_size(J)).cwiseAbs();
  std::vector<double> v(fine.data(), fine.data() + fine.size());
  std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
  const double mad = v[v.size() / 2] / 0.6745;
  return std::max(mad * mad, 1e-8);
}

}  // namespace

void ChainConfig::validate() const {
  if (n_iter < 1) throw ConfigError("n_iter must be at least 1");
  if (thinning < 1) throw ConfigError("thinning must be at least 1");
  if (!(burn_in_fraction >= 0.0 && burn_in_fraction < 1.0)) {
    throw ConfigError("burn_in_fraction must lie in [0, 1)");
  }
}

double draw_truncated_stick(double a, double b, double alpha, Rng& rng) {
  a = std::clamp(a, 0.0, 1.0);
  b = std::clamp(b, 0.0, 1.0);
  if (a > b) return a;
  const double U = rng.uniform();
  const double ta = std::pow(1.0 - a, alpha);
  const double tb = std::pow(1.0 - b, alpha);
  const double inner = std::max(ta - U * (ta - tb), 0.0);
  const double nu = 1.0 - std::pow(inner, 1.0 / alpha);
  return std::clamp(nu, a, b);
}

int extend_family(StickFamily& family, double alpha, double u_star, Rng& rng,
                  const std::function<void()>& on_new) {
  int added = 0;
  double remaining = 1.0 - family.mass();
  while (remaining >= u_star) {
    if (added >= kMaxExtensions) {
      throw ConfigError("stick extension did not reach the slice mass after 10^6 sticks; alpha is too large");
    }
    const double nu = rng.beta(1.0, alpha);
    family.nu.push_back(nu);
    family.counts.push_back(0);
    remaining *= (1.0 - nu);
    if (on_new) on_new();
    ++added;
  }
  if (added > 0) family.recompute_weights();
  return added;
}

struct GibbsSampler::CovCache {
  std::optional<LowRankGaussian> dens;
  Eigen::MatrixXd gram;  // Lambda_coef^T Lambda_coef
};

GibbsSampler::GibbsSampler(const FunctionalDataset& data, Hyperparameters hyper, SamplerOptions options,
                           std::uint64_t seed)
    : data_(data),
      hyper_(std::move(hyper)),
      options_(options),
      rng_(seed),
      basis_(data.grid, data.family) {
  hyper_.validate();
  if (data.y.cols() != data.grid.size()) throw DimensionError("data width does not match the grid");
  if (data.y.rows() < 1) throw DimensionError("no units");
  if (!data.y.allFinite()) throw NumericError("observations contain NaN or Inf");
  if (options_.tie_covariance && options_.blocks != BlockScheme::Tied) {
    throw ConfigError("covariance tying requires the tied block scheme");
  }
  if (options_.init_clusters < 1) throw ConfigError("init_clusters must be at least 1");
  if (options_.warmup_sweeps < 0) options_.warmup_sweeps = 0;
  pixels_ = data.y.transpose();
  coef_ = basis_.forward_columns(pixels_);
}

int GibbsSampler::k_max() const { return hyper_.k_max > 0 ? hyper_.k_max : L(); }

double GibbsSampler::alpha_of_block(int b) const {
  return options_.blocks == BlockScheme::PerLevel ? hyper_.alpha_for(b) : hyper_.alpha;
}

CovarianceAtom GibbsSampler::new_cov_atom() {
  const int K = factors_active_ ? hyper_.k_init : 0;
  CovarianceAtom atom = draw_covariance_atom(hyper_, L(), K, rng_);
  atom.refresh_basis_loadings(basis_);
  return atom;
}

void GibbsSampler::set_observations(const Eigen::MatrixXd& y) {
  if (y.rows() != n() || y.cols() != L()) throw DimensionError("replacement observations have the wrong shape");
  data_.y = y;
  pixels_ = y.transpose();
  coef_ = basis_.forward_columns(pixels_);
}

void GibbsSampler::sync_state() {
  for (auto& fam : state_.coef_families) {
    fam.recount();
    fam.recompute_weights();
  }
  if (!state_.cov_tied) {
    state_.cov_family.recount();
    state_.cov_family.recompute_weights();
  }
  for (auto& atom : state_.cov_atoms) atom.refresh_basis_loadings(basis_);
  state_.check_labels();
}

void GibbsSampler::initialize() {
  const Grid& grid = data_.grid;
  const int nn = n();
  switch (options_.blocks) {
    case BlockScheme::PerLevel: state_.layout = BlockLayout::per_level(grid); break;
    case BlockScheme::Tied: state_.layout = BlockLayout::tied(grid); break;
    case BlockScheme::PerCoefficient: state_.layout = BlockLayout::per_coefficient(grid); break;
  }
  state_.cov_tied = options_.tie_covariance;
  factors_active_ = options_.errors == ErrorModel::LowRank && options_.warmup_sweeps == 0;
  const int B = state_.layout.num_blocks();
  state_.coef_families.assign(B, {});
  state_.coef_atoms.assign(B, {});

  auto init_sticks = [this](StickFamily& fam, int H, double alpha) {
    std::vector<int> counts(H, 0);
    for (int l : fam.labels) ++counts[l];
    int later = std::accumulate(counts.begin(), counts.end(), 0);
    fam.nu.resize(H);
    for (int h = 0; h < H; ++h) {
      later -= counts[h];
      fam.nu[h] = rng_.beta(1.0 + counts[h], alpha + later);
    }
    fam.recount();
    fam.recompute_weights();
    fam.u.assign(fam.labels.size(), 0.0);
    for (std::size_t i = 0; i < fam.labels.size(); ++i) fam.u[i] = 0.5 * fam.w[fam.labels[i]];
  };

  const int k0 = std::min(options_.init_clusters, nn);
  for (int b = 0; b < B; ++b) {
    const CoefficientBlock& blk = state_.layout.blocks[b];
    const Eigen::MatrixXd pts = coef_.middleRows(blk.offset, blk.size).transpose();
    KMeansResult km = kmeans(pts, k0, kInitRestarts, rng_.split());
    StickFamily& fam = state_.coef_families[b];
    fam.labels = km.labels;
    const int H = compact_labels(fam.labels);
    std::vector<Eigen::VectorXd> sums(H, Eigen::VectorXd::Zero(blk.size));
    std::vector<int> cnt(H, 0);
    for (int i = 0; i < nn; ++i) {
      sums[fam.labels[i]] += pts.row(i).transpose();
      ++cnt[fam.labels[i]];
    }
    for (int h = 0; h < H; ++h) {
      CoefficientAtom atom = draw_coefficient_atom(hyper_, blk.level, blk.size, rng_);
      atom.value = sums[h] / cnt[h];
      state_.coef_atoms[b].push_back(std::move(atom));
    }
    init_sticks(fam, H, alpha_of_block(b));
  }

  Eigen::VectorXd noise(nn);
  for (int i = 0; i < nn; ++i) noise[i] = noise_estimate(coef_.col(i), grid);

  state_.cov_atoms.clear();
  if (state_.cov_tied) {
    const StickFamily& fam = state_.coef_families[0];
    for (int h = 0; h < fam.num_sticks(); ++h) {
      CovarianceAtom atom = new_cov_atom();
      double s = 0.0;
      int c = 0;
      for (int i = 0; i < nn; ++i) {
        if (fam.labels[i] == h) {
          s += noise[i];
          ++c;
        }
      }
      if (c > 0) atom.sigma2 = std::max(s / c, kVarianceFloor);
      state_.cov_atoms.push_back(std::move(atom));
    }
  } else {
    const Eigen::MatrixXd pts = noise.array().log().matrix();
    KMeansResult km = kmeans(pts, k0, kInitRestarts, rng_.split());
    StickFamily& fam = state_.cov_family;
    fam = StickFamily{};
    fam.labels = km.labels;
    const int H = compact_labels(fam.labels);
    for (int h = 0; h < H; ++h) {
      CovarianceAtom atom = new_cov_atom();
      double s = 0.0;
      int c = 0;
      for (int i = 0; i < nn; ++i) {
        if (fam.labels[i] == h) {
          s += noise[i];
          ++c;
        }
      }
      atom.sigma2 = std::max(s / c, kVarianceFloor);
      state_.cov_atoms.push_back(std::move(atom));
    }
    init_sticks(fam, H, hyper_.alpha_sigma);
  }

  state_.eta.assign(nn, Eigen::VectorXd());
  for (int i = 0; i < nn; ++i) state_.eta[i] = Eigen::VectorXd::Zero(state_.cov_atom_of(i).K());
  state_.check_labels();
}

void GibbsSampler::step_slice_aux() {
  auto draw = [this](StickFamily& fam) {
    for (std::size_t i = 0; i < fam.labels.size(); ++i) {
      const double w = fam.w.at(fam.labels[i]);
      if (!(w > 0.0)) {
        throw StateCorruptionError("occupied cluster " + std::to_string(fam.labels[i]) + " has zero weight");
      }
      fam.u[i] = w * rng_.uniform_open();
    }
  };
  for (auto& fam : state_.coef_families) draw(fam);
  if (!state_.cov_tied) draw(state_.cov_family);
}

void GibbsSampler::update_family_weights(StickFamily& fam, double alpha) {
  const int H = fam.num_sticks();
  std::vector<double> max_u(H, 0.0);
  for (std::size_t i = 0; i < fam.labels.size(); ++i) {
    max_u[fam.labels[i]] = std::max(max_u[fam.labels[i]], fam.u[i]);
  }
  double prefix = 1.0;  // prod_{s<h} (1 - nu_s) with the already-updated sticks
  for (int h = 0; h < H; ++h) {
    const double a = max_u[h] > 0.0 ? max_u[h] / prefix : 0.0;
    // Later occupants g need w_g > u: nu_h <= 1 - u (1 - nu_h) / w_g with the current sticks.
    double b = 1.0;
    double pg = prefix * (1.0 - fam.nu[h]);
    for (int g = h + 1; g < H; ++g) {
      if (max_u[g] > 0.0) {
        const double wg = fam.nu[g] * pg;
        b = std::min(b, 1.0 - max_u[g] * (1.0 - fam.nu[h]) / wg);
      }
      pg *= (1.0 - fam.nu[g]);
    }
    if (a > b) {
      ++crossing_warnings_;
      std::cerr << "fpdpm: warning: stick bounds crossed (a=" << a << ", b=" << b << "); using a\n";
    }
    fam.nu[h] = draw_truncated_stick(a, b, alpha, rng_);
    prefix *= (1.0 - fam.nu[h]);
  }
  fam.recompute_weights();
}

void GibbsSampler::step_update_weights() {
  for (int b = 0; b < state_.layout.num_blocks(); ++b) {
    update_family_weights(state_.coef_families[b], alpha_of_block(b));
  }
  if (!state_.cov_tied) update_family_weights(state_.cov_family, hyper_.alpha_sigma);
}

void GibbsSampler::extend_sticks() {
  for (int b = 0; b < state_.layout.num_blocks(); ++b) {
    StickFamily& fam = state_.coef_families[b];
    const double u_star = *std::min_element(fam.u.begin(), fam.u.end());
    const CoefficientBlock& blk = state_.layout.blocks[b];
    const bool tied = state_.cov_tied && b == 0;
    extend_family(fam, alpha_of_block(b), u_star, rng_, [&] {
      state_.coef_atoms[b].push_back(draw_coefficient_atom(hyper_, blk.level, blk.size, rng_));
      if (tied) state_.cov_atoms.push_back(new_cov_atom());
    });
  }
  if (!state_.cov_tied) {
    StickFamily& fam = state_.cov_family;
    const double u_star = *std::min_element(fam.u.begin(), fam.u.end());
    extend_family(fam, hyper_.alpha_sigma, u_star, rng_,
                  [&] { state_.cov_atoms.push_back(new_cov_atom()); });
  }
}

std::vector<GibbsSampler::CovCache> GibbsSampler::build_cov_caches() const {
  std::vector<CovCache> caches(state_.cov_atoms.size());
  for (std::size_t s = 0; s < caches.size(); ++s) {
    const CovarianceAtom& atom = state_.cov_atoms[s];
    caches[s].dens.emplace(atom.Lambda_coef, atom.sigma2);
    caches[s].gram = atom.Lambda_coef.transpose() * atom.Lambda_coef;
  }
  return caches;
}

namespace {

/// log N(r; 0, Lambda Lambda^T + D) where D = s on every coordinate except the
/// block [off, off + m), which carries s + tau2. Inputs are the sufficient
/// statistics of r: its squared norm, Lambda^T r, and the block values.
double block_marginal_logdensity(const LowRankGaussian& dens, const Eigen::MatrixXd& gram, int off,
                                 const Eigen::Ref<const Eigen::VectorXd>& rb, double sqnorm, const Eigen::VectorXd& lt_r,
                                 const Eigen::VectorXd& tau2) {
  const int L = dens.L();
  const int K = dens.K();
  const int m = static_cast<int>(rb.size());
  const double s = dens.sigma2();
  const Eigen::ArrayXd dk = s + tau2.array();
  double logdet = (L - m) * std::log(s) + dk.log().sum();
  double quad = (sqnorm - rb.squaredNorm()) / s + (rb.array().square() / dk).sum();
  if (K > 0) {
    const auto lb = dens.loadings().middleRows(off, m);
    const Eigen::MatrixXd lb_scaled = lb.array().colwise() / dk;
    const Eigen::MatrixXd gb = lb.transpose() * lb;
    Eigen::MatrixXd M = (gram - gb) / s + lb.transpose() * lb_scaled;
    M.diagonal().array() += 1.0;
    const Eigen::VectorXd v = (lt_r - lb.transpose() * rb) / s + lb_scaled.transpose() * rb;
    const Eigen::LLT<Eigen::MatrixXd> chol(M);
    if (chol.info() != Eigen::Success) throw NumericError("marginal Woodbury matrix is not positive definite");
    for (int r = 0; r < K; ++r) logdet += 2.0 * std::log(chol.matrixL()(r, r));
    quad -= v.dot(chol.solve(v));
  }
  return -0.5 * (L * kLog2Pi + logdet + quad);
}

}  // namespace

void GibbsSampler::score_block(int unit, int b, const Eigen::VectorXd& r0, double sq0, const Eigen::VectorXd& lt0,
                               const std::vector<CovCache>& caches, MembershipCandidates& out) const {
  const StickFamily& fam = state_.coef_families[b];
  const CoefficientBlock& blk = state_.layout.blocks[b];
  const auto& atoms = state_.coef_atoms[b];
  const bool tied = state_.cov_tied && b == 0;
  const int own = fam.labels[unit];
  const double u = fam.u[unit];
  const auto rb = r0.segment(blk.offset, blk.size);

  out.atoms.clear();
  out.log_weights.clear();
  out.marginal.clear();
  thread_local Eigen::VectorXd scratch;
  for (int g = 0; g < fam.num_sticks(); ++g) {
    if (!(fam.w[g] > u)) continue;
    const CovCache& cache = caches[tied ? g : state_.cov_label(unit)];
    const LowRankGaussian& dens = *cache.dens;
    const int others = fam.counts[g] - (g == own ? 1 : 0);
    const bool marginal = options_.marginalize_empty_atoms && others == 0;
    Eigen::VectorXd lt_r;
    if (dens.K() > 0) lt_r = tied ? Eigen::VectorXd(dens.loadings().transpose() * r0) : lt0;
    double lp;
    if (options_.density == MembershipDensity::FullVector) {
      if (marginal) {
        const double sq = r0.squaredNorm();
        const Eigen::VectorXd lt = dens.K() > 0 ? Eigen::VectorXd(dens.loadings().transpose() * r0) : lt_r;
        lp = block_marginal_logdensity(dens, cache.gram, blk.offset, rb, sq, lt, atoms[g].tau2);
      } else {
        scratch = r0;
        scratch.segment(blk.offset, blk.size) -= atoms[g].value;
        lp = dens.log_density(scratch);
      }
    } else if (marginal) {
      lp = block_marginal_logdensity(dens, cache.gram, blk.offset, rb, sq0, lt_r, atoms[g].tau2);
    } else {
      const Eigen::VectorXd& beta = atoms[g].value;
      const double sq = sq0 - 2.0 * rb.dot(beta) + beta.squaredNorm();
      Eigen::VectorXd bvec;
      if (dens.K() > 0) bvec = lt_r - dens.loadings().middleRows(blk.offset, blk.size).transpose() * beta;
      lp = dens.log_density_from_stats(sq, bvec);
    }
    out.atoms.push_back(g);
    out.log_weights.push_back(lp);
    out.marginal.push_back(marginal);
  }
  if (out.atoms.empty()) {
    throw StateCorruptionError("empty slice set for unit " + std::to_string(unit) + " in block " +
                               std::to_string(b));
  }
  normalize_log_weights(out.log_weights, out.probabilities);
}

MembershipCandidates GibbsSampler::score_covariance(int unit, const Eigen::VectorXd& residual,
                                                    const std::vector<CovCache>& caches) const {
  const StickFamily& fam = state_.cov_family;
  const double u = fam.u[unit];
  MembershipCandidates out;
  for (int g = 0; g < fam.num_sticks(); ++g) {
    if (!(fam.w[g] > u)) continue;
    out.atoms.push_back(g);
    out.log_weights.push_back(caches[g].dens->log_density(residual));
    out.marginal.push_back(false);
  }
  if (out.atoms.empty()) throw StateCorruptionError("empty covariance slice set for unit " + std::to_string(unit));
  normalize_log_weights(out.log_weights, out.probabilities);
  return out;
}

MembershipCandidates GibbsSampler::membership_candidates(int unit, int block) const {
  const auto caches = build_cov_caches();
  const CoefficientBlock& blk = state_.layout.blocks.at(block);
  Eigen::VectorXd r0 = coef_.col(unit) - compose_coefficients(state_, unit);
  r0.segment(blk.offset, blk.size) += state_.coef_atoms[block][state_.coef_families[block].labels[unit]].value;
  const LowRankGaussian& dens = *caches[state_.cov_label(unit)].dens;
  const Eigen::VectorXd lt0 = dens.K() > 0 ? Eigen::VectorXd(dens.loadings().transpose() * r0) : Eigen::VectorXd();
  MembershipCandidates out;
  score_block(unit, block, r0, r0.squaredNorm(), lt0, caches, out);
  return out;
}

MembershipCandidates GibbsSampler::covariance_candidates(int unit) const {
  if (state_.cov_tied) throw ParameterError("covariance labels are tied to the coefficient labels");
  const auto caches = build_cov_caches();
  const Eigen::VectorXd r = coef_.col(unit) - compose_coefficients(state_, unit);
  return score_covariance(unit, r, caches);
}

int GibbsSampler::sample_index(const std::vector<double>& p) {
  double t = rng_.uniform();
  for (std::size_t k = 0; k + 1 < p.size(); ++k) {
    t -= p[k];
    if (t < 0.0) return static_cast<int>(k);
  }
  return static_cast<int>(p.size()) - 1;
}

Eigen::VectorXd GibbsSampler::draw_one_unit_posterior(int b, int g, const Eigen::VectorXd& r0,
                                                      const CovCache& cache) {
  const CoefficientBlock& blk = state_.layout.blocks[b];
  const Eigen::VectorXd& tau2 = state_.coef_atoms[b][g].tau2;
  const LowRankGaussian& dens = *cache.dens;
  const double s = dens.sigma2();
  const int m = blk.size;
  const int K = dens.K();
  const Eigen::ArrayXd dprec = tau2.array().inverse() + 1.0 / s;  // diagonal of D
  Eigen::VectorXd lin = r0.segment(blk.offset, m);
  if (K > 0) lin -= dens.loadings().middleRows(blk.offset, m) * dens.solve_inner(dens.loadings().transpose() * r0);
  lin /= s;

  const Eigen::VectorXd z1 = rng_.normal_vector(m);
  if (K == 0) {
    return (lin.array() / dprec + z1.array() / dprec.sqrt()).matrix();
  }
  // Precision Q = D - V V^T with V = s^{-1/2} Lambda_b L_C^{-T}.
  const Eigen::MatrixXd lbT = dens.loadings().middleRows(blk.offset, m).transpose();  // K x m
  const Eigen::MatrixXd V = dens.inner_cholesky().matrixL().solve(lbT).transpose() / std::sqrt(s);
  const Eigen::MatrixXd DinvV = V.array().colwise() / dprec;
  Eigen::MatrixXd M = -V.transpose() * DinvV;
  M.diagonal().array() += 1.0;
  const Eigen::LLT<Eigen::MatrixXd> cm(M);
  if (cm.info() != Eigen::Success) throw NumericError("one-unit coefficient posterior is not positive definite");
  // Q^{-1} = D^{-1} + W W^T, W = D^{-1} V N^{-T}, M = N N^T.
  const Eigen::VectorXd dlin = (lin.array() / dprec).matrix();
  const Eigen::VectorXd mean = dlin + DinvV * cm.solve(V.transpose() * dlin);
  const Eigen::MatrixXd W = cm.matrixL().solve(DinvV.transpose()).transpose();  // m x K
  const Eigen::VectorXd z2 = rng_.normal_vector(K);
  return mean + (z1.array() / dprec.sqrt()).matrix() + W * z2;
}

void GibbsSampler::draw_eta(int unit, const Eigen::VectorXd& residual, const CovCache& cache) {
  const LowRankGaussian& dens = *cache.dens;
  const int K = dens.K();
  if (K == 0) {
    state_.eta[unit].resize(0);
    return;
  }
  const Eigen::VectorXd mean = dens.solve_inner(dens.loadings().transpose() * residual);
  const Eigen::VectorXd z = rng_.normal_vector(K);
  state_.eta[unit] = mean + std::sqrt(dens.sigma2()) * dens.inner_cholesky().matrixU().solve(z);
}

void GibbsSampler::step_update_memberships() {
  const auto caches = build_cov_caches();
  const int B = state_.layout.num_blocks();
  MembershipCandidates cand;
  for (int i = 0; i < n(); ++i) {
    Eigen::VectorXd r = coef_.col(i) - compose_coefficients(state_, i);
    const LowRankGaussian& own = *caches[state_.cov_label(i)].dens;
    double sq = r.squaredNorm();
    Eigen::VectorXd lt = own.K() > 0 ? Eigen::VectorXd(own.loadings().transpose() * r) : Eigen::VectorXd();
    // Keeps sq = |r|^2 and lt = Lambda^T r current after a block change of delta.
    const auto shift = [&](const CoefficientBlock& blk, const Eigen::VectorXd& delta, double sign) {
      auto seg = r.segment(blk.offset, blk.size);
      sq -= seg.squaredNorm();
      seg += sign * delta;
      sq += seg.squaredNorm();
      if (own.K() > 0) lt.noalias() += sign * (own.loadings().middleRows(blk.offset, blk.size).transpose() * delta);
    };
    for (int b = 0; b < B; ++b) {
      StickFamily& fam = state_.coef_families[b];
      const CoefficientBlock& blk = state_.layout.blocks[b];
      auto& atoms = state_.coef_atoms[b];
      const int old = fam.labels[i];
      shift(blk, atoms[old].value, 1.0);
      score_block(i, b, r, sq, lt, caches, cand);
      const int k = sample_index(cand.probabilities);
      const int g = cand.atoms[k];
      if (g != old) {
        --fam.counts[old];
        ++fam.counts[g];
        fam.labels[i] = g;
      }
      if (cand.marginal[k]) {
        const CovCache& cache = caches[state_.cov_tied && b == 0 ? g : state_.cov_label(i)];
        atoms[g].value = draw_one_unit_posterior(b, g, r, cache);
      }
      shift(blk, atoms[g].value, -1.0);
    }
    if (!state_.cov_tied) {
      StickFamily& fam = state_.cov_family;
      const MembershipCandidates cand = score_covariance(i, r, caches);
      const int g = cand.atoms[sample_index(cand.probabilities)];
      if (g != fam.labels[i]) {
        --fam.counts[fam.labels[i]];
        ++fam.counts[g];
        fam.labels[i] = g;
      }
    }
    draw_eta(i, r, caches[state_.cov_label(i)]);
  }
}

void GibbsSampler::step_update_coefficients() {
  const int B = state_.layout.num_blocks();
  const int nn = n();
  // Working residuals c_i - sum_j beta_{h_ij j} - Lambda_coef eta_i.
  Eigen::MatrixXd R(L(), nn);
  Eigen::VectorXd inv_s(nn);
  for (int i = 0; i < nn; ++i) {
    const CovarianceAtom& atom = state_.cov_atom_of(i);
    R.col(i) = coef_.col(i) - compose_coefficients(state_, i);
    if (atom.K() > 0) R.col(i) -= atom.Lambda_coef * state_.eta[i];
    inv_s[i] = 1.0 / atom.sigma2;
  }
  for (int b = 0; b < B; ++b) {
    const CoefficientBlock& blk = state_.layout.blocks[b];
    StickFamily& fam = state_.coef_families[b];
    auto& atoms = state_.coef_atoms[b];
    const int H = fam.num_sticks();
    std::vector<double> prec(H, 0.0);
    std::vector<Eigen::VectorXd> rhs(H, Eigen::VectorXd::Zero(blk.size));
    for (int i = 0; i < nn; ++i) {
      const int g = fam.labels[i];
      prec[g] += inv_s[i];
      rhs[g] += inv_s[i] * (R.col(i).segment(blk.offset, blk.size) + atoms[g].value);
    }
    std::vector<Eigen::VectorXd> old(H);
    for (int g = 0; g < H; ++g) {
      old[g] = atoms[g].value;
      CoefficientAtom& a = atoms[g];
      for (int k = 0; k < blk.size; ++k) {
        const double A = prec[g] + 1.0 / a.tau2[k];
        a.value[k] = rhs[g][k] / A + rng_.normal() / std::sqrt(A);
      }
    }
    for (int i = 0; i < nn; ++i) {
      const int g = fam.labels[i];
      R.col(i).segment(blk.offset, blk.size) -= atoms[g].value - old[g];
    }
  }
}

void GibbsSampler::step_update_factors() {
  const auto caches = build_cov_caches();
  for (int i = 0; i < n(); ++i) {
    const Eigen::VectorXd r = coef_.col(i) - compose_coefficients(state_, i);
    draw_eta(i, r, caches[state_.cov_label(i)]);
  }
}

void GibbsSampler::step_update_loadings() {
  if (options_.errors != ErrorModel::LowRank) return;
  const int nn = n();
  const int Lp = L();
  std::vector<std::vector<int>> members(state_.cov_atoms.size());
  for (int i = 0; i < nn; ++i) members[state_.cov_label(i)].push_back(i);
  Eigen::MatrixXd E;  // pixel-domain residuals y_i - theta_i, one column per unit
  bool have_e = false;
  for (std::size_t s = 0; s < state_.cov_atoms.size(); ++s) {
    CovarianceAtom& atom = state_.cov_atoms[s];
    const int K = atom.K();
    if (K == 0) continue;
    const auto& mem = members[s];
    Eigen::MatrixXd HHt = Eigen::MatrixXd::Zero(K, K);
    Eigen::MatrixXd EH = Eigen::MatrixXd::Zero(Lp, K);
    if (!mem.empty()) {
      if (!have_e) {
        E.resize(Lp, nn);
        for (int i = 0; i < nn; ++i) E.col(i) = pixels_.col(i) - mean_function(i);
        have_e = true;
      }
      Eigen::MatrixXd Hm(K, mem.size());
      Eigen::MatrixXd Em(Lp, mem.size());
      for (std::size_t t = 0; t < mem.size(); ++t) {
        Hm.col(t) = state_.eta[mem[t]];
        Em.col(t) = E.col(mem[t]);
      }
      HHt = Hm * Hm.transpose();
      EH = Em * Hm.transpose();
    }
    const Eigen::VectorXd xi = atom.xi();
    const double inv_s = 1.0 / atom.sigma2;
    for (int l = 0; l < Lp; ++l) {
      Eigen::MatrixXd P = HHt * inv_s;
      for (int r = 0; r < K; ++r) P(r, r) += atom.phi(l, r) * xi[r] * atom.e;
      const Eigen::LLT<Eigen::MatrixXd> chol(P);
      if (chol.info() != Eigen::Success) throw NumericError("loading row precision is not positive definite");
      const Eigen::VectorXd mean = chol.solve(EH.row(l).transpose() * inv_s);
      atom.Lambda.row(l) = (mean + chol.matrixU().solve(rng_.normal_vector(K))).transpose();
    }
    atom.refresh_basis_loadings(basis_);
  }
}

void GibbsSampler::remove_factor(CovarianceAtom& atom, int atom_index, int column) {
  const int K = atom.K();
  auto drop_col = [column, K](Eigen::MatrixXd& m) {
    for (int c = column; c + 1 < K; ++c) m.col(c) = m.col(c + 1);
    m.conservativeResize(Eigen::NoChange, K - 1);
  };
  drop_col(atom.Lambda);
  drop_col(atom.phi);
  for (int c = column; c + 1 < K; ++c) atom.delta[c] = atom.delta[c + 1];
  atom.delta.conservativeResize(K - 1);
  for (int i = 0; i < n(); ++i) {
    if (state_.cov_label(i) != atom_index) continue;
    Eigen::VectorXd& eta = state_.eta[i];
    for (int c = column; c + 1 < K; ++c) eta[c] = eta[c + 1];
    eta.conservativeResize(K - 1);
  }
}

void GibbsSampler::adapt_factor_count(int iteration) {
  if (!factors_active_ || !options_.adapt_factors) return;
  const AdaptParams& ap = hyper_.adapt;
  const double p = std::exp(-ap.b0 - ap.b1 * iteration);
  if (!(rng_.uniform() < p)) return;
  for (std::size_t s = 0; s < state_.cov_atoms.size(); ++s) {
    CovarianceAtom& atom = state_.cov_atoms[s];
    const int K = atom.K();
    std::vector<int> redundant;
    for (int r = 0; r < K; ++r) {
      const double frac =
          (atom.Lambda.col(r).array().abs() < ap.delta_thresh).cast<double>().sum() / atom.L();
      if (frac >= ap.q) redundant.push_back(r);
    }
    if (!redundant.empty()) {
      if (static_cast<int>(redundant.size()) >= K) redundant.erase(redundant.begin());
      for (auto it = redundant.rbegin(); it != redundant.rend(); ++it) {
        remove_factor(atom, static_cast<int>(s), *it);
      }
    } else if (K < k_max()) {
      append_factor_column(atom, hyper_, rng_);
      for (int i = 0; i < n(); ++i) {
        if (state_.cov_label(i) != static_cast<int>(s)) continue;
        Eigen::VectorXd& eta = state_.eta[i];
        eta.conservativeResize(K + 1);
        eta[K] = rng_.normal();
      }
    } else {
      continue;
    }
    atom.refresh_basis_loadings(basis_);
  }
}

void GibbsSampler::step_update_variance() {
  const std::size_t S = state_.cov_atoms.size();
  std::vector<double> sse(S, 0.0);
  std::vector<int> count(S, 0);
  for (int i = 0; i < n(); ++i) {
    const int s = state_.cov_label(i);
    const CovarianceAtom& atom = state_.cov_atoms[s];
    Eigen::VectorXd r = coef_.col(i) - compose_coefficients(state_, i);
    if (atom.K() > 0) r -= atom.Lambda_coef * state_.eta[i];
    sse[s] += r.squaredNorm();
    ++count[s];
  }
  for (std::size_t s = 0; s < S; ++s) {
    const double shape = hyper_.a_s + 0.5 * count[s] * L();
    const double rate = hyper_.b_s + 0.5 * sse[s];
    state_.cov_atoms[s].sigma2 = std::max(1.0 / rng_.gamma(shape, rate), kVarianceFloor);
  }
}

void GibbsSampler::step_update_hyperlatents() {
  const double w2 = hyper_.omega2;
  for (auto& atoms : state_.coef_atoms) {
    for (auto& a : atoms) {
      for (Eigen::Index k = 0; k < a.value.size(); ++k) {
        const double beta = std::abs(a.value[k]);
        double t2;
        if (beta < 1e-150) {
          t2 = rng_.exponential(w2);
        } else {
          t2 = 1.0 / rng_.inverse_gaussian(std::sqrt(2.0 * w2) / beta, 2.0 * w2);
        }
        a.tau2[k] = std::max(t2, kVarianceFloor);
      }
    }
  }

  const MgpParams& mg = hyper_.mgp;
  for (auto& atom : state_.cov_atoms) {
    const int K = atom.K();
    if (K == 0) continue;
    const int Lp = atom.L();
    const Eigen::MatrixXd lam2 = atom.Lambda.array().square();
    Eigen::VectorXd xi = atom.xi();
    for (int l = 0; l < Lp; ++l) {
      for (int r = 0; r < K; ++r) {
        atom.phi(l, r) = rng_.gamma(2.0, 0.5 * (3.0 + atom.e * xi[r] * lam2(l, r)));
      }
    }
    // col_sum[r] = sum_l phi_lr lambda_lr^2
    const Eigen::VectorXd col_sum = (atom.phi.array() * lam2.array()).colwise().sum().transpose();
    for (int m = 0; m < K; ++m) {
      double acc = 0.0;
      double prod = 1.0;  // xi_r^{(m)}: product of delta_t over t <= r, t != m
      for (int t = 0; t < m; ++t) prod *= atom.delta[t];
      for (int r = m; r < K; ++r) {
        if (r > m) prod *= atom.delta[r];
        acc += prod * col_sum[r];
      }
      const double shape = (m == 0 ? mg.a1 : mg.a2) + 0.5 * Lp * (K - m);
      atom.delta[m] = rng_.gamma(shape, 1.0 + 0.5 * atom.e * acc);
    }
    xi = atom.xi();
    atom.e = rng_.gamma(mg.a_e + 0.5 * Lp * K, mg.b_e + 0.5 * xi.dot(col_sum));
  }
}

void GibbsSampler::collect_garbage() {
  for (int b = 0; b < state_.layout.num_blocks(); ++b) {
    StickFamily& fam = state_.coef_families[b];
    const int keep = std::max(fam.last_occupied() + 1, 1);
    fam.nu.resize(keep);
    fam.counts.resize(keep);
    state_.coef_atoms[b].resize(keep, state_.coef_atoms[b].front());
    if (state_.cov_tied && b == 0) state_.cov_atoms.resize(keep, state_.cov_atoms.front());
    fam.recompute_weights();
  }
  if (!state_.cov_tied) {
    StickFamily& fam = state_.cov_family;
    const int keep = std::max(fam.last_occupied() + 1, 1);
    fam.nu.resize(keep);
    fam.counts.resize(keep);
    state_.cov_atoms.resize(keep, state_.cov_atoms.front());
    fam.recompute_weights();
  }
}

void GibbsSampler::ensure_finite(int iteration) const {
  for (std::size_t b = 0; b < state_.coef_atoms.size(); ++b) {
    for (const auto& a : state_.coef_atoms[b]) {
      if (!a.value.allFinite()) throw NumericAbort(iteration, "coefficients", "block " + std::to_string(b));
      if (!a.tau2.allFinite()) throw NumericAbort(iteration, "tau2", "block " + std::to_string(b));
    }
    for (double v : state_.coef_families[b].nu) {
      if (!std::isfinite(v)) throw NumericAbort(iteration, "weights", "block " + std::to_string(b));
    }
  }
  for (std::size_t s = 0; s < state_.cov_atoms.size(); ++s) {
    const CovarianceAtom& a = state_.cov_atoms[s];
    const std::string where = "covariance atom " + std::to_string(s);
    if (!std::isfinite(a.sigma2)) throw NumericAbort(iteration, "sigma2", where);
    if (!a.Lambda.allFinite()) throw NumericAbort(iteration, "loadings", where);
    if (!a.phi.allFinite() || !a.delta.allFinite() || !std::isfinite(a.e)) {
      throw NumericAbort(iteration, "shrinkage", where);
    }
  }
  for (std::size_t i = 0; i < state_.eta.size(); ++i) {
    if (!state_.eta[i].allFinite()) throw NumericAbort(iteration, "factors", "unit " + std::to_string(i));
  }
}

void GibbsSampler::activate_factors() {
  if (factors_active_ || options_.errors != ErrorModel::LowRank) return;
  factors_active_ = true;
  for (auto& atom : state_.cov_atoms) {
    for (int r = atom.K(); r < hyper_.k_init; ++r) append_factor_column(atom, hyper_, rng_);
    atom.refresh_basis_loadings(basis_);
  }
  for (int i = 0; i < n(); ++i) state_.eta[i] = rng_.normal_vector(state_.cov_atom_of(i).K());
  step_update_loadings();
}

void GibbsSampler::sweep(int iteration) {
  if (!factors_active_ && options_.errors == ErrorModel::LowRank && iteration > options_.warmup_sweeps) {
    activate_factors();
  }
  step_slice_aux();
  step_update_weights();
  extend_sticks();
  step_update_memberships();
  step_update_coefficients();
  step_update_factors();
  step_update_loadings();
  adapt_factor_count(iteration);
  step_update_variance();
  step_update_hyperlatents();
  collect_garbage();
  ensure_finite(iteration);
}

Eigen::VectorXd GibbsSampler::mean_function(int unit) const {
  return basis_.inverse(compose_coefficients(state_, unit));
}

Trace run_chain(const FunctionalDataset& data, const Hyperparameters& hyper, const ChainConfig& config,
                const SamplerOptions& options) {
  config.validate();
  const int kept = retained_count(config.n_iter, config.burn_in_fraction, 1);
  const int target = retained_count(config.n_iter, config.burn_in_fraction, config.thinning);
  const int burn = config.n_iter - kept;
  SamplerOptions resolved = options;
  if (resolved.warmup_sweeps < 0) resolved.warmup_sweeps = burn / 4;
  GibbsSampler sampler(data, hyper, resolved, config.seed);
  sampler.initialize();

  Trace trace;
  trace.n = data.n();
  trace.L = data.L();
  trace.num_levels = data.grid.num_levels();
  trace.seed = config.seed;
  trace.mean_sum = Eigen::MatrixXd::Zero(trace.n, trace.L);

  // Block whose label represents each level in the trace.
  const BlockLayout& layout = sampler.state().layout;
  std::vector<int> level_block(trace.num_levels, 0);
  if (options.blocks != BlockScheme::Tied) {
    for (int j = trace.num_levels - 1; j >= 0; --j) {
      for (int b = layout.num_blocks() - 1; b >= 0; --b) {
        if (layout.blocks[b].level == j) level_block[j] = b;
      }
    }
  }

  Eigen::VectorXd means = data.unit_means.size() == trace.n ? data.unit_means : Eigen::VectorXd::Zero(trace.n);
  for (int t = 0; t < config.n_iter; ++t) {
    const auto start = std::chrono::steady_clock::now();
    sampler.sweep(t + 1);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (config.record_timings) trace.sweep_seconds.push_back(secs);
    if (t < burn || (t - burn) % config.thinning != config.thinning - 1 || trace.retained >= target) continue;

    const MixtureState& st = sampler.state();
    if (config.record_memberships) {
      std::vector<int> row(static_cast<std::size_t>(trace.n) * trace.num_levels);
      std::vector<int> cov(trace.n);
      for (int i = 0; i < trace.n; ++i) {
        for (int j = 0; j < trace.num_levels; ++j) {
          row[static_cast<std::size_t>(i) * trace.num_levels + j] = st.coef_families[level_block[j]].labels[i];
        }
        cov[i] = st.cov_label(i);
      }
      trace.memberships.push_back(std::move(row));
      trace.cov_memberships.push_back(std::move(cov));
    }
    if (config.record_factor_counts) {
      std::vector<int> ks(trace.n);
      for (int i = 0; i < trace.n; ++i) ks[i] = st.cov_atom_of(i).K();
      trace.factor_counts.push_back(std::move(ks));
    }
    Eigen::MatrixXd theta(trace.n, trace.L);
    for (int i = 0; i < trace.n; ++i) theta.row(i) = sampler.mean_function(i).transpose().array() + means[i];
    trace.mean_sum += theta;
    if (config.record_means) trace.means.push_back(theta.cast<float>());
    ++trace.retained;
  }
  return trace;
}

int worker_limit() {
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw < 1) hw = 1;
  if (const char* env = std::getenv("FPDPM_THREADS")) {
    try {
      const int v = std::stoi(env);
      if (v >= 1) return v;
    } catch (const std::exception&) {
    }
  }
  return hw;
}

std::vector<Trace> run_chains(const FunctionalDataset& data, const Hyperparameters& hyper,
                              const ChainConfig& config, const SamplerOptions& options,
                              const std::vector<std::uint64_t>& seeds, int max_threads) {
  std::vector<Trace> out(seeds.size());
  std::vector<std::exception_ptr> errors(seeds.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < seeds.size(); k = next++) {
      try {
        ChainConfig c = config;
        c.seed = seeds[k];
        out[k] = run_chain(data, hyper, c, options);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const int nthreads = std::max(1, std::min<int>(max_threads, static_cast<int>(seeds.size())));
  std::vector<std::thread> pool;
  for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace fpdpm
