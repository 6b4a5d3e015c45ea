#pragma once

// Closed-form concentration / mixing / moment quantities used by the analysis
// of stable linear systems, each paired with a Monte Carlo estimator so the
// formulas can be checked against simulation.

#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "mflq/linalg.hpp"
#include "mflq/random.hpp"

namespace mflq::theory {

struct MonteCarloEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
  Index samples = 0;
};

// ---------------------------------------------------------------------------
// Mixing of x' = Gamma x + w, w ~ N(0, I).

struct MixingBoundSpec {
  MatrixXd gamma;
  double rate = 0.0;  ///< alpha in (rho(Gamma), 1)
  Index dim = 0;      ///< d in the bound; the state dimension
};

/// Sum_{s>=1} Gamma^s Gamma^s^T, i.e. the solution of S = Gamma S Gamma^T +
/// Gamma Gamma^T. Not the stationary covariance (which starts at s = 0).
MatrixXd mixing_covariance(const MatrixXd& gamma);

/// (||R_{Gamma/alpha}||_Hinf / 2) sqrt(tr(S) + d / (1 - alpha^2)) alpha^k.
/// Throws DomainError when alpha is not in (rho(Gamma), 1).
double beta_mixing_bound(const MixingBoundSpec& spec, Index lag);

/// k = 0 value of beta_mixing_bound.
double beta_bar(const MixingBoundSpec& spec);

// ---------------------------------------------------------------------------
// Independent blocks.

struct IndexRange {
  Index first = 1;  ///< 1-based, inclusive
  Index last = 0;   ///< inclusive; empty when last < first

  Index size() const { return last >= first ? last - first + 1 : 0; }
};

struct BlockPartition {
  Index n = 0;
  Index block_length = 0;  ///< b
  Index pairs = 0;         ///< m
  std::vector<IndexRange> heads;
  std::vector<IndexRange> tails;
  IndexRange residual;
};

BlockPartition block_partition(Index n, Index block_length);

struct PartialSumBound {
  Index block_length = 0;  ///< ceil((1/alpha) log(2 beta_bar n / delta))
  double bound = 0.0;      ///< 2 log(2 beta_bar n / delta) (sqrt(n/alpha) + 1/alpha)
  double failure_probability = 0.0;  ///< 4 delta
};

/// Bound on S_n = sum_t X_t for X_t in [-1, 1] with beta_k <= beta_bar e^{-alpha k}.
/// Throws DomainError unless 2 beta_bar n >= 1 and 0 < delta < 1.
PartialSumBound partial_sum_bound(Index n, double alpha, double beta_bar, double delta);

struct BlockBoundCheck {
  double violation_rate = 0.0;
  double bound = 0.0;
  double beta_bar = 0.0;
  double exp_rate = 0.0;  ///< -log(alpha_geometric)
  double centre = 0.0;    ///< stationary mean removed from f
  Index trials = 0;
};

using Observable = std::function<double(const VectorXd&)>;

/// Simulates `trials` length-n paths of x' = Gamma x + w from the stationary
/// law, sums the centred observable f (values in [-1, 1]) and reports how
/// often the sum exceeds partial_sum_bound. The rate passed to the bound is
/// -log(alpha) for the geometric rate alpha of beta_mixing_bound.
BlockBoundCheck verify_block_bound(const MatrixXd& gamma, double geometric_rate,
                                   const Observable& f, Index n, double delta, Index trials,
                                   std::uint64_t seed, Index centering_steps = 1'000'000);

// ---------------------------------------------------------------------------
// Gaussian moments and small-ball quantities.

/// E[g^T F g * g^T F' g] = 2 <F, F'> + tr(F) tr(F') for g ~ N(0, I).
double gaussian_fourth_moment(const MatrixXd& f, const MatrixXd& f_prime);
MonteCarloEstimate gaussian_fourth_moment_mc(const MatrixXd& f, const MatrixXd& f_prime,
                                             Index samples, Rng& rng);

/// f_v(g, g') = <v, phi(Gamma S^{1/2} g + g') - phi(S^{1/2} g)> with v = vec(V).
double small_ball_statistic(const MatrixXd& sigma_root, const MatrixXd& gamma,
                            const MatrixXd& v_mat, const VectorXd& g, const VectorXd& g_prime);

/// Closed form of E f_v^2 (V = sym_mat(v)); always >= 2 ||V||_F^2.
double small_ball_second_moment(const MatrixXd& sigma, const MatrixXd& gamma,
                                const VectorXd& v);
MonteCarloEstimate small_ball_second_moment_mc(const MatrixXd& sigma, const MatrixXd& gamma,
                                               const VectorXd& v, Index samples, Rng& rng);

/// Monte Carlo P(|f_v| >= threshold); mean is the probability.
MonteCarloEstimate small_ball_probability(const MatrixXd& sigma, const MatrixXd& gamma,
                                          const VectorXd& v, Index samples, Rng& rng,
                                          double threshold = 1.0);

/// Symmetric positive semidefinite square root.
MatrixXd psd_sqrt(const MatrixXd& sigma);

/// Orthonormal coordinates of vec(X) on the symmetric subspace: diagonal
/// entries as is, off-diagonal pairs as sqrt(2) X_ij. Isometric for symmetric X.
VectorXd symmetric_coordinates(const VectorXd& full_vec);

struct GramFloor {
  double lambda_min = 0.0;  ///< of (1/tau) sum x x^T
  double floor = 0.0;       ///< omega^2 P(omega) / 8
};

GramFloor gram_floor_check(std::span<const VectorXd> features, double omega,
                           double small_ball_prob);

/// Lower bound on the small-ball probability at omega = 1.
inline constexpr double kSmallBallFloor = 1.0 / 324.0;

// ---------------------------------------------------------------------------
// Boundedness constants.

struct StateBounds {
  double state = 0.0;   ///< C_X
  double action = 0.0;  ///< C_A = sqrt(C_H) C_X
};

/// C_X = sqrt(2 n log(T n / delta2)) / (1 - sqrt(1 - (2 C_H)^-2)).
/// Throws DomainError unless C_H > 1/2, 0 < delta2 < 1 and T n > delta2.
StateBounds state_bounds(double c_h, Index n, Index horizon, double delta2);

/// 12 tr(Sigma^{1/2})^2, the printed second-moment bound for
/// ||phi(x') - phi(x)||^2.
double upper_moment_bound(const MatrixXd& sigma);
/// 12 tr(Sigma)^2, the same chain of inequalities evaluated with
/// E||x||^4 = 2||Sigma||_F^2 + tr(Sigma)^2.
double upper_moment_bound_trace(const MatrixXd& sigma);

/// E||phi(x') - phi(x)||^2 with x ~ N(0, Sigma), x' = Gamma x + g', g' ~ N(0, I).
MonteCarloEstimate feature_difference_moment_mc(const MatrixXd& sigma, const MatrixXd& gamma,
                                                Index samples, Rng& rng);

/// Binomial standard error sqrt(p (1 - p) / trials).
double binomial_se(double p, Index trials);

}  // namespace mflq::theory
