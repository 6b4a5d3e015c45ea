#pragma once

// Comparison learners sharing the RunRecord schema of run_mflq.

#include <cstdint>

#include "mflq/mflq.hpp"

namespace mflq {

/// Policy iteration on the latest estimate only: K_{i+1} = greedy(proj(G_hat_i)).
RunRecord run_lspi(const LqSystem& sys, const LinearPolicy& initial,
                   const PhaseSchedule& schedule, const MatrixXd& action_cov,
                   std::uint64_t seed, const RunOptions& options = {});

/// Gaussian belief over vec(G) for randomized least-squares value iteration.
struct RlsviPosterior {
  VectorXd mean;
  MatrixXd covariance;
  double sample_scale = 0.2;

  /// Draw from N(mean, sample_scale * covariance), reshaped and symmetrised.
  MatrixXd sample(Rng& rng) const;
};

struct RlsviOptions {
  double prior_precision = 1.0;  ///< ridge weight on vec(G)
  double sample_scale = 0.2;
  Index switch_period = 0;       ///< 0 means floor(sqrt(T))
  SimulatorOptions simulator;
};

/// On-policy TD regression for vec(G) with target c + (phi(x') - vec W)^T
/// vec(H_s), where H_s is the value matrix implied by the current sampled G
/// and the current gain. Every switch_period steps a fresh G is drawn from the
/// posterior, projected onto G >= blockdiag(M, N), and its greedy gain is
/// played. A draw that is not finite or has no greedy gain keeps the previous
/// policy and sets update_rejected. Each switch interval is one phase.
RunRecord run_rlsvi(const LqSystem& sys, const LinearPolicy& initial, Index horizon,
                    std::uint64_t seed, const RlsviOptions& options = {});

/// Certainty equivalence: per phase, ordinary least squares of x_{t+1} on
/// (x_t, a_t) over every transition so far, then the Riccati gain of the
/// estimated model. An estimate whose Riccati iteration fails or whose gain
/// does not stabilise (A_hat, B_hat) keeps the previous gain and sets
/// update_rejected.
RunRecord run_model_based(const LqSystem& sys, const LinearPolicy& initial,
                          const PhaseSchedule& schedule, const MatrixXd& action_cov,
                          std::uint64_t seed, const RunOptions& options = {});

/// Optimal gain played for the schedule's total length, with phase boundaries
/// placed where the learners' phases end.
RunRecord run_oracle(const LqSystem& sys, const PhaseSchedule& schedule, std::uint64_t seed,
                     const SimulatorOptions& options = {});

/// Riccati gain for the inflated state cost scale * M.
LinearPolicy initial_policy(const LqSystem& sys, double scale = 200.0);

struct OlsModel {
  MatrixXd A;
  MatrixXd B;
};

/// Least squares fit of x_{t+1} on (x_t, a_t) over the given transitions.
OlsModel fit_dynamics(std::span<const Transition> steps, Index state_dim, Index action_dim);

}  // namespace mflq
