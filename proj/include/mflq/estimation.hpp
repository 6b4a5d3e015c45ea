#pragma once

// Least-squares temporal-difference estimators for the value matrix H and the
// state-action matrix G of a linear policy.

#include "mflq/lq_env.hpp"

namespace mflq {

/// Steps dropped from the front of every evaluation trajectory.
inline constexpr Index kDefaultBurnIn = 50;

/// Rows phi_t = vec(x_t x_t^T), phi_next rows vec(x_{t+1} x_{t+1}^T).
struct FeatureBlock {
  MatrixXd phi;
  MatrixXd phi_next;
  VectorXd costs;
  VectorXd noise_row;  ///< vec(W); unused by the unknown-noise estimator

  Index rows() const { return phi.rows(); }
};

/// Rows psi = vec(z z^T) with z = (x; a).
struct StateActionBlock {
  MatrixXd psi;
  MatrixXd phi_next;
  VectorXd costs;
  VectorXd noise_row;

  Index rows() const { return psi.rows(); }
};

struct EstimationReport {
  MatrixXd estimate;      ///< projected onto the declared floor
  MatrixXd raw_estimate;  ///< symmetrised, before projection
  Index sample_count = 0;
  double condition_diagnostic = 0.0;  ///< smallest retained singular value
  bool rank_warning = false;          ///< fewer samples than unknowns
};

/// Drops min(burn_in, size / 2) leading steps. Throws InsufficientDataError
/// on an empty trajectory.
FeatureBlock value_features(const Trajectory& traj, const MatrixXd& W,
                            Index burn_in = kDefaultBurnIn);

StateActionBlock state_action_features(const TransitionDataset& data, const MatrixXd& W);

/// vec(H) = (Phi^T (Phi - Phi+ + W))^+ Phi^T c, projected onto H >= floor.
EstimationReport estimate_h(const FeatureBlock& block, const MatrixXd& floor);
EstimationReport estimate_h(const Trajectory& traj, const LqSystem& sys,
                            Index burn_in = kDefaultBurnIn);

/// Noise-free variant: vec(H) = (Phi^T (Phi - Phi+))^+ Phi^T (c - mean(c)).
EstimationReport estimate_h_unknown_w(const FeatureBlock& block, const MatrixXd& floor);
EstimationReport estimate_h_unknown_w(const Trajectory& traj, const LqSystem& sys,
                                      Index burn_in = kDefaultBurnIn);

/// vec(G) = (Psi^T Psi)^+ Psi^T (c + (Phi+ - W) vec(H_hat)), projected onto
/// G >= floor (normally blockdiag(M, N)).
EstimationReport estimate_g(const StateActionBlock& block, const MatrixXd& h_hat,
                            const MatrixXd& floor);
EstimationReport estimate_g(const TransitionDataset& data, const MatrixXd& h_hat,
                            const LqSystem& sys);

}  // namespace mflq
