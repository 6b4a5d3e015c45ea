#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mflq/linalg.hpp"
#include "mflq/random.hpp"

namespace mflq {

/// x' = A x + B a + w, w ~ N(0, W), cost x^T M x + a^T N a.
struct LqSystem {
  MatrixXd A;
  MatrixXd B;
  MatrixXd M;
  MatrixXd N;
  MatrixXd W;

  Index state_dim() const { return A.rows(); }
  Index action_dim() const { return B.cols(); }

  /// Throws DimensionError / DomainError when shapes disagree or a cost or
  /// noise matrix is not symmetric positive definite.
  void validate() const;

  double cost(const VectorXd& x, const VectorXd& a) const {
    return x.dot(M * x) + a.dot(N * a);
  }

  MatrixXd cost_floor() const;  ///< blockdiag(M, N)
};

/// a = -K x.
struct LinearPolicy {
  MatrixXd K;

  VectorXd action(const VectorXd& x) const { return -K * x; }
  MatrixXd closed_loop(const LqSystem& sys) const { return sys.A - sys.B * K; }
  bool is_stable(const LqSystem& sys) const;
};

/// Q(x, a) = (x; a)^T G (x; a), blocks split at the state dimension.
struct QMatrix {
  MatrixXd G;
  Index state_dim = 0;

  Index action_dim() const { return G.rows() - state_dim; }
  auto G11() const { return G.topLeftCorner(state_dim, state_dim); }
  auto G12() const { return G.topRightCorner(state_dim, action_dim()); }
  auto G21() const { return G.bottomLeftCorner(action_dim(), state_dim); }
  auto G22() const { return G.bottomRightCorner(action_dim(), action_dim()); }
};

/// V(x) = x^T H x.
struct ValueMatrix {
  MatrixXd H;
};

struct PolicyValue {
  QMatrix G;
  ValueMatrix H;
  double lambda = 0.0;  ///< average cost tr(H W)
};

struct Transition {
  VectorXd x;
  VectorXd a;
  double cost = 0.0;
  VectorXd x_next;
  bool exploratory = false;
};

struct Trajectory {
  std::vector<Transition> steps;
  /// Global step index at which ||x|| crossed the divergence threshold.
  std::optional<std::int64_t> diverged_at;

  bool diverged() const { return diverged_at.has_value(); }
  Index size() const { return static_cast<Index>(steps.size()); }
};

struct TransitionDataset {
  std::vector<Transition> tuples;
};

struct StepResult {
  VectorXd x_next;
  double cost = 0.0;
};

/// One transition with w = chol(W) * rng.normals(n). With `noiseless` the
/// generator is not touched and w = 0.
StepResult step(const LqSystem& sys, const VectorXd& x, const VectorXd& a, Rng& rng,
                bool noiseless = false);

inline constexpr double kDivergenceThreshold = 1e8;

struct SimulatorOptions {
  bool noiseless = false;
  double divergence_threshold = kDivergenceThreshold;
};

/// Stateful plant. Process noise at global step t is drawn from
/// Rng::keyed(seed, kProcessNoise, t), exploration from kExploration.
class Simulator {
 public:
  Simulator(LqSystem sys, std::uint64_t seed, SimulatorOptions options = {});

  const LqSystem& system() const { return sys_; }
  const VectorXd& state() const { return x_; }
  std::int64_t time() const { return t_; }
  std::uint64_t seed() const { return seed_; }
  const SimulatorOptions& options() const { return options_; }

  void reset(const VectorXd& x0, std::int64_t t0 = 0);

  /// Applies `a`, advances time, returns the recorded transition.
  Transition advance(const VectorXd& a, bool exploratory = false);

  /// Standard-normal draws for an exploratory action at the current step.
  VectorXd exploration_normals(Index count) const;

  bool beyond_threshold() const { return !(x_.norm() <= options_.divergence_threshold); }

 private:
  LqSystem sys_;
  MatrixXd noise_factor_;
  std::uint64_t seed_;
  SimulatorOptions options_;
  VectorXd x_;
  std::int64_t t_ = 0;
  VectorXd noise_buffer_;
};

/// Runs a = -K x for `steps` steps. Stops early, with diverged_at set, once
/// ||x|| exceeds the simulator's divergence threshold.
Trajectory rollout(Simulator& sim, const LinearPolicy& policy, Index steps);

/// Convenience overload: fresh simulator started at x0.
Trajectory rollout(const LqSystem& sys, const LinearPolicy& policy, Index steps,
                   const VectorXd& x0, std::uint64_t seed, SimulatorOptions options = {});

struct DataCollection {
  TransitionDataset data;
  Trajectory trajectory;  ///< every step taken, in order
};

/// floor(budget / period) rounds of: follow the policy for period - 1 steps,
/// then play a ~ N(0, action_cov) and record (x, a, x+). State carries over
/// between rounds. With `record_all` every transition enters the dataset.
DataCollection collect_data(Simulator& sim, const LinearPolicy& policy, Index budget,
                            Index period, const MatrixXd& action_cov,
                            bool record_all = false);

/// G, H and lambda for a stable linear policy. Throws InstabilityError.
PolicyValue policy_value(const LqSystem& sys, const LinearPolicy& policy);

/// The Q matrix of a policy (G block of policy_value).
QMatrix q_matrix_of(const LqSystem& sys, const LinearPolicy& policy);

/// K = G22^{-1} G21. Throws IllConditionedError if G22 is not positive definite.
LinearPolicy greedy_policy(const QMatrix& g);

/// Solution of Sigma = (A - BK) Sigma (A - BK)^T + W.
MatrixXd stationary_covariance(const LqSystem& sys, const LinearPolicy& policy);

/// max_x |x^T H x - c(x, -Kx) + lambda - (x^T G^T H G x + tr(H W))|.
double bellman_residual(const LqSystem& sys, const LinearPolicy& policy, const MatrixXd& H,
                        double lambda, std::span<const VectorXd> states);

struct OptimalController {
  LinearPolicy policy;
  MatrixXd P;
  double lambda = 0.0;
};

/// Riccati fixed point and its gain; throws DomainError for uncontrollable
/// systems and DivergenceError when value iteration does not settle.
OptimalController optimal_controller(const LqSystem& sys);

}  // namespace mflq
