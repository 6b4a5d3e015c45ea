#include "mflq/lq_env.hpp"

#include <cmath>
#include <string>

namespace mflq {

namespace {

bool positive_definite(const MatrixXd& m) {
  if (m.rows() != m.cols() || !is_symmetric(m, 1e-12 * std::max(1.0, m.norm()))) return false;
  return Eigen::LLT<MatrixXd>(m).info() == Eigen::Success;
}

/// Lower factor L with L L^T = cov; falls back to the symmetric square root
/// for semidefinite input.
MatrixXd covariance_factor(const MatrixXd& cov) {
  Eigen::LLT<MatrixXd> llt(symmetrize(cov));
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(symmetrize(cov));
  const VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

void LqSystem::validate() const {
  const Index n = A.rows();
  const Index d = B.cols();
  if (A.cols() != n || B.rows() != n || M.rows() != n || M.cols() != n ||
      W.rows() != n || W.cols() != n || N.rows() != d || N.cols() != d) {
    throw DimensionError("LqSystem: inconsistent dimensions (n = " + std::to_string(n) +
                         ", d = " + std::to_string(d) + ")");
  }
  if (!A.allFinite() || !B.allFinite()) throw DomainError("LqSystem: non-finite dynamics");
  if (!positive_definite(M)) throw DomainError("LqSystem: M must be symmetric positive definite");
  if (!positive_definite(N)) throw DomainError("LqSystem: N must be symmetric positive definite");
  if (!positive_definite(W)) throw DomainError("LqSystem: W must be symmetric positive definite");
}

MatrixXd LqSystem::cost_floor() const {
  const Index n = state_dim();
  const Index d = action_dim();
  MatrixXd floor = MatrixXd::Zero(n + d, n + d);
  floor.topLeftCorner(n, n) = M;
  floor.bottomRightCorner(d, d) = N;
  return floor;
}

bool LinearPolicy::is_stable(const LqSystem& sys) const {
  if (!K.allFinite()) return false;
  return spectral_radius(closed_loop(sys)) < 1.0;
}

StepResult step(const LqSystem& sys, const VectorXd& x, const VectorXd& a, Rng& rng,
                bool noiseless) {
  if (x.size() != sys.state_dim() || a.size() != sys.action_dim()) {
    throw DimensionError("step: state/action dimension mismatch");
  }
  StepResult out;
  out.cost = sys.cost(x, a);
  out.x_next = sys.A * x + sys.B * a;
  if (!noiseless) out.x_next += covariance_factor(sys.W) * rng.normals(sys.state_dim());
  return out;
}

Simulator::Simulator(LqSystem sys, std::uint64_t seed, SimulatorOptions options)
    : sys_(std::move(sys)),
      noise_factor_(covariance_factor(sys_.W)),
      seed_(seed),
      options_(options),
      x_(VectorXd::Zero(sys_.state_dim())),
      noise_buffer_(sys_.state_dim()) {}

void Simulator::reset(const VectorXd& x0, std::int64_t t0) {
  if (x0.size() != sys_.state_dim()) throw DimensionError("Simulator::reset: bad state size");
  x_ = x0;
  t_ = t0;
}

Transition Simulator::advance(const VectorXd& a, bool exploratory) {
  if (a.size() != sys_.action_dim()) throw DimensionError("Simulator::advance: bad action size");
  Transition tr;
  tr.x = x_;
  tr.a = a;
  tr.cost = sys_.cost(x_, a);
  tr.exploratory = exploratory;
  VectorXd next = sys_.A * x_ + sys_.B * a;
  if (!options_.noiseless) {
    Rng rng = Rng::keyed(seed_, Stream::kProcessNoise, static_cast<std::uint64_t>(t_));
    for (Index i = 0; i < noise_buffer_.size(); ++i) noise_buffer_(i) = rng.normal();
    next.noalias() += noise_factor_ * noise_buffer_;
  }
  tr.x_next = next;
  x_ = std::move(next);
  ++t_;
  return tr;
}

VectorXd Simulator::exploration_normals(Index count) const {
  Rng rng = Rng::keyed(seed_, Stream::kExploration, static_cast<std::uint64_t>(t_));
  return rng.normals(count);
}

Trajectory rollout(Simulator& sim, const LinearPolicy& policy, Index steps) {
  if (steps < 1) throw DomainError("rollout: need at least one step");
  Trajectory traj;
  traj.steps.reserve(static_cast<std::size_t>(steps));
  for (Index k = 0; k < steps; ++k) {
    const std::int64_t t = sim.time();
    traj.steps.push_back(sim.advance(policy.action(sim.state())));
    if (sim.beyond_threshold()) {
      traj.diverged_at = t;
      break;
    }
  }
  return traj;
}

Trajectory rollout(const LqSystem& sys, const LinearPolicy& policy, Index steps,
                   const VectorXd& x0, std::uint64_t seed, SimulatorOptions options) {
  Simulator sim(sys, seed, options);
  sim.reset(x0);
  return rollout(sim, policy, steps);
}

DataCollection collect_data(Simulator& sim, const LinearPolicy& policy, Index budget,
                            Index period, const MatrixXd& action_cov, bool record_all) {
  if (period < 1) throw DomainError("collect_data: exploration period must be >= 1");
  const Index d = sim.system().action_dim();
  if (action_cov.rows() != d || action_cov.cols() != d) {
    throw DimensionError("collect_data: action covariance has wrong size");
  }
  if (Eigen::LLT<MatrixXd>(symmetrize(action_cov)).info() != Eigen::Success) {
    throw DomainError("collect_data: action covariance must be positive definite");
  }
  const MatrixXd action_factor = Eigen::LLT<MatrixXd>(symmetrize(action_cov)).matrixL();
  const Index rounds = budget / period;
  DataCollection out;
  out.data.tuples.reserve(static_cast<std::size_t>(record_all ? rounds * period : rounds));
  out.trajectory.steps.reserve(static_cast<std::size_t>(rounds * period));
  auto record = [&](Transition tr) -> bool {
    const std::int64_t t = sim.time() - 1;
    if (record_all) {
      Transition copy = tr;
      copy.exploratory = true;
      out.data.tuples.push_back(std::move(copy));
    } else if (tr.exploratory) {
      out.data.tuples.push_back(tr);
    }
    out.trajectory.steps.push_back(std::move(tr));
    if (sim.beyond_threshold()) {
      out.trajectory.diverged_at = t;
      return false;
    }
    return true;
  };
  for (Index r = 0; r < rounds; ++r) {
    for (Index k = 0; k + 1 < period; ++k) {
      if (!record(sim.advance(policy.action(sim.state())))) return out;
    }
    const VectorXd a = action_factor * sim.exploration_normals(d);
    if (!record(sim.advance(a, /*exploratory=*/true))) return out;
  }
  return out;
}

PolicyValue policy_value(const LqSystem& sys, const LinearPolicy& policy) {
  const Index n = sys.state_dim();
  const Index d = sys.action_dim();
  if (policy.K.rows() != d || policy.K.cols() != n) {
    throw DimensionError("policy_value: gain must be d x n");
  }
  const MatrixXd gamma = policy.closed_loop(sys);
  // H = Gamma^T H Gamma + M + K^T N K
  const MatrixXd stage = symmetrize(sys.M + policy.K.transpose() * sys.N * policy.K);
  PolicyValue out;
  out.H.H = solve_lyapunov(gamma.transpose(), stage);
  MatrixXd ab(n, n + d);
  ab << sys.A, sys.B;
  out.G.G = symmetrize(ab.transpose() * out.H.H * ab + sys.cost_floor());
  out.G.state_dim = n;
  out.lambda = (out.H.H * sys.W).trace();
  return out;
}

QMatrix q_matrix_of(const LqSystem& sys, const LinearPolicy& policy) {
  return policy_value(sys, policy).G;
}

LinearPolicy greedy_policy(const QMatrix& g) {
  const Index d = g.action_dim();
  if (d <= 0) throw DimensionError("greedy_policy: empty action block");
  const MatrixXd g22 = symmetrize(MatrixXd(g.G22()));
  Eigen::LLT<MatrixXd> llt(g22);
  if (llt.info() != Eigen::Success || !g22.allFinite()) {
    throw IllConditionedError("greedy_policy: G22 is not positive definite");
  }
  return LinearPolicy{llt.solve(MatrixXd(g.G21()))};
}

MatrixXd stationary_covariance(const LqSystem& sys, const LinearPolicy& policy) {
  return solve_lyapunov(policy.closed_loop(sys), sys.W);
}

double bellman_residual(const LqSystem& sys, const LinearPolicy& policy, const MatrixXd& H,
                        double lambda, std::span<const VectorXd> states) {
  const MatrixXd gamma = policy.closed_loop(sys);
  const MatrixXd next_value = gamma.transpose() * H * gamma;
  const double noise_term = (H * sys.W).trace();
  double worst = 0.0;
  for (const auto& x : states) {
    const double lhs = x.dot(H * x);
    const double rhs = sys.cost(x, policy.action(x)) - lambda + x.dot(next_value * x) + noise_term;
    worst = std::max(worst, std::abs(lhs - rhs));
  }
  return worst;
}

OptimalController optimal_controller(const LqSystem& sys) {
  const auto sol = riccati_value_iteration(sys.A, sys.B, sys.M, sys.N);
  OptimalController out;
  out.policy.K = sol.gain;
  out.P = sol.value;
  out.lambda = (sol.value * sys.W).trace();
  if (!out.policy.is_stable(sys)) {
    throw InstabilityError("optimal_controller: Riccati gain does not stabilise the system");
  }
  return out;
}

}  // namespace mflq
