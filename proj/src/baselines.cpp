#include "mflq/baselines.hpp"

#include <cmath>

namespace mflq {

RunRecord run_lspi(const LqSystem& sys, const LinearPolicy& initial,
                   const PhaseSchedule& schedule, const MatrixXd& action_cov,
                   std::uint64_t seed, const RunOptions& options) {
  const MatrixXd floor = sys.cost_floor();
  auto update = [&](detail::PhaseContext& ctx) {
    detail::estimate_phase(ctx, options);
    return greedy_policy(QMatrix{psd_project(ctx.record.g_hat, floor), sys.state_dim()});
  };
  return detail::run_phased("lspi", sys, initial, schedule, action_cov, seed, options, update);
}

MatrixXd RlsviPosterior::sample(Rng& rng) const {
  const Index k = mean.size();
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(symmetrize(covariance));
  const VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const VectorXd draw =
      mean + std::sqrt(sample_scale) * (eig.eigenvectors() * root.asDiagonal() * rng.normals(k));
  return symmetrize(sym_mat(draw));
}

namespace {

MatrixXd implied_value(const MatrixXd& g, const MatrixXd& K) {
  const Index n = K.cols();
  MatrixXd lift(g.rows(), n);
  lift << MatrixXd::Identity(n, n), -K;
  return symmetrize(lift.transpose() * g * lift);
}

}  // namespace

RunRecord run_rlsvi(const LqSystem& sys, const LinearPolicy& initial, Index horizon,
                    std::uint64_t seed, const RlsviOptions& options) {
  if (!initial.is_stable(sys)) throw InstabilityError("rlsvi: the initial policy must be stable");
  if (horizon < 1) throw DomainError("rlsvi: horizon must be positive");
  const Index n = sys.state_dim();
  const Index d = sys.action_dim();
  const Index k = (n + d) * (n + d);
  const Index period = options.switch_period > 0
                           ? options.switch_period
                           : std::max<Index>(1, static_cast<Index>(std::floor(
                                                    std::sqrt(static_cast<double>(horizon)))));
  const MatrixXd floor = sys.cost_floor();
  const VectorXd w_vec = sym_vec(sys.W);

  RunRecord run;
  run.algorithm = "rlsvi";
  run.seed = seed;
  run.per_step_costs.reserve(static_cast<std::size_t>(horizon));

  Simulator sim(sys, seed, options.simulator);
  sim.reset(VectorXd::Zero(n));
  LinearPolicy policy = initial;
  MatrixXd g_sample = floor;
  MatrixXd h_sample = implied_value(g_sample, policy.K);

  MatrixXd precision = options.prior_precision * MatrixXd::Identity(k, k);
  VectorXd moment = VectorXd::Zero(k);
  double target_sq = 0.0;
  Index samples = 0;
  Rng posterior_rng = Rng::keyed(seed, Stream::kPosterior);
  VectorXd z(n + d);

  auto open_phase = [&](std::int64_t start) {
    PhaseRecord phase;
    phase.start_step = start;
    phase.policy = policy;
    phase.truth = try_policy_value(sys, policy);
    phase.stable = phase.truth.has_value();
    phase.g_hat = g_sample;
    phase.h_hat = h_sample;
    return phase;
  };

  PhaseRecord phase = open_phase(0);
  for (Index t = 0; t < horizon; ++t) {
    if (t > 0 && t % period == 0) {
      phase.end_step = t;
      run.phases.push_back(std::move(phase));
      Eigen::LLT<MatrixXd> llt(precision);
      const VectorXd mu = llt.solve(moment);
      const double resid = std::max(target_sq - moment.dot(mu), 0.0);
      const double sigma2 = resid / static_cast<double>(std::max<Index>(samples, 1));
      RlsviPosterior post{mu, sigma2 * llt.solve(MatrixXd::Identity(k, k)),
                          options.sample_scale};
      const MatrixXd draw = post.sample(posterior_rng);
      bool rejected = !draw.allFinite();
      if (!rejected) {
        try {
          const MatrixXd projected = psd_project(draw, floor);
          const LinearPolicy next = greedy_policy(QMatrix{projected, n});
          g_sample = projected;
          policy = next;
          h_sample = implied_value(g_sample, policy.K);
        } catch (const Error&) {
          rejected = true;
        }
      }
      phase = open_phase(t);
      phase.update_rejected = rejected;
    }
    const Transition tr = sim.advance(policy.action(sim.state()));
    run.per_step_costs.push_back(tr.cost);
    phase.max_state_norm = std::max({phase.max_state_norm, tr.x.norm(), tr.x_next.norm()});
    phase.max_action_norm = std::max(phase.max_action_norm, tr.a.norm());
    if (sim.beyond_threshold()) {
      run.diverged_at = t;
      break;
    }
    z << tr.x, tr.a;
    const VectorXd psi = outer_vec(z);
    const double y = tr.cost + (outer_vec(tr.x_next) - w_vec).dot(sym_vec(h_sample));
    precision.selfadjointView<Eigen::Lower>().rankUpdate(psi);
    precision.triangularView<Eigen::StrictlyUpper>() =
        precision.transpose().triangularView<Eigen::StrictlyUpper>();
    moment += y * psi;
    target_sq += y * y;
    ++samples;
  }
  phase.end_step = static_cast<std::int64_t>(run.per_step_costs.size());
  run.phases.push_back(std::move(phase));
  run.final_policy = policy;
  if (!run.diverged()) run.final_truth = try_policy_value(sys, policy);
  return run;
}

OlsModel fit_dynamics(std::span<const Transition> steps, Index state_dim, Index action_dim) {
  if (steps.empty()) throw InsufficientDataError("fit_dynamics: no transitions");
  const Index p = state_dim + action_dim;
  MatrixXd zz = MatrixXd::Zero(p, p);
  MatrixXd zx = MatrixXd::Zero(p, state_dim);
  VectorXd z(p);
  for (const auto& tr : steps) {
    z << tr.x, tr.a;
    zz.noalias() += z * z.transpose();
    zx.noalias() += z * tr.x_next.transpose();
  }
  MatrixXd theta(p, state_dim);
  for (Index j = 0; j < state_dim; ++j) theta.col(j) = pinv_solve(zz, VectorXd(zx.col(j)));
  const MatrixXd ab = theta.transpose();
  return {ab.leftCols(state_dim), ab.rightCols(action_dim)};
}

RunRecord run_model_based(const LqSystem& sys, const LinearPolicy& initial,
                          const PhaseSchedule& schedule, const MatrixXd& action_cov,
                          std::uint64_t seed, const RunOptions& options) {
  const Index n = sys.state_dim();
  const Index d = sys.action_dim();
  const Index p = n + d;
  MatrixXd zz = MatrixXd::Zero(p, p);
  MatrixXd zx = MatrixXd::Zero(p, n);
  VectorXd z(p);
  auto absorb = [&](const Trajectory& traj) {
    for (const auto& tr : traj.steps) {
      z << tr.x, tr.a;
      zz.noalias() += z * z.transpose();
      zx.noalias() += z * tr.x_next.transpose();
    }
  };
  auto update = [&](detail::PhaseContext& ctx) {
    absorb(ctx.evaluation);
    absorb(ctx.collection);
    const LinearPolicy& current = ctx.record.policy;
    MatrixXd theta(p, n);
    for (Index j = 0; j < n; ++j) theta.col(j) = pinv_solve(zz, VectorXd(zx.col(j)));
    LqSystem model = sys;
    model.A = theta.transpose().leftCols(n);
    model.B = theta.transpose().rightCols(d);
    ctx.record.a_hat = model.A;
    ctx.record.b_hat = model.B;
    try {
      LinearPolicy next = optimal_controller(model).policy;
      if (next.is_stable(model) && next.K.allFinite()) return next;
    } catch (const Error&) {
    }
    ctx.record.update_rejected = true;
    return current;
  };
  return detail::run_phased("model_based", sys, initial, schedule, action_cov, seed, options,
                            update);
}

RunRecord run_oracle(const LqSystem& sys, const PhaseSchedule& schedule, std::uint64_t seed,
                     const SimulatorOptions& options) {
  const LinearPolicy best = optimal_controller(sys).policy;
  RunRecord run;
  run.algorithm = "oracle";
  run.seed = seed;
  Simulator sim(sys, seed, options);
  sim.reset(VectorXd::Zero(sys.state_dim()));
  const auto truth = try_policy_value(sys, best);
  for (Index i = 1; i <= schedule.phases; ++i) {
    Index length = schedule.variant == Variant::kV1
                       ? schedule.eval_steps + (i == 1 ? schedule.collection_steps() : 0)
                       : schedule.eval_steps + schedule.collection_steps();
    PhaseRecord phase;
    phase.start_step = sim.time();
    phase.policy = best;
    phase.truth = truth;
    phase.stable = truth.has_value();
    const Trajectory traj = rollout(sim, best, length);
    for (const auto& tr : traj.steps) {
      run.per_step_costs.push_back(tr.cost);
      phase.max_state_norm = std::max({phase.max_state_norm, tr.x.norm(), tr.x_next.norm()});
      phase.max_action_norm = std::max(phase.max_action_norm, tr.a.norm());
    }
    phase.end_step = sim.time();
    run.phases.push_back(std::move(phase));
    if (traj.diverged()) {
      run.diverged_at = traj.diverged_at;
      break;
    }
  }
  run.final_policy = best;
  if (!run.diverged()) run.final_truth = truth;
  return run;
}

LinearPolicy initial_policy(const LqSystem& sys, double scale) {
  if (!(scale > 0.0)) throw DomainError("initial_policy: scale must be positive");
  LqSystem inflated = sys;
  inflated.M = scale * sys.M;
  return optimal_controller(inflated).policy;
}

}  // namespace mflq
