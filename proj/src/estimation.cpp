#include "mflq/estimation.hpp"

#include <algorithm>

namespace mflq {

namespace {

EstimationReport finish(const PinvSolution<double>& sol, Index samples, Index unknowns,
                        const MatrixXd& floor) {
  EstimationReport report;
  report.raw_estimate = sym_mat(sol.x);
  report.estimate = psd_project(report.raw_estimate, floor);
  report.sample_count = samples;
  report.condition_diagnostic = sol.smallest_retained;
  report.rank_warning = samples < unknowns;
  return report;
}

}  // namespace

FeatureBlock value_features(const Trajectory& traj, const MatrixXd& W, Index burn_in) {
  if (traj.steps.empty()) throw InsufficientDataError("value_features: empty trajectory");
  const Index total = traj.size();
  const Index skip = std::min(std::max<Index>(burn_in, 0), total / 2);
  const Index rows = total - skip;
  const Index n = traj.steps.front().x.size();
  FeatureBlock block;
  block.phi.resize(rows, n * n);
  block.phi_next.resize(rows, n * n);
  block.costs.resize(rows);
  for (Index r = 0; r < rows; ++r) {
    const auto& tr = traj.steps[static_cast<std::size_t>(skip + r)];
    block.phi.row(r) = outer_vec(tr.x).transpose();
    block.phi_next.row(r) = outer_vec(tr.x_next).transpose();
    block.costs(r) = tr.cost;
  }
  block.noise_row = sym_vec(W);
  return block;
}

StateActionBlock state_action_features(const TransitionDataset& data, const MatrixXd& W) {
  if (data.tuples.empty()) throw InsufficientDataError("state_action_features: empty dataset");
  const Index rows = static_cast<Index>(data.tuples.size());
  const Index n = data.tuples.front().x.size();
  const Index d = data.tuples.front().a.size();
  StateActionBlock block;
  block.psi.resize(rows, (n + d) * (n + d));
  block.phi_next.resize(rows, n * n);
  block.costs.resize(rows);
  VectorXd z(n + d);
  for (Index r = 0; r < rows; ++r) {
    const auto& tr = data.tuples[static_cast<std::size_t>(r)];
    z << tr.x, tr.a;
    block.psi.row(r) = outer_vec(z).transpose();
    block.phi_next.row(r) = outer_vec(tr.x_next).transpose();
    block.costs(r) = tr.cost;
  }
  block.noise_row = sym_vec(W);
  return block;
}

EstimationReport estimate_h(const FeatureBlock& block, const MatrixXd& floor) {
  if (block.rows() == 0) throw InsufficientDataError("estimate_h: no samples");
  MatrixXd diff = block.phi - block.phi_next;
  diff.rowwise() += block.noise_row.transpose();
  const MatrixXd lhs = block.phi.transpose() * diff;
  const VectorXd rhs = block.phi.transpose() * block.costs;
  return finish(pinv_solve_detailed(lhs, rhs), block.rows(), block.phi.cols(), floor);
}

EstimationReport estimate_h(const Trajectory& traj, const LqSystem& sys, Index burn_in) {
  return estimate_h(value_features(traj, sys.W, burn_in), sys.M);
}

EstimationReport estimate_h_unknown_w(const FeatureBlock& block, const MatrixXd& floor) {
  if (block.rows() < 2) throw InsufficientDataError("estimate_h_unknown_w: need two samples");
  const MatrixXd lhs = block.phi.transpose() * (block.phi - block.phi_next);
  const VectorXd centred = block.costs.array() - block.costs.mean();
  const VectorXd rhs = block.phi.transpose() * centred;
  return finish(pinv_solve_detailed(lhs, rhs), block.rows(), block.phi.cols(), floor);
}

EstimationReport estimate_h_unknown_w(const Trajectory& traj, const LqSystem& sys,
                                      Index burn_in) {
  return estimate_h_unknown_w(value_features(traj, sys.W, burn_in), sys.M);
}

EstimationReport estimate_g(const StateActionBlock& block, const MatrixXd& h_hat,
                            const MatrixXd& floor) {
  if (block.rows() == 0) throw InsufficientDataError("estimate_g: empty dataset");
  const VectorXd h = sym_vec(h_hat);
  if (h.size() != block.phi_next.cols()) throw DimensionError("estimate_g: H has wrong size");
  const VectorXd target =
      block.costs + block.phi_next * h - VectorXd::Constant(block.rows(), block.noise_row.dot(h));
  const MatrixXd gram = block.psi.transpose() * block.psi;
  const VectorXd rhs = block.psi.transpose() * target;
  return finish(pinv_solve_detailed(gram, rhs), block.rows(), block.psi.cols(), floor);
}

EstimationReport estimate_g(const TransitionDataset& data, const MatrixXd& h_hat,
                            const LqSystem& sys) {
  return estimate_g(state_action_features(data, sys.W), h_hat, sys.cost_floor());
}

}  // namespace mflq
