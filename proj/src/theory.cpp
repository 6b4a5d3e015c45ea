#include "mflq/theory.hpp"

#include <cmath>

#include "mflq/errors.hpp"

namespace mflq::theory {

namespace {

MonteCarloEstimate summarize(double sum, double sum_sq, Index samples) {
  MonteCarloEstimate out;
  out.samples = samples;
  const double n = static_cast<double>(samples);
  out.mean = sum / n;
  const double var = samples > 1 ? std::max(sum_sq / n - out.mean * out.mean, 0.0) * n / (n - 1)
                                 : 0.0;
  out.standard_error = std::sqrt(var / n);
  return out;
}

void check_square(const MatrixXd& m, Index n, const char* what) {
  if (m.rows() != n || m.cols() != n) throw DimensionError(what);
}

}  // namespace

MatrixXd mixing_covariance(const MatrixXd& gamma) {
  return solve_lyapunov(gamma, MatrixXd(gamma * gamma.transpose()));
}

double beta_bar(const MixingBoundSpec& spec) { return beta_mixing_bound(spec, 0); }

double beta_mixing_bound(const MixingBoundSpec& spec, Index lag) {
  const double rho = spectral_radius(spec.gamma);
  if (!(spec.rate > rho && spec.rate < 1.0)) {
    throw DomainError("beta_mixing_bound: rate must lie in (rho(Gamma), 1)");
  }
  if (lag < 0) throw DomainError("beta_mixing_bound: negative lag");
  const MatrixXd sigma = mixing_covariance(spec.gamma);
  const double resolvent = hinf_resolvent_norm(MatrixXd(spec.gamma / spec.rate));
  const double spread =
      std::sqrt(sigma.trace() + static_cast<double>(spec.dim) / (1.0 - spec.rate * spec.rate));
  return 0.5 * resolvent * spread * std::pow(spec.rate, static_cast<double>(lag));
}

BlockPartition block_partition(Index n, Index block_length) {
  if (block_length < 1 || 2 * block_length > n) {
    throw DomainError("block_partition: need 1 <= b <= n / 2");
  }
  BlockPartition p;
  p.n = n;
  p.block_length = block_length;
  p.pairs = n / (2 * block_length);
  const Index b = block_length;
  for (Index j = 1; j <= p.pairs; ++j) {
    p.heads.push_back({2 * (j - 1) * b + 1, (2 * j - 1) * b});
    p.tails.push_back({(2 * j - 1) * b + 1, 2 * j * b});
  }
  p.residual = {2 * p.pairs * b + 1, n};
  return p;
}

PartialSumBound partial_sum_bound(Index n, double alpha, double beta_bar, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw DomainError("partial_sum_bound: delta in (0, 1)");
  if (!(alpha > 0.0)) throw DomainError("partial_sum_bound: rate must be positive");
  if (!(2.0 * beta_bar * static_cast<double>(n) >= 1.0)) {
    throw DomainError("partial_sum_bound: requires 2 beta_bar n >= 1");
  }
  const double log_term = std::log(2.0 * beta_bar * static_cast<double>(n) / delta);
  PartialSumBound out;
  out.block_length = std::max<Index>(1, static_cast<Index>(std::ceil(log_term / alpha)));
  out.bound = 2.0 * log_term * (std::sqrt(static_cast<double>(n) / alpha) + 1.0 / alpha);
  out.failure_probability = 4.0 * delta;
  return out;
}

BlockBoundCheck verify_block_bound(const MatrixXd& gamma, double geometric_rate,
                                   const Observable& f, Index n, double delta, Index trials,
                                   std::uint64_t seed, Index centering_steps) {
  const Index k = gamma.rows();
  check_square(gamma, k, "verify_block_bound: Gamma must be square");
  BlockBoundCheck out;
  out.trials = trials;
  out.beta_bar = beta_bar({gamma, geometric_rate, k});
  out.exp_rate = -std::log(geometric_rate);
  out.bound = partial_sum_bound(n, out.exp_rate, out.beta_bar, delta).bound;

  const MatrixXd stat_root = psd_sqrt(solve_lyapunov(gamma, MatrixXd::Identity(k, k)));
  VectorXd x(k), next(k), w(k);
  auto draw = [&](Rng& rng, VectorXd& v) {
    for (Index i = 0; i < k; ++i) v(i) = rng.normal();
  };

  if (centering_steps > 0) {
    Rng rng = Rng::keyed(seed, Stream::kReference);
    draw(rng, w);
    x.noalias() = stat_root * w;
    double sum = 0.0;
    for (Index t = 0; t < centering_steps; ++t) {
      sum += f(x);
      draw(rng, w);
      next.noalias() = gamma * x;
      x = next + w;
    }
    out.centre = sum / static_cast<double>(centering_steps);
  }

  Index violations = 0;
  for (Index trial = 0; trial < trials; ++trial) {
    Rng rng = Rng::keyed(seed, Stream::kMonteCarlo, static_cast<std::uint64_t>(trial));
    draw(rng, w);
    x.noalias() = stat_root * w;
    double s = 0.0;
    for (Index t = 0; t < n; ++t) {
      s += f(x) - out.centre;
      draw(rng, w);
      next.noalias() = gamma * x;
      x = next + w;
    }
    if (std::abs(s) > out.bound) ++violations;
  }
  out.violation_rate =
      trials > 0 ? static_cast<double>(violations) / static_cast<double>(trials) : 0.0;
  return out;
}

double gaussian_fourth_moment(const MatrixXd& f, const MatrixXd& f_prime) {
  if (f.rows() != f_prime.rows() || f.cols() != f_prime.cols()) {
    throw DimensionError("gaussian_fourth_moment: shapes differ");
  }
  return 2.0 * f.cwiseProduct(f_prime).sum() + f.trace() * f_prime.trace();
}

MonteCarloEstimate gaussian_fourth_moment_mc(const MatrixXd& f, const MatrixXd& f_prime,
                                             Index samples, Rng& rng) {
  const Index k = f.rows();
  double sum = 0.0, sum_sq = 0.0;
  VectorXd g(k);
  for (Index s = 0; s < samples; ++s) {
    for (Index i = 0; i < k; ++i) g(i) = rng.normal();
    const double value = g.dot(f * g) * g.dot(f_prime * g);
    sum += value;
    sum_sq += value * value;
  }
  return summarize(sum, sum_sq, samples);
}

MatrixXd psd_sqrt(const MatrixXd& sigma) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(symmetrize(sigma));
  const VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return symmetrize(MatrixXd(eig.eigenvectors() * root.asDiagonal() *
                             eig.eigenvectors().transpose()));
}

double small_ball_statistic(const MatrixXd& sigma_root, const MatrixXd& gamma,
                            const MatrixXd& v_mat, const VectorXd& g, const VectorXd& g_prime) {
  const VectorXd x = sigma_root * g;
  const VectorXd x_next = gamma * x + g_prime;
  return x_next.dot(v_mat * x_next) - x.dot(v_mat * x);
}

double small_ball_second_moment(const MatrixXd& sigma, const MatrixXd& gamma,
                                const VectorXd& v) {
  const MatrixXd V = sym_mat(v);
  const MatrixXd root = psd_sqrt(sigma);
  const MatrixXd a = root * gamma.transpose() * V * gamma * root;
  const MatrixXd b = root * V * root;
  const double lead = a.trace() - b.trace() + V.trace();
  return lead * lead + 2.0 * (a - b).squaredNorm() + 2.0 * V.squaredNorm() +
         4.0 * (root * gamma.transpose() * V).squaredNorm();
}

namespace {

template <typename Fn>
MonteCarloEstimate small_ball_mc(const MatrixXd& sigma, const MatrixXd& gamma,
                                 const VectorXd& v, Index samples, Rng& rng, Fn&& map) {
  const Index k = sigma.rows();
  check_square(gamma, k, "small_ball: Gamma and Sigma differ in size");
  const MatrixXd V = sym_mat(v);
  check_square(V, k, "small_ball: v has the wrong length");
  const MatrixXd root = psd_sqrt(sigma);
  VectorXd g(k), gp(k);
  double sum = 0.0, sum_sq = 0.0;
  for (Index s = 0; s < samples; ++s) {
    for (Index i = 0; i < k; ++i) g(i) = rng.normal();
    for (Index i = 0; i < k; ++i) gp(i) = rng.normal();
    const double value = map(small_ball_statistic(root, gamma, V, g, gp));
    sum += value;
    sum_sq += value * value;
  }
  return summarize(sum, sum_sq, samples);
}

}  // namespace

MonteCarloEstimate small_ball_second_moment_mc(const MatrixXd& sigma, const MatrixXd& gamma,
                                               const VectorXd& v, Index samples, Rng& rng) {
  return small_ball_mc(sigma, gamma, v, samples, rng, [](double f) { return f * f; });
}

MonteCarloEstimate small_ball_probability(const MatrixXd& sigma, const MatrixXd& gamma,
                                          const VectorXd& v, Index samples, Rng& rng,
                                          double threshold) {
  MonteCarloEstimate out = small_ball_mc(sigma, gamma, v, samples, rng, [&](double f) {
    return std::abs(f) >= threshold ? 1.0 : 0.0;
  });
  out.standard_error = binomial_se(out.mean, samples);
  return out;
}

VectorXd symmetric_coordinates(const VectorXd& full_vec) {
  const MatrixXd x = sym_mat(full_vec);
  const Index n = x.rows();
  VectorXd out(n * (n + 1) / 2);
  Index r = 0;
  for (Index i = 0; i < n; ++i) {
    out(r++) = x(i, i);
    for (Index j = i + 1; j < n; ++j) out(r++) = std::sqrt(2.0) * x(i, j);
  }
  return out;
}

GramFloor gram_floor_check(std::span<const VectorXd> features, double omega,
                           double small_ball_prob) {
  if (features.empty()) throw InsufficientDataError("gram_floor_check: no features");
  const Index k = features.front().size();
  MatrixXd gram = MatrixXd::Zero(k, k);
  for (const auto& x : features) gram.selfadjointView<Eigen::Lower>().rankUpdate(x);
  gram = gram.selfadjointView<Eigen::Lower>();
  gram /= static_cast<double>(features.size());
  GramFloor out;
  out.lambda_min = min_eigenvalue(gram);
  out.floor = omega * omega * small_ball_prob / 8.0;
  return out;
}

StateBounds state_bounds(double c_h, Index n, Index horizon, double delta2) {
  if (!(c_h > 0.5)) throw DomainError("state_bounds: C_H must exceed 1/2");
  if (!(delta2 > 0.0 && delta2 < 1.0)) throw DomainError("state_bounds: delta2 in (0, 1)");
  const double tn = static_cast<double>(horizon) * static_cast<double>(n);
  if (!(tn > delta2)) throw DomainError("state_bounds: T n must exceed delta2");
  const double contraction = 1.0 - std::sqrt(1.0 - 1.0 / (4.0 * c_h * c_h));
  StateBounds out;
  out.state = std::sqrt(2.0 * static_cast<double>(n) * std::log(tn / delta2)) / contraction;
  out.action = std::sqrt(c_h) * out.state;
  return out;
}

double upper_moment_bound(const MatrixXd& sigma) {
  const double t = psd_sqrt(sigma).trace();
  return 12.0 * t * t;
}

double upper_moment_bound_trace(const MatrixXd& sigma) {
  const double t = sigma.trace();
  return 12.0 * t * t;
}

MonteCarloEstimate feature_difference_moment_mc(const MatrixXd& sigma, const MatrixXd& gamma,
                                                Index samples, Rng& rng) {
  const Index k = sigma.rows();
  check_square(gamma, k, "feature_difference_moment_mc: sizes differ");
  const MatrixXd root = psd_sqrt(sigma);
  VectorXd g(k), gp(k);
  double sum = 0.0, sum_sq = 0.0;
  for (Index s = 0; s < samples; ++s) {
    for (Index i = 0; i < k; ++i) g(i) = rng.normal();
    for (Index i = 0; i < k; ++i) gp(i) = rng.normal();
    const VectorXd x = root * g;
    const VectorXd x_next = gamma * x + gp;
    const double value = (x_next * x_next.transpose() - x * x.transpose()).squaredNorm();
    sum += value;
    sum_sq += value * value;
  }
  return summarize(sum, sum_sq, samples);
}

double binomial_se(double p, Index trials) {
  if (trials <= 0) return 0.0;
  return std::sqrt(std::max(p * (1.0 - p), 0.0) / static_cast<double>(trials));
}

}  // namespace mflq::theory
