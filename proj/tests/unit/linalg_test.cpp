#include "mflq/linalg.hpp"

#include <gtest/gtest.h>

#include "mflq/random.hpp"

namespace mflq {
namespace {

MatrixXd RandomStable(Index n, Rng& rng, double radius) {
  MatrixXd m(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) m(i, j) = rng.normal();
  return m * (radius / spectral_radius(m));
}

MatrixXd RandomSymmetric(Index n, Rng& rng) {
  MatrixXd m(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) m(i, j) = rng.normal();
  return (m + m.transpose()) / 2;
}

TEST(SymVec, IdentityAndTraceIdentity) {
  const VectorXd v = sym_vec(MatrixXd::Identity(2, 2));
  EXPECT_EQ(v, (VectorXd(4) << 1, 0, 0, 1).finished());
  EXPECT_DOUBLE_EQ(v.dot(v), 2.0);

  MatrixXd x(2, 2), y(2, 2);
  x << 1, 2, 2, 3;
  y << 0, 1, 1, 0;
  EXPECT_DOUBLE_EQ(sym_vec(x).dot(sym_vec(y)), 4.0);
  EXPECT_DOUBLE_EQ((x * y).trace(), 4.0);
  EXPECT_TRUE(sym_vec(MatrixXd::Zero(3, 3)).isZero());
}

TEST(SymMat, RoundTripAndSymmetrisation) {
  EXPECT_EQ(sym_mat((VectorXd(4) << 1, 0, 0, 1).finished()), MatrixXd::Identity(2, 2));
  MatrixXd half(2, 2);
  half << 0, 0.5, 0.5, 0;
  EXPECT_EQ(sym_mat((VectorXd(4) << 0, 1, 0, 0).finished()), half);

  Rng rng(7);
  for (int k = 0; k < 20; ++k) {
    const MatrixXd x = RandomSymmetric(1 + k % 5, rng);
    EXPECT_EQ(sym_mat(sym_vec(x)), x);
  }
  EXPECT_THROW(sym_mat(VectorXd::Zero(5)), DimensionError);
}

TEST(OuterVec, MatchesOuterProduct) {
  const VectorXd x = (VectorXd(3) << 1, -2, 0.5).finished();
  EXPECT_EQ(outer_vec(x), sym_vec(MatrixXd(x * x.transpose())));
}

TEST(SpectralRadius, HandValues) {
  EXPECT_NEAR(spectral_radius(MatrixXd::Identity(3, 3)), 1.0, 1e-14);
  EXPECT_EQ(spectral_radius(MatrixXd::Zero(3, 3)), 0.0);
  MatrixXd a(2, 2);
  a << 0, 1, -0.25, 0;
  EXPECT_NEAR(spectral_radius(a), 0.5, 1e-12);
  EXPECT_NEAR(spectral_radius_power(a), 0.5, 1e-6);
}

TEST(Lyapunov, ZeroDynamicsAndScalar) {
  const MatrixXd w = (MatrixXd(2, 2) << 2, 0.3, 0.3, 1).finished();
  EXPECT_TRUE(solve_lyapunov(MatrixXd::Zero(2, 2), w).isApprox(w));
  const MatrixXd x = solve_lyapunov(MatrixXd::Constant(1, 1, 0.5), MatrixXd::Constant(1, 1, 1.0));
  EXPECT_NEAR(x(0, 0), 4.0 / 3.0, 1e-14);
}

TEST(Lyapunov, ResidualAndSeriesOracle) {
  Rng rng(11);
  for (int k = 0; k < 100; ++k) {
    const Index n = 1 + k % 8;
    const MatrixXd g = RandomStable(n, rng, 0.1 + 0.8 * rng.uniform());
    const MatrixXd q = RandomSymmetric(n, rng);
    const MatrixXd x = solve_lyapunov(g, q);
    EXPECT_LE((x - g * x * g.transpose() - q).norm(), 1e-10 * std::max(1.0, q.norm()));
    if (n == 4) {
      MatrixXd series = MatrixXd::Zero(n, n);
      MatrixXd power = MatrixXd::Identity(n, n);
      for (int s = 0; s <= 200; ++s) {
        series += power * q * power.transpose();
        power = g * power;
      }
      EXPECT_LE((series - x).cwiseAbs().maxCoeff(), 1e-8);
    }
  }
}

TEST(Lyapunov, Errors) {
  EXPECT_THROW(solve_lyapunov(MatrixXd::Identity(2, 2), MatrixXd::Identity(2, 2)),
               InstabilityError);
  EXPECT_THROW(solve_lyapunov(MatrixXd::Zero(33, 33), MatrixXd::Identity(33, 33)),
               UnsupportedDimensionError);
}

TEST(PsdProject, Cases) {
  const MatrixXd i2 = MatrixXd::Identity(2, 2);
  const MatrixXd x = (MatrixXd(2, 2) << 3, 1, 1, 2).finished();
  EXPECT_TRUE(psd_project(x, i2).isApprox(x, 1e-12));
  EXPECT_TRUE(psd_project(MatrixXd::Zero(2, 2), i2).isApprox(i2, 1e-12));
  const MatrixXd clipped = psd_project(MatrixXd(Eigen::Vector2d(2, -1).asDiagonal()),
                                       MatrixXd::Zero(2, 2));
  EXPECT_TRUE(clipped.isApprox(MatrixXd(Eigen::Vector2d(2, 0).asDiagonal()), 1e-12));
}

TEST(PsdProject, FloorIdempotentNonExpansive) {
  Rng rng(3);
  for (int k = 0; k < 50; ++k) {
    const Index n = 1 + k % 6;
    const MatrixXd floor = MatrixXd::Identity(n, n);
    const MatrixXd a = 3 * RandomSymmetric(n, rng);
    const MatrixXd b = 3 * RandomSymmetric(n, rng);
    const MatrixXd pa = psd_project(a, floor);
    EXPECT_GE(min_eigenvalue(MatrixXd(pa - floor)), -1e-10);
    EXPECT_LE((psd_project(pa, floor) - pa).norm(), 1e-10);
    EXPECT_LE((pa - psd_project(b, floor)).norm(), (a - b).norm() + 1e-10);
  }
}

TEST(Pinv, Cases) {
  const VectorXd b = Eigen::Vector2d(2, 3);
  EXPECT_TRUE(pinv_solve(MatrixXd::Identity(2, 2), b).isApprox(b));
  EXPECT_TRUE(pinv_solve(MatrixXd::Zero(2, 2), b).isZero());
  const MatrixXd rank1 = (MatrixXd(2, 2) << 1, 0, 0, 0).finished();
  EXPECT_TRUE(pinv_solve(rank1, b).isApprox(Eigen::Vector2d(2, 0)));
  EXPECT_EQ(pinv_solve_detailed(rank1, b).rank, 1);
}

TEST(Resolvent, HandValues) {
  EXPECT_NEAR(hinf_resolvent_norm(MatrixXd::Zero(3, 3)), 1.0, 1e-12);
  EXPECT_NEAR(hinf_resolvent_norm(MatrixXd::Constant(1, 1, 0.5)), 2.0, 1e-10);
  EXPECT_NEAR(hinf_resolvent_norm(MatrixXd(Eigen::Vector2d(0.5, -0.5).asDiagonal())), 2.0,
              1e-10);
  EXPECT_THROW(hinf_resolvent_norm(MatrixXd::Constant(1, 1, 1.0)), InstabilityError);
}

TEST(Resolvent, DominatesRealAxisPoints) {
  Rng rng(5);
  for (int k = 0; k < 20; ++k) {
    const MatrixXd a = RandomStable(3, rng, 0.9);
    const double sup = hinf_resolvent_norm(a);
    EXPECT_GE(sup, detail::resolvent_norm_at<double>(a, 0.0) - 1e-12);
    EXPECT_GE(sup, detail::resolvent_norm_at<double>(a, std::numbers::pi) - 1e-12);
  }
}

TEST(Riccati, ScalarWithoutDrift) {
  const auto sol = riccati_value_iteration(MatrixXd::Zero(1, 1), MatrixXd::Ones(1, 1),
                                           MatrixXd::Ones(1, 1), MatrixXd::Ones(1, 1));
  EXPECT_NEAR(sol.gain(0, 0), 0.0, 1e-12);
  EXPECT_NEAR(sol.value(0, 0), 1.0, 1e-12);
}

TEST(Riccati, SatisfiesAlgebraicEquation) {
  MatrixXd a(2, 2), b(2, 1);
  a << 1, 1, 0, 1;
  b << 0, 1;
  const MatrixXd q = MatrixXd::Identity(2, 2);
  const MatrixXd r = MatrixXd::Constant(1, 1, 0.3);
  const auto sol = riccati_value_iteration(a, b, q, r);
  const MatrixXd& p = sol.value;
  const MatrixXd residual = a.transpose() * p * a - p -
                            a.transpose() * p * b * (b.transpose() * p * b + r).inverse() *
                                b.transpose() * p * a +
                            q;
  EXPECT_LE(residual.norm(), 1e-8);
  EXPECT_LT(spectral_radius(MatrixXd(a - b * sol.gain)), 1.0);
}

TEST(Riccati, RejectsUncontrollable) {
  EXPECT_THROW(riccati_value_iteration(MatrixXd::Identity(2, 2), MatrixXd::Zero(2, 1),
                                       MatrixXd::Identity(2, 2), MatrixXd::Identity(1, 1)),
               DomainError);
}

TEST(Kernels, FloatInstantiation) {
  const Eigen::MatrixXf g = Eigen::MatrixXf::Constant(1, 1, 0.5f);
  const Eigen::MatrixXf x = solve_lyapunov(g, Eigen::MatrixXf::Identity(1, 1));
  EXPECT_NEAR(x(0, 0), 4.0f / 3.0f, 1e-5f);
}

}  // namespace
}  // namespace mflq
