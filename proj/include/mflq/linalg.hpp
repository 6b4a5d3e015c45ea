#pragma once

// Dense small-matrix kernels. Everything here is a pure function templated on
// the scalar type; callers in the rest of the library use double.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <string>

#include "mflq/errors.hpp"

namespace mflq {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Largest state dimension accepted by the Kronecker Lyapunov solver.
inline constexpr Index kMaxLyapunovDim = 32;
/// Default relative singular-value cutoff for pseudo-inverse solves.
inline constexpr double kPinvTolerance = 1e-10;
/// Grid resolution on the unit circle for the resolvent norm.
inline constexpr Index kResolventGridPoints = 4096;

template <typename Derived>
Mat<typename Derived::Scalar> symmetrize(const Eigen::MatrixBase<Derived>& x) {
  return (x + x.transpose()) / typename Derived::Scalar(2);
}

template <typename Derived>
bool is_symmetric(const Eigen::MatrixBase<Derived>& x,
                  typename Derived::Scalar tol = 0) {
  if (x.rows() != x.cols()) return false;
  return (x - x.transpose()).cwiseAbs().maxCoeff() <= tol;
}

/// Full row-major vectorization (off-diagonal entries appear twice, unscaled),
/// so that sym_vec(X).dot(sym_vec(Y)) == trace(X * Y) for symmetric X, Y.
template <typename Derived>
Vec<typename Derived::Scalar> sym_vec(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  if (x.rows() != x.cols()) {
    throw DimensionError("sym_vec: matrix must be square");
  }
  const Index n = x.rows();
  Vec<Scalar> v(n * n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) v(i * n + j) = x(i, j);
  }
  return v;
}

/// Feature map x -> vec(x x^T).
template <typename Derived>
Vec<typename Derived::Scalar> outer_vec(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  const Index n = x.size();
  Vec<Scalar> v(n * n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) v(i * n + j) = x(i) * x(j);
  }
  return v;
}

/// Inverse of sym_vec: row-major reshape followed by (R + R^T) / 2.
template <typename Derived>
Mat<typename Derived::Scalar> sym_mat(const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  const auto len = v.size();
  const auto n = static_cast<Index>(std::llround(std::sqrt(double(len))));
  if (n * n != len) {
    throw DimensionError("sym_mat: length " + std::to_string(len) +
                         " is not a perfect square");
  }
  Mat<Scalar> r(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) r(i, j) = v(i * n + j);
  }
  return symmetrize(r);
}

template <typename Derived>
typename Derived::Scalar spectral_radius(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  if (a.rows() != a.cols()) {
    throw DimensionError("spectral_radius: matrix must be square");
  }
  if (a.size() == 0) return Scalar(0);
  Eigen::EigenSolver<Mat<Scalar>> solver(a.eval(), /*computeEigenvectors=*/false);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

/// Gelfand-formula estimate ||A^(2^k)||^(1/2^k) with rescaling. Slow but
/// independent of the eigen decomposition; used to validate spectral_radius.
template <typename Derived>
typename Derived::Scalar spectral_radius_power(const Eigen::MatrixBase<Derived>& a,
                                               int squarings = 40) {
  using Scalar = typename Derived::Scalar;
  Mat<Scalar> p = a;
  Scalar log_scale = 0;  // log of accumulated normalisation, per unit power
  Scalar power = 1;
  for (int k = 0; k < squarings; ++k) {
    const Scalar norm = p.norm();
    if (norm == Scalar(0)) return Scalar(0);
    p /= norm;
    log_scale += std::log(norm) / power;
    p = (p * p).eval();
    power *= 2;
  }
  const Scalar norm = p.norm();
  if (norm == Scalar(0)) return Scalar(0);
  return std::exp(log_scale + std::log(norm) / power);
}

/// Solves X = G X G^T + Q through (I - G (x) G) vec(X) = vec(Q).
template <typename DerivedG, typename DerivedQ>
Mat<typename DerivedG::Scalar> solve_lyapunov(const Eigen::MatrixBase<DerivedG>& gamma,
                                              const Eigen::MatrixBase<DerivedQ>& q) {
  using Scalar = typename DerivedG::Scalar;
  const Index n = gamma.rows();
  if (gamma.cols() != n || q.rows() != n || q.cols() != n) {
    throw DimensionError("solve_lyapunov: dimension mismatch");
  }
  if (n > kMaxLyapunovDim) {
    throw UnsupportedDimensionError("solve_lyapunov: n = " + std::to_string(n) +
                                    " exceeds " + std::to_string(kMaxLyapunovDim));
  }
  if (n == 0) return Mat<Scalar>(0, 0);
  const Scalar rho = spectral_radius(gamma);
  if (!(rho < Scalar(1))) {
    throw InstabilityError("solve_lyapunov: spectral radius " +
                           std::to_string(double(rho)) + " >= 1");
  }
  const Mat<Scalar> g = gamma;
  Mat<Scalar> system = Mat<Scalar>::Identity(n * n, n * n);
  // Row-major vec: vec(G X G^T)[i*n+j] = sum_{k,l} G(i,k) G(j,l) X(k,l).
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      for (Index k = 0; k < n; ++k)
        for (Index l = 0; l < n; ++l) system(i * n + j, k * n + l) -= g(i, k) * g(j, l);
  const Vec<Scalar> x = system.partialPivLu().solve(sym_vec(q.eval()));
  return sym_mat(x);
}

/// Frobenius-nearest Y with Y - floor positive semidefinite.
template <typename DerivedX, typename DerivedF>
Mat<typename DerivedX::Scalar> psd_project(const Eigen::MatrixBase<DerivedX>& x,
                                           const Eigen::MatrixBase<DerivedF>& floor) {
  using Scalar = typename DerivedX::Scalar;
  if (x.rows() != x.cols() || floor.rows() != x.rows() || floor.cols() != x.cols()) {
    throw DimensionError("psd_project: dimension mismatch");
  }
  const Mat<Scalar> gap = symmetrize(x - floor);
  Eigen::SelfAdjointEigenSolver<Mat<Scalar>> eig(gap);
  const Vec<Scalar> clipped = eig.eigenvalues().cwiseMax(Scalar(0));
  Mat<Scalar> y = eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose();
  return symmetrize(y + floor);
}

template <typename Derived>
typename Derived::Scalar min_eigenvalue(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  Eigen::SelfAdjointEigenSolver<Mat<Scalar>> eig(symmetrize(x), Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

/// Spectral norm (largest singular value).
template <typename Derived>
typename Derived::Scalar operator_norm(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  if (x.size() == 0) return Scalar(0);
  Eigen::JacobiSVD<Mat<Scalar>> svd(x.eval());
  return svd.singularValues()(0);
}

template <typename Scalar>
struct PinvSolution {
  Vec<Scalar> x;
  Index rank = 0;
  Scalar smallest_retained = 0;  ///< 0 when rank == 0
};

/// Minimum-norm least-squares solution of A x = b via SVD, with singular
/// values below tol * sigma_max treated as zero.
template <typename DerivedA, typename DerivedB>
PinvSolution<typename DerivedA::Scalar> pinv_solve_detailed(
    const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b,
    typename DerivedA::Scalar tol = kPinvTolerance) {
  using Scalar = typename DerivedA::Scalar;
  if (a.rows() != b.rows()) throw DimensionError("pinv_solve: row mismatch");
  PinvSolution<Scalar> out;
  out.x = Vec<Scalar>::Zero(a.cols());
  if (a.size() == 0) return out;
  Eigen::JacobiSVD<Mat<Scalar>> svd(a.eval(), Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  const Scalar smax = s.size() > 0 ? s(0) : Scalar(0);
  if (!(smax > Scalar(0))) return out;
  const Vec<Scalar> utb = svd.matrixU().transpose() * b;
  Vec<Scalar> coeff = Vec<Scalar>::Zero(s.size());
  for (Index i = 0; i < s.size(); ++i) {
    if (s(i) > tol * smax) {
      coeff(i) = utb(i) / s(i);
      out.rank = i + 1;
      out.smallest_retained = s(i);
    }
  }
  out.x = svd.matrixV() * coeff;
  return out;
}

template <typename DerivedA, typename DerivedB>
Vec<typename DerivedA::Scalar> pinv_solve(const Eigen::MatrixBase<DerivedA>& a,
                                          const Eigen::MatrixBase<DerivedB>& b,
                                          typename DerivedA::Scalar tol = kPinvTolerance) {
  return pinv_solve_detailed(a, b, tol).x;
}

namespace detail {

template <typename Scalar>
Scalar resolvent_norm_at(const Mat<Scalar>& a, Scalar theta) {
  using Complex = std::complex<Scalar>;
  using CMat = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic>;
  const Index n = a.rows();
  CMat m = -a.template cast<Complex>();
  const Complex z = std::polar(Scalar(1), theta);
  for (Index i = 0; i < n; ++i) m(i, i) += z;
  Eigen::JacobiSVD<CMat> svd(m);
  const Scalar smin = svd.singularValues()(n - 1);
  return Scalar(1) / smin;
}

}  // namespace detail

/// sup_{|z|=1} ||(zI - A)^{-1}||_2, from a uniform grid on the circle refined
/// by golden-section search around the best grid point. The result can only
/// under-estimate the true supremum.
template <typename Derived>
typename Derived::Scalar hinf_resolvent_norm(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  if (a.rows() != a.cols()) throw DimensionError("hinf_resolvent_norm: not square");
  const Index n = a.rows();
  if (n == 0) return Scalar(0);
  const Scalar rho = spectral_radius(a);
  if (!(rho < Scalar(1))) {
    throw InstabilityError("hinf_resolvent_norm: spectral radius " +
                           std::to_string(double(rho)) + " >= 1");
  }
  const Mat<Scalar> m = a;
  const Scalar step = Scalar(2) * std::numbers::pi_v<Scalar> / Scalar(kResolventGridPoints);
  Scalar best = 0;
  Index best_k = 0;
  for (Index k = 0; k < kResolventGridPoints; ++k) {
    const Scalar v = detail::resolvent_norm_at(m, step * Scalar(k));
    if (v > best) {
      best = v;
      best_k = k;
    }
  }
  // Golden-section maximisation on the bracket around the grid maximum.
  const Scalar ratio = (std::sqrt(Scalar(5)) - Scalar(1)) / Scalar(2);
  Scalar lo = step * Scalar(best_k - 1);
  Scalar hi = step * Scalar(best_k + 1);
  Scalar c = hi - ratio * (hi - lo);
  Scalar d = lo + ratio * (hi - lo);
  Scalar fc = detail::resolvent_norm_at(m, c);
  Scalar fd = detail::resolvent_norm_at(m, d);
  for (int it = 0; it < 60; ++it) {
    if (fc > fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - ratio * (hi - lo);
      fc = detail::resolvent_norm_at(m, c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + ratio * (hi - lo);
      fd = detail::resolvent_norm_at(m, d);
    }
  }
  return std::max({best, fc, fd});
}

template <typename DerivedA, typename DerivedB>
bool is_controllable(const Eigen::MatrixBase<DerivedA>& a,
                     const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  const Index n = a.rows();
  const Index d = b.cols();
  if (n == 0) return true;
  Mat<Scalar> ctrb(n, n * d);
  Mat<Scalar> block = b;
  for (Index k = 0; k < n; ++k) {
    ctrb.middleCols(k * d, d) = block;
    block = (a * block).eval();
  }
  Eigen::JacobiSVD<Mat<Scalar>> svd(ctrb);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || !(s(0) > Scalar(0))) return false;
  const Scalar tol = std::max<Scalar>(Scalar(n * d), Scalar(1)) *
                     std::numeric_limits<Scalar>::epsilon() * s(0);
  Index rank = 0;
  for (Index i = 0; i < s.size(); ++i) rank += s(i) > tol ? 1 : 0;
  return rank == n;
}

template <typename Scalar>
struct RiccatiSolution {
  Mat<Scalar> gain;   ///< K with a = -K x
  Mat<Scalar> value;  ///< P, the Riccati fixed point
  long iterations = 0;
};

inline constexpr double kRiccatiTolerance = 1e-12;
inline constexpr long kRiccatiMaxIterations = 100000;

/// Optimal average-cost LQ gain by Riccati value iteration started at P = M,
/// stopped when ||P_{k+1} - P_k||_F <= tol * ||P_{k+1}||_F.
template <typename DerivedA, typename DerivedB, typename DerivedM, typename DerivedN>
RiccatiSolution<typename DerivedA::Scalar> riccati_value_iteration(
    const Eigen::MatrixBase<DerivedA>& a_in, const Eigen::MatrixBase<DerivedB>& b_in,
    const Eigen::MatrixBase<DerivedM>& m_in, const Eigen::MatrixBase<DerivedN>& n_in,
    typename DerivedA::Scalar tol = kRiccatiTolerance,
    long max_iterations = kRiccatiMaxIterations) {
  using Scalar = typename DerivedA::Scalar;
  const Mat<Scalar> a = a_in, b = b_in, m = m_in, r = n_in;
  const Index n = a.rows();
  const Index d = b.cols();
  if (a.cols() != n || b.rows() != n || m.rows() != n || m.cols() != n ||
      r.rows() != d || r.cols() != d) {
    throw DimensionError("riccati_value_iteration: dimension mismatch");
  }
  if (!is_controllable(a, b)) {
    throw DomainError("riccati_value_iteration: (A, B) is not controllable");
  }
  if (Eigen::LLT<Mat<Scalar>>(symmetrize(m)).info() != Eigen::Success ||
      Eigen::LLT<Mat<Scalar>>(symmetrize(r)).info() != Eigen::Success) {
    throw DomainError("riccati_value_iteration: M and N must be positive definite");
  }
  RiccatiSolution<Scalar> out;
  Mat<Scalar> p = symmetrize(m);
  for (long it = 1; it <= max_iterations; ++it) {
    const Mat<Scalar> bp = b.transpose() * p;
    const Mat<Scalar> gain = (r + bp * b).ldlt().solve(bp * a);
    const Mat<Scalar> next = symmetrize(m + a.transpose() * p * a - a.transpose() * bp.transpose() * gain);
    if (!next.allFinite()) break;
    const Scalar change = (next - p).norm();
    p = next;
    if (change <= tol * p.norm()) {
      const Mat<Scalar> bp_final = b.transpose() * p;
      out.gain = (r + bp_final * b).ldlt().solve(bp_final * a);
      out.value = p;
      out.iterations = it;
      return out;
    }
  }
  throw DivergenceError("riccati_value_iteration: no convergence within " +
                        std::to_string(max_iterations) + " iterations");
}

}  // namespace mflq
