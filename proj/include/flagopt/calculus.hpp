#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <stdexcept>
#include <utility>

#include "flagopt/coords.hpp"
#include "flagopt/tangent.hpp"

namespace flagopt {

/**
 * @brief Objective on a flag manifold given through its Euclidean partials.
 *
 * Callbacks receive the ambient n x n_d matrix Y. `euclidean_gradient`
 * returns f_Y = (df/dy_ij); the optional `euclidean_hessian` returns the
 * bilinear form f_YY(X, X'). Without it, second derivatives fall back to
 * central differences of f_Y unless disabled.
 *
 * The value must be invariant under Y -> Y K for block-diagonal orthogonal
 * K. Construction spot-checks this on a few random samples and warns on
 * std::clog when it fails.
 */
template <typename Scalar>
class ObjectiveFunction {
 public:
  using Matrix = MatrixX<Scalar>;
  using Value = std::function<Scalar(const Matrix&)>;
  using Gradient = std::function<Matrix(const Matrix&)>;
  using Hessian = std::function<Scalar(const Matrix&, const Matrix&, const Matrix&)>;

  static constexpr int kWellDefinedSamples = 3;

  ObjectiveFunction(FlagSignature sig, Value value, Gradient gradient, Hessian hessian = {}, bool check = true)
      : sig_(std::move(sig)), value_(std::move(value)), gradient_(std::move(gradient)), hessian_(std::move(hessian)) {
    if (!value_ || !gradient_) throw std::invalid_argument("ObjectiveFunction: value and gradient are required");
    if (check) {
      residual_ = quotient_residual(kWellDefinedSamples, 0x5eed0f1a9ULL);
      if (residual_ > Scalar(1e-10))
        std::clog << "flagopt: warning: objective is not invariant under block rotations (relative residual "
                  << residual_ << ")\n";
    }
  }

  const FlagSignature& signature() const { return sig_; }

  Scalar value(const Matrix& Y) const {
    check_point_shape(Y);
    return value_(Y);
  }

  Matrix euclidean_gradient(const Matrix& Y) const {
    check_point_shape(Y);
    Matrix G = gradient_(Y);
    if (G.rows() != Y.rows() || G.cols() != Y.cols())
      throw std::invalid_argument("ObjectiveFunction: gradient callback returned the wrong shape");
    return G;
  }

  bool has_hessian() const { return static_cast<bool>(hessian_); }
  bool allow_fd_hessian() const { return allow_fd_; }
  void set_allow_fd_hessian(bool allow) { allow_fd_ = allow; }

  /// f_YY(X, X'), analytic if supplied, otherwise by central differences of f_Y.
  Scalar euclidean_hessian(const Matrix& Y, const Matrix& X1, const Matrix& X2) const {
    check_point_shape(Y);
    if (hessian_) return hessian_(Y, X1, X2);
    if (!allow_fd_) throw std::logic_error("ObjectiveFunction: no second-derivative source");
    const Scalar h = Scalar(1e-5) * (1 + Y.norm());
    const Matrix d2 = (gradient_(Y + h * X2) - gradient_(Y - h * X2)) / (2 * h);
    const Matrix d1 = (gradient_(Y + h * X1) - gradient_(Y - h * X1)) / (2 * h);
    return Scalar(0.5) * (d2.cwiseProduct(X1).sum() + d1.cwiseProduct(X2).sum());
  }

  /// Largest relative change |f(Y K) - f(Y)| / (1 + |f(Y)|) over random samples.
  Scalar quotient_residual(int samples, std::uint64_t seed) const {
    Scalar worst = 0;
    for (int s = 0; s < samples; ++s) {
      const auto p = random_point<Scalar>(sig_, seed + 2 * static_cast<std::uint64_t>(s));
      const Matrix K = random_block_orthogonal<Scalar>(sig_, seed + 2 * static_cast<std::uint64_t>(s) + 1);
      const Scalar f0 = value_(p.matrix());
      const Scalar f1 = value_(p.matrix() * K);
      worst = std::max(worst, std::abs(f1 - f0) / (1 + std::abs(f0)));
    }
    return worst;
  }

  /// Residual found by the construction-time check (0 if skipped).
  Scalar well_definedness_residual() const { return residual_; }

 private:
  void check_point_shape(const Matrix& Y) const {
    if (Y.rows() != sig_.ambient() || Y.cols() != sig_.top())
      throw std::invalid_argument("ObjectiveFunction: point shape does not match " + sig_.to_string());
  }

  FlagSignature sig_;
  Value value_;
  Gradient gradient_;
  Hessian hessian_;
  bool allow_fd_ = true;
  Scalar residual_ = 0;
};

using ObjectiveFunctiond = ObjectiveFunction<double>;

/// -f, with all derivatives negated.
template <typename Scalar>
ObjectiveFunction<Scalar> negated(const ObjectiveFunction<Scalar>& f) {
  using Matrix = MatrixX<Scalar>;
  typename ObjectiveFunction<Scalar>::Hessian hess;
  if (f.has_hessian() || f.allow_fd_hessian())
    hess = [f](const Matrix& Y, const Matrix& X1, const Matrix& X2) { return -f.euclidean_hessian(Y, X1, X2); };
  return ObjectiveFunction<Scalar>(
      f.signature(), [f](const Matrix& Y) { return -f.value(Y); },
      [f](const Matrix& Y) { return Matrix(-f.euclidean_gradient(Y)); }, std::move(hess), false);
}

namespace detail {

// Canonical metric of two ambient tangents at Y.
template <typename Scalar>
Scalar metric_at(const MatrixX<Scalar>& Y, const MatrixX<Scalar>& u, const MatrixX<Scalar>& v) {
  const MatrixX<Scalar> Cu = Y.transpose() * u;
  const MatrixX<Scalar> Cv = Y.transpose() * v;
  return u.cwiseProduct(v).sum() - Scalar(0.5) * Cu.cwiseProduct(Cv).sum();
}

// Delta = A - Y S with S_ii = Y_i^T A_i and S_ji = A_j^T Y_i for j != i.
template <typename Scalar>
MatrixX<Scalar> gradient_from_partials(const FlagSignature& sig, const MatrixX<Scalar>& Y, const MatrixX<Scalar>& A) {
  const MatrixX<Scalar> C = Y.transpose() * A;
  MatrixX<Scalar> S = C.transpose();
  for (int i = 0; i < sig.depth(); ++i) {
    const int s = sig.block_start(i), b = sig.block_size(i);
    S.block(s, s, b, b) = C.block(s, s, b, b);
  }
  return A - Y * S;
}

}  // namespace detail

/**
 * @brief Riemannian gradient for the canonical metric:
 * Delta_i = A_i - Y_i Y_i^T A_i - sum_{j != i} Y_j A_j^T Y_i, with A = f_Y.
 *
 * Characterized by g(Delta, T) = tr(f_Y^T T) for every tangent T. For d = 1
 * this is A - Y Y^T A; for d > 1 it differs from the Frobenius projection
 * project_tangent(p, f_Y), which is the gradient for the embedded metric.
 */
template <typename Scalar>
TangentVector<Scalar> riemannian_gradient(const ObjectiveFunction<Scalar>& f, const StiefelPoint<Scalar>& p) {
  if (f.signature() != p.signature()) throw std::invalid_argument("riemannian_gradient: signature mismatch");
  const MatrixX<Scalar> A = f.euclidean_gradient(p.matrix());
  return TangentVector<Scalar>::trusted(p, detail::gradient_from_partials(p.signature(), p.matrix(), A));
}

namespace detail {

// 1/2 tr(G_hat^T (B C + C B) I_{n,n_d}) with G_hat = Q^T f_Y.
template <typename Scalar>
Scalar hessian_curvature(const FlagSignature& sig, const MatrixX<Scalar>& Ghat, const MatrixX<Scalar>& B,
                         const MatrixX<Scalar>& C) {
  const int k = sig.top();
  const MatrixX<Scalar> S = B * C.leftCols(k) + C * B.leftCols(k);
  return Scalar(0.5) * Ghat.cwiseProduct(S).sum();
}

}  // namespace detail

/**
 * @brief Riemannian Hessian as a symmetric bilinear form:
 * f_YY(u, v) - 1/2 [tr(f_Y^T Q B^T Q^T v) + tr(f_Y^T Q C^T Q^T u)], B = lift(u), C = lift(v).
 *
 * Equals d^2/dt^2 f(Q exp(tB) I_{n,n_d}) at t = 0 when u = v.
 */
template <typename Scalar>
Scalar hessian_form(const ObjectiveFunction<Scalar>& f, const StiefelPoint<Scalar>& p, const TangentVector<Scalar>& u,
                    const TangentVector<Scalar>& v) {
  detail::check_same_base(u, v);
  if (!(u.base().matrix().array() == p.matrix().array()).all())
    throw std::invalid_argument("hessian_form: tangent vectors are not based at p");
  const auto& sig = p.signature();
  const MatrixX<Scalar> Q = complete_basis(p).matrix();
  const auto B = detail::lift_in_frame(sig, Q, u.matrix());
  const auto C = detail::lift_in_frame(sig, Q, v.matrix());
  const MatrixX<Scalar> Ghat = Q.transpose() * f.euclidean_gradient(p.matrix());
  return f.euclidean_hessian(p.matrix(), u.matrix(), v.matrix()) +
         detail::hessian_curvature(sig, Ghat, B.matrix(), C.matrix());
}

/// Symmetric bilinear form from its quadratic form: (q(u + v) - q(u) - q(v)) / 2.
template <typename Scalar, typename Quadratic>
Scalar polarize(Quadratic&& q, const TangentVector<Scalar>& u, const TangentVector<Scalar>& v) {
  return Scalar(0.5) * (q(u + v) - q(u) - q(v));
}

enum class NewtonStatus { ok, regularized, indefinite, not_descent };

inline const char* to_string(NewtonStatus s) {
  switch (s) {
    case NewtonStatus::ok: return "ok";
    case NewtonStatus::regularized: return "regularized";
    case NewtonStatus::indefinite: return "indefinite";
    case NewtonStatus::not_descent: return "not_descent";
  }
  return "?";
}

template <typename Scalar>
struct NewtonStep {
  TangentVector<Scalar> direction;
  NewtonStatus status;
  /// ||H x - b|| in the orthonormal basis of m, with b the negative gradient coordinates.
  Scalar residual;
  /// Usable as a descent direction (ok or regularized).
  bool usable() const { return status == NewtonStatus::ok || status == NewtonStatus::regularized; }
};

/// Dense Hessian matrix over the canonical orthonormal basis of m at p.
template <typename Scalar>
MatrixX<Scalar> hessian_matrix(const ObjectiveFunction<Scalar>& f, const StiefelPoint<Scalar>& p) {
  const auto& sig = p.signature();
  const MatrixX<Scalar> Q = complete_basis(p).matrix();
  const MatrixX<Scalar> Ghat = Q.transpose() * f.euclidean_gradient(p.matrix());
  const auto basis = m_basis(sig);
  const auto dim = static_cast<Eigen::Index>(basis.size());
  std::vector<MatrixX<Scalar>> T;
  T.reserve(basis.size());
  for (const auto& rc : basis) T.push_back(basis_tangent<Scalar>(sig, Q, rc));
  const int k = sig.top();
  auto g = [&](int x, int y) { return y < k ? Ghat(x, y) : Scalar(0); };
  // 1/2 tr(G_hat^T (E_a E_b + E_b E_a) I) for E = e_r e_c^T - e_c e_r^T.
  auto half_product = [&](std::pair<int, int> a, std::pair<int, int> b) {
    const auto [r, c] = a;
    const auto [rr, cc] = b;
    Scalar out = 0;
    if (c == rr) out += g(r, cc);
    if (c == cc) out -= g(r, rr);
    if (r == rr) out -= g(c, cc);
    if (r == cc) out += g(c, rr);
    return out;
  };
  MatrixX<Scalar> H(dim, dim);
  for (Eigen::Index a = 0; a < dim; ++a) {
    for (Eigen::Index b = a; b < dim; ++b) {
      const Scalar curvature = Scalar(0.5) * (half_product(basis[a], basis[b]) + half_product(basis[b], basis[a]));
      const Scalar h = f.euclidean_hessian(p.matrix(), T[a], T[b]) + curvature;
      H(a, b) = h;
      H(b, a) = h;
    }
  }
  return H;
}

/**
 * @brief Newton direction: tangent X with Hess(X, T) = -g(grad f, T) for all
 * T in the canonical basis of m.
 *
 * The dense system is solved by a symmetric eigendecomposition. Eigenvalues
 * below 1e-10 ||H|| in magnitude trigger Tikhonov regularization H + eps I
 * with eps = 1e-10 ||H||; a clearly negative eigenvalue reports `indefinite`
 * and the caller should fall back to steepest descent.
 */
template <typename Scalar>
NewtonStep<Scalar> newton_direction(const ObjectiveFunction<Scalar>& f, const StiefelPoint<Scalar>& p) {
  const auto& sig = p.signature();
  const MatrixX<Scalar> Q = complete_basis(p).matrix();
  const MatrixX<Scalar> A = f.euclidean_gradient(p.matrix());
  const auto basis = m_basis(sig);
  const auto dim = static_cast<Eigen::Index>(basis.size());
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> rhs(dim);
  for (Eigen::Index l = 0; l < dim; ++l) rhs(l) = -A.cwiseProduct(basis_tangent<Scalar>(sig, Q, basis[l])).sum();
  if (rhs.isZero(0)) return {TangentVector<Scalar>::zero(p), NewtonStatus::ok, Scalar(0)};

  const MatrixX<Scalar> H = hessian_matrix(f, p);
  const Scalar scale = H.norm();
  const Scalar eps = Scalar(1e-10) * scale;
  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> eig(H);
  if (eig.info() != Eigen::Success) throw std::runtime_error("newton_direction: eigendecomposition failed");
  const auto& w = eig.eigenvalues();
  NewtonStatus status = NewtonStatus::ok;
  if (w.minCoeff() < -eps) status = NewtonStatus::indefinite;
  else if (w.minCoeff() <= eps) status = NewtonStatus::regularized;

  const Scalar shift = status == NewtonStatus::regularized ? eps : Scalar(0);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> coeffs = eig.eigenvectors().transpose() * rhs;
  for (Eigen::Index i = 0; i < dim; ++i) {
    const Scalar lam = w(i) + shift;
    coeffs(i) = lam == Scalar(0) ? Scalar(0) : coeffs(i) / lam;
  }
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> x = eig.eigenvectors() * coeffs;
  const Scalar residual = (H * x - rhs).norm();

  MatrixX<Scalar> X = MatrixX<Scalar>::Zero(sig.ambient(), sig.top());
  for (Eigen::Index l = 0; l < dim; ++l) {
    const auto [r, c] = basis[l];
    if (c < sig.top()) X.col(c) += x(l) * Q.col(r);
    if (r < sig.top()) X.col(r) -= x(l) * Q.col(c);
  }
  // Directional derivative tr(f_Y^T X) = -b . x in the orthonormal basis.
  if (status != NewtonStatus::indefinite && rhs.dot(x) <= 0) status = NewtonStatus::not_descent;
  return {TangentVector<Scalar>::trusted(p, std::move(X)), status, residual};
}

}  // namespace flagopt
