#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <utility>
#include <vector>

#include "flagopt/coords.hpp"

namespace flagopt {

namespace tolerance {
/// Tangency equations, scaled by (1 + ||delta||_F).
inline constexpr double kTangent = 1e-10;
/// Tangency equations in (reduced) projection coordinates.
inline constexpr double kProjectionTangent = 1e-8;
}  // namespace tolerance

/// Zero the diagonal blocks of an n x n matrix in the (b_1, ..., b_{d+1}) partition.
template <typename Derived>
void zero_diagonal_blocks(const FlagSignature& sig, Eigen::MatrixBase<Derived>& A) {
  for (int i = 0; i < sig.num_blocks(); ++i)
    A.block(sig.block_start(i), sig.block_start(i), sig.block_size(i), sig.block_size(i)).setZero();
}

/**
 * @brief Element of the horizontal space m: skew-symmetric n x n with zero
 * diagonal blocks. Identifies tangent vectors at [Q] with Q * B.
 */
template <typename Scalar>
class SkewGenerator {
 public:
  using Matrix = MatrixX<Scalar>;

  /// Validates skew-symmetry and vanishing diagonal blocks, then enforces both exactly.
  SkewGenerator(FlagSignature sig, const Matrix& B) : sig_(std::move(sig)) {
    if (B.rows() != sig_.ambient() || B.cols() != sig_.ambient())
      throw std::invalid_argument("SkewGenerator: matrix must be n x n");
    const Scalar tol = Scalar(tolerance::kTangent) * (1 + B.norm());
    if ((B + B.transpose()).norm() > tol) throw std::invalid_argument("SkewGenerator: matrix is not skew-symmetric");
    Matrix diag = Matrix::Zero(B.rows(), B.cols());
    for (int i = 0; i < sig_.num_blocks(); ++i) {
      const int s = sig_.block_start(i), b = sig_.block_size(i);
      diag.block(s, s, b, b) = B.block(s, s, b, b);
    }
    if (diag.norm() > tol) throw std::invalid_argument("SkewGenerator: diagonal blocks must vanish");
    B_ = Scalar(0.5) * (B - B.transpose());
    zero_diagonal_blocks(sig_, B_);
  }

  static SkewGenerator zero(const FlagSignature& sig) {
    return SkewGenerator(sig, Matrix::Zero(sig.ambient(), sig.ambient()));
  }

  const FlagSignature& signature() const { return sig_; }
  const Matrix& matrix() const { return B_; }
  /// Block B_ij (0-based block indices).
  auto block(int i, int j) const {
    return B_.block(sig_.block_start(i), sig_.block_start(j), sig_.block_size(i), sig_.block_size(j));
  }

 private:
  struct Unchecked {};
  SkewGenerator(FlagSignature sig, Matrix B, Unchecked) : sig_(std::move(sig)), B_(std::move(B)) {}

  template <typename S, typename D>
  friend SkewGenerator<S> project_m(const FlagSignature& sig, const Eigen::MatrixBase<D>& A);

  FlagSignature sig_;
  Matrix B_;
};

/// Orthogonal projection of an arbitrary n x n matrix onto m.
template <typename Scalar, typename Derived>
SkewGenerator<Scalar> project_m(const FlagSignature& sig, const Eigen::MatrixBase<Derived>& A) {
  MatrixX<Scalar> B = Scalar(0.5) * (A - A.transpose());
  zero_diagonal_blocks(sig, B);
  return SkewGenerator<Scalar>(sig, std::move(B), typename SkewGenerator<Scalar>::Unchecked{});
}

/// Residual of the tangency equations Y_i^T X_i = 0, Y_i^T X_j + X_i^T Y_j = 0.
template <typename Scalar, typename Derived>
Scalar tangency_residual(const StiefelPoint<Scalar>& p, const Eigen::MatrixBase<Derived>& delta) {
  const auto& sig = p.signature();
  const MatrixX<Scalar> C = p.matrix().transpose() * delta;
  MatrixX<Scalar> S = C + C.transpose();
  for (int i = 0; i < sig.depth(); ++i) {
    const int s = sig.block_start(i), b = sig.block_size(i);
    S.block(s, s, b, b) = C.block(s, s, b, b);
  }
  return S.norm();
}

/**
 * @brief Tangent vector at a flag, stored as the ambient n x n_d matrix
 * delta = [Y, Y_perp] B I_{n,n_d} for some B in m.
 */
template <typename Scalar>
class TangentVector {
 public:
  using Matrix = MatrixX<Scalar>;

  TangentVector(StiefelPoint<Scalar> base, Matrix delta) : base_(std::move(base)), delta_(std::move(delta)) {
    check_shape();
    if (tangency_residual(base_, delta_) > Scalar(tolerance::kTangent) * (1 + delta_.norm()))
      throw std::invalid_argument("TangentVector: matrix is not tangent at the base point");
  }

  static TangentVector trusted(StiefelPoint<Scalar> base, Matrix delta) {
    return TangentVector(std::move(base), std::move(delta), Unchecked{});
  }

  static TangentVector zero(StiefelPoint<Scalar> base) {
    Matrix z = Matrix::Zero(base.matrix().rows(), base.matrix().cols());
    return trusted(std::move(base), std::move(z));
  }

  const StiefelPoint<Scalar>& base() const { return base_; }
  const Matrix& matrix() const { return delta_; }
  const FlagSignature& signature() const { return base_.signature(); }

  TangentVector operator+(const TangentVector& o) const { return trusted(base_, delta_ + o.delta_); }
  TangentVector operator-(const TangentVector& o) const { return trusted(base_, delta_ - o.delta_); }
  TangentVector operator-() const { return trusted(base_, -delta_); }
  friend TangentVector operator*(Scalar a, const TangentVector& v) { return trusted(v.base_, a * v.delta_); }

 private:
  struct Unchecked {};
  TangentVector(StiefelPoint<Scalar> base, Matrix delta, Unchecked) : base_(std::move(base)), delta_(std::move(delta)) {
    check_shape();
  }

  void check_shape() const {
    if (delta_.rows() != base_.matrix().rows() || delta_.cols() != base_.matrix().cols())
      throw std::invalid_argument("TangentVector: shape does not match base point");
  }

  StiefelPoint<Scalar> base_;
  Matrix delta_;
};

using SkewGeneratord = SkewGenerator<double>;
using TangentVectord = TangentVector<double>;

namespace detail {

template <typename Scalar>
void check_same_base(const TangentVector<Scalar>& u, const TangentVector<Scalar>& v) {
  if (u.signature() != v.signature() || !(u.base().matrix().array() == v.base().matrix().array()).all())
    throw std::invalid_argument("tangent vectors live at different base points");
}

// Lift with an explicitly supplied frame Q = [Y, Y_perp].
template <typename Scalar>
SkewGenerator<Scalar> lift_in_frame(const FlagSignature& sig, const MatrixX<Scalar>& Q, const MatrixX<Scalar>& delta) {
  const int n = sig.ambient(), k = sig.top();
  const MatrixX<Scalar> Bhat = Q.transpose() * delta;
  MatrixX<Scalar> B = MatrixX<Scalar>::Zero(n, n);
  B.topLeftCorner(k, k) = Bhat.topRows(k);
  B.bottomLeftCorner(n - k, k) = Bhat.bottomRows(n - k);
  B.topRightCorner(k, n - k) = -Bhat.bottomRows(n - k).transpose();
  return project_m<Scalar>(sig, B);
}

}  // namespace detail

/// Skew generator B in m with delta = [Y, Y_perp] B I_{n,n_d}.
template <typename Scalar>
SkewGenerator<Scalar> lift(const TangentVector<Scalar>& v) {
  if (tangency_residual(v.base(), v.matrix()) > Scalar(tolerance::kTangent) * (1 + v.matrix().norm()))
    throw std::invalid_argument("lift: matrix is not tangent at the base point");
  const auto Q = complete_basis(v.base());
  return detail::lift_in_frame(v.signature(), Q.matrix(), v.matrix());
}

/// delta = [Y, Y_perp] B I_{n,n_d}.
template <typename Scalar>
TangentVector<Scalar> push(const StiefelPoint<Scalar>& p, const SkewGenerator<Scalar>& B) {
  if (B.signature() != p.signature()) throw std::invalid_argument("push: signature mismatch");
  const auto Q = complete_basis(p);
  MatrixX<Scalar> delta = Q.matrix() * B.matrix().leftCols(p.signature().top());
  return TangentVector<Scalar>::trusted(p, std::move(delta));
}

/**
 * @brief Frobenius-orthogonal projection of an ambient n x n_d matrix onto
 * the tangent space: Pi(A) = A - Y S, with S the diagonal blocks of Y^T A
 * and the symmetrized off-diagonal blocks. Idempotent and self-adjoint.
 */
template <typename Scalar, typename Derived>
TangentVector<Scalar> project_tangent(const StiefelPoint<Scalar>& p, const Eigen::MatrixBase<Derived>& A) {
  const auto& sig = p.signature();
  const auto& Y = p.matrix();
  if (A.rows() != Y.rows() || A.cols() != Y.cols()) throw std::invalid_argument("project_tangent: shape mismatch");
  const MatrixX<Scalar> C = Y.transpose() * A;
  MatrixX<Scalar> S = Scalar(0.5) * (C + C.transpose());
  for (int i = 0; i < sig.depth(); ++i) {
    const int s = sig.block_start(i), b = sig.block_size(i);
    S.block(s, s, b, b) = C.block(s, s, b, b);
  }
  return TangentVector<Scalar>::trusted(p, A - Y * S);
}

/// Canonical metric g(u, v) = 1/2 tr(B^T C) = tr(u^T (I - Y Y^T / 2) v).
template <typename Scalar>
Scalar metric(const TangentVector<Scalar>& u, const TangentVector<Scalar>& v) {
  detail::check_same_base(u, v);
  const auto& Y = u.base().matrix();
  const MatrixX<Scalar> Cu = Y.transpose() * u.matrix();
  const MatrixX<Scalar> Cv = Y.transpose() * v.matrix();
  return (u.matrix().cwiseProduct(v.matrix())).sum() - Scalar(0.5) * Cu.cwiseProduct(Cv).sum();
}

template <typename Scalar>
Scalar norm(const TangentVector<Scalar>& v) {
  return std::sqrt(std::max(Scalar(0), metric(v, v)));
}

/// Generator-level metric sum_{i<j} tr(B_ij^T C_ij).
template <typename Scalar>
Scalar metric(const SkewGenerator<Scalar>& B, const SkewGenerator<Scalar>& C) {
  return Scalar(0.5) * B.matrix().cwiseProduct(C.matrix()).sum();
}

/// (row, col) index pairs, row in an earlier block than col, of the canonical
/// metric-orthonormal basis E = e_r e_c^T - e_c e_r^T of m.
inline std::vector<std::pair<int, int>> m_basis(const FlagSignature& sig) {
  std::vector<std::pair<int, int>> out;
  out.reserve(static_cast<std::size_t>(dimension(sig)));
  for (int i = 0; i < sig.num_blocks(); ++i)
    for (int j = i + 1; j < sig.num_blocks(); ++j)
      for (int r = sig.block_start(i); r < sig.block_start(i) + sig.block_size(i); ++r)
        for (int c = sig.block_start(j); c < sig.block_start(j) + sig.block_size(j); ++c) out.emplace_back(r, c);
  return out;
}

/// Ambient tangent Q E I_{n,n_d} for one canonical basis element (r, c) of m.
template <typename Scalar>
MatrixX<Scalar> basis_tangent(const FlagSignature& sig, const MatrixX<Scalar>& Q, std::pair<int, int> rc) {
  const int k = sig.top();
  MatrixX<Scalar> delta = MatrixX<Scalar>::Zero(sig.ambient(), k);
  const auto [r, c] = rc;
  if (c < k) delta.col(c) += Q.col(r);
  if (r < k) delta.col(r) -= Q.col(c);
  return delta;
}

// ---------------------------------------------------------------------------
// Projection coordinates
// ---------------------------------------------------------------------------

/// Z_i = Y_i X_i^T + X_i Y_i^T with Y_i, X_i the first n_i columns.
template <typename Scalar>
std::vector<MatrixX<Scalar>> to_projection_velocity(const TangentVector<Scalar>& v) {
  const auto& sig = v.signature();
  std::vector<MatrixX<Scalar>> Z;
  for (int i = 1; i <= sig.depth(); ++i) {
    const int ni = sig.cumulative(i);
    const auto Yi = v.base().matrix().leftCols(ni);
    const auto Xi = v.matrix().leftCols(ni);
    Z.emplace_back(Yi * Xi.transpose() + Xi * Yi.transpose());
  }
  return Z;
}

/// Z_i = W_i X_(i)^T + X_(i) W_i^T over the individual column blocks.
template <typename Scalar>
std::vector<MatrixX<Scalar>> to_reduced_velocity(const TangentVector<Scalar>& v) {
  const auto& sig = v.signature();
  std::vector<MatrixX<Scalar>> Z;
  for (int i = 0; i < sig.depth(); ++i) {
    const int s = sig.block_start(i), b = sig.block_size(i);
    const auto Wi = v.base().matrix().middleCols(s, b);
    const auto Xi = v.matrix().middleCols(s, b);
    Z.emplace_back(Wi * Xi.transpose() + Xi * Wi.transpose());
  }
  return Z;
}

template <typename Scalar>
bool check_tangent_projection_coords(const ProjectionPoint<Scalar>& P, const std::vector<MatrixX<Scalar>>& Z,
                                     Scalar tol = Scalar(tolerance::kProjectionTangent)) {
  const int d = P.signature().depth();
  if (static_cast<int>(Z.size()) != d) return false;
  for (int i = 0; i < d; ++i) {
    const auto& Zi = Z[i];
    const auto& Pi = P[i];
    if (Zi.rows() != Pi.rows() || Zi.cols() != Pi.cols()) return false;
    if ((Zi * Pi + Pi * Zi - Zi).norm() > tol) return false;
    if ((Zi - Zi.transpose()).norm() > tol) return false;
    if (std::abs(Zi.trace()) > tol) return false;
    for (int j = i + 1; j < d; ++j)
      if ((Z[j] * Pi + P[j] * Zi - Zi).norm() > tol) return false;
  }
  return true;
}

template <typename Scalar>
bool check_tangent_reduced_coords(const ReducedProjectionPoint<Scalar>& R, const std::vector<MatrixX<Scalar>>& Z,
                                  Scalar tol = Scalar(tolerance::kProjectionTangent)) {
  const int d = R.signature().depth();
  if (static_cast<int>(Z.size()) != d) return false;
  for (int i = 0; i < d; ++i) {
    const auto& Zi = Z[i];
    const auto& Ri = R[i];
    if (Zi.rows() != Ri.rows() || Zi.cols() != Ri.cols()) return false;
    if ((Ri * Zi + Zi * Ri - Zi).norm() > tol) return false;
    if ((Zi - Zi.transpose()).norm() > tol) return false;
    if (std::abs(Zi.trace()) > tol) return false;
    for (int j = i + 1; j < d; ++j)
      if ((Zi * R[j] + Ri * Z[j]).norm() > tol) return false;
  }
  return true;
}

/**
 * @brief Stiefel tangent X at the representative Y whose induced projection
 * velocities Z_i = Y_i X_i^T + X_i Y_i^T equal the given Z.
 *
 * Block j of X below the diagonal is (I - P_j) Z_j W_j; the blocks above
 * follow from skew-symmetry of Y^T X.
 */
template <typename Scalar>
TangentVector<Scalar> tangent_from_projection_velocity(const StiefelPoint<Scalar>& Y,
                                                       const std::vector<MatrixX<Scalar>>& Z) {
  const auto& sig = Y.signature();
  const auto P = to_projection(Y);
  if (!check_tangent_projection_coords(P, Z)) throw std::invalid_argument("projection velocity is not tangent");
  const int n = sig.ambient();
  MatrixX<Scalar> L(n, sig.top());
  for (int j = 0; j < sig.depth(); ++j) {
    const int s = sig.block_start(j), b = sig.block_size(j);
    const MatrixX<Scalar> complement = MatrixX<Scalar>::Identity(n, n) - P[j];
    L.middleCols(s, b) = complement * Z[j] * Y.matrix().middleCols(s, b);
  }
  const MatrixX<Scalar> C = Y.matrix().transpose() * L;
  MatrixX<Scalar> X = L - Y.matrix() * C.transpose();
  return TangentVector<Scalar>(Y, std::move(X));
}

template <typename Scalar>
TangentVector<Scalar> tangent_from_projection_velocity(const ProjectionPoint<Scalar>& P,
                                                       const std::vector<MatrixX<Scalar>>& Z) {
  if (!check_tangent_projection_coords(P, Z)) throw std::invalid_argument("projection velocity is not tangent");
  return tangent_from_projection_velocity(from_projection(P), Z);
}

}  // namespace flagopt
