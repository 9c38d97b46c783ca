#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include "flagopt/signature.hpp"

namespace flagopt {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

namespace tolerance {
/// Orthonormality of Stiefel / orthogonal representatives (relative Frobenius).
inline constexpr double kOrthonormal = 1e-12;
/// Projector identities and flag comparisons.
inline constexpr double kProjector = 1e-10;
}  // namespace tolerance

namespace detail {

template <typename Derived>
typename Derived::Scalar orthonormality_defect(const Eigen::MatrixBase<Derived>& Y) {
  using Scalar = typename Derived::Scalar;
  const auto k = Y.cols();
  return (Y.transpose() * Y - MatrixX<Scalar>::Identity(k, k)).norm();
}

// Flip the sign of each column so its first entry of non-negligible size is positive.
template <typename Scalar>
void fix_column_signs(MatrixX<Scalar>& V) {
  for (Eigen::Index j = 0; j < V.cols(); ++j) {
    const Scalar scale = V.col(j).cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < V.rows(); ++i) {
      if (std::abs(V(i, j)) > Scalar(1e-8) * scale) {
        if (V(i, j) < 0) V.col(j) = -V.col(j);
        break;
      }
    }
  }
}

}  // namespace detail

/// Thin QR orthonormalization with positive diagonal of the triangular factor.
/// Span of every leading column prefix is preserved, so flags are preserved.
template <typename Derived>
MatrixX<typename Derived::Scalar> orthonormalize(const Eigen::MatrixBase<Derived>& A) {
  using Scalar = typename Derived::Scalar;
  const auto n = A.rows();
  const auto k = A.cols();
  Eigen::HouseholderQR<MatrixX<Scalar>> qr(A.eval());
  MatrixX<Scalar> Q = qr.householderQ() * MatrixX<Scalar>::Identity(n, k);
  const MatrixX<Scalar>& R = qr.matrixQR();
  for (Eigen::Index j = 0; j < k; ++j)
    if (R(j, j) < 0) Q.col(j) = -Q.col(j);
  return Q;
}

/**
 * @brief Flag in Stiefel coordinates: an n x n_d matrix Y with orthonormal
 * columns whose first n_i columns span the i-th subspace.
 *
 * Representatives are unique only up to right multiplication by
 * blockdiag(Q_1, ..., Q_d); compare flags with same_flag().
 * An orthonormal completion Y_perp may be cached alongside.
 */
template <typename Scalar>
class StiefelPoint {
 public:
  using Matrix = MatrixX<Scalar>;

  StiefelPoint(FlagSignature sig, Matrix Y) : sig_(std::move(sig)), Y_(std::move(Y)) {
    check_shape();
    const Scalar defect = detail::orthonormality_defect(Y_);
    if (defect > Scalar(tolerance::kOrthonormal) * std::sqrt(Scalar(sig_.top()))) {
      throw std::invalid_argument("StiefelPoint: columns are not orthonormal");
    }
  }

  StiefelPoint(FlagSignature sig, Matrix Y, Matrix perp) : StiefelPoint(std::move(sig), std::move(Y)) {
    if (perp.rows() != Y_.rows() || perp.cols() != sig_.ambient() - sig_.top())
      throw std::invalid_argument("StiefelPoint: completion has the wrong shape");
    Matrix Q(Y_.rows(), Y_.rows());
    Q << Y_, perp;
    if (detail::orthonormality_defect(Q) > Scalar(tolerance::kOrthonormal) * std::sqrt(Scalar(sig_.ambient())))
      throw std::invalid_argument("StiefelPoint: [Y, Y_perp] is not orthogonal");
    perp_ = std::move(perp);
  }

  /// Skips the orthonormality check; for results of exactly orthogonal maps.
  static StiefelPoint trusted(FlagSignature sig, Matrix Y, std::optional<Matrix> perp = std::nullopt) {
    StiefelPoint p;
    p.sig_ = std::move(sig);
    p.Y_ = std::move(Y);
    p.perp_ = std::move(perp);
    p.check_shape();
    return p;
  }

  const FlagSignature& signature() const { return sig_; }
  const Matrix& matrix() const { return Y_; }
  const std::optional<Matrix>& completion() const { return perp_; }

  /// Columns of block i (0-based, i < d): an orthonormal basis of V_i minus V_{i-1}.
  auto block(int i) const { return Y_.middleCols(sig_.block_start(i), sig_.block_size(i)); }
  /// First n_i columns (i = 1, ..., d): an orthonormal basis of V_i.
  auto leading(int i) const { return Y_.leftCols(sig_.cumulative(i)); }

 private:
  StiefelPoint() = default;

  void check_shape() const {
    if (Y_.rows() != sig_.ambient() || Y_.cols() != sig_.top())
      throw std::invalid_argument("StiefelPoint: matrix shape does not match signature " + sig_.to_string());
  }

  FlagSignature sig_;
  Matrix Y_;
  std::optional<Matrix> perp_;
};

/// Flag in orthogonal coordinates: an n x n orthogonal Q, modulo the isotropy group.
template <typename Scalar>
class OrthogonalPoint {
 public:
  using Matrix = MatrixX<Scalar>;

  OrthogonalPoint(FlagSignature sig, Matrix Q) : sig_(std::move(sig)), Q_(std::move(Q)) {
    if (Q_.rows() != sig_.ambient() || Q_.cols() != sig_.ambient())
      throw std::invalid_argument("OrthogonalPoint: matrix must be n x n");
    if (detail::orthonormality_defect(Q_) > Scalar(tolerance::kOrthonormal) * std::sqrt(Scalar(sig_.ambient())))
      throw std::invalid_argument("OrthogonalPoint: matrix is not orthogonal");
  }

  const FlagSignature& signature() const { return sig_; }
  const Matrix& matrix() const { return Q_; }

  StiefelPoint<Scalar> to_stiefel() const {
    return StiefelPoint<Scalar>::trusted(sig_, Q_.leftCols(sig_.top()), Matrix(Q_.rightCols(sig_.ambient() - sig_.top())));
  }

 private:
  FlagSignature sig_;
  Matrix Q_;
};

namespace detail {

template <typename Scalar>
void check_projector(const MatrixX<Scalar>& P, int rank, int n, const char* what) {
  const Scalar tol = Scalar(tolerance::kProjector);
  if (P.rows() != n || P.cols() != n) throw std::invalid_argument(std::string(what) + ": projector must be n x n");
  if ((P - P.transpose()).norm() > tol) throw std::invalid_argument(std::string(what) + ": projector not symmetric");
  if ((P * P - P).norm() > tol) throw std::invalid_argument(std::string(what) + ": projector not idempotent");
  if (std::abs(P.trace() - Scalar(rank)) > tol)
    throw std::invalid_argument(std::string(what) + ": projector trace does not match the flag dimension");
}

}  // namespace detail

/// Projection coordinates: P_i is the orthogonal projector onto V_i (unique).
template <typename Scalar>
class ProjectionPoint {
 public:
  using Matrix = MatrixX<Scalar>;

  ProjectionPoint(FlagSignature sig, std::vector<Matrix> P) : sig_(std::move(sig)), P_(std::move(P)) {
    if (static_cast<int>(P_.size()) != sig_.depth())
      throw std::invalid_argument("ProjectionPoint: need one projector per subspace");
    for (int i = 0; i < sig_.depth(); ++i)
      detail::check_projector(P_[i], sig_.cumulative(i + 1), sig_.ambient(), "ProjectionPoint");
    for (int i = 0; i < sig_.depth(); ++i)
      for (int j = i + 1; j < sig_.depth(); ++j)
        if ((P_[j] * P_[i] - P_[i]).norm() > Scalar(tolerance::kProjector))
          throw std::invalid_argument("ProjectionPoint: subspaces are not nested");
  }

  const FlagSignature& signature() const { return sig_; }
  const std::vector<Matrix>& projectors() const { return P_; }
  const Matrix& operator[](int i) const { return P_[static_cast<std::size_t>(i)]; }

 private:
  FlagSignature sig_;
  std::vector<Matrix> P_;
};

/// Reduced projection coordinates: R_i projects onto V_i minus V_{i-1}; R_i R_j = 0.
template <typename Scalar>
class ReducedProjectionPoint {
 public:
  using Matrix = MatrixX<Scalar>;

  ReducedProjectionPoint(FlagSignature sig, std::vector<Matrix> R) : sig_(std::move(sig)), R_(std::move(R)) {
    if (static_cast<int>(R_.size()) != sig_.depth())
      throw std::invalid_argument("ReducedProjectionPoint: need one projector per subspace");
    for (int i = 0; i < sig_.depth(); ++i)
      detail::check_projector(R_[i], sig_.block_size(i), sig_.ambient(), "ReducedProjectionPoint");
    for (int i = 0; i < sig_.depth(); ++i)
      for (int j = i + 1; j < sig_.depth(); ++j)
        if ((R_[i] * R_[j]).norm() > Scalar(tolerance::kProjector))
          throw std::invalid_argument("ReducedProjectionPoint: pieces are not mutually orthogonal");
  }

  const FlagSignature& signature() const { return sig_; }
  const std::vector<Matrix>& projectors() const { return R_; }
  const Matrix& operator[](int i) const { return R_[static_cast<std::size_t>(i)]; }

 private:
  FlagSignature sig_;
  std::vector<Matrix> R_;
};

using StiefelPointd = StiefelPoint<double>;
using OrthogonalPointd = OrthogonalPoint<double>;
using ProjectionPointd = ProjectionPoint<double>;
using ReducedProjectionPointd = ReducedProjectionPoint<double>;

/// Random flag: standard normal n x n_d matrix, orthonormalized by thin QR.
template <typename Scalar = double>
StiefelPoint<Scalar> random_point(const FlagSignature& sig, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixX<Scalar> A(sig.ambient(), sig.top());
  for (Eigen::Index j = 0; j < A.cols(); ++j)
    for (Eigen::Index i = 0; i < A.rows(); ++i) A(i, j) = Scalar(normal(rng));
  return StiefelPoint<Scalar>::trusted(sig, orthonormalize(A));
}

/// Orthogonal completion Q = [Y, Y_perp]; the first n_d columns are Y itself.
template <typename Scalar>
OrthogonalPoint<Scalar> complete_basis(const StiefelPoint<Scalar>& p) {
  const auto& sig = p.signature();
  const int n = sig.ambient();
  const int k = sig.top();
  MatrixX<Scalar> Q(n, n);
  Q.leftCols(k) = p.matrix();
  if (p.completion()) {
    Q.rightCols(n - k) = *p.completion();
  } else {
    Eigen::HouseholderQR<MatrixX<Scalar>> qr(p.matrix());
    MatrixX<Scalar> H = qr.householderQ();
    Q.rightCols(n - k) = H.rightCols(n - k);
  }
  return OrthogonalPoint<Scalar>(sig, std::move(Q));
}

/// Same point with its orthogonal completion cached.
template <typename Scalar>
StiefelPoint<Scalar> with_completion(const StiefelPoint<Scalar>& p) {
  if (p.completion()) return p;
  const auto Q = complete_basis(p);
  const int k = p.signature().top();
  return StiefelPoint<Scalar>::trusted(p.signature(), p.matrix(),
                                       MatrixX<Scalar>(Q.matrix().rightCols(p.signature().ambient() - k)));
}

template <typename Scalar>
ProjectionPoint<Scalar> to_projection(const StiefelPoint<Scalar>& p) {
  const auto& sig = p.signature();
  std::vector<MatrixX<Scalar>> P;
  for (int i = 1; i <= sig.depth(); ++i) {
    const auto Yi = p.leading(i);
    P.emplace_back(Yi * Yi.transpose());
  }
  return ProjectionPoint<Scalar>(sig, std::move(P));
}

template <typename Scalar>
ReducedProjectionPoint<Scalar> to_reduced(const StiefelPoint<Scalar>& p) {
  const auto& sig = p.signature();
  std::vector<MatrixX<Scalar>> R;
  for (int i = 0; i < sig.depth(); ++i) {
    const auto Wi = p.block(i);
    R.emplace_back(Wi * Wi.transpose());
  }
  return ReducedProjectionPoint<Scalar>(sig, std::move(R));
}

namespace detail {

// Orthonormal basis of the range of a rank-`rank` orthogonal projector.
template <typename Scalar>
MatrixX<Scalar> projector_range(const MatrixX<Scalar>& R, int rank) {
  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> eig(Scalar(0.5) * (R + R.transpose()));
  if (eig.info() != Eigen::Success) throw std::runtime_error("projector eigendecomposition failed");
  const auto& w = eig.eigenvalues();  // ascending
  const auto n = R.rows();
  if (w(n - rank) < Scalar(0.5) || (n - rank - 1 >= 0 && w(n - rank - 1) > Scalar(0.5)))
    throw std::invalid_argument("projector rank does not match the flag signature");
  MatrixX<Scalar> V = eig.eigenvectors().rightCols(rank).rowwise().reverse();
  fix_column_signs(V);
  return V;
}

}  // namespace detail

template <typename Scalar>
StiefelPoint<Scalar> from_reduced(const ReducedProjectionPoint<Scalar>& r) {
  const auto& sig = r.signature();
  MatrixX<Scalar> Y(sig.ambient(), sig.top());
  for (int i = 0; i < sig.depth(); ++i)
    Y.middleCols(sig.block_start(i), sig.block_size(i)) = detail::projector_range(r[i], sig.block_size(i));
  return StiefelPoint<Scalar>(sig, orthonormalize(Y));
}

template <typename Scalar>
StiefelPoint<Scalar> from_projection(const ProjectionPoint<Scalar>& p) {
  const auto& sig = p.signature();
  const int n = sig.ambient();
  MatrixX<Scalar> Y(n, sig.top());
  MatrixX<Scalar> prev = MatrixX<Scalar>::Zero(n, n);
  for (int i = 0; i < sig.depth(); ++i) {
    Y.middleCols(sig.block_start(i), sig.block_size(i)) = detail::projector_range<Scalar>(p[i] - prev, sig.block_size(i));
    prev = p[i];
  }
  return StiefelPoint<Scalar>(sig, orthonormalize(Y));
}

/// sqrt(sum_i ||P_i(a) - P_i(b)||_F^2) over the cumulative projectors.
template <typename Scalar>
Scalar projector_distance(const StiefelPoint<Scalar>& a, const StiefelPoint<Scalar>& b) {
  if (a.signature() != b.signature()) throw std::invalid_argument("projector_distance: signature mismatch");
  Scalar total = 0;
  for (int i = 1; i <= a.signature().depth(); ++i) {
    const auto A = a.leading(i);
    const auto B = b.leading(i);
    total += (A * A.transpose() - B * B.transpose()).squaredNorm();
  }
  return std::sqrt(total);
}

/// True iff all cumulative projectors agree to `tol` (Frobenius, per subspace).
template <typename Scalar>
bool same_flag(const StiefelPoint<Scalar>& a, const StiefelPoint<Scalar>& b,
               Scalar tol = Scalar(tolerance::kProjector)) {
  if (a.signature() != b.signature()) throw std::invalid_argument("same_flag: signature mismatch");
  for (int i = 1; i <= a.signature().depth(); ++i) {
    const auto A = a.leading(i);
    const auto B = b.leading(i);
    if ((A * A.transpose() - B * B.transpose()).norm() > tol) return false;
  }
  return true;
}

/// Random element of the Stiefel isotropy group blockdiag(Q_1, ..., Q_d).
template <typename Scalar = double>
MatrixX<Scalar> random_block_orthogonal(const FlagSignature& sig, std::uint64_t seed, bool include_complement = false) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int blocks = include_complement ? sig.num_blocks() : sig.depth();
  const int size = include_complement ? sig.ambient() : sig.top();
  MatrixX<Scalar> K = MatrixX<Scalar>::Zero(size, size);
  for (int i = 0; i < blocks; ++i) {
    const int b = sig.block_size(i);
    MatrixX<Scalar> A(b, b);
    for (Eigen::Index c = 0; c < b; ++c)
      for (Eigen::Index r = 0; r < b; ++r) A(r, c) = Scalar(normal(rng));
    MatrixX<Scalar> Qb = orthonormalize(A);
    if (normal(rng) < 0) Qb.col(0) = -Qb.col(0);  // cover both components of O(b)
    K.block(sig.block_start(i), sig.block_start(i), b, b) = Qb;
  }
  return K;
}

}  // namespace flagopt
