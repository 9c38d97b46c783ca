#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "flagopt/coords.hpp"
#include "flagopt/expm.hpp"
#include "flagopt/tangent.hpp"

namespace flagopt {

/// exp(tB); exactly the identity at t = 0.
template <typename Scalar>
MatrixX<Scalar> exp_skew(const SkewGenerator<Scalar>& B, Scalar t) {
  const auto n = B.matrix().rows();
  if (t == Scalar(0)) return MatrixX<Scalar>::Identity(n, n);
  return expm((t * B.matrix()).eval());
}

/**
 * @brief B = V D V^T with D = diag([0 -l_1; l_1 0], ..., [0 -l_r; l_r 0], 0).
 *
 * Rotation rates are sorted descending; exp(tB) = V Sigma(t) V^T where
 * Sigma(t) rotates each plane by t * l_k and fixes the trailing block.
 */
template <typename Scalar>
struct SpectralForm {
  MatrixX<Scalar> V;
  std::vector<Scalar> lambdas;

  int rank_half() const { return static_cast<int>(lambdas.size()); }

  MatrixX<Scalar> D() const {
    const auto n = V.rows();
    MatrixX<Scalar> out = MatrixX<Scalar>::Zero(n, n);
    for (int k = 0; k < rank_half(); ++k) {
      out(2 * k, 2 * k + 1) = -lambdas[k];
      out(2 * k + 1, 2 * k) = lambdas[k];
    }
    return out;
  }

  MatrixX<Scalar> sigma(Scalar t) const {
    const auto n = V.rows();
    MatrixX<Scalar> out = MatrixX<Scalar>::Identity(n, n);
    for (int k = 0; k < rank_half(); ++k) {
      const Scalar c = std::cos(t * lambdas[k]), s = std::sin(t * lambdas[k]);
      out(2 * k, 2 * k) = c;
      out(2 * k, 2 * k + 1) = -s;
      out(2 * k + 1, 2 * k) = s;
      out(2 * k + 1, 2 * k + 1) = c;
    }
    return out;
  }

  /// Sigma(t) * A without forming Sigma(t).
  template <typename Derived>
  MatrixX<Scalar> apply_sigma(Scalar t, const Eigen::MatrixBase<Derived>& A) const {
    MatrixX<Scalar> out = A;
    for (int k = 0; k < rank_half(); ++k) {
      const Scalar c = std::cos(t * lambdas[k]), s = std::sin(t * lambdas[k]);
      out.row(2 * k) = c * A.row(2 * k) - s * A.row(2 * k + 1);
      out.row(2 * k + 1) = s * A.row(2 * k) + c * A.row(2 * k + 1);
    }
    return out;
  }

  /// (Sigma(t) - I) * A restricted to its first 2r rows, the only nonzero ones.
  /// Uses cos(x) - 1 = -2 sin^2(x / 2) so small steps keep full relative accuracy.
  template <typename Derived>
  MatrixX<Scalar> sigma_increment(Scalar t, const Eigen::MatrixBase<Derived>& A) const {
    MatrixX<Scalar> out(2 * rank_half(), A.cols());
    for (int k = 0; k < rank_half(); ++k) {
      const Scalar h = std::sin(t * lambdas[k] / 2);
      const Scalar cm1 = -2 * h * h, s = std::sin(t * lambdas[k]);
      out.row(2 * k) = cm1 * A.row(2 * k) - s * A.row(2 * k + 1);
      out.row(2 * k + 1) = s * A.row(2 * k) + cm1 * A.row(2 * k + 1);
    }
    return out;
  }

  MatrixX<Scalar> exp(Scalar t) const { return V * sigma(t) * V.transpose(); }
  MatrixX<Scalar> reconstruct() const { return V * D() * V.transpose(); }
};

namespace detail {

struct SchurBlock {
  Eigen::Index start;
  int size;
};

template <typename Scalar>
std::vector<SchurBlock> schur_blocks(const MatrixX<Scalar>& T) {
  std::vector<SchurBlock> blocks;
  const auto n = T.rows();
  for (Eigen::Index i = 0; i < n;) {
    if (i + 1 < n && T(i + 1, i) != Scalar(0)) {
      blocks.push_back({i, 2});
      i += 2;
    } else {
      blocks.push_back({i, 1});
      i += 1;
    }
  }
  return blocks;
}

}  // namespace detail

template <typename Scalar>
SpectralForm<Scalar> spectral_form(const SkewGenerator<Scalar>& B) {
  const MatrixX<Scalar>& A = B.matrix();
  const auto n = A.rows();
  SpectralForm<Scalar> out;
  const Scalar scale = A.norm();
  if (scale == Scalar(0)) {
    out.V = MatrixX<Scalar>::Identity(n, n);
    return out;
  }
  Eigen::RealSchur<MatrixX<Scalar>> schur(A);
  if (schur.info() != Eigen::Success) throw std::runtime_error("spectral_form: real Schur decomposition failed");
  const MatrixX<Scalar>& T = schur.matrixT();
  const MatrixX<Scalar>& U = schur.matrixU();

  struct Plane {
    Scalar lambda;
    Eigen::Index first, second;
  };
  std::vector<Plane> planes;
  std::vector<Eigen::Index> kernel;
  const Scalar negligible = Scalar(64) * std::numeric_limits<Scalar>::epsilon() * scale;
  for (const auto& blk : detail::schur_blocks(T)) {
    if (blk.size == 1) {
      kernel.push_back(blk.start);
      continue;
    }
    const Scalar beta = T(blk.start, blk.start + 1);
    const Scalar gamma = T(blk.start + 1, blk.start);
    const Scalar lambda = Scalar(0.5) * (std::abs(beta) + std::abs(gamma));
    if (lambda <= negligible) {
      kernel.push_back(blk.start);
      kernel.push_back(blk.start + 1);
      continue;
    }
    // D uses [0 -l; l 0]; a block of the opposite orientation swaps its columns.
    if (gamma > 0)
      planes.push_back({lambda, blk.start, blk.start + 1});
    else
      planes.push_back({lambda, blk.start + 1, blk.start});
  }
  std::stable_sort(planes.begin(), planes.end(), [](const Plane& a, const Plane& b) { return a.lambda > b.lambda; });

  out.V.resize(n, n);
  Eigen::Index col = 0;
  for (const auto& p : planes) {
    out.V.col(col++) = U.col(p.first);
    out.V.col(col++) = U.col(p.second);
    out.lambdas.push_back(p.lambda);
  }
  for (auto k : kernel) out.V.col(col++) = U.col(k);
  return out;
}

/// Largest rotation rate of B (its spectral norm).
template <typename Scalar>
Scalar max_rotation_rate(const SkewGenerator<Scalar>& B) {
  if (B.matrix().isZero(0)) return Scalar(0);
  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> eig(B.matrix().transpose() * B.matrix(), Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(Scalar(0), eig.eigenvalues().maxCoeff()));
}

/**
 * @brief Geodesic t -> [Y, Y_perp] exp(tB) I_{n,n_d} through a flag in
 * direction B in m, with the frame [Y, Y_perp] fixed at construction.
 */
template <typename Scalar>
class Geodesic {
 public:
  using Matrix = MatrixX<Scalar>;

  Geodesic(const StiefelPoint<Scalar>& base, SkewGenerator<Scalar> B)
      : base_(with_completion(base)), frame_(complete_basis(base_).matrix()), B_(std::move(B)) {
    if (B_.signature() != base_.signature()) throw std::invalid_argument("Geodesic: signature mismatch");
  }

  /// Geodesic with initial velocity v.
  explicit Geodesic(const TangentVector<Scalar>& v)
      : base_(with_completion(v.base())),
        frame_(complete_basis(base_).matrix()),
        B_(detail::lift_in_frame(base_.signature(), frame_, v.matrix())) {}

  const StiefelPoint<Scalar>& base() const { return base_; }
  const Matrix& frame() const { return frame_; }
  const SkewGenerator<Scalar>& generator() const { return B_; }
  const FlagSignature& signature() const { return base_.signature(); }

  /// Full orthogonal frame [Y, Y_perp] exp(tB).
  Matrix frame_at(Scalar t) const { return frame_ * exp_skew(B_, t); }

  StiefelPoint<Scalar> evaluate(Scalar t) const {
    if (t == Scalar(0)) return base_;
    const Matrix F = frame_at(t);
    const int k = signature().top();
    return StiefelPoint<Scalar>::trusted(signature(), F.leftCols(k), Matrix(F.rightCols(signature().ambient() - k)));
  }

  TangentVector<Scalar> initial_velocity() const {
    return TangentVector<Scalar>::trusted(base_, frame_ * B_.matrix().leftCols(signature().top()));
  }

 private:
  StiefelPoint<Scalar> base_;
  Matrix frame_;
  SkewGenerator<Scalar> B_;
};

using Geodesicd = Geodesic<double>;

template <typename Scalar>
StiefelPoint<Scalar> geodesic_evaluate(const Geodesic<Scalar>& g, Scalar t) {
  return g.evaluate(t);
}

/// t * sqrt(tr(B^T B) / 2).
template <typename Scalar>
Scalar arclength(const Geodesic<Scalar>& g, Scalar t) {
  if (t < 0) throw std::invalid_argument("arclength: t must be non-negative");
  return t * g.generator().matrix().norm() / std::sqrt(Scalar(2));
}

/**
 * @brief Geodesic distance between the given orthogonal representatives:
 * sqrt(sum of squared rotation angles of the principal logarithm of P^T Q).
 *
 * Evaluated on the representatives as given; no minimization over the
 * isotropy group is performed. Throws std::domain_error when P^T Q has an
 * eigenvalue -1 (the logarithm is not unique).
 */
template <typename Scalar>
Scalar distance(const OrthogonalPoint<Scalar>& a, const OrthogonalPoint<Scalar>& b) {
  if (a.signature() != b.signature()) throw std::invalid_argument("distance: signature mismatch");
  const MatrixX<Scalar> O = a.matrix().transpose() * b.matrix();
  Eigen::RealSchur<MatrixX<Scalar>> schur(O);
  if (schur.info() != Eigen::Success) throw std::runtime_error("distance: real Schur decomposition failed");
  const MatrixX<Scalar>& T = schur.matrixT();
  const Scalar pi = Scalar(3.14159265358979323846264338327950288L);
  const Scalar degenerate = Scalar(1e-12);
  Scalar total = 0;
  for (const auto& blk : detail::schur_blocks(T)) {
    const auto i = blk.start;
    if (blk.size == 1) {
      if (T(i, i) < 0) throw std::domain_error("distance: rotation by pi, logarithm is not unique");
      continue;
    }
    const Scalar c = Scalar(0.5) * (T(i, i) + T(i + 1, i + 1));
    const Scalar s = Scalar(0.5) * (std::abs(T(i, i + 1)) + std::abs(T(i + 1, i)));
    const Scalar angle = std::atan2(s, c);
    if (pi - angle < degenerate) throw std::domain_error("distance: rotation by pi, logarithm is not unique");
    total += angle * angle;
  }
  return std::sqrt(total);
}

/// phi_B(X) = 1/2 [B, X] projected onto m.
template <typename Scalar>
SkewGenerator<Scalar> bracket_m(const SkewGenerator<Scalar>& B, const SkewGenerator<Scalar>& X) {
  if (B.signature() != X.signature()) throw std::invalid_argument("bracket_m: signature mismatch");
  return project_m<Scalar>(B.signature(), Scalar(0.5) * (B.matrix() * X.matrix() - X.matrix() * B.matrix()));
}

namespace detail {

inline constexpr int kSeriesCap = 40;
inline constexpr double kSeriesRelTol = 1e-15;
inline constexpr double kSubstepThreshold = 10.0;
inline constexpr double kSubstepLength = 5.0;

template <typename Scalar>
MatrixX<Scalar> exp_neg_phi_series(const FlagSignature& sig, const MatrixX<Scalar>& S, const MatrixX<Scalar>& X) {
  MatrixX<Scalar> acc = X;
  if (X.isZero(0)) return acc;
  MatrixX<Scalar> term = X;
  for (int k = 0; k < kSeriesCap; ++k) {
    MatrixX<Scalar> next = Scalar(0.5) * (S * term - term * S);
    zero_diagonal_blocks(sig, next);
    term = (Scalar(-1) / Scalar(k + 1)) * next;
    acc += term;
    if (term.norm() <= Scalar(kSeriesRelTol) * acc.norm()) return acc;
  }
  throw std::runtime_error("exp(-phi) series did not converge; subdivide the geodesic");
}

}  // namespace detail

/**
 * @brief e^{-phi_{tB}}(X) = sum_k (-1)^k / k! phi_{tB}^k(X).
 *
 * Truncated once a term drops below 1e-15 of the partial sum. For
 * ||tB||_F > 10 the flow is split into ceil(||tB||_F / 5) equal substeps,
 * using e^{-phi_{tB}} = (e^{-phi_{tB/m}})^m.
 */
template <typename Scalar>
SkewGenerator<Scalar> exp_neg_phi(const SkewGenerator<Scalar>& B, const SkewGenerator<Scalar>& X, Scalar t) {
  const auto& sig = B.signature();
  MatrixX<Scalar> S = t * B.matrix();
  const Scalar size = S.norm();
  int substeps = 1;
  if (size > Scalar(detail::kSubstepThreshold))
    substeps = static_cast<int>(std::ceil(size / Scalar(detail::kSubstepLength)));
  S /= Scalar(substeps);
  MatrixX<Scalar> Z = X.matrix();
  for (int i = 0; i < substeps; ++i) Z = detail::exp_neg_phi_series(sig, S, Z);
  return project_m<Scalar>(sig, Z);
}

/// Parallel transport of v along g: [Y, Y_perp] exp(tB) e^{-phi_{tB}}(X) I_{n,n_d}.
template <typename Scalar>
TangentVector<Scalar> transport(const Geodesic<Scalar>& g, const TangentVector<Scalar>& v, Scalar t) {
  if (v.signature() != g.signature() || !(v.base().matrix().array() == g.base().matrix().array()).all())
    throw std::invalid_argument("transport: vector is not based at the start of the geodesic");
  if (t == Scalar(0)) return TangentVector<Scalar>::trusted(g.base(), v.matrix());
  const auto& sig = g.signature();
  const auto X = detail::lift_in_frame(sig, g.frame(), v.matrix());
  const auto Z = exp_neg_phi(g.generator(), X, t);
  const MatrixX<Scalar> F = g.frame_at(t);
  const int k = sig.top();
  auto end = StiefelPoint<Scalar>::trusted(sig, F.leftCols(k), MatrixX<Scalar>(F.rightCols(sig.ambient() - k)));
  return TangentVector<Scalar>::trusted(std::move(end), F * Z.matrix().leftCols(k));
}

/// P_i(t) = Y_i(t) Y_i(t)^T along the geodesic through P with velocity Z.
template <typename Scalar>
ProjectionPoint<Scalar> geodesic_projection_coords(const ProjectionPoint<Scalar>& P,
                                                   const std::vector<MatrixX<Scalar>>& Z, Scalar t) {
  if (t == Scalar(0)) return P;
  const auto v = tangent_from_projection_velocity(P, Z);
  return to_projection(Geodesic<Scalar>(v).evaluate(t));
}

/// Transport of the projection velocity Zvec along the geodesic with velocity Zdir.
template <typename Scalar>
std::vector<MatrixX<Scalar>> transport_projection_coords(const ProjectionPoint<Scalar>& P,
                                                         const std::vector<MatrixX<Scalar>>& Zdir,
                                                         const std::vector<MatrixX<Scalar>>& Zvec, Scalar t) {
  if (t == Scalar(0)) return Zvec;
  const auto Y = with_completion(from_projection(P));
  const auto dir = tangent_from_projection_velocity(Y, Zdir);
  const auto vec = tangent_from_projection_velocity(Y, Zvec);
  return to_projection_velocity(transport(Geodesic<Scalar>(dir), vec, t));
}

/// Transport of Z along its own geodesic.
template <typename Scalar>
std::vector<MatrixX<Scalar>> transport_projection_coords(const ProjectionPoint<Scalar>& P,
                                                         const std::vector<MatrixX<Scalar>>& Z, Scalar t) {
  return transport_projection_coords(P, Z, Z, t);
}

}  // namespace flagopt
