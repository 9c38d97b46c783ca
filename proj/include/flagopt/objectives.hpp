#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <stdexcept>
#include <utility>
#include <vector>

#include "flagopt/calculus.hpp"
#include "flagopt/coords.hpp"

namespace flagopt {

/// Scalar C^2 function with its first two derivatives.
template <typename Scalar>
struct ScalarFunction {
  std::function<Scalar(Scalar)> f;
  std::function<Scalar(Scalar)> df;
  std::function<Scalar(Scalar)> d2f;

  static ScalarFunction identity() {
    return {[](Scalar x) { return x; }, [](Scalar) { return Scalar(1); }, [](Scalar) { return Scalar(0); }};
  }
  static ScalarFunction square() {
    return {[](Scalar x) { return x * x; }, [](Scalar x) { return 2 * x; }, [](Scalar) { return Scalar(2); }};
  }
};

namespace detail {

template <typename Scalar>
MatrixX<Scalar> ingest_symmetric(const MatrixX<Scalar>& M, const FlagSignature& sig) {
  if (M.rows() != sig.ambient() || M.cols() != sig.ambient())
    throw std::invalid_argument("objective: M must be n x n for signature " + sig.to_string());
  if ((M - M.transpose()).norm() > Scalar(1e-10) * (1 + M.norm()))
    throw std::invalid_argument("objective: M must be symmetric");
  return Scalar(0.5) * (M + M.transpose());
}

}  // namespace detail

/**
 * @brief f(Y) = sum_i f_i(tr(Y_i^T M Y_i)) over the column blocks Y_i.
 *
 * f_Y has block i equal to 2 f_i'(t_i) M Y_i, and
 * f_YY(X, X') = sum_i 4 f_i''(t_i) tr(Y_i^T M X_i) tr(Y_i^T M X'_i) + 2 f_i'(t_i) tr(X_i^T M X'_i).
 */
template <typename Scalar>
ObjectiveFunction<Scalar> trace_family_objective(const MatrixX<Scalar>& M_in, const FlagSignature& sig,
                                                 std::vector<ScalarFunction<Scalar>> fs) {
  using Matrix = MatrixX<Scalar>;
  if (static_cast<int>(fs.size()) != sig.depth())
    throw std::invalid_argument("trace_family_objective: need one scalar function per block");
  auto M = std::make_shared<const Matrix>(detail::ingest_symmetric(M_in, sig));
  auto fns = std::make_shared<const std::vector<ScalarFunction<Scalar>>>(std::move(fs));

  auto value = [M, fns, sig](const Matrix& Y) {
    const Matrix MY = (*M) * Y;
    Scalar total = 0;
    for (int i = 0; i < sig.depth(); ++i) {
      const int s = sig.block_start(i), b = sig.block_size(i);
      total += (*fns)[i].f(Y.middleCols(s, b).cwiseProduct(MY.middleCols(s, b)).sum());
    }
    return total;
  };
  auto gradient = [M, fns, sig](const Matrix& Y) {
    Matrix G = (*M) * Y;
    for (int i = 0; i < sig.depth(); ++i) {
      const int s = sig.block_start(i), b = sig.block_size(i);
      const Scalar t = Y.middleCols(s, b).cwiseProduct(G.middleCols(s, b)).sum();
      G.middleCols(s, b) *= 2 * (*fns)[i].df(t);
    }
    return G;
  };
  auto hessian = [M, fns, sig](const Matrix& Y, const Matrix& X1, const Matrix& X2) {
    const Matrix MY = (*M) * Y;
    const Matrix MX2 = (*M) * X2;
    Scalar total = 0;
    for (int i = 0; i < sig.depth(); ++i) {
      const int s = sig.block_start(i), b = sig.block_size(i);
      const auto& fn = (*fns)[i];
      const Scalar t = Y.middleCols(s, b).cwiseProduct(MY.middleCols(s, b)).sum();
      const Scalar a1 = X1.middleCols(s, b).cwiseProduct(MY.middleCols(s, b)).sum();
      const Scalar a2 = X2.middleCols(s, b).cwiseProduct(MY.middleCols(s, b)).sum();
      const Scalar cross = X1.middleCols(s, b).cwiseProduct(MX2.middleCols(s, b)).sum();
      total += 4 * fn.d2f(t) * a1 * a2 + 2 * fn.df(t) * cross;
    }
    return total;
  };
  return ObjectiveFunction<Scalar>(sig, std::move(value), std::move(gradient), std::move(hessian));
}

/// tr(Y^T M Y): the principal flag objective (to be maximized).
template <typename Scalar>
ObjectiveFunction<Scalar> principal_flag_objective(const MatrixX<Scalar>& M, const FlagSignature& sig) {
  return trace_family_objective<Scalar>(M, sig,
                                        std::vector<ScalarFunction<Scalar>>(sig.depth(), ScalarFunction<Scalar>::identity()));
}

/// sum_i tr(Y_i^T M Y_i)^2: the nonlinear eigenflag objective (to be maximized).
template <typename Scalar>
ObjectiveFunction<Scalar> eigenflag_objective(const MatrixX<Scalar>& M, const FlagSignature& sig) {
  return trace_family_objective<Scalar>(M, sig,
                                        std::vector<ScalarFunction<Scalar>>(sig.depth(), ScalarFunction<Scalar>::square()));
}

template <typename Scalar>
struct PrincipalSolution {
  StiefelPoint<Scalar> point;
  Scalar value;
  /// lambda_{n_d} - lambda_{n_d + 1}.
  Scalar gap;
  /// False when the gap at n_d vanishes and the optimal subspace is not unique.
  bool unique;
  /// All eigenvalues, descending.
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> eigenvalues;
  /// Eigenvectors matching `eigenvalues`, first nonzero entry of each positive.
  MatrixX<Scalar> eigenvectors;
};

/// Eigenvector flag of M and its value, the sum of the n_d largest eigenvalues.
template <typename Scalar>
PrincipalSolution<Scalar> true_principal_flag(const MatrixX<Scalar>& M_in, const FlagSignature& sig) {
  const MatrixX<Scalar> M = detail::ingest_symmetric(M_in, sig);
  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> eig(M);
  if (eig.info() != Eigen::Success) throw std::runtime_error("true_principal_flag: eigendecomposition failed");
  const int n = sig.ambient(), k = sig.top();
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> w = eig.eigenvalues().reverse();
  MatrixX<Scalar> V = eig.eigenvectors().rowwise().reverse();
  detail::fix_column_signs(V);
  const Scalar value = w.head(k).sum();
  const Scalar gap = w(k - 1) - w(k);
  const Scalar scale = std::max(Scalar(1), w.cwiseAbs().maxCoeff());
  const bool unique = gap > Scalar(64) * std::numeric_limits<Scalar>::epsilon() * scale * Scalar(n);
  auto point = StiefelPoint<Scalar>(sig, V.leftCols(k));
  return {std::move(point), value, gap, unique, std::move(w), std::move(V)};
}

}  // namespace flagopt
