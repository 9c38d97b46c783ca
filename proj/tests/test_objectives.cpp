#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace flagopt;
using namespace flagopt::testing;
using Eigen::MatrixXd;

namespace {

const FlagSignature kTiny({1, 2}, 3);

MatrixXd diag321() { return Eigen::Vector3d(3, 2, 1).asDiagonal(); }

}  // namespace

TEST(Objectives, KnownValues) {
  const MatrixXd Y = identity_columns(3, 2);
  EXPECT_DOUBLE_EQ(principal_flag_objective(diag321(), kTiny).value(Y), 5.0);
  EXPECT_DOUBLE_EQ(eigenflag_objective(diag321(), kTiny).value(Y), 13.0);
  EXPECT_DOUBLE_EQ(principal_flag_objective(MatrixXd::Zero(3, 3).eval(), kTiny).value(Y), 0.0);

  const FlagSignature sig({2, 5}, 8);
  const auto f = principal_flag_objective(MatrixXd::Identity(8, 8).eval(), sig);
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto p = random_point(sig, s);
    EXPECT_NEAR(f.value(p.matrix()), 5.0, 1e-12);
    EXPECT_LE(riemannian_gradient(f, p).matrix().norm(), 1e-12);
  }
}

TEST(Objectives, EuclideanDerivativesMatchFiniteDifferences) {
  const FlagSignature sig({2, 3, 6}, 9);
  const MatrixXd M = symmetric(9, 1);
  for (const auto& f : {principal_flag_objective(M, sig), eigenflag_objective(M, sig)}) {
    const MatrixXd Y = gaussian(9, 6, 2);
    const MatrixXd X = gaussian(9, 6, 3), X2 = gaussian(9, 6, 4);
    const double h = 1e-5;
    const double fd = (f.value(Y + h * X) - f.value(Y - h * X)) / (2 * h);
    const double exact = f.euclidean_gradient(Y).cwiseProduct(X).sum();
    EXPECT_NEAR(fd, exact, 1e-7 * (1 + std::abs(exact)));
    const double fd2 = (f.euclidean_gradient(Y + h * X2) - f.euclidean_gradient(Y - h * X2)).cwiseProduct(X).sum() / (2 * h);
    const double exact2 = f.euclidean_hessian(Y, X, X2);
    EXPECT_NEAR(fd2, exact2, 1e-6 * (1 + std::abs(exact2)));
    EXPECT_NEAR(exact2, f.euclidean_hessian(Y, X2, X), 1e-10 * (1 + std::abs(exact2)));
  }
}

TEST(Objectives, CustomTraceFamily) {
  const FlagSignature sig({1, 3}, 5);
  const MatrixXd M = symmetric(5, 5);
  const ScalarFunction<double> cube{[](double x) { return x * x * x; }, [](double x) { return 3 * x * x; },
                                    [](double x) { return 6 * x; }};
  const auto f = trace_family_objective<double>(M, sig, {cube, ScalarFunction<double>::identity()});
  const MatrixXd Y = random_point(sig, 6).matrix();
  const double t1 = (Y.col(0).transpose() * M * Y.col(0))(0, 0);
  const double t2 = (Y.rightCols(2).transpose() * M * Y.rightCols(2)).trace();
  EXPECT_NEAR(f.value(Y), t1 * t1 * t1 + t2, 1e-12);
  EXPECT_THROW(trace_family_objective<double>(M, sig, {cube}), std::invalid_argument);
}

TEST(Objectives, InputValidation) {
  MatrixXd asym = symmetric(3, 7);
  asym(0, 1) += 1.0;
  EXPECT_THROW(principal_flag_objective(asym, kTiny), std::invalid_argument);
  EXPECT_THROW(eigenflag_objective(symmetric(4, 8), kTiny), std::invalid_argument);
  EXPECT_THROW(true_principal_flag(asym, kTiny), std::invalid_argument);
  const auto f = principal_flag_objective(diag321(), kTiny);
  EXPECT_THROW(f.value(MatrixXd::Zero(3, 3)), std::invalid_argument);
}

TEST(Objectives, InvariantUnderConjugation) {
  const FlagSignature sig({2, 4}, 7);
  const MatrixXd M = symmetric(7, 9);
  const MatrixXd Q = orthonormalize(gaussian(7, 7, 10));
  const MatrixXd Y = random_point(sig, 11).matrix();
  for (bool eigen : {false, true}) {
    const auto f = eigen ? eigenflag_objective(M, sig) : principal_flag_objective(M, sig);
    const MatrixXd QMQ = Q * M * Q.transpose();
    const auto g = eigen ? eigenflag_objective(QMQ, sig) : principal_flag_objective(QMQ, sig);
    EXPECT_NEAR(g.value(Q * Y), f.value(Y), 1e-10 * (1 + std::abs(f.value(Y))));
  }
}

TEST(TruePrincipalFlag, SmallExample) {
  const auto sol = true_principal_flag(diag321(), kTiny);
  EXPECT_DOUBLE_EQ(sol.value, 5.0);
  EXPECT_DOUBLE_EQ(sol.gap, 1.0);
  EXPECT_TRUE(sol.unique);
  EXPECT_LE((sol.point.matrix() - identity_columns(3, 2)).norm(), 1e-15);
  EXPECT_EQ(sol.eigenvalues, Eigen::Vector3d(3, 2, 1));
  EXPECT_DOUBLE_EQ(eigenflag_objective(diag321(), kTiny).value(sol.point.matrix()), 13.0);
}

TEST(TruePrincipalFlag, DegenerateGap) {
  const MatrixXd M = Eigen::Vector4d(3, 2, 2, 1).asDiagonal();
  const auto sol = true_principal_flag(M, FlagSignature({2}, 4));
  EXPECT_FALSE(sol.unique);
  EXPECT_EQ(sol.gap, 0.0);
  EXPECT_TRUE(true_principal_flag(M, FlagSignature({1, 3}, 4)).unique);
}

TEST(TruePrincipalFlag, KyFanBound) {
  const FlagSignature sig({3, 7, 12}, 30);
  const MatrixXd M = symmetric(30, 12);
  const auto sol = true_principal_flag(M, sig);
  const auto f = principal_flag_objective(M, sig);
  EXPECT_NEAR(f.value(sol.point.matrix()), sol.value, 1e-10 * (1 + std::abs(sol.value)));
  EXPECT_NEAR(sol.value, sol.eigenvalues.head(12).sum(), 1e-12);
  for (std::uint64_t s = 0; s < 100; ++s) EXPECT_LE(f.value(random_point(sig, 100 + s).matrix()), sol.value + 1e-10);
  const MatrixXd V = sol.eigenvectors;
  EXPECT_LE((V.transpose() * V - MatrixXd::Identity(30, 30)).norm(), 1e-12);
  EXPECT_LE((M * V - V * sol.eigenvalues.asDiagonal()).norm(), 1e-10 * M.norm());
}
