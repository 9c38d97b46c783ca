#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "flagopt/harness.hpp"
#include "test_util.hpp"

using namespace flagopt;
using namespace flagopt::testing;
using Eigen::MatrixXd;

namespace {

MatrixXd diag321() { return Eigen::Vector3d(3, 2, 1).asDiagonal(); }

SolverConfig maximizing(SolverConfig cfg = {}) {
  cfg.maximize = true;
  return cfg;
}

StiefelPointd circle_point(double theta) {
  MatrixXd Y(2, 1);
  Y << std::cos(theta), std::sin(theta);
  return StiefelPointd(FlagSignature({1}, 2), Y);
}

SolverConfig bb_config() {
  SolverConfig cfg;
  cfg.initial_step = InitialStep::barzilai_borwein;
  return cfg;
}

}  // namespace

TEST(SteepestDescent, StopsImmediatelyAtCriticalPoint) {
  const FlagSignature sig({2, 5}, 9);
  const MatrixXd M = symmetric(9, 1);
  const auto r = steepest_descent(principal_flag_objective(M, sig), true_principal_flag(M, sig).point, maximizing());
  EXPECT_EQ(r.termination, Termination::grad_tol);
  EXPECT_EQ(r.iterations, 0);
  EXPECT_EQ(r.trajectory.size(), 1u);
}

TEST(SteepestDescent, LineInThreeSpace) {
  // Integer spectra put the reflecting step on the doubling/halving lattice; BB steps avoid it.
  const FlagSignature sig({1}, 3);
  const auto r =
      steepest_descent(principal_flag_objective(diag321(), sig), random_point(sig, 2), maximizing(bb_config()));
  EXPECT_EQ(r.termination, Termination::grad_tol);
  EXPECT_NEAR(r.value, 3.0, 1e-10);
  EXPECT_NEAR(std::abs(r.point.matrix()(0, 0)), 1.0, 1e-8);
}

TEST(SteepestDescent, PrincipalFlagWithinBudget) {
  const FlagSignature sig({3, 7, 12}, 60);
  SolverConfig cfg = maximizing(harness::default_solver_config());
  cfg.max_iters = 200;
  for (std::uint64_t s = 0; s < 3; ++s) {
    const MatrixXd M = harness::random_symmetric(60, 10 + s);
    const auto r = steepest_descent(principal_flag_objective(M, sig), random_point(sig, 20 + s), cfg);
    const double fstar = true_principal_flag(M, sig).value;
    EXPECT_EQ(r.termination, Termination::grad_tol) << "seed " << s;
    EXPECT_LE(std::abs(r.value - fstar), 1e-6 * std::max(1.0, std::abs(fstar)));
  }
}

TEST(SteepestDescent, RejectsPeriodicFullTurn) {
  // A step of pi / lambda_1 returns a line to itself with equal f; it must not count as progress.
  const FlagSignature sig({1}, 3);
  const auto r =
      conjugate_gradient(principal_flag_objective(diag321(), sig), random_point(sig, 4), maximizing(bb_config()));
  EXPECT_EQ(r.termination, Termination::grad_tol);
  for (std::size_t i = 1; i < r.trajectory.size(); ++i) EXPECT_LT(r.trajectory[i].step, 3.0);
}

TEST(SteepestDescent, MonotoneAndDeterministic) {
  const FlagSignature sig({2, 4, 7}, 20);
  const MatrixXd M = symmetric(20, 3);
  const auto f = eigenflag_objective(M, sig);
  const auto p0 = random_point(sig, 4);
  const auto cfg = maximizing();
  const auto a = steepest_descent(f, p0, cfg);
  const auto b = steepest_descent(f, p0, cfg);
  ASSERT_EQ(a.trajectory.size(), b.trajectory.size());
  for (std::size_t i = 0; i < a.trajectory.size(); ++i) {
    EXPECT_EQ(a.trajectory[i].iter, static_cast<int>(i));
    EXPECT_EQ(a.trajectory[i].f, b.trajectory[i].f);
    EXPECT_EQ(a.trajectory[i].grad_norm, b.trajectory[i].grad_norm);
    EXPECT_GE(a.trajectory[i].step, 0.0);
    if (i > 0) {
      EXPECT_GE(a.trajectory[i].f, a.trajectory[i - 1].f);
    }
  }
  EXPECT_EQ((a.point.matrix() - b.point.matrix()).norm(), 0.0);
  EXPECT_NEAR(a.value, f.value(a.point.matrix()), 1e-12 * std::abs(a.value));
  EXPECT_NEAR(a.grad_norm, riemannian_gradient(f, a.point).matrix().norm(), 1e-9);
}

TEST(SteepestDescent, StaysOrthonormalOverLongRuns) {
  const FlagSignature sig({2, 5, 9}, 30);
  SolverConfig cfg = maximizing();
  cfg.max_iters = 400;
  cfg.grad_tol = 1e-14;
  const auto r = steepest_descent(eigenflag_objective(symmetric(30, 5), sig), random_point(sig, 6), cfg);
  EXPECT_GE(r.iterations, 100);
  const MatrixXd& Y = r.point.matrix();
  EXPECT_LE((Y.transpose() * Y - MatrixXd::Identity(9, 9)).norm(), 1e-12);
}

TEST(SteepestDescent, IterationBudget) {
  const FlagSignature sig({2, 5}, 12);
  SolverConfig cfg = maximizing();
  cfg.max_iters = 3;
  const auto r = steepest_descent(eigenflag_objective(symmetric(12, 7), sig), random_point(sig, 8), cfg);
  EXPECT_EQ(r.termination, Termination::max_iters);
  EXPECT_EQ(r.iterations, 3);
  EXPECT_EQ(r.trajectory.size(), 4u);
}

TEST(SolverConfig, Validation) {
  const FlagSignature sig({1}, 3);
  const auto f = principal_flag_objective(diag321(), sig);
  const auto p = random_point(sig, 1);
  auto bad = [&](auto mutate) {
    SolverConfig cfg;
    mutate(cfg);
    EXPECT_THROW(steepest_descent(f, p, cfg), std::invalid_argument);
  };
  bad([](SolverConfig& c) { c.max_iters = 0; });
  bad([](SolverConfig& c) { c.grad_tol = 0; });
  bad([](SolverConfig& c) { c.armijo_c1 = 1; });
  bad([](SolverConfig& c) { c.armijo_shrink = 1.5; });
  bad([](SolverConfig& c) { c.cg_restart_period = 0; });
  EXPECT_THROW(steepest_descent(f, random_point(FlagSignature({1}, 4), 1)), std::invalid_argument);
}

TEST(ConjugateGradient, ConvergesWithTangentTransports) {
  const FlagSignature sig({2, 4, 7}, 20);
  const MatrixXd M = symmetric(20, 9);
  // f is about 430 here, so gradients much below 1e-4 are lost in the roundoff of f.
  SolverConfig cfg = maximizing();
  cfg.grad_tol = 1e-4;
  const auto r = conjugate_gradient(eigenflag_objective(M, sig), random_point(sig, 10), cfg);
  EXPECT_EQ(r.termination, Termination::grad_tol);
  EXPECT_LE(r.grad_norm, 1e-4);
  EXPECT_LE(r.max_transport_tangency, 1e-9);
}

TEST(ConjugateGradient, NotSlowerThanSteepestDescentOnGrassmannian) {
  const FlagSignature sig({4}, 30);
  int not_slower = 0;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto f = principal_flag_objective(symmetric(30, 30 + s), sig);
    const auto p = random_point(sig, 40 + s);
    const auto sd = steepest_descent(f, p, maximizing());
    const auto cg = conjugate_gradient(f, p, maximizing());
    EXPECT_EQ(cg.termination, Termination::grad_tol);
    if (cg.iterations <= sd.iterations) ++not_slower;
  }
  EXPECT_GE(not_slower, 4);
}

TEST(ConjugateGradient, RestartEveryIterationIsSteepestDescent) {
  const FlagSignature sig({2, 5}, 12);
  const auto f = eigenflag_objective(symmetric(12, 11), sig);
  const auto p = random_point(sig, 12);
  SolverConfig cfg = maximizing();
  cfg.max_iters = 50;
  const auto sd = steepest_descent(f, p, cfg);
  cfg.cg_restart_period = 1;
  const auto cg = conjugate_gradient(f, p, cfg);
  ASSERT_EQ(sd.trajectory.size(), cg.trajectory.size());
  EXPECT_LE((sd.point.matrix() - cg.point.matrix()).norm(), 1e-12);
  EXPECT_NEAR(sd.value, cg.value, 1e-12 * std::abs(sd.value));
}

TEST(Newton, QuadraticConvergenceOnTheCircle) {
  MatrixXd M(2, 2);
  M << 2, 0, 0, 1;
  const auto f = principal_flag_objective(M, FlagSignature({1}, 2));
  SolverConfig cfg = maximizing();
  cfg.grad_tol = 1e-12;
  const auto r = newton_solve(f, circle_point(0.3), cfg);
  EXPECT_EQ(r.termination, Termination::grad_tol);
  EXPECT_LE(r.iterations, 5);
  EXPECT_NEAR(r.value, 2.0, 1e-14);
  EXPECT_EQ(r.fallbacks, 0);
}

TEST(Newton, FallsBackAtSaddle) {
  const FlagSignature sig({1}, 3);
  MatrixXd Y(3, 1);
  Y << 0.05, 1.0, 0.05;
  const StiefelPointd p0(sig, Y.normalized());
  SolverConfig cfg = maximizing();
  cfg.grad_tol = 1e-10;
  const auto r = newton_solve(principal_flag_objective(diag321(), sig), p0, cfg);
  EXPECT_GT(r.fallbacks, 0);
  EXPECT_EQ(r.termination, Termination::grad_tol);
  EXPECT_NEAR(r.value, 3.0, 1e-10);
}

TEST(Newton, ZeroGradientStart) {
  const FlagSignature sig({1}, 3);
  const auto r = newton_solve(principal_flag_objective(diag321(), sig), StiefelPointd(sig, identity_columns(3, 1)));
  EXPECT_EQ(r.iterations, 0);
  EXPECT_EQ(r.termination, Termination::grad_tol);
}

TEST(Solve, DispatchesByMethod) {
  const FlagSignature sig({1}, 3);
  const auto f = principal_flag_objective(diag321(), sig);
  const auto p = random_point(sig, 3);
  for (auto m : {Method::steepest_descent, Method::conjugate_gradient, Method::newton})
    EXPECT_NEAR(solve(m, f, p, maximizing(bb_config())).value, 3.0, 1e-10) << to_string(m);
}

class LineSearchOnCircle : public ::testing::Test {
 protected:
  // Minimizing -(y^T diag(2, 1) y) = -1.5 - 0.5 cos(2 theta); minimum at theta = 0.
  const FlagSignature circle{{1}, 2};
  const ObjectiveFunctiond f = negated(principal_flag_objective(MatrixXd(Eigen::Vector2d(2, 1).asDiagonal()), circle));
  const double theta0 = 0.3;

  Geodesicd toward_minimum(double rate) const {
    const auto p = circle_point(theta0);
    MatrixXd v(2, 1);
    v << std::sin(theta0), -std::cos(theta0);
    return Geodesicd(TangentVectord(p, rate * v));
  }
};

TEST_F(LineSearchOnCircle, ArmijoAcceptsShortUnitStep) {
  EXPECT_EQ(line_search_geodesic(f, toward_minimum(0.05), LineSearch::armijo), 1.0);
  const double t = line_search_geodesic(f, toward_minimum(2.0), LineSearch::armijo);
  EXPECT_LT(t, 1.0);
  const Geodesicd g = toward_minimum(2.0);
  EXPECT_LT(f.value(g.evaluate(t).matrix()), f.value(g.evaluate(0.0).matrix()));
}

TEST_F(LineSearchOnCircle, GoldenFindsExactMinimizer) {
  for (double rate : {0.5, 1.0, 3.0}) {
    const double t = line_search_geodesic(f, toward_minimum(rate), LineSearch::golden_exact);
    EXPECT_NEAR(t, theta0 / rate, 1e-6 / rate) << "rate " << rate;
  }
}

TEST_F(LineSearchOnCircle, GoldenOnGeneralConic) {
  // Minimizing -(a cos^2 + 2 b cos sin + c sin^2); minimizer theta* = atan2(2b, a - c) / 2.
  const double a = 3, b = 0.7, c = 1;
  MatrixXd M(2, 2);
  M << a, b, b, c;
  const auto g = negated(principal_flag_objective(M, circle));
  const double target = 0.5 * std::atan2(2 * b, a - c);
  const double start = target + 0.6;
  MatrixXd v(2, 1);
  v << std::sin(start), -std::cos(start);
  const double t = line_search_geodesic(g, Geodesicd(TangentVectord(circle_point(start), v)), LineSearch::golden_exact);
  EXPECT_NEAR(t, 0.6, 1e-6);
}

TEST_F(LineSearchOnCircle, RejectsAscentDirection) {
  const auto p = circle_point(theta0);
  MatrixXd v(2, 1);
  v << -std::sin(theta0), std::cos(theta0);
  const Geodesicd up(TangentVectord(p, v));
  EXPECT_THROW(line_search_geodesic(f, up, LineSearch::armijo), std::domain_error);
  EXPECT_THROW(line_search_geodesic(f, up, LineSearch::golden_exact), std::domain_error);
}

TEST(GoldenSearch, SolverConvergesWithExactLineSearch) {
  const FlagSignature sig({2, 5}, 15);
  const MatrixXd M = symmetric(15, 13);
  SolverConfig cfg = maximizing();
  cfg.line_search = LineSearch::golden_exact;
  const auto r = steepest_descent(principal_flag_objective(M, sig), random_point(sig, 14), cfg);
  EXPECT_EQ(r.termination, Termination::grad_tol);
  EXPECT_NEAR(r.value, true_principal_flag(M, sig).value, 1e-9);
}
