#pragma once

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "flagopt/calculus.hpp"
#include "flagopt/coords.hpp"
#include "flagopt/geometry.hpp"
#include "flagopt/tangent.hpp"

namespace flagopt {

enum class LineSearch { armijo, golden_exact };
enum class Termination { grad_tol, step_tol, max_iters, stalled };
enum class Method { steepest_descent, conjugate_gradient, newton };
/// First trial step of each line search after the first iteration.
enum class InitialStep { doubling, barzilai_borwein };

inline const char* to_string(LineSearch m) { return m == LineSearch::armijo ? "armijo" : "golden"; }

inline const char* to_string(InitialStep s) { return s == InitialStep::doubling ? "doubling" : "bb"; }

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::grad_tol: return "grad_tol";
    case Termination::step_tol: return "step_tol";
    case Termination::max_iters: return "max_iters";
    case Termination::stalled: return "stalled";
  }
  return "?";
}

inline const char* to_string(Method m) {
  switch (m) {
    case Method::steepest_descent: return "sd";
    case Method::conjugate_gradient: return "cg";
    case Method::newton: return "newton";
  }
  return "?";
}

struct SolverConfig {
  int max_iters = 1000;
  /// Frobenius norm of the Riemannian gradient.
  double grad_tol = 1e-6;
  /// Geodesic distance between successive iterates.
  double step_tol = 1e-10;
  LineSearch line_search = LineSearch::armijo;
  double armijo_c1 = 1e-4;
  double armijo_shrink = 0.5;
  int armijo_max_shrinks = 60;
  /// doubling: twice the previously accepted step. barzilai_borwein:
  /// <s, s> / <s, y> from the last step s and gradient change y (both
  /// transported), falling back to doubling when <s, y> <= 0.
  InitialStep initial_step = InitialStep::doubling;
  /// Golden-section termination: bracket width relative to the initial bracket.
  double golden_rel_width = 1e-8;
  /// CG resets to steepest descent every this many iterations; dimension(sig) if unset.
  std::optional<long> cg_restart_period;
  /// Re-orthonormalize the frame every this many accepted steps.
  int reorthonormalize_every = 50;
  /// Solve max f by minimizing -f; records still report f.
  bool maximize = false;

  void validate() const {
    if (max_iters < 1) throw std::invalid_argument("SolverConfig: max_iters must be at least 1");
    if (!(grad_tol > 0) || !(step_tol > 0)) throw std::invalid_argument("SolverConfig: tolerances must be positive");
    if (!(armijo_c1 > 0 && armijo_c1 < 1)) throw std::invalid_argument("SolverConfig: armijo_c1 must lie in (0, 1)");
    if (!(armijo_shrink > 0 && armijo_shrink < 1))
      throw std::invalid_argument("SolverConfig: armijo_shrink must lie in (0, 1)");
    if (armijo_max_shrinks < 1) throw std::invalid_argument("SolverConfig: armijo_max_shrinks must be positive");
    if (!(golden_rel_width > 0)) throw std::invalid_argument("SolverConfig: golden_rel_width must be positive");
    if (cg_restart_period && *cg_restart_period < 1)
      throw std::invalid_argument("SolverConfig: cg_restart_period must be at least 1");
    if (reorthonormalize_every < 1) throw std::invalid_argument("SolverConfig: reorthonormalize_every must be positive");
  }
};

struct IterationRecord {
  int iter;
  double f;
  double grad_norm;
  double step;
  double elapsed_ms;
};

template <typename Scalar>
struct SolveResult {
  StiefelPoint<Scalar> point;
  std::vector<IterationRecord> trajectory;
  Termination termination;
  int iterations = 0;
  Scalar value = 0;
  Scalar grad_norm = 0;
  /// CG resets forced by a non-descent direction.
  int restarts = 0;
  /// Newton iterations that used the gradient direction instead.
  int fallbacks = 0;
  /// Largest tangency residual of the transported CG vectors.
  Scalar max_transport_tangency = 0;
};

namespace detail {

// Frames F exp(tB) = F + U (Sigma(t) - I) V^T with U = F V, through the
// spectral form of B. The increment form is exact at t = 0, so values along
// short steps compare against f(F) without a roundoff offset.
template <typename Scalar>
class GeodesicProbe {
 public:
  GeodesicProbe(const MatrixX<Scalar>& F, const SkewGenerator<Scalar>& B)
      : spectral_(spectral_form(B)),
        F_(F),
        U_(F * spectral_.V.leftCols(2 * spectral_.rank_half())),
        Vt_(spectral_.V.transpose().topRows(2 * spectral_.rank_half())) {}

  MatrixX<Scalar> frame(Scalar t) const {
    if (t == Scalar(0) || spectral_.rank_half() == 0) return F_;
    return F_ + U_ * spectral_.sigma_increment(t, Vt_);
  }

  Scalar max_rate() const { return spectral_.lambdas.empty() ? Scalar(0) : spectral_.lambdas.front(); }

 private:
  SpectralForm<Scalar> spectral_;
  MatrixX<Scalar> F_;
  MatrixX<Scalar> U_;
  MatrixX<Scalar> Vt_;
};

template <typename Scalar>
struct Candidate {
  Scalar t = 0;
  Scalar f = 0;
  MatrixX<Scalar> frame;
};

template <typename Scalar>
struct LineSearchOutcome {
  bool ok = false;
  Candidate<Scalar> best;
  int evaluations = 0;
};

// Changes of f below this many ulps of |f| are treated as roundoff.
inline constexpr double kRoundoffWindow = 1e4;

// Backtracking Armijo. A step whose predicted decrease t |phi'(0)| is itself
// within the roundoff of f may instead pass the derivative form of the same
// condition, phi'(t) <= (2 c1 - 1) phi'(0), provided f did not increase.
template <typename Scalar, typename Eval, typename Slope>
LineSearchOutcome<Scalar> armijo(Eval&& eval, Slope&& slope_at, Scalar f0, Scalar slope, Scalar t0,
                                 const SolverConfig& cfg) {
  LineSearchOutcome<Scalar> out;
  const Scalar c1 = Scalar(cfg.armijo_c1);
  const Scalar noise = Scalar(kRoundoffWindow) * std::numeric_limits<Scalar>::epsilon() * (1 + std::abs(f0));
  Scalar t = t0;
  for (int shrink = 0; shrink <= cfg.armijo_max_shrinks; ++shrink) {
    Candidate<Scalar> c = eval(t);
    ++out.evaluations;
    const bool finite = std::isfinite(static_cast<double>(c.f));
    const bool in_noise = -t * slope <= noise && c.f <= f0;
    if (finite && (c.f <= f0 + c1 * t * slope || (in_noise && slope_at(c) <= (2 * c1 - 1) * slope))) {
      out.ok = true;
      out.best = std::move(c);
      return out;
    }
    t *= Scalar(cfg.armijo_shrink);
  }
  return out;
}

// Golden-section search on [0, t_max], falling back to Armijo if the
// located point does not decrease f.
template <typename Scalar, typename Eval, typename Slope>
LineSearchOutcome<Scalar> golden(Eval&& eval, Slope&& slope_at, Scalar f0, Scalar slope, Scalar t_max, Scalar t_armijo,
                                 const SolverConfig& cfg) {
  const Scalar ratio = (std::sqrt(Scalar(5)) - 1) / 2;
  Scalar a = 0, b = t_max;
  Scalar c = b - ratio * (b - a), d = a + ratio * (b - a);
  int evaluations = 0;
  auto value = [&](Scalar t) {
    ++evaluations;
    return eval(t).f;
  };
  Scalar fc = value(c), fd = value(d);
  const Scalar width = Scalar(cfg.golden_rel_width) * t_max;
  while (b - a > width) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - ratio * (b - a);
      fc = value(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + ratio * (b - a);
      fd = value(d);
    }
  }
  LineSearchOutcome<Scalar> out;
  Candidate<Scalar> cand = eval((a + b) / 2);
  ++evaluations;
  if (std::isfinite(static_cast<double>(cand.f)) && cand.f < f0) {
    out.ok = true;
    out.best = std::move(cand);
    out.evaluations = evaluations;
    return out;
  }
  out = armijo<Scalar>(eval, slope_at, f0, slope, t_armijo, cfg);
  out.evaluations += evaluations;
  return out;
}

template <typename Scalar, typename Eval, typename Slope>
LineSearchOutcome<Scalar> search(Eval&& eval, Slope&& slope_at, Scalar f0, Scalar slope, Scalar t_init, Scalar max_rate,
                                 const SolverConfig& cfg) {
  const Scalar pi = Scalar(3.14159265358979323846264338327950288L);
  const Scalar t_max = pi / std::max(max_rate, Scalar(1e-12));
  if (cfg.line_search == LineSearch::armijo) return armijo<Scalar>(eval, slope_at, f0, slope, std::min(t_init, t_max), cfg);
  return golden<Scalar>(eval, slope_at, f0, slope, t_max, std::min(t_init, t_max), cfg);
}

}  // namespace detail

/**
 * @brief Step size along a descent geodesic for minimizing f.
 *
 * Armijo: backtracks from `initial_step` until
 * f(g(t)) <= f(g(0)) + c1 t (d/dt) f(g(t))|_0. Golden: golden-section search
 * on [0, pi / lambda_1], lambda_1 the largest rotation rate of the generator.
 * Throws std::domain_error for a non-descent direction and
 * std::runtime_error when no acceptable step is found.
 */
template <typename Scalar>
Scalar line_search_geodesic(const ObjectiveFunction<Scalar>& f, const Geodesic<Scalar>& g, LineSearch mode,
                            const SolverConfig& cfg = {}, Scalar initial_step = 1) {
  const auto& Y = g.base().matrix();
  const Scalar slope = f.euclidean_gradient(Y).cwiseProduct(g.initial_velocity().matrix()).sum();
  if (!(slope < 0)) throw std::domain_error("line_search_geodesic: not a descent direction");
  SolverConfig local = cfg;
  local.line_search = mode;
  const detail::GeodesicProbe<Scalar> probe(g.frame(), g.generator());
  const int k = g.signature().top();
  auto eval = [&](Scalar t) {
    detail::Candidate<Scalar> c;
    c.t = t;
    c.frame = probe.frame(t);
    c.f = f.value(c.frame.leftCols(k));
    return c;
  };
  auto slope_at = [&](const detail::Candidate<Scalar>& c) {
    const MatrixX<Scalar> velocity = c.frame * g.generator().matrix().leftCols(k);
    return f.euclidean_gradient(c.frame.leftCols(k)).cwiseProduct(velocity).sum();
  };
  const auto out = detail::search<Scalar>(eval, slope_at, f.value(Y), slope, initial_step, probe.max_rate(), local);
  if (!out.ok) throw std::runtime_error("line_search_geodesic: no acceptable step");
  return out.best.t;
}

namespace detail {

template <typename Scalar>
SolveResult<Scalar> run_solver(const ObjectiveFunction<Scalar>& objective, const StiefelPoint<Scalar>& p0,
                               const SolverConfig& cfg, Method method) {
  cfg.validate();
  if (objective.signature() != p0.signature()) throw std::invalid_argument("solver: signature mismatch");
  using Matrix = MatrixX<Scalar>;
  const auto start = std::chrono::steady_clock::now();
  auto elapsed_ms = [&] {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  };

  const ObjectiveFunction<Scalar> f = cfg.maximize ? negated(objective) : objective;
  const Scalar sign = cfg.maximize ? Scalar(-1) : Scalar(1);
  const auto& sig = p0.signature();
  const int k = sig.top();
  const long period = cfg.cg_restart_period ? *cfg.cg_restart_period : dimension(sig);

  Matrix F = complete_basis(p0).matrix();
  auto point_of = [&](const Matrix& frame) {
    return StiefelPoint<Scalar>::trusted(sig, frame.leftCols(k), Matrix(frame.rightCols(sig.ambient() - k)));
  };

  Scalar fval = f.value(F.leftCols(k));
  Matrix A = f.euclidean_gradient(F.leftCols(k));
  Matrix G = gradient_from_partials<Scalar>(sig, F.leftCols(k), A);
  Scalar gnorm = G.norm();

  SolveResult<Scalar> result{p0, {}, Termination::max_iters};
  result.trajectory.push_back({0, double(sign * fval), double(gnorm), 0.0, elapsed_ms()});

  if (gnorm <= Scalar(cfg.grad_tol)) {
    result.termination = Termination::grad_tol;
    result.value = sign * fval;
    result.grad_norm = gnorm;
    return result;
  }

  Matrix H = -G;  // CG search direction for the next iteration
  Scalar prev_t = 0;
  Scalar bb_t = 0;
  for (int iter = 1;; ++iter) {
    Matrix D;
    if (method == Method::steepest_descent) {
      D = -G;
    } else if (method == Method::conjugate_gradient) {
      D = H;
    } else {
      const auto step = newton_direction(f, point_of(F));
      if (step.usable()) {
        D = step.direction.matrix();
      } else {
        D = -G;
        ++result.fallbacks;
      }
    }
    // The slope is taken along the exact horizontal velocity F B I: a roundoff
    // vertical part of D would otherwise be amplified by the large normal part of A.
    auto slope_along = [&](const SkewGenerator<Scalar>& gen) {
      return A.cwiseProduct(F * gen.matrix().leftCols(k)).sum();
    };
    auto B = lift_in_frame(sig, F, D);
    Scalar slope = slope_along(B);
    if (!(slope < 0) && method != Method::steepest_descent) {
      if (method == Method::conjugate_gradient) ++result.restarts;
      else ++result.fallbacks;
      D = -G;
      B = lift_in_frame(sig, F, D);
      slope = slope_along(B);
    }
    if (!(slope < 0)) {
      result.termination = Termination::stalled;
      break;
    }

    const GeodesicProbe<Scalar> probe(F, B);
    const bool reorth = iter % cfg.reorthonormalize_every == 0;
    auto eval = [&](Scalar t) {
      Candidate<Scalar> c;
      c.t = t;
      c.frame = probe.frame(t);
      if (reorth) {
        Matrix cleaned = orthonormalize(c.frame);
        if (!same_flag(point_of(c.frame), point_of(cleaned)))
          throw std::runtime_error("solver: re-orthonormalization changed the flag");
        c.frame = std::move(cleaned);
      }
      c.f = f.value(c.frame.leftCols(k));
      return c;
    };
    Scalar t_init = 1;
    if (method != Method::newton && prev_t > 0) t_init = bb_t > 0 ? bb_t : 2 * prev_t;
    auto slope_at = [&](const Candidate<Scalar>& c) {
      const Matrix velocity = c.frame * B.matrix().leftCols(k);
      return f.euclidean_gradient(c.frame.leftCols(k)).cwiseProduct(velocity).sum();
    };
    auto ls = search<Scalar>(eval, slope_at, fval, slope, t_init, probe.max_rate(), cfg);
    if (!ls.ok) {
      result.termination = Termination::stalled;
      break;
    }
    const Scalar t = ls.best.t;
    prev_t = t;
    const Scalar step = t * B.matrix().norm() / std::sqrt(Scalar(2));

    Matrix tauG, tauH;
    const bool bb = cfg.initial_step == InitialStep::barzilai_borwein && method != Method::newton;
    if (method == Method::conjugate_gradient || bb) {
      const Matrix& Fn = ls.best.frame;
      tauH = Fn * B.matrix().leftCols(k);
      const auto X = lift_in_frame(sig, F, G);
      tauG = Fn * exp_neg_phi(B, X, t).matrix().leftCols(k);
      const auto newpoint = point_of(Fn);
      const Scalar scale = 1 + tauG.norm() + tauH.norm();
      result.max_transport_tangency =
          std::max({result.max_transport_tangency, tangency_residual(newpoint, tauG) / scale,
                    tangency_residual(newpoint, tauH) / scale});
    }

    const Matrix Yold = F.leftCols(k);
    const Matrix Gold = G;
    F = std::move(ls.best.frame);
    fval = ls.best.f;
    A = f.euclidean_gradient(F.leftCols(k));
    G = gradient_from_partials<Scalar>(sig, F.leftCols(k), A);
    gnorm = G.norm();
    result.trajectory.push_back({iter, double(sign * fval), double(gnorm), double(step), elapsed_ms()});
    result.iterations = iter;

    if (bb) {
      const Matrix Y = F.leftCols(k);
      const Matrix s = t * tauH;
      const Matrix y = G - tauG;
      const Scalar sy = metric_at<Scalar>(Y, s, y);
      bb_t = sy > 0 ? metric_at<Scalar>(Y, s, s) / sy : Scalar(0);
    }
    if (method == Method::conjugate_gradient) {
      if (iter % period == 0) {
        H = -G;
      } else {
        const Matrix Y = F.leftCols(k);
        const Scalar gamma = metric_at<Scalar>(Y, G - tauG, G) / metric_at<Scalar>(Yold, Gold, Gold);
        H = -G + gamma * tauH;
      }
    }

    if (gnorm <= Scalar(cfg.grad_tol)) {
      result.termination = Termination::grad_tol;
      break;
    }
    if (step <= Scalar(cfg.step_tol)) {
      result.termination = Termination::step_tol;
      break;
    }
    if (iter >= cfg.max_iters) {
      result.termination = Termination::max_iters;
      break;
    }
  }
  result.point = point_of(F);
  result.value = sign * fval;
  result.grad_norm = gnorm;
  return result;
}

}  // namespace detail

/// Steepest descent along geodesics in the direction of -grad f.
template <typename Scalar>
SolveResult<Scalar> steepest_descent(const ObjectiveFunction<Scalar>& f, const StiefelPoint<Scalar>& p0,
                                     const SolverConfig& cfg = {}) {
  return detail::run_solver(f, p0, cfg, Method::steepest_descent);
}

/**
 * @brief Nonlinear conjugate gradient with Polak-Ribiere updates.
 *
 * H_{i+1} = -G_{i+1} + gamma_i tau H_i with
 * gamma_i = g(G_{i+1} - tau G_i, G_{i+1}) / g(G_i, G_i), where tau is parallel
 * transport along the last geodesic. Resets to -G every cg_restart_period
 * iterations, and immediately if H is not a descent direction.
 */
template <typename Scalar>
SolveResult<Scalar> conjugate_gradient(const ObjectiveFunction<Scalar>& f, const StiefelPoint<Scalar>& p0,
                                       const SolverConfig& cfg = {}) {
  return detail::run_solver(f, p0, cfg, Method::conjugate_gradient);
}

/// Newton iteration with line-search safeguard; uses -grad f when the Newton direction is unusable.
template <typename Scalar>
SolveResult<Scalar> newton_solve(const ObjectiveFunction<Scalar>& f, const StiefelPoint<Scalar>& p0,
                                 const SolverConfig& cfg = {}) {
  return detail::run_solver(f, p0, cfg, Method::newton);
}

template <typename Scalar>
SolveResult<Scalar> solve(Method method, const ObjectiveFunction<Scalar>& f, const StiefelPoint<Scalar>& p0,
                          const SolverConfig& cfg = {}) {
  return detail::run_solver(f, p0, cfg, method);
}

}  // namespace flagopt
