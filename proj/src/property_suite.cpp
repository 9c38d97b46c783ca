#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include <Eigen/SVD>

#include "flagopt/harness.hpp"

namespace flagopt::harness {

namespace {

using Matrix = Eigen::MatrixXd;

class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}

  std::uint64_t next_seed() { return rng_(); }

  int uniform(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }

  Matrix gaussian(Eigen::Index rows, Eigen::Index cols) {
    Matrix A(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) A(i, j) = normal_(rng_);
    return A;
  }

  FlagSignature signature(int max_n = 24) {
    const int n = uniform(2, max_n);
    const int depth = uniform(1, std::min(n - 1, 5));
    std::vector<int> cuts(static_cast<std::size_t>(n - 1));
    for (int i = 0; i < n - 1; ++i) cuts[static_cast<std::size_t>(i)] = i + 1;
    std::shuffle(cuts.begin(), cuts.end(), rng_);
    cuts.resize(static_cast<std::size_t>(depth));
    std::sort(cuts.begin(), cuts.end());
    return FlagSignature(cuts, n);
  }

  FlagSignature grassmannian(int max_n = 24) {
    const int n = uniform(2, max_n);
    return FlagSignature({uniform(1, n - 1)}, n);
  }

  StiefelPointd point(const FlagSignature& sig) { return random_point(sig, next_seed()); }

  /// Unit-norm tangent vector at p.
  TangentVectord tangent(const StiefelPointd& p) {
    auto v = project_tangent(p, gaussian(p.matrix().rows(), p.matrix().cols()));
    return (1.0 / norm(v)) * v;
  }

  SkewGeneratord generator(const FlagSignature& sig) {
    return project_m<double>(sig, gaussian(sig.ambient(), sig.ambient()));
  }

  Matrix symmetric(int n) { return random_symmetric(n, next_seed()); }

 private:
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

class Check {
 public:
  Check(std::string name, double tolerance) : name_(std::move(name)), tolerance_(tolerance) {}

  void record(double residual) {
    ++instances_;
    if (!(residual <= worst_)) worst_ = std::isnan(residual) ? std::numeric_limits<double>::infinity() : residual;
  }

  PropertyResult result() const { return {name_, worst_, tolerance_, instances_, worst_ <= tolerance_}; }

 private:
  std::string name_;
  double tolerance_;
  double worst_ = 0;
  int instances_ = 0;
};

double rel(double a, double b, double floor = 1.0) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor}); }

ObjectiveFunctiond objective(Sampler& s, const FlagSignature& sig, bool nonlinear) {
  const Matrix M = s.symmetric(sig.ambient());
  return nonlinear ? eigenflag_objective(M, sig) : principal_flag_objective(M, sig);
}

double value_along(const ObjectiveFunctiond& f, const Geodesicd& g, double t) { return f.value(g.frame_at(t).leftCols(g.signature().top())); }

// Left and right singular vectors of the velocity, used by the Grassmannian closed forms.
struct ThinSvd {
  Matrix U, V;
  Eigen::VectorXd sigma;
};

ThinSvd thin_svd(const Matrix& A) {
  Eigen::JacobiSVD<Matrix> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return {svd.matrixU(), svd.matrixV(), svd.singularValues()};
}

}  // namespace

PropertyReport run_property_suite(std::uint64_t seed, int instances) {
  PropertyReport report;
  std::uint64_t stream = 0;
  auto run = [&](Check check, const std::function<double(Sampler&, int)>& body) {
    Sampler s(trial_seed(seed, stream++));
    for (int i = 0; i < instances; ++i) check.record(body(s, i));
    report.results.push_back(check.result());
  };
  // One instance per check at the largest desk-scale ambient dimension.
  auto sig_for = [](Sampler& s, int i) {
    if (i == 0) return FlagSignature({3, 7, 12}, 60);
    return s.signature();
  };
  auto grass_for = [](Sampler& s, int i) {
    if (i == 0) return FlagSignature({12}, 60);
    return s.grassmannian();
  };

  run({"gradient vs geodesic finite differences", 1e-5}, [&](Sampler& s, int i) {
    const auto sig = sig_for(s, i);
    const auto f = objective(s, sig, i % 2 == 1);
    const auto p = with_completion(s.point(sig));
    const auto v = s.tangent(p);
    const Geodesicd g(v);
    const double h = 1e-5;
    const double fd = (value_along(f, g, h) - value_along(f, g, -h)) / (2 * h);
    const auto grad = riemannian_gradient(f, p);
    return rel(metric(grad, v), fd, norm(grad));
  });

  run({"hessian diagonal vs second finite differences", 1e-4}, [&](Sampler& s, int i) {
    const auto sig = sig_for(s, i);
    const auto f = objective(s, sig, i % 2 == 1);
    const auto p = with_completion(s.point(sig));
    const auto v = s.tangent(p);
    const Geodesicd g(v);
    const double h = 1e-3;
    const double f0 = value_along(f, g, 0);
    const double fd = (-value_along(f, g, 2 * h) + 16 * value_along(f, g, h) - 30 * f0 + 16 * value_along(f, g, -h) -
                       value_along(f, g, -2 * h)) /
                      (12 * h * h);
    return rel(hessian_form(f, p, v, v), fd);
  });

  run({"hessian symmetry and polarization", 1e-10}, [&](Sampler& s, int i) {
    const auto sig = sig_for(s, i);
    const auto f = objective(s, sig, i % 2 == 1);
    const auto p = s.point(sig);
    const auto u = s.tangent(p), v = s.tangent(p);
    const double huv = hessian_form(f, p, u, v), hvu = hessian_form(f, p, v, u);
    const double pol = polarize<double>([&](const TangentVectord& w) { return hessian_form(f, p, w, w); }, u, v);
    const double scale = std::max({1.0, std::abs(hessian_form(f, p, u, u)), std::abs(hessian_form(f, p, v, v))});
    return std::max(std::abs(huv - hvu), std::abs(huv - pol)) / scale;
  });

  run({"gradient is the metric dual of the differential", 1e-10}, [&](Sampler& s, int i) {
    const auto sig = sig_for(s, i);
    const auto f = objective(s, sig, i % 2 == 1);
    const auto p = s.point(sig);
    const auto v = s.tangent(p);
    const Matrix A = f.euclidean_gradient(p.matrix());
    const auto grad = riemannian_gradient(f, p);
    const double scale = std::max(1.0, A.norm());
    return std::max(rel(metric(grad, v), A.cwiseProduct(v.matrix()).sum(), scale),
                    tangency_residual(p, grad.matrix()) / scale);
  });

  run({"transport isometry", 1e-9}, [&](Sampler& s, int i) {
    const auto sig = sig_for(s, i);
    const auto p = with_completion(s.point(sig));
    const auto dir = s.tangent(p);
    const auto u = s.tangent(p), v = s.tangent(p);
    const Geodesicd g(dir);
    const double t = s.uniform(0.1, 3.0);
    const auto tu = transport(g, u, t), tv = transport(g, v, t);
    const double tangency = std::max(tangency_residual(tu.base(), tu.matrix()), tangency_residual(tv.base(), tv.matrix()));
    return std::max({std::abs(metric(tu, tv) - metric(u, v)), std::abs(norm(tu) - 1), tangency});
  });

  run({"geodesic orthonormality", 1e-12}, [&](Sampler& s, int i) {
    const auto sig = sig_for(s, i);
    const auto p = with_completion(s.point(sig));
    const Geodesicd g(s.tangent(p));
    const auto q = g.evaluate(s.uniform(0.1, 3.0));
    const Matrix& Y = q.matrix();
    return (Y.transpose() * Y - Matrix::Identity(Y.cols(), Y.cols())).norm();
  });

  run({"geodesic speed and velocity", 1e-10}, [&](Sampler& s, int i) {
    const auto sig = sig_for(s, i);
    const auto p = with_completion(s.point(sig));
    const auto v = s.tangent(p);
    const Geodesicd g(v);
    const double speed = arclength(g, 1.0);
    return std::max(std::abs(speed - 1), (g.initial_velocity().matrix() - v.matrix()).norm());
  });

  run({"coordinate round-trips", 1e-10}, [&](Sampler& s, int i) {
    const auto sig = sig_for(s, i);
    const auto p = s.point(sig);
    const auto v = s.tangent(p);
    const double proj = projector_distance(from_projection(to_projection(p)), p);
    const double red = projector_distance(from_reduced(to_reduced(p)), p);
    const auto back = tangent_from_projection_velocity(p, to_projection_velocity(v));
    const double vel = (back.matrix() - v.matrix()).norm() / v.matrix().norm();
    const double gen = (push(p, lift(v)).matrix() - v.matrix()).norm() / v.matrix().norm();
    return std::max({proj, red, vel, gen});
  });

  run({"projection velocities are tangent", 1e-10}, [&](Sampler& s, int i) {
    const auto sig = sig_for(s, i);
    const auto p = s.point(sig);
    const auto v = s.tangent(p);
    const auto P = to_projection(p);
    const auto R = to_reduced(p);
    const bool ok = check_tangent_projection_coords(P, to_projection_velocity(v), 1e-10) &&
                    check_tangent_reduced_coords(R, to_reduced_velocity(v), 1e-10);
    return ok ? 0.0 : 1.0;
  });

  run({"tangent projector idempotent and self-adjoint", 1e-12}, [&](Sampler& s, int i) {
    const auto sig = sig_for(s, i);
    const auto p = s.point(sig);
    const Matrix A = s.gaussian(sig.ambient(), sig.top()), C = s.gaussian(sig.ambient(), sig.top());
    const auto PA = project_tangent(p, A), PC = project_tangent(p, C);
    const double idem = (project_tangent(p, PA.matrix()).matrix() - PA.matrix()).norm() / A.norm();
    const double adj = std::abs(PA.matrix().cwiseProduct(C).sum() - A.cwiseProduct(PC.matrix()).sum()) / (A.norm() * C.norm());
    const double tan = tangency_residual(p, PA.matrix()) / A.norm();
    return std::max({idem, adj, tan});
  });

  run({"metric invariance under block rotations", 1e-12}, [&](Sampler& s, int i) {
    const auto sig = sig_for(s, i);
    const auto p = s.point(sig);
    const auto u = s.tangent(p), v = s.tangent(p);
    const Matrix K = random_block_orthogonal(sig, s.next_seed());
    const auto q = StiefelPointd::trusted(sig, p.matrix() * K);
    const auto uq = TangentVectord::trusted(q, u.matrix() * K), vq = TangentVectord::trusted(q, v.matrix() * K);
    return std::abs(metric(uq, vq) - metric(u, v));
  });

  run({"objective invariance under block rotations", 1e-12}, [&](Sampler& s, int i) {
    const auto sig = sig_for(s, i);
    const auto f = objective(s, sig, i % 2 == 1);
    const Matrix Y = s.point(sig).matrix();
    const Matrix K = random_block_orthogonal(sig, s.next_seed());
    const double f0 = f.value(Y);
    return std::abs(f.value(Y * K) - f0) / std::max(1.0, std::abs(f0));
  });

  run({"principal value bounded by the eigenvalue sum", 1e-10}, [&](Sampler& s, int i) {
    const auto sig = sig_for(s, i);
    const Matrix M = s.symmetric(sig.ambient());
    const auto f = principal_flag_objective(M, sig);
    const auto truth = true_principal_flag(M, sig);
    const double excess = f.value(s.point(sig).matrix()) - truth.value;
    const double at_truth = std::abs(f.value(truth.point.matrix()) - truth.value);
    return std::max(excess, at_truth) / std::max(1.0, std::abs(truth.value));
  });

  run({"exp_skew vs spectral geodesic", 1e-10}, [&](Sampler& s, int i) {
    const auto sig = sig_for(s, i);
    const auto B = s.generator(sig);
    const auto sf = spectral_form(B);
    const double t = s.uniform(0.0, 3.0);
    return std::max((exp_skew(B, t) - sf.exp(t)).norm(), (sf.reconstruct() - B.matrix()).norm() / B.matrix().norm());
  });

  run({"m is invariant under the isotropy group", 1e-12}, [&](Sampler& s, int i) {
    const auto sig = sig_for(s, i);
    const auto B = s.generator(sig), C = s.generator(sig);
    const Matrix H = random_block_orthogonal(sig, s.next_seed(), true);
    const Matrix HB = H * B.matrix() * H.transpose();
    const Matrix HC = H * C.matrix() * H.transpose();
    const double outside = (HB - project_m<double>(sig, HB).matrix()).norm() / B.matrix().norm();
    const double met = std::abs(0.5 * HB.cwiseProduct(HC).sum() - metric(B, C)) / (B.matrix().norm() * C.matrix().norm());
    return std::max(outside, met);
  });

  run({"bracket_m vanishes for d = 1", 0.0}, [&](Sampler& s, int i) {
    const auto sig = grass_for(s, i);
    return bracket_m(s.generator(sig), s.generator(sig)).matrix().norm();
  });

  run({"d = 1 gradient matches the Grassmannian formula", 1e-12}, [&](Sampler& s, int i) {
    const auto sig = grass_for(s, i);
    const auto f = objective(s, sig, i % 2 == 1);
    const auto p = s.point(sig);
    const Matrix& Y = p.matrix();
    const Matrix A = f.euclidean_gradient(Y);
    const Matrix expected = A - Y * (Y.transpose() * A);
    return (riemannian_gradient(f, p).matrix() - expected).norm() / std::max(1.0, A.norm());
  });

  run({"d = 1 geodesic matches the Grassmannian formula", 1e-12}, [&](Sampler& s, int i) {
    const auto sig = grass_for(s, i);
    const auto p = with_completion(s.point(sig));
    const auto v = s.tangent(p);
    const double t = s.uniform(0.1, 2.0);
    const auto [U, V, sigma] = thin_svd(v.matrix());
    const Eigen::ArrayXd th = t * sigma.array();
    const Matrix expected = p.matrix() * V * th.cos().matrix().asDiagonal() * V.transpose() +
                            U * th.sin().matrix().asDiagonal() * V.transpose();
    return (Geodesicd(v).evaluate(t).matrix() - expected).norm();
  });

  run({"d = 1 transport matches the Grassmannian formula", 1e-12}, [&](Sampler& s, int i) {
    const auto sig = grass_for(s, i);
    const auto p = with_completion(s.point(sig));
    const auto dir = s.tangent(p);
    const auto h = s.tangent(p);
    const double t = s.uniform(0.1, 2.0);
    const auto [U, V, sigma] = thin_svd(dir.matrix());
    const Eigen::ArrayXd th = t * sigma.array();
    const Matrix& Y = p.matrix();
    const Matrix expected = (-Y * V * th.sin().matrix().asDiagonal() * U.transpose() +
                             U * th.cos().matrix().asDiagonal() * U.transpose() +
                             Matrix::Identity(sig.ambient(), sig.ambient()) - U * U.transpose()) *
                            h.matrix();
    return (transport(Geodesicd(dir), h, t).matrix() - expected).norm();
  });

  run({"d = 1 hessian matches the Grassmannian formula", 1e-12}, [&](Sampler& s, int i) {
    const auto sig = grass_for(s, i);
    const auto f = objective(s, sig, false);
    const auto p = s.point(sig);
    const auto u = s.tangent(p), v = s.tangent(p);
    const Matrix& Y = p.matrix();
    const Matrix A = f.euclidean_gradient(Y);
    const double expected = f.euclidean_hessian(Y, u.matrix(), v.matrix()) -
                            (u.matrix().transpose() * v.matrix() * (Y.transpose() * A)).trace();
    return rel(hessian_form(f, p, u, v), expected, A.norm());
  });

  run({"d = 1 distance matches principal angles", 1e-8}, [&](Sampler& s, int i) {
    const auto sig = grass_for(s, i);
    const auto p = with_completion(s.point(sig));
    const Matrix Q = complete_basis(p).matrix();
    Matrix B = s.generator(sig).matrix();
    const double top = spectral_form(project_m<double>(sig, B)).lambdas.front();
    B *= s.uniform(0.05, 1.5) / top;
    const Matrix Qb = Q * exp_skew(project_m<double>(sig, B), 1.0);
    const int k = sig.top();
    // Principal angles from cosines and sines, paired by order: atan2 keeps small angles accurate.
    const Eigen::VectorXd c = thin_svd(Q.leftCols(k).transpose() * Qb.leftCols(k)).sigma;
    const Eigen::VectorXd sn = thin_svd(Q.rightCols(sig.ambient() - k).transpose() * Qb.leftCols(k)).sigma;
    std::vector<double> cosines(c.data(), c.data() + c.size());
    std::vector<double> sines(static_cast<std::size_t>(k) - static_cast<std::size_t>(sn.size()), 0.0);
    sines.insert(sines.end(), sn.data(), sn.data() + sn.size());
    std::sort(cosines.begin(), cosines.end(), std::greater<>());
    std::sort(sines.begin(), sines.end());
    double total = 0;
    for (std::size_t j = 0; j < cosines.size(); ++j) {
      const double theta = std::atan2(sines[j], cosines[j]);
      total += theta * theta;
    }
    const double expected = std::sqrt(total);
    const double got = distance(OrthogonalPointd(sig, Q), OrthogonalPointd(sig, Qb));
    const double sym = std::abs(got - distance(OrthogonalPointd(sig, Qb), OrthogonalPointd(sig, Q)));
    return std::max(std::abs(got - expected), sym);
  });

  {
    // Negative control: an unprojected ambient matrix must fail the tangency test.
    Sampler s(trial_seed(seed, stream++));
    int detected = 0;
    for (int i = 0; i < instances; ++i) {
      const auto sig = sig_for(s, i);
      const auto p = s.point(sig);
      const Matrix raw = s.gaussian(sig.ambient(), sig.top());
      if (tangency_residual(p, raw) > tolerance::kTangent * (1 + raw.norm())) ++detected;
    }
    const double missed = static_cast<double>(instances - detected);
    report.results.push_back({"negative control: corrupted tangent detected", missed, 0.0, instances, missed == 0});
  }
  return report;
}

}  // namespace flagopt::harness
