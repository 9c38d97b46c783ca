#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace flagopt;
using namespace flagopt::testing;
using Eigen::MatrixXd;

namespace {

const FlagSignature kSig({2, 3, 6}, 9);

}  // namespace

TEST(SkewGenerator, ValidatesStructure) {
  const FlagSignature sig({1}, 2);
  MatrixXd B(2, 2);
  B << 0, -1, 1, 0;
  EXPECT_NO_THROW(SkewGeneratord(sig, B));
  EXPECT_THROW(SkewGeneratord(sig, MatrixXd::Ones(2, 2)), std::invalid_argument);
  const FlagSignature three({1}, 3);
  MatrixXd inside = MatrixXd::Zero(3, 3);
  inside(1, 2) = 1;
  inside(2, 1) = -1;
  EXPECT_THROW(SkewGeneratord(three, inside), std::invalid_argument);
}

TEST(Lift, ZeroAndCircle) {
  const auto p = random_point(kSig, 1);
  EXPECT_EQ(lift(TangentVectord::zero(p)).matrix().norm(), 0.0);

  const FlagSignature circle({1}, 2);
  const StiefelPointd e1(circle, identity_columns(2, 1));
  const double theta = 0.7;
  const auto B = lift(TangentVectord(e1, theta * MatrixXd::Identity(2, 2).col(1)));
  MatrixXd expected(2, 2);
  expected << 0, -theta, theta, 0;
  // The completion of e1 is +-e2; the lift is expressed in that frame.
  const double sign = complete_basis(e1).matrix()(1, 1);
  EXPECT_LE((B.matrix() - sign * expected).norm(), 1e-15);
}

TEST(Lift, RejectsNonTangent) {
  const auto p = random_point(kSig, 2);
  EXPECT_THROW(lift(TangentVectord::trusted(p, p.matrix())), std::invalid_argument);
  EXPECT_THROW(TangentVectord(p, p.matrix()), std::invalid_argument);
}

TEST(PushLift, RoundTrips) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto p = with_completion(random_point(kSig, s));
    const auto v = random_tangent(p, 100 + s);
    EXPECT_LE((push(p, lift(v)).matrix() - v.matrix()).norm(), 1e-12 * v.matrix().norm());
    const auto B = random_generator(kSig, 200 + s);
    EXPECT_LE((lift(push(p, B)).matrix() - B.matrix()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE(tangency_residual(p, push(p, B).matrix()), 1e-12);
  }
}

TEST(Push, ZeroAndGrassmannian) {
  const auto p = random_point(kSig, 3);
  EXPECT_EQ(push(p, SkewGeneratord::zero(kSig)).matrix().norm(), 0.0);

  const FlagSignature grass({3}, 8);
  const auto q = with_completion(random_point(grass, 4));
  const auto B = random_generator(grass, 5);
  const auto v = push(q, B);
  EXPECT_LE((q.matrix().transpose() * v.matrix()).norm(), 1e-13);
  const MatrixXd expected = *q.completion() * B.matrix().bottomLeftCorner(5, 3);
  EXPECT_LE((v.matrix() - expected).norm(), 1e-13);
}

TEST(ProjectTangent, IdempotentAndAnnihilatesNormal) {
  const auto p = random_point(kSig, 6);
  const auto v = random_tangent(p, 7);
  EXPECT_LE((project_tangent(p, v.matrix()).matrix() - v.matrix()).norm(), 1e-12);
  const FlagSignature grass({2}, 6);
  const auto q = random_point(grass, 8);
  EXPECT_LE(project_tangent(q, q.matrix()).matrix().norm(), 1e-14);
  EXPECT_LE(project_tangent(p, p.matrix()).matrix().norm(), 1e-14);
}

TEST(ProjectTangent, ResidualIsMetricOrthogonal) {
  const auto p = random_point(kSig, 9);
  const MatrixXd A = gaussian(9, 6, 10);
  const auto residual = TangentVectord::trusted(p, A - project_tangent(p, A).matrix());
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto T = random_tangent(p, 300 + s);
    EXPECT_LE(std::abs(metric(residual, T)), 1e-10);
  }
}

TEST(ProjectTangent, SelfAdjoint) {
  const auto p = random_point(kSig, 11);
  for (std::uint64_t s = 0; s < 10; ++s) {
    const MatrixXd A = gaussian(9, 6, 400 + s), X = gaussian(9, 6, 500 + s);
    const double lhs = project_tangent(p, A).matrix().cwiseProduct(X).sum();
    const double rhs = A.cwiseProduct(project_tangent(p, X).matrix()).sum();
    EXPECT_NEAR(lhs, rhs, 1e-10);
  }
}

TEST(Metric, DefinitenessAndSingleBlock) {
  const auto p = random_point(kSig, 12);
  EXPECT_EQ(metric(TangentVectord::zero(p), TangentVectord::zero(p)), 0.0);
  EXPECT_GT(metric(random_tangent(p, 13), random_tangent(p, 13)), 0.0);

  const FlagSignature circle({1}, 2);
  MatrixXd B(2, 2);
  B << 0, -1, 1, 0;
  EXPECT_DOUBLE_EQ(metric(SkewGeneratord(circle, B), SkewGeneratord(circle, B)), 1.0);
}

TEST(Metric, TraceFormsAgree) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto B = random_generator(kSig, 600 + s), C = random_generator(kSig, 700 + s);
    double blocks = 0;
    for (int i = 0; i < kSig.num_blocks(); ++i)
      for (int j = i + 1; j < kSig.num_blocks(); ++j) blocks += B.block(i, j).cwiseProduct(C.block(i, j)).sum();
    EXPECT_NEAR(metric(B, C), blocks, 1e-12);

    const auto p = random_point(kSig, 800 + s);
    EXPECT_NEAR(metric(push(p, B), push(p, C)), metric(B, C), 1e-12);
  }
}

TEST(Metric, RejectsDifferentBases) {
  const auto u = random_tangent(random_point(kSig, 1), 2);
  const auto v = random_tangent(random_point(kSig, 3), 4);
  EXPECT_THROW(metric(u, v), std::invalid_argument);
}

TEST(Metric, RepresentativeIndependent) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto p = random_point(kSig, 900 + s);
    const auto u = random_tangent(p, 901 + s), v = random_tangent(p, 902 + s);
    const MatrixXd K = random_block_orthogonal(kSig, 903 + s);
    const auto q = StiefelPointd(kSig, p.matrix() * K);
    EXPECT_NEAR(metric(TangentVectord(q, u.matrix() * K), TangentVectord(q, v.matrix() * K)), metric(u, v), 1e-10);
  }
}

TEST(M, AdInvariant) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto B = random_generator(kSig, 1000 + s);
    const MatrixXd a = random_block_orthogonal(kSig, 1100 + s, true);
    const MatrixXd conj = a * B.matrix() * a.transpose();
    for (int i = 0; i < kSig.num_blocks(); ++i) {
      const int st = kSig.block_start(i), b = kSig.block_size(i);
      EXPECT_LE(conj.block(st, st, b, b).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(M, PushedBasisSpansTangentSpace) {
  const auto p = with_completion(random_point(kSig, 14));
  const MatrixXd Q = complete_basis(p).matrix();
  const auto basis = m_basis(kSig);
  ASSERT_EQ(static_cast<long>(basis.size()), dimension(kSig));
  MatrixXd stacked(9 * 6, basis.size());
  for (std::size_t c = 0; c < basis.size(); ++c) {
    const MatrixXd delta = basis_tangent(kSig, Q, basis[c]);
    stacked.col(static_cast<Eigen::Index>(c)) = Eigen::Map<const Eigen::VectorXd>(delta.data(), delta.size());
  }
  Eigen::FullPivLU<MatrixXd> lu(stacked);
  EXPECT_EQ(lu.rank(), dimension(kSig));

  // Each basis tangent has unit norm and they are mutually orthogonal.
  for (std::size_t c = 0; c < 5; ++c) {
    const auto e = TangentVectord(p, basis_tangent(kSig, Q, basis[c]));
    EXPECT_NEAR(metric(e, e), 1.0, 1e-14);
    const auto f = TangentVectord(p, basis_tangent(kSig, Q, basis[c + 1]));
    EXPECT_NEAR(metric(e, f), 0.0, 1e-14);
  }
}

TEST(ProjectionTangent, Checks) {
  const auto p = random_point(kSig, 15);
  const auto P = to_projection(p);
  std::vector<MatrixXd> zero(3, MatrixXd::Zero(9, 9));
  EXPECT_TRUE(check_tangent_projection_coords(P, zero));
  EXPECT_TRUE(check_tangent_projection_coords(P, to_projection_velocity(random_tangent(p, 16))));
  EXPECT_FALSE(check_tangent_projection_coords(P, P.projectors()));

  const auto R = to_reduced(p);
  EXPECT_TRUE(check_tangent_reduced_coords(R, to_reduced_velocity(random_tangent(p, 17))));
  EXPECT_FALSE(check_tangent_reduced_coords(R, R.projectors()));
}

TEST(ProjectionTangent, FromVelocity) {
  const auto p = random_point(kSig, 18);
  const auto P = to_projection(p);
  std::vector<MatrixXd> zero(3, MatrixXd::Zero(9, 9));
  EXPECT_EQ(tangent_from_projection_velocity(p, zero).matrix().norm(), 0.0);

  const FlagSignature circle({1}, 2);
  const ProjectionPointd P1(circle, {MatrixXd(Eigen::Vector2d(1, 0).asDiagonal())});
  MatrixXd Z(2, 2);
  Z << 0, 1, 1, 0;
  const auto v = tangent_from_projection_velocity(P1, {Z});
  const double sign = v.base().matrix()(0, 0);
  EXPECT_LE((v.matrix() - sign * Eigen::Vector2d(0, 1)).norm(), 1e-15);

  EXPECT_THROW(tangent_from_projection_velocity(P, P.projectors()), std::invalid_argument);
}

TEST(ProjectionTangent, RoundTripMatchesGeodesics) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto p = with_completion(random_point(kSig, 1200 + s));
    const auto v = random_tangent(p, 1300 + s);
    const auto back = tangent_from_projection_velocity(p, to_projection_velocity(v));
    EXPECT_LE((back.matrix() - v.matrix()).norm(), 1e-10);
    const auto a = Geodesicd(v).evaluate(0.1), b = Geodesicd(back).evaluate(0.1);
    EXPECT_TRUE(same_flag(a, b));
  }
}
