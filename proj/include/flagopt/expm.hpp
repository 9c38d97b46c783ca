#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>

#include "flagopt/coords.hpp"

namespace flagopt {

namespace detail {

// Diagonal Pade approximants r_m(A) = (V - U)^{-1} (V + U); theta_m is the
// largest 1-norm for which r_m meets double-precision backward error.
inline constexpr std::array<double, 4> kB3 = {120., 60., 12., 1.};
inline constexpr std::array<double, 6> kB5 = {30240., 15120., 3360., 420., 30., 1.};
inline constexpr std::array<double, 8> kB7 = {17297280., 8648640., 1995840., 277200., 25200., 1512., 56., 1.};
inline constexpr std::array<double, 10> kB9 = {17643225600., 8821612800., 2075673600., 302702400., 30270240.,
                                               2162160.,     110880.,     3960.,       90.,        1.};
inline constexpr std::array<double, 14> kB13 = {
    64764752532480000., 32382376266240000., 7771770303897600., 1187353796428800., 129060195264000.,
    10559470521600.,    670442572800.,      33522128640.,      1323241920.,       40840800.,
    960960.,            16380.,             182.,              1.};
inline constexpr std::array<double, 4> kTheta = {1.495585217958292e-2, 2.539398330063230e-1, 9.504178996162932e-1,
                                                 2.097847961257068e0};
inline constexpr double kTheta13 = 5.371920351148152;

template <typename Scalar, std::size_t N>
MatrixX<Scalar> pade_low(const MatrixX<Scalar>& A, const std::array<double, N>& b) {
  const auto n = A.rows();
  const MatrixX<Scalar> I = MatrixX<Scalar>::Identity(n, n);
  const MatrixX<Scalar> A2 = A * A;
  MatrixX<Scalar> power = I;
  MatrixX<Scalar> U = Scalar(b[1]) * I;
  MatrixX<Scalar> V = Scalar(b[0]) * I;
  for (std::size_t k = 2; k + 1 < N + 1; k += 2) {
    power = power * A2;
    V += Scalar(b[k]) * power;
    if (k + 1 < N) U += Scalar(b[k + 1]) * power;
  }
  U = A * U;
  return (V - U).partialPivLu().solve(V + U);
}

template <typename Scalar>
MatrixX<Scalar> pade13(const MatrixX<Scalar>& A) {
  const auto& b = kB13;
  const auto n = A.rows();
  const MatrixX<Scalar> I = MatrixX<Scalar>::Identity(n, n);
  const MatrixX<Scalar> A2 = A * A;
  const MatrixX<Scalar> A4 = A2 * A2;
  const MatrixX<Scalar> A6 = A4 * A2;
  const MatrixX<Scalar> inner_u = Scalar(b[13]) * A6 + Scalar(b[11]) * A4 + Scalar(b[9]) * A2;
  const MatrixX<Scalar> U =
      A * (A6 * inner_u + Scalar(b[7]) * A6 + Scalar(b[5]) * A4 + Scalar(b[3]) * A2 + Scalar(b[1]) * I);
  const MatrixX<Scalar> inner_v = Scalar(b[12]) * A6 + Scalar(b[10]) * A4 + Scalar(b[8]) * A2;
  const MatrixX<Scalar> V = A6 * inner_v + Scalar(b[6]) * A6 + Scalar(b[4]) * A4 + Scalar(b[2]) * A2 + Scalar(b[0]) * I;
  return (V - U).partialPivLu().solve(V + U);
}

}  // namespace detail

/**
 * @brief Matrix exponential by scaling and squaring with diagonal Pade
 * approximants of degree 3, 5, 7, 9 or 13 (chosen by the 1-norm).
 *
 * Diagonal Pade approximants satisfy r(-A) = r(A)^{-1}, so skew-symmetric
 * input yields an orthogonal result up to rounding.
 */
template <typename Derived>
MatrixX<typename Derived::Scalar> expm(const Eigen::MatrixBase<Derived>& A_in) {
  using Scalar = typename Derived::Scalar;
  const MatrixX<Scalar> A = A_in;
  const auto n = A.rows();
  if (A.isZero(0)) return MatrixX<Scalar>::Identity(n, n);
  const double norm1 = static_cast<double>(A.cwiseAbs().colwise().sum().maxCoeff());
  if (norm1 <= detail::kTheta[0]) return detail::pade_low(A, detail::kB3);
  if (norm1 <= detail::kTheta[1]) return detail::pade_low(A, detail::kB5);
  if (norm1 <= detail::kTheta[2]) return detail::pade_low(A, detail::kB7);
  if (norm1 <= detail::kTheta[3]) return detail::pade_low(A, detail::kB9);
  const int s = std::max(0, static_cast<int>(std::ceil(std::log2(norm1 / detail::kTheta13))));
  MatrixX<Scalar> R = detail::pade13<Scalar>(A / Scalar(std::ldexp(1.0, s)));
  for (int i = 0; i < s; ++i) R = (R * R).eval();
  return R;
}

}  // namespace flagopt
