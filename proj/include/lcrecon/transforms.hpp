#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "lcrecon/error.hpp"

namespace lcrecon {

// Composition (C, B, U) on the open 3-simplex.
template <typename Scalar>
using Composition3 = Eigen::Matrix<Scalar, 3, 1>;

// Latent link coordinates (eta_L1, eta_L2, eta_H) at one cell.
template <typename Scalar>
using LinkVector = Eigen::Matrix<Scalar, 3, 1>;

inline constexpr double kLinkClamp = 1e-12;

// Maps onto [kLinkClamp, 1 - kLinkClamp] before proportions enter a log-density.
template <typename Scalar>
Scalar clamp_interior(Scalar p) {
  return std::clamp(p, Scalar(kLinkClamp), Scalar(1.0 - kLinkClamp));
}

template <typename Scalar>
bool is_interior(const Composition3<Scalar>& p, Scalar tol = Scalar(1e-12)) {
  return (p.array() > Scalar(0)).all() && (p.array() < Scalar(1)).all() &&
         std::abs(p.sum() - Scalar(1)) <= tol;
}

// Inverse additive log-ratio with p_U as reference. Shifted by the largest
// exponent so nothing overflows.
template <typename Scalar>
Composition3<Scalar> alr_inverse(Scalar eta1, Scalar eta2) {
  using std::exp;
  if (!std::isfinite(eta1) || !std::isfinite(eta2)) {
    throw InvalidArgument("alr_inverse: non-finite input");
  }
  const Scalar m = std::max({eta1, eta2, Scalar(0)});
  const Scalar e1 = exp(eta1 - m);
  const Scalar e2 = exp(eta2 - m);
  const Scalar eu = exp(-m);
  const Scalar total = e1 + e2 + eu;
  return Composition3<Scalar>(e1 / total, e2 / total, eu / total);
}

template <typename Scalar>
Eigen::Matrix<Scalar, 2, 1> alr_forward(const Composition3<Scalar>& p) {
  using std::log;
  if (!((p.array() > Scalar(0)).all())) {
    throw InvalidArgument("alr_forward: composition must be strictly positive");
  }
  return {log(p(0) / p(2)), log(p(1) / p(2))};
}

template <typename Scalar>
Scalar logit(Scalar p) {
  if (!(p > Scalar(0) && p < Scalar(1))) {
    throw InvalidArgument("logit: argument must lie in (0, 1)");
  }
  return std::log(p / (Scalar(1) - p));
}

// Logistic function; strictly positive for any finite input above about -745.
template <typename Scalar>
Scalar logit_inverse(Scalar eta) {
  using std::exp;
  if (eta >= Scalar(0)) return Scalar(1) / (Scalar(1) + exp(-eta));
  const Scalar e = exp(eta);
  return e / (Scalar(1) + e);
}

// Natural cover p_L with a share p_H replaced by open land:
// z = (p_C (1-p_H), p_B (1-p_H), p_U (1-p_H) + p_H).
template <typename Scalar>
Composition3<Scalar> decompose_cover(const Composition3<Scalar>& p_natural,
                                     Scalar p_human) {
  if (!(p_human >= Scalar(0) && p_human <= Scalar(1))) {
    throw InvalidArgument("decompose_cover: p_H must lie in [0, 1]");
  }
  const Scalar keep = Scalar(1) - p_human;
  return {p_natural(0) * keep, p_natural(1) * keep, p_natural(2) * keep + p_human};
}

// Derivatives of the link layer at one cell.
template <typename Scalar>
struct LinkJacobians {
  Composition3<Scalar> p_natural;
  Scalar p_human{};
  Composition3<Scalar> cover;
  Eigen::Matrix<Scalar, 3, 2> d_natural;  // d p_L / d (eta_L1, eta_L2)
  Scalar d_human{};                       // d p_H / d eta_H
  Eigen::Matrix<Scalar, 3, 3> d_cover;    // d z / d (eta_L1, eta_L2, eta_H)
};

template <typename Scalar>
LinkJacobians<Scalar> link_jacobians(const LinkVector<Scalar>& eta) {
  LinkJacobians<Scalar> j;
  j.p_natural = alr_inverse(eta(0), eta(1));
  j.p_human = logit_inverse(eta(2));
  j.cover = decompose_cover(j.p_natural, j.p_human);

  const auto& p = j.p_natural;
  // softmax over (eta1, eta2, 0): dp_i/deta_j = p_i (delta_ij - p_j)
  for (int i = 0; i < 3; ++i) {
    for (int k = 0; k < 2; ++k) {
      j.d_natural(i, k) = p(i) * ((i == k ? Scalar(1) : Scalar(0)) - p(k));
    }
  }
  j.d_human = j.p_human * (Scalar(1) - j.p_human);

  const Scalar keep = Scalar(1) - j.p_human;
  j.d_cover.template leftCols<2>() = keep * j.d_natural;
  j.d_cover(0, 2) = -p(0) * j.d_human;
  j.d_cover(1, 2) = -p(1) * j.d_human;
  j.d_cover(2, 2) = (Scalar(1) - p(2)) * j.d_human;
  return j;
}

// Centred log-ratio.
template <typename Scalar>
Composition3<Scalar> clr(const Composition3<Scalar>& p) {
  const Composition3<Scalar> logs = p.array().log().matrix();
  return logs.array() - logs.mean();
}

}  // namespace lcrecon
