#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <random>

namespace lcrecon {

// Engine state is the only RNG state: distributions are constructed per draw,
// so serialising the engine captures the chain exactly.
using Rng = std::mt19937_64;

inline double standard_normal(Rng& rng) {
  return std::normal_distribution<double>(0.0, 1.0)(rng);
}

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline Eigen::VectorXd standard_normal_vector(Eigen::Index n, Rng& rng) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = standard_normal(rng);
  return v;
}

inline double gamma_shape_rate(double shape, double rate, Rng& rng) {
  return std::gamma_distribution<double>(shape, 1.0 / rate)(rng);
}

// X ~ InvGamma(shape, scale) with density proportional to x^{-shape-1} e^{-scale/x}.
inline double inv_gamma(double shape, double scale, Rng& rng) {
  return 1.0 / gamma_shape_rate(shape, scale, rng);
}

inline double beta_draw(double a, double b, Rng& rng) {
  const double x = gamma_shape_rate(a, 1.0, rng);
  const double y = gamma_shape_rate(b, 1.0, rng);
  return x / (x + y);
}

template <int N>
Eigen::Matrix<double, N, 1> dirichlet_draw(const Eigen::Matrix<double, N, 1>& shape,
                                           Rng& rng) {
  Eigen::Matrix<double, N, 1> g(shape.size());
  for (Eigen::Index i = 0; i < shape.size(); ++i) g(i) = gamma_shape_rate(shape(i), 1.0, rng);
  return g / g.sum();
}

// |C(0, 1)|
inline double half_cauchy(Rng& rng) {
  return std::abs(std::cauchy_distribution<double>(0.0, 1.0)(rng));
}

// Sigma ~ IW(scale, df) via the Bartlett decomposition of Sigma^-1 ~ W(scale^-1, df).
template <int D>
Eigen::Matrix<double, D, D> inverse_wishart(const Eigen::Matrix<double, D, D>& scale,
                                            double df, Rng& rng) {
  using Mat = Eigen::Matrix<double, D, D>;
  const Eigen::Index d = scale.rows();
  const Mat scale_inv = scale.llt().solve(Mat::Identity(d, d));
  const Mat l = scale_inv.llt().matrixL();
  Mat a = Mat::Zero(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    a(i, i) = std::sqrt(std::chi_squared_distribution<double>(df - static_cast<double>(i))(rng));
    for (Eigen::Index j = 0; j < i; ++j) a(i, j) = standard_normal(rng);
  }
  // W = (L A)(L A)^T, Sigma = W^-1 = (L A)^-T (L A)^-1
  const Mat la = l * a;
  const Mat la_inv = la.template triangularView<Eigen::Lower>().solve(Mat::Identity(d, d));
  Mat sigma = la_inv.transpose() * la_inv;
  return 0.5 * (sigma + sigma.transpose());
}

}  // namespace lcrecon
