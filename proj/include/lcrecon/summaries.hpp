#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "lcrecon/sampler.hpp"

namespace lcrecon {

// Gaussian credible ellipse in ALR coordinates: points x with
// (x - center)^T covariance^-1 (x - center) <= radius_sq.
struct CredibleEllipse {
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  Eigen::Matrix2d covariance = Eigen::Matrix2d::Zero();
  double radius_sq = 0.0;

  bool contains(const Eigen::Vector2d& x) const;
  // Boundary points in ALR space.
  std::vector<Eigen::Vector2d> boundary(int n_points = 64) const;
  // Boundary mapped into the simplex through alr_inverse.
  std::vector<Eigen::Vector3d> boundary_simplex(int n_points = 64) const;
};

// chi^2_2 quantile: -2 log(1 - level).
double chi2_2_quantile(double level);

CredibleEllipse fit_credible_ellipse(std::span<const Eigen::Vector2d> points,
                                     double level = 0.95);

// Linear-interpolated empirical quantile (type 7).
double empirical_quantile(std::vector<double> values, double prob);

struct Interval {
  double mean = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};
Interval summarize_draws(const std::vector<double>& draws, double level = 0.95);

struct CellSummary {
  Eigen::Vector3d p_natural = Eigen::Vector3d::Zero();
  double p_human = 0.0;
  Eigen::Vector3d cover = Eigen::Vector3d::Zero();
  Interval p_human_interval;
  CredibleEllipse natural_region;  // fitted to (eta_L1, eta_L2)
  CredibleEllipse cover_region;    // fitted to alr(z)
};

struct PosteriorSummary {
  Index n_samples = 0;
  std::vector<CellSummary> cells;
  Interval alpha;
  Interval lambda;
  Interval kappa;
  Interval tau_eps;
  std::vector<Interval> eps;
  std::vector<Interval> beta;
  std::array<Interval, 6> sigma;  // (0,0) (1,1) (2,2) (0,1) (0,2) (1,2)
};

inline constexpr Index kMinSummarySamples = 100;

// Posterior means of p_L, p_H and z per cell, 95% intervals for p_H, credible
// ellipses for the compositions, and parameter intervals. Needs at least
// kMinSummarySamples post-burn-in samples.
PosteriorSummary posterior_summaries(const ChainOutput& chain, double level = 0.95);

}  // namespace lcrecon
