#include "lcrecon/summaries.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "lcrecon/error.hpp"
#include "lcrecon/transforms.hpp"

namespace lcrecon {

double chi2_2_quantile(double level) {
  if (!(level > 0.0 && level < 1.0)) throw InvalidArgument("credible level must lie in (0, 1)");
  return -2.0 * std::log1p(-level);
}

bool CredibleEllipse::contains(const Eigen::Vector2d& x) const {
  const Eigen::Vector2d d = x - center;
  // Eigen-decomposition handles degenerate (rank-deficient) regions.
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(covariance);
  const double tol = 1e-14 * std::max(1.0, covariance.cwiseAbs().maxCoeff());
  double m = 0.0;
  for (int i = 0; i < 2; ++i) {
    const double proj = es.eigenvectors().col(i).dot(d);
    const double ev = es.eigenvalues()(i);
    if (ev <= tol) {
      if (std::abs(proj) > 1e-12) return false;
    } else {
      m += proj * proj / ev;
    }
  }
  return m <= radius_sq;
}

std::vector<Eigen::Vector2d> CredibleEllipse::boundary(int n_points) const {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(covariance);
  const Eigen::Vector2d axes = es.eigenvalues().cwiseMax(0.0).cwiseSqrt() * std::sqrt(radius_sq);
  std::vector<Eigen::Vector2d> pts;
  pts.reserve(static_cast<std::size_t>(n_points));
  for (int i = 0; i < n_points; ++i) {
    const double t = 2.0 * std::numbers::pi * i / n_points;
    pts.push_back(center + es.eigenvectors() *
                               Eigen::Vector2d(axes(0) * std::cos(t), axes(1) * std::sin(t)));
  }
  return pts;
}

std::vector<Eigen::Vector3d> CredibleEllipse::boundary_simplex(int n_points) const {
  std::vector<Eigen::Vector3d> out;
  for (const auto& p : boundary(n_points)) out.push_back(alr_inverse(p(0), p(1)));
  return out;
}

CredibleEllipse fit_credible_ellipse(std::span<const Eigen::Vector2d> points, double level) {
  if (points.empty()) throw InvalidArgument("fit_credible_ellipse: no points");
  // Moments of the points shifted by the first one: identical points give an
  // exactly zero covariance and a centre equal to that point.
  const Eigen::Vector2d origin = points.front();
  Eigen::Vector2d shift = Eigen::Vector2d::Zero();
  for (const auto& p : points) shift += p - origin;
  shift /= static_cast<double>(points.size());
  CredibleEllipse e;
  e.center = origin + shift;
  if (points.size() > 1) {
    for (const auto& p : points) {
      const Eigen::Vector2d d = (p - origin) - shift;
      e.covariance += d * d.transpose();
    }
    e.covariance /= static_cast<double>(points.size() - 1);
  }
  e.radius_sq = chi2_2_quantile(level);
  return e;
}

double empirical_quantile(std::vector<double> values, double prob) {
  if (values.empty()) throw InvalidArgument("empirical_quantile: no values");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  // Exact for constant draws.
  if (values[lo] == values[hi]) return values[lo];
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

Interval summarize_draws(const std::vector<double>& draws, double level) {
  Interval iv;
  double acc = 0.0;
  for (double d : draws) acc += d;
  iv.mean = acc / static_cast<double>(draws.size());
  const double tail = 0.5 * (1.0 - level);
  iv.lower = empirical_quantile(draws, tail);
  iv.upper = empirical_quantile(draws, 1.0 - tail);
  // Constant chains: keep all three bit-identical.
  if (std::all_of(draws.begin(), draws.end(), [&](double d) { return d == draws.front(); })) {
    iv.mean = iv.lower = iv.upper = draws.front();
  }
  return iv;
}

PosteriorSummary posterior_summaries(const ChainOutput& chain, double level) {
  const auto draws = chain.posterior_samples();
  if (static_cast<Index>(draws.size()) < kMinSummarySamples) {
    throw InvalidArgument("posterior_summaries: need at least 100 post-burn-in samples, have " +
                          std::to_string(draws.size()));
  }
  const Index n = chain.n_rows * chain.n_cols;
  const std::size_t m = draws.size();
  PosteriorSummary out;
  out.n_samples = static_cast<Index>(m);
  out.cells.resize(static_cast<std::size_t>(n));

  std::vector<double> ph(m);
  std::vector<Eigen::Vector2d> natural(m);
  std::vector<Eigen::Vector2d> cover(m);
  for (Index s = 0; s < n; ++s) {
    CellSummary& cs = out.cells[static_cast<std::size_t>(s)];
    for (std::size_t i = 0; i < m; ++i) {
      const auto& eta = draws[i]->latent.eta;
      const auto jac = link_jacobians<double>(eta.col(s));
      cs.p_natural += jac.p_natural;
      cs.cover += jac.cover;
      ph[i] = jac.p_human;
      natural[i] = Eigen::Vector2d(eta(kEtaL1, s), eta(kEtaL2, s));
      const Eigen::Vector3d z = jac.cover.unaryExpr([](double v) { return clamp_interior(v); });
      cover[i] = alr_forward<double>(z);
    }
    cs.p_natural /= static_cast<double>(m);
    cs.cover /= static_cast<double>(m);
    cs.p_human_interval = summarize_draws(ph, level);
    cs.p_human = cs.p_human_interval.mean;
    cs.natural_region = fit_credible_ellipse(natural, level);
    cs.cover_region = fit_credible_ellipse(cover, level);
  }

  auto scalar = [&](auto getter) {
    std::vector<double> v(m);
    for (std::size_t i = 0; i < m; ++i) v[i] = getter(*draws[i]);
    return summarize_draws(v, level);
  };
  out.alpha = scalar([](const ChainSample& s) { return std::exp(s.latent.log_alpha); });
  out.lambda = scalar([](const ChainSample& s) { return std::exp(s.latent.log_lambda); });
  out.kappa = scalar([](const ChainSample& s) { return s.hyper.kappa; });
  out.tau_eps = scalar([](const ChainSample& s) { return s.hyper.tau_eps; });
  for (Index k = 0; k < draws.front()->latent.eps.size(); ++k) {
    out.eps.push_back(scalar([k](const ChainSample& s) { return s.latent.eps(k); }));
  }
  for (Index j = 0; j < draws.front()->latent.beta.size(); ++j) {
    out.beta.push_back(scalar([j](const ChainSample& s) { return s.latent.beta(j); }));
  }
  const std::array<std::pair<int, int>, 6> entries{
      {{0, 0}, {1, 1}, {2, 2}, {0, 1}, {0, 2}, {1, 2}}};
  for (std::size_t e = 0; e < entries.size(); ++e) {
    const auto [r, c] = entries[e];
    out.sigma[e] = scalar([r = r, c = c](const ChainSample& s) { return s.hyper.sigma(r, c); });
  }
  return out;
}

}  // namespace lcrecon
