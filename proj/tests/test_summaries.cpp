#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "lcrecon/summaries.hpp"
#include "support.hpp"

using namespace lcrecon;
using namespace lcrecon::testing;

namespace {

Eigen::Vector2d gaussian2(const Eigen::Vector2d& mean, const Eigen::Matrix2d& chol, Rng& rng) {
  return mean + chol * Eigen::Vector2d(standard_normal(rng), standard_normal(rng));
}

}  // namespace

TEST_SUITE("summaries") {
  TEST_CASE("chi-square quantile") {
    CHECK(chi2_2_quantile(0.95) == doctest::Approx(5.991464547107979));
    CHECK(chi2_2_quantile(0.5) == doctest::Approx(2.0 * std::log(2.0)));
    CHECK_THROWS_AS(chi2_2_quantile(1.0), InvalidArgument);
  }

  TEST_CASE("empirical quantiles") {
    CHECK(empirical_quantile({1, 2, 3, 4, 5}, 0.5) == 3.0);
    CHECK(empirical_quantile({1, 2, 3, 4}, 0.5) == doctest::Approx(2.5));
    CHECK(empirical_quantile({4, 1, 3, 2}, 0.0) == 1.0);
    CHECK(empirical_quantile({4, 1, 3, 2}, 1.0) == 4.0);
    CHECK_THROWS_AS(empirical_quantile({}, 0.5), InvalidArgument);
    const auto iv = summarize_draws(std::vector<double>(50, 0.123));
    CHECK(iv.mean == 0.123);
    CHECK(iv.lower == 0.123);
    CHECK(iv.upper == 0.123);
  }

  TEST_CASE("fitted ellipse covers 95% of Gaussian draws") {
    Rng rng(1);
    const Eigen::Vector2d mean(0.4, -1.1);
    Eigen::Matrix2d cov;
    cov << 0.8, 0.3, 0.3, 0.5;
    const Eigen::Matrix2d chol = cov.llt().matrixL();
    std::vector<Eigen::Vector2d> fit(100000);
    for (auto& x : fit) x = gaussian2(mean, chol, rng);
    const CredibleEllipse e = fit_credible_ellipse(fit, 0.95);
    CHECK((e.center - mean).norm() < 0.02);
    CHECK((e.covariance - cov).norm() < 0.03);
    int inside = 0;
    for (const auto& x : fit) inside += e.contains(x);
    CHECK(inside / 100000.0 == doctest::Approx(0.95).epsilon(0.0105));
    int fresh = 0;
    for (int i = 0; i < 100000; ++i) fresh += e.contains(gaussian2(mean, chol, rng));
    CHECK(std::abs(fresh / 100000.0 - 0.95) < 0.01);
  }

  TEST_CASE("identical samples give a zero-area ellipse") {
    const std::vector<Eigen::Vector2d> pts(200, Eigen::Vector2d(0.3, -0.2));
    const CredibleEllipse e = fit_credible_ellipse(pts);
    CHECK(e.covariance.norm() == 0.0);
    CHECK(e.contains(Eigen::Vector2d(0.3, -0.2)));
    CHECK_FALSE(e.contains(Eigen::Vector2d(0.3 + 1e-6, -0.2)));
    for (const auto& b : e.boundary(16)) CHECK((b - Eigen::Vector2d(0.3, -0.2)).norm() == 0.0);
    CHECK_THROWS_AS(fit_credible_ellipse(std::vector<Eigen::Vector2d>{}), InvalidArgument);
  }

  TEST_CASE("collinear samples give a segment") {
    std::vector<Eigen::Vector2d> pts;
    for (int i = 0; i < 100; ++i) pts.emplace_back(0.01 * i, 0.02 * i);
    const CredibleEllipse e = fit_credible_ellipse(pts);
    CHECK(e.contains(e.center));
    CHECK(e.contains(e.center + Eigen::Vector2d(0.1, 0.2)));
    CHECK_FALSE(e.contains(e.center + Eigen::Vector2d(0.1, -0.2)));
  }

  TEST_CASE("boundary mapped into the simplex stays inside") {
    Rng rng(2);
    for (int trial = 0; trial < 1000; ++trial) {
      CredibleEllipse e;
      e.center = Eigen::Vector2d(3.0 * standard_normal(rng), 3.0 * standard_normal(rng));
      Eigen::Matrix2d a;
      a << standard_normal(rng), standard_normal(rng), standard_normal(rng), standard_normal(rng);
      e.covariance = a * a.transpose() * (0.1 + 4.0 * uniform01(rng));
      e.radius_sq = chi2_2_quantile(0.95);
      for (const auto& p : e.boundary_simplex(32)) {
        CHECK((p.array() > 0.0).all());
        CHECK(std::abs(p.sum() - 1.0) < 1e-12);
      }
    }
  }

  TEST_CASE("posterior summaries of a constant chain") {
    const ModelDesign design = small_design(3, 4, 2);
    Rng rng(3);
    const LatentState latent = random_latent(design, rng);
    HyperState hyper = initial_hyper_state(design);
    hyper.kappa = 0.7;
    const ChainOutput chain = constant_chain(design, latent, hyper);
    const PosteriorSummary s = posterior_summaries(chain);
    CHECK(s.n_samples == 120);
    REQUIRE(s.cells.size() == 12);
    for (Index c = 0; c < 12; ++c) {
      const auto j = link_jacobians<double>(latent.eta.col(c));
      const auto& cs = s.cells[static_cast<std::size_t>(c)];
      CHECK((cs.p_natural - j.p_natural).norm() < 1e-14);
      CHECK((cs.cover - j.cover).norm() < 1e-14);
      CHECK(cs.p_human_interval.lower == cs.p_human);
      CHECK(cs.p_human_interval.upper == cs.p_human);
      CHECK(cs.natural_region.covariance.norm() == 0.0);
    }
    CHECK(s.kappa.mean == 0.7);
    CHECK(s.alpha.lower == s.alpha.upper);
    CHECK(s.eps.size() == 2);
    CHECK(s.beta.size() == static_cast<std::size_t>(design.n_beta()));

    const ChainOutput short_chain = constant_chain(design, latent, hyper, 99);
    CHECK_THROWS_AS(posterior_summaries(short_chain), InvalidArgument);
  }
}
