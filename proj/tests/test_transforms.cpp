#include <doctest.h>

#include <cmath>

#include "lcrecon/random.hpp"
#include "lcrecon/transforms.hpp"
#include "support.hpp"

using namespace lcrecon;
using lcrecon::testing::random_composition;

TEST_SUITE("transforms") {
  TEST_CASE("inverse ALR") {
    const auto centre = alr_inverse(0.0, 0.0);
    for (int i = 0; i < 3; ++i) CHECK(centre(i) == doctest::Approx(1.0 / 3.0));

    const auto p = alr_inverse(std::log(2.0), 0.0);
    CHECK(p(0) == doctest::Approx(0.5));
    CHECK(p(1) == doctest::Approx(0.25));
    CHECK(p(2) == doctest::Approx(0.25));

    const auto extreme = alr_inverse(700.0, 0.0);
    CHECK(extreme.allFinite());
    CHECK(extreme(0) == doctest::Approx(1.0));
    CHECK(extreme(1) > 0.0);
    CHECK(extreme(2) > 0.0);
    CHECK_THROWS_AS(alr_inverse(std::nan(""), 0.0), InvalidArgument);
  }

  TEST_CASE("forward ALR and round trips") {
    const auto z = alr_forward(Eigen::Vector3d(1.0 / 3, 1.0 / 3, 1.0 / 3));
    CHECK(std::abs(z(0)) < 1e-15);
    CHECK(std::abs(z(1)) < 1e-15);
    const auto h = alr_forward(Eigen::Vector3d(0.5, 0.25, 0.25));
    CHECK(h(0) == doctest::Approx(0.6931471805599453));
    CHECK(std::abs(h(1)) < 1e-15);
    CHECK_THROWS_AS(alr_forward(Eigen::Vector3d(0.5, 0.5, 0.0)), InvalidArgument);

    Rng rng(1);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
      const Eigen::Vector3d p = random_composition(rng);
      const auto e = alr_forward(p);
      worst = std::max(worst, (alr_inverse(e(0), e(1)) - p).cwiseAbs().maxCoeff());
    }
    CHECK(worst < 1e-12);
  }

  TEST_CASE("logit and its inverse") {
    CHECK(logit(0.5) == 0.0);
    CHECK(logit_inverse(0.0) == 0.5);
    const double tiny = logit_inverse(-700.0);
    CHECK(tiny > 0.0);
    CHECK(tiny <= 1e-300);
    CHECK(logit_inverse(700.0) == 1.0);
    CHECK_THROWS_AS(logit(0.0), InvalidArgument);
    CHECK_THROWS_AS(logit(1.0), InvalidArgument);
    double worst = 0.0;
    for (double x = -30.0; x <= 30.0; x += 0.01) {
      worst = std::max(worst, std::abs(logit(logit_inverse(x)) - x));
    }
    // logit_inverse(30) = 1 - 9.4e-14; the round trip is limited by that spacing.
    CHECK(worst < 1e-2);
    double worst_moderate = 0.0;
    for (double x = -20.0; x <= 20.0; x += 0.01) {
      worst_moderate = std::max(worst_moderate, std::abs(logit(logit_inverse(x)) - x));
    }
    CHECK(worst_moderate < 1e-6);
    double worst_central = 0.0;
    for (double x = -10.0; x <= 10.0; x += 0.01) {
      worst_central = std::max(worst_central, std::abs(logit(logit_inverse(x)) - x));
    }
    CHECK(worst_central < 1e-10);
  }

  TEST_CASE("cover decomposition") {
    const Eigen::Vector3d pl(0.6, 0.3, 0.1);
    CHECK((decompose_cover(pl, 0.0) - pl).norm() == 0.0);
    const auto z = decompose_cover(pl, 0.5);
    CHECK(z(0) == doctest::Approx(0.30));
    CHECK(z(1) == doctest::Approx(0.15));
    CHECK(z(2) == doctest::Approx(0.55));
    const auto full = decompose_cover(pl, 1.0);
    CHECK((full - Eigen::Vector3d(0, 0, 1)).norm() < 1e-15);
    CHECK(decompose_cover(pl, 0.37).sum() == doctest::Approx(1.0));
    CHECK_THROWS_AS(decompose_cover(pl, 1.5), InvalidArgument);

    // p_U grows and p_C, p_B shrink monotonically in p_H.
    Eigen::Vector3d prev = decompose_cover(pl, 0.0);
    for (double ph = 0.05; ph <= 1.0; ph += 0.05) {
      const auto cur = decompose_cover(pl, ph);
      CHECK(cur(0) < prev(0));
      CHECK(cur(1) < prev(1));
      CHECK(cur(2) > prev(2));
      prev = cur;
    }
  }

  TEST_CASE("link Jacobians") {
    const auto j0 = link_jacobians<double>(LinkVector<double>::Zero());
    CHECK(j0.d_human == doctest::Approx(0.25));
    CHECK(j0.d_natural(0, 0) == doctest::Approx(2.0 / 9.0));

    Rng rng(4);
    const double h = 1e-6;
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      LinkVector<double> eta(2.0 * standard_normal(rng), 2.0 * standard_normal(rng),
                             2.0 * standard_normal(rng));
      const auto j = link_jacobians(eta);
      for (int k = 0; k < 3; ++k) {
        LinkVector<double> up = eta, down = eta;
        up(k) += h;
        down(k) -= h;
        const auto ju = link_jacobians(up);
        const auto jd = link_jacobians(down);
        const Eigen::Vector3d dz = (ju.cover - jd.cover) / (2 * h);
        worst = std::max(worst, (dz - j.d_cover.col(k)).cwiseAbs().maxCoeff());
        if (k < 2) {
          const Eigen::Vector3d dp = (ju.p_natural - jd.p_natural) / (2 * h);
          worst = std::max(worst, (dp - j.d_natural.col(k)).cwiseAbs().maxCoeff());
        } else {
          worst = std::max(worst, std::abs((ju.p_human - jd.p_human) / (2 * h) - j.d_human));
        }
      }
    }
    CHECK(worst < 1e-6);
  }

  TEST_CASE("centred log-ratio") {
    const auto c = clr(Eigen::Vector3d(0.5, 0.25, 0.25));
    CHECK(c.sum() == doctest::Approx(0.0));
    CHECK(c(0) - c(1) == doctest::Approx(std::log(2.0)));
  }
}
