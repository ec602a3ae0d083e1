#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <algorithm>
#include <set>

#include "lcrecon/synthetic.hpp"
#include "lcrecon/validation.hpp"
#include "support.hpp"

using namespace lcrecon;
using namespace lcrecon::testing;

namespace {

double aitchison(const Eigen::Vector3d& x, const Eigen::Vector3d& y) {
  const std::array<Eigen::Vector3d, 1> a{x}, b{y};
  return acd(a, b);
}

}  // namespace

TEST_SUITE("validation") {
  TEST_CASE("average compositional distance") {
    const std::vector<Eigen::Vector3d> x = {{0.5, 0.25, 0.25}, {0.2, 0.3, 0.5}};
    CHECK(acd(x, x) == 0.0);
    CHECK(aitchison({0.5, 0.25, 0.25}, {0.25, 0.5, 0.25}) ==
          doctest::Approx(std::sqrt(2.0) * std::log(2.0)));
    CHECK(aitchison({0.5, 0.25, 0.25}, {0.25, 0.5, 0.25}) == doctest::Approx(0.9803).epsilon(1e-4));
    // Permuting components in both arguments leaves the distance alone.
    CHECK(aitchison({0.6, 0.3, 0.1}, {0.2, 0.2, 0.6}) ==
          doctest::Approx(aitchison({0.1, 0.6, 0.3}, {0.6, 0.2, 0.2})));
    const std::vector<Eigen::Vector3d> y = {{0.25, 0.5, 0.25}, {0.2, 0.3, 0.5}};
    CHECK(acd(x, y) == doctest::Approx(0.5 * std::sqrt(2.0) * std::log(2.0)));
    CHECK_THROWS_AS(acd(x, std::vector<Eigen::Vector3d>{x[0]}), InvalidArgument);
    CHECK_THROWS_AS(acd(std::vector<Eigen::Vector3d>{}, std::vector<Eigen::Vector3d>{}), InvalidArgument);
    CHECK_THROWS_AS(aitchison({1.0, 0.0, 0.0}, {0.2, 0.3, 0.5}), InvalidArgument);
  }

  TEST_CASE("distance is a metric on interior compositions") {
    Rng rng(1);
    double worst_symmetry = 0.0, worst_triangle = 0.0;
    for (int i = 0; i < 10000; ++i) {
      const Eigen::Vector3d a = random_composition(rng, 0.8);
      const Eigen::Vector3d b = random_composition(rng, 0.8);
      const Eigen::Vector3d c = random_composition(rng, 0.8);
      const double ab = aitchison(a, b), ba = aitchison(b, a);
      worst_symmetry = std::max(worst_symmetry, std::abs(ab - ba));
      worst_triangle = std::max(worst_triangle, aitchison(a, c) - ab - aitchison(b, c));
    }
    CHECK(worst_symmetry <= 1e-12);
    CHECK(worst_triangle <= 1e-12);
  }

  TEST_CASE("root mean squared error") {
    const std::vector<double> p = {0.0, 1.0}, o = {1.0, 0.0};
    CHECK(rmse(p, p) == 0.0);
    CHECK(rmse(p, o) == doctest::Approx(1.0));
    const std::vector<double> a = {0.1, 0.4, 0.9}, b = {0.3, 0.2, 0.5};
    const std::vector<double> a3 = {0.3, 1.2, 2.7}, b3 = {0.9, 0.6, 1.5};
    CHECK(rmse(a3, b3) == doctest::Approx(3.0 * rmse(a, b)));
    CHECK_THROWS_AS(rmse(a, p), InvalidArgument);
  }

  TEST_CASE("holdout plans draw from observed cells") {
    const auto d = generate(SyntheticConfig{}, 2);
    const HoldoutPlan plan = make_holdout(d.obs, 0.10, 4);
    CHECK(plan.lcc_cells.size() == 20);
    CHECK(plan.alcc_cells.size() == 40);
    std::set<Index> lcc_observed;
    for (const auto& o : d.obs.lcc) lcc_observed.insert(o.cell);
    for (Index c : plan.lcc_cells) CHECK(lcc_observed.count(c) == 1);
    CHECK(std::set<Index>(plan.alcc_cells.begin(), plan.alcc_cells.end()).size() == plan.alcc_cells.size());

    const HoldoutPlan again = make_holdout(d.obs, 0.10, 4);
    CHECK(again.lcc_cells == plan.lcc_cells);
    CHECK(again.alcc_cells == plan.alcc_cells);

    const ObservationSplit split = split_observations(d.obs, plan);
    CHECK(split.train.lcc.size() + split.lcc_test.size() == d.obs.lcc.size());
    CHECK(split.alcc_test.size() == 2 * plan.alcc_cells.size());
    const std::set<Index> held(plan.alcc_cells.begin(), plan.alcc_cells.end());
    for (const auto& o : split.train.alcc) CHECK(held.count(o.cell) == 0);

    HoldoutPlan bad;
    for (Index c = 0; bad.lcc_cells.empty(); ++c) {
      if (lcc_observed.count(c) == 0) bad.lcc_cells.push_back(c);
    }
    CHECK_THROWS_AS(split_observations(d.obs, bad), InvalidArgument);

    CHECK(make_holdout(d.obs, 0.0, 1).empty());
  }

  TEST_CASE("empty holdout yields an empty table") {
    const auto d = generate(SyntheticConfig{}, 3);
    ValidationInputs in{d.lattice, d.covariates, d.obs};
    const ValidationTable t = leave_out_run(in, HoldoutPlan{});
    CHECK(t.results.empty());
    const std::string csv = validation_csv({t});
    CHECK(csv.find("synthetic") != std::string::npos);
  }

  TEST_CASE("held-out cells never enter the fit") {
    SyntheticConfig c;
    c.n_rows = 8;
    c.n_cols = 8;
    const auto d = generate(c, 4);
    ValidationInputs in{d.lattice, d.covariates, d.obs};
    in.sampler.iterations = 600;
    in.sampler.burn_in = 300;
    in.sampler.thin = 2;
    const HoldoutPlan plan = make_holdout(d.obs, 0.2, 5);
    const ValidationTable t = leave_out_run(in, plan);
    REQUIRE(t.results.size() == 2);
    CHECK(t.results[0].set == CovariateSet::All);
    for (const auto& r : t.results) {
      CHECK(r.heldout_terms == 0);
      CHECK(std::isfinite(r.acd));
      CHECK(r.rmse.size() == 2);
      for (double e : r.rmse) CHECK(std::isfinite(e));
      CHECK(r.n_lcc_test == static_cast<Index>(plan.lcc_cells.size()));
    }
    const std::string csv = validation_csv({t});
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
  }
}
