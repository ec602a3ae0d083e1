#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "lcrecon/checkpoint.hpp"
#include "lcrecon/synthetic.hpp"
#include "support.hpp"

using namespace lcrecon;
using namespace lcrecon::testing;

namespace {

SyntheticConfig small_config(Index side) {
  SyntheticConfig c;
  c.n_rows = side;
  c.n_cols = side;
  return c;
}

}  // namespace

TEST_SUITE("synthetic") {
  TEST_CASE("generation is deterministic per seed") {
    const auto a = generate(small_config(6), 5);
    const auto b = generate(small_config(6), 5);
    const auto c = generate(small_config(6), 6);
    CHECK(a.truth.eta == b.truth.eta);
    CHECK(a.obs.lcc.size() == b.obs.lcc.size());
    for (std::size_t i = 0; i < a.obs.alcc.size(); ++i) CHECK(a.obs.alcc[i].value == b.obs.alcc[i].value);
    CHECK(a.covariates.raw == b.covariates.raw);
    CHECK(a.truth.eta != c.truth.eta);
  }

  TEST_CASE("ground truth follows the generative model") {
    const auto d = generate(small_config(5), 7);
    const GroundTruth& t = d.truth;
    CHECK(t.eps.size() == 2);
    CHECK(d.obs.lcc.size() == 13);  // half of 25, rounded to nearest
    CHECK(d.obs.alcc.size() == 50);
    CHECK_NOTHROW(d.obs.validate(25));
    for (Index i = 0; i < 25; ++i) {
      const auto j = link_jacobians<double>(t.eta.col(i));
      CHECK((j.p_natural - t.p_natural.col(i)).norm() < 1e-14);
      CHECK(j.p_human == doctest::Approx(t.p_human(i)));
      CHECK((decompose_cover(Eigen::Vector3d(t.p_natural.col(i)), t.p_human(i)) - t.cover.col(i)).norm() < 1e-14);
      for (int k = 0; k < 2; ++k) {
        CHECK(t.p_human_dataset(k, i) == doctest::Approx(logit_inverse(t.eta(kEtaH, i) + t.eps(k))));
      }
    }
    const ModelDesign design = ModelDesign::for_set(d.lattice, d.covariates, CovariateSet::Elevation, 2);
    CHECK((design.mean_field(t.beta) + t.x - t.eta).norm() < 1e-12);
  }

  TEST_CASE("large concentration reproduces the cover") {
    SyntheticConfig c = small_config(6);
    c.alpha = 1e6;
    const auto d = generate(c, 8);
    for (const auto& o : d.obs.lcc) {
      CHECK((o.cover - d.truth.cover.col(o.cell)).cwiseAbs().maxCoeff() < 0.01);
    }
  }

  TEST_CASE("large offset precision collapses the offsets") {
    SyntheticConfig c = small_config(4);
    c.tau_eps = 1e10;
    const auto d = generate(c, 9);
    CHECK(d.truth.eps.cwiseAbs().maxCoeff() < 1e-3);
    CHECK((d.truth.p_human_dataset.row(0) - d.truth.p_human_dataset.row(1)).cwiseAbs().maxCoeff() < 1e-3);
  }

  TEST_CASE("ALCC values are unbiased for the dataset field") {
    // E[H - p_H,k | p_H,k] = 0 at the first cell across 1e5 replicate datasets.
    SyntheticConfig c = small_config(2);
    c.lcc_fraction = 0.0;
    const int reps = 100000;
    double sum = 0.0, sum_sq = 0.0;
    for (int r = 0; r < reps; ++r) {
      const auto d = generate(c, static_cast<std::uint64_t>(r) + 1);
      for (const auto& o : d.obs.alcc) {
        if (o.cell != 0 || o.dataset != 1) continue;
        const double resid = o.value - d.truth.p_human_dataset(1, 0);
        sum += resid;
        sum_sq += resid * resid;
      }
    }
    const double mean = sum / reps;
    const double se = std::sqrt((sum_sq / reps - mean * mean) / reps);
    CHECK(std::abs(mean) < 3.0 * se);
  }

  TEST_CASE("truth sidecar round trip") {
    TempDir dir("truth");
    const auto d = generate(small_config(4), 10);
    write_synthetic(d, dir.path());
    for (const char* f : {"lcc.csv", "alcc.csv", "covariates.csv", "truth.json"}) {
      CHECK(std::filesystem::exists(dir / f));
    }
    const GroundTruth t = read_truth(dir / "truth.json");
    CHECK(t.n_rows == 4);
    CHECK((t.eta - d.truth.eta).norm() == 0.0);
    CHECK((t.sigma - d.truth.sigma).norm() == 0.0);
    CHECK(t.kappa == d.truth.kappa);
    CHECK((t.p_human - d.truth.p_human).norm() == 0.0);
  }

  TEST_CASE("invalid configurations") {
    SyntheticConfig c = small_config(4);
    c.kappa = 0.0;
    CHECK_THROWS_AS(generate(c, 1), InvalidArgument);
    c = small_config(4);
    c.sigma(0, 1) = 5.0;
    CHECK_THROWS_AS(generate(c, 1), InvalidArgument);
    c = small_config(4);
    c.eps = Eigen::VectorXd::Zero(3);
    CHECK_THROWS_AS(generate(c, 1), InvalidArgument);
  }

  TEST_CASE("scoring a chain that sits at the truth") {
    const auto d = generate(small_config(5), 11);
    const ModelDesign design = ModelDesign::for_set(d.lattice, d.covariates, CovariateSet::Elevation, 2);
    HyperState hyper = initial_hyper_state(design);
    hyper.kappa = d.truth.kappa;
    hyper.sigma = d.truth.sigma;
    hyper.tau_eps = d.truth.tau_eps;
    const ChainOutput chain = constant_chain(design, d.truth.latent(), hyper);
    const RecoveryReport r = scoring(chain, d.truth);
    CHECK(r.p_human_rmse < 1e-14);
    CHECK(r.cover_rmse < 1e-14);
    CHECK(r.natural_rmse < 1e-14);
    CHECK(r.p_human_coverage == 1.0);
    CHECK(r.alpha.covered());
    CHECK(r.kappa.covered());
    for (const auto& e : r.eps) CHECK(e.covered());

    const auto other = generate(small_config(4), 11);
    CHECK_THROWS_AS(scoring(chain, other.truth), InvalidArgument);
  }

  TEST_CASE("a fitted chain covers its own truth and not a scrambled one") {
    const auto d = generate(small_config(8), 12);
    const auto wrong = generate(small_config(8), 13);
    const ModelDesign design = ModelDesign::for_set(d.lattice, d.covariates, CovariateSet::Elevation, 2);
    ChainInputs in;
    in.design = &design;
    in.obs = &d.obs;
    SamplerConfig sc;
    sc.iterations = 4000;
    sc.burn_in = 2000;
    sc.thin = 10;
    const ChainOutput chain = run_chain(in, sc, 3);
    const RecoveryReport own = scoring(chain, d.truth);
    const RecoveryReport scrambled = scoring(chain, wrong.truth);
    MESSAGE("coverage own " << own.p_human_coverage << ", scrambled " << scrambled.p_human_coverage);
    CHECK(own.p_human_coverage > 0.8);
    CHECK(scrambled.p_human_coverage < 0.5);
    CHECK(own.p_human_rmse < scrambled.p_human_rmse);
    REQUIRE(own.calibration.size() == 4);
    for (std::size_t i = 1; i < own.calibration.size(); ++i) {
      CHECK(own.calibration[i].second >= own.calibration[i - 1].second);
    }
  }
}
