#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <sstream>

#include "lcrecon/checkpoint.hpp"
#include "lcrecon/config.hpp"
#include "lcrecon/data_io.hpp"
#include "lcrecon/summaries.hpp"
#include "support.hpp"

using namespace lcrecon;
using namespace lcrecon::testing;

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream(path) << text;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST_SUITE("data_io") {
  TEST_CASE("boundary policy") {
    double h = 0.0;
    CHECK(clamp_fraction(h) == 1);
    CHECK(h == kObservationClamp);
    double one = 1.0;
    CHECK(clamp_fraction(one) == 1);
    CHECK(one == 1.0 - kObservationClamp);
    double mid = 0.4;
    CHECK(clamp_fraction(mid) == 0);
    CHECK(mid == 0.4);

    Eigen::Vector3d ok(0.7, 0.2, 0.1);
    CHECK(clamp_composition(ok) == 0);
    CHECK(ok == Eigen::Vector3d(0.7, 0.2, 0.1));

    Eigen::Vector3d edge(0.8, 0.2, 0.0);
    CHECK(clamp_composition(edge) == 1);
    CHECK(edge(2) == kObservationClamp);
    CHECK(edge.sum() == doctest::Approx(1.0).epsilon(1e-15));
    const Eigen::Vector3d once = edge;
    CHECK(clamp_composition(edge) == 0);
    CHECK(edge == once);

    ObservationSet obs;
    obs.n_datasets = 1;
    obs.lcc.push_back({0, Eigen::Vector3d(1.0, 0.0, 0.0)});
    obs.alcc.push_back({0, 0, 0.0});
    obs.alcc.push_back({1, 0, 0.5});
    apply_boundary_policy(obs);
    CHECK(obs.clamp_log["lcc"] == 2);
    CHECK(obs.clamp_log["alcc"] == 1);
    CHECK_NOTHROW(obs.validate(2));
  }

  TEST_CASE("loading observations") {
    TempDir dir("obs");
    const Lattice lattice = build_lattice(3, 3);
    write_text(dir / "lcc.csv", "cell_id,L_C,L_B,L_U\n0,0.7,0.2,0.1\n4,0.5,0.5,0.0\n");
    write_text(dir / "alcc.csv", "cell_id,dataset,H\n0,1,0.0\n0,2,0.3\n8,1,0.9\n");
    const ObservationSet obs = load_observations({dir / "lcc.csv", dir / "alcc.csv"}, lattice, 2);
    REQUIRE(obs.lcc.size() == 2);
    CHECK(obs.lcc[0].cover == Eigen::Vector3d(0.7, 0.2, 0.1));
    CHECK(obs.lcc[1].cover(2) == kObservationClamp);
    REQUIRE(obs.alcc.size() == 3);
    CHECK(obs.alcc[0].value == kObservationClamp);
    CHECK(obs.alcc[0].dataset == 0);
    CHECK(obs.alcc[1].dataset == 1);
    CHECK(obs.clamp_log.at("alcc") == 1);
    CHECK(obs.clamp_log.at("lcc") == 1);

    write_text(dir / "empty.csv", "");
    const ObservationSet none = load_observations({dir / "empty.csv", {}}, lattice, 2);
    CHECK(none.lcc.empty());
    CHECK(none.alcc.empty());
  }

  TEST_CASE("malformed observation files are diagnosed") {
    TempDir dir("bad");
    const Lattice lattice = build_lattice(3, 3);
    auto load_lcc = [&](const std::string& text) {
      write_text(dir / "lcc.csv", text);
      return load_observations({dir / "lcc.csv", {}}, lattice, 1);
    };
    CHECK_THROWS_AS(load_lcc("cell,L_C,L_B,L_U\n0,0.7,0.2,0.1\n"), ParseError);
    CHECK_THROWS_AS(load_lcc("cell_id,L_C,L_B,L_U\n0,0.7,abc,0.1\n"), ParseError);
    CHECK_THROWS_AS(load_lcc("cell_id,L_C,L_B,L_U\n9,0.7,0.2,0.1\n"), ParseError);
    CHECK_THROWS_AS(load_lcc("cell_id,L_C,L_B,L_U\n0,0.7,0.2,0.2\n"), DataError);
    CHECK_THROWS_AS(load_lcc("cell_id,L_C,L_B,L_U\n0,0.7,0.2,0.1\n0,0.7,0.2,0.1\n"), DataError);
    CHECK_THROWS_AS(load_lcc("cell_id,L_C,L_B,L_U\n0,1.2,-0.1,-0.1\n"), DataError);
    try {
      load_lcc("cell_id,L_C,L_B,L_U\n0,0.7,0.2,0.1\n1,0.7,nan,0.1\n");
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 3);
    }
    // A composition off by 0.005 passes and is renormalised.
    const auto near = load_lcc("cell_id,L_C,L_B,L_U\n0,0.7,0.2,0.105\n");
    CHECK(near.lcc[0].cover.sum() == doctest::Approx(1.0).epsilon(1e-15));

    write_text(dir / "alcc.csv", "cell_id,dataset,H\n0,3,0.5\n");
    CHECK_THROWS_AS(load_observations({{}, dir / "alcc.csv"}, lattice, 2), ParseError);
    write_text(dir / "alcc.csv", "cell_id,dataset,H\n0,1,1.5\n");
    CHECK_THROWS_AS(load_observations({{}, dir / "alcc.csv"}, lattice, 2), DataError);
    CHECK_THROWS_AS(load_observations({dir / "missing.csv", {}}, lattice, 2), IoError);
  }

  TEST_CASE("observation and covariate round trips") {
    TempDir dir("rt");
    const Lattice lattice = build_lattice(4, 3);
    Rng rng(2);
    ObservationSet obs;
    obs.n_datasets = 2;
    for (Index c = 0; c < 12; c += 2) obs.lcc.push_back({c, random_composition(rng)});
    for (Index c = 0; c < 12; ++c) {
      for (int k = 0; k < 2; ++k) obs.alcc.push_back({c, k, 0.05 + 0.9 * uniform01(rng)});
    }
    write_observations(obs, {dir / "lcc.csv", dir / "alcc.csv"});
    const ObservationSet back = load_observations({dir / "lcc.csv", dir / "alcc.csv"}, lattice, 2);
    REQUIRE(back.lcc.size() == obs.lcc.size());
    for (std::size_t i = 0; i < obs.lcc.size(); ++i) {
      CHECK(back.lcc[i].cell == obs.lcc[i].cell);
      CHECK((back.lcc[i].cover - obs.lcc[i].cover).cwiseAbs().maxCoeff() < 1e-15);
    }
    REQUIRE(back.alcc.size() == obs.alcc.size());
    for (std::size_t i = 0; i < obs.alcc.size(); ++i) CHECK(back.alcc[i].value == obs.alcc[i].value);

    const CovariateTable cov = smooth_covariates(lattice);
    write_covariates(cov, dir / "cov.csv");
    const CovariateTable cback = load_covariates(dir / "cov.csv", lattice);
    CHECK(cback.names == cov.names);
    CHECK((cback.raw - cov.raw).norm() == 0.0);

    write_text(dir / "short.csv", "cell_id,elevation\n0,1.0\n");
    CHECK_THROWS_AS(load_covariates(dir / "short.csv", lattice), DataError);
  }

  TEST_CASE("number formatting reads back exactly") {
    Rng rng(3);
    for (int i = 0; i < 1000; ++i) {
      const double v = std::ldexp(standard_normal(rng), static_cast<int>(40 * uniform01(rng)) - 20);
      CHECK(std::stod(format_double(v)) == v);
    }
    CHECK(format_double(0.5) == "0.5");
  }

  TEST_CASE("summaries, heat maps and their round trips") {
    TempDir dir("sum");
    const ModelDesign design = small_design(3, 5, 2);
    Rng rng(4);
    const ChainOutput chain = constant_chain(design, random_latent(design, rng), initial_hyper_state(design));
    const auto files = write_summaries(chain, design, dir.path());
    CHECK(files.size() >= 6);
    for (const auto& f : files) CHECK(std::filesystem::exists(dir / f));

    const auto rows = read_summary_csv(dir / "summaries.csv");
    REQUIRE(rows.size() == 15);
    const auto expected = summary_rows(posterior_summaries(chain), design.lattice());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      CHECK(rows[i].cell_id == expected[i].cell_id);
      CHECK(rows[i].p_natural == expected[i].p_natural);
      CHECK(rows[i].cover == expected[i].cover);
      CHECK(rows[i].p_human == expected[i].p_human);
      // Constant chain: the interval collapses onto the mean.
      CHECK(rows[i].p_human_q025 == rows[i].p_human);
      CHECK(rows[i].p_human_q975 == rows[i].p_human);
    }

    Eigen::VectorXd values = Eigen::VectorXd::LinSpaced(15, 0.0, 1.0);
    write_heatmap(values, design.lattice(), 0.0, 1.0, dir / "map.ppm");
    const HeatmapImage img = read_ppm(dir / "map.ppm");
    CHECK(img.width == 5);
    CHECK(img.height == 3);
    CHECK(img.rgb.size() == 3u * 15u);
    CHECK_THROWS_AS(write_heatmap(values, design.lattice(), 1.0, 1.0, dir / "x.ppm"), InvalidArgument);
  }

  TEST_CASE("checkpoint round trip and corruption") {
    TempDir dir("ckpt");
    const ModelDesign design = small_design(2, 3, 2);
    Rng rng(5);
    ChainOutput chain = constant_chain(design, random_latent(design, rng), initial_hyper_state(design), 10);
    chain.seed = 99;
    chain.rng_state = "state";
    chain.mala_accepted.assign(10, 1);
    chain.rw_accepted.assign(10, 0);
    chain.log_step_mala.assign(10, -0.5);
    chain.log_step_rw.assign(10, -1.5);
    write_chain(chain, dir / "c.bin");
    const ChainOutput back = read_chain(dir / "c.bin");
    CHECK(encode_chain(back) == encode_chain(chain));
    CHECK(back.seed == 99);
    CHECK(back.samples.size() == 11);

    std::string bytes = read_text(dir / "c.bin");
    bytes[bytes.size() / 2] ^= 0x5a;
    CHECK_THROWS_AS(decode_chain(bytes), DataError);
    CHECK_THROWS_AS(decode_chain("not a chain"), DataError);
    CHECK_THROWS_AS(read_chain(dir / "missing.bin"), IoError);
  }

  TEST_CASE("configuration files") {
    const RunConfig c = parse_run_config(
        "# benchmark\n[lattice]\nrows = 5\ncols = 4\n[model]\ncovariates = all\n"
        "[mcmc]\niterations = 200\nburn_in = 50\nseed = 3\n");
    CHECK(c.n_rows == 5);
    CHECK(c.n_cols == 4);
    CHECK(c.covariates == CovariateSet::All);
    CHECK(c.sampler.iterations == 200);
    CHECK(c.seed == 3);
    CHECK(c.lattice().size() == 20);

    CHECK_THROWS_AS(parse_run_config("[lattice]\nrowz = 5\n"), ParseError);
    CHECK_THROWS_AS(parse_run_config("[nowhere]\n"), ParseError);
    CHECK_THROWS_AS(parse_run_config("rows = 5\n"), ParseError);
    CHECK_THROWS_AS(parse_run_config("[lattice]\nrows = five\n"), ParseError);
    try {
      parse_run_config("[lattice]\nrows = 5\n\ncols = x\n");
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 4);
    }

    RunConfig d;
    for (const auto& key : RunConfig::keys()) CHECK(key.find('.') != std::string::npos);
    d.set("priors.sigma_df", "1.5");
    CHECK_THROWS_AS(d.validate(), InvalidArgument);
    CHECK_THROWS_AS(d.set("mcmc.unknown", "1"), InvalidArgument);
    CHECK_THROWS_AS(load_run_config("/nonexistent/config.ini"), IoError);
  }
}
