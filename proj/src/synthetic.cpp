#include "lcrecon/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "lcrecon/checkpoint.hpp"
#include "lcrecon/data_io.hpp"
#include "lcrecon/error.hpp"
#include "lcrecon/random.hpp"
#include "lcrecon/summaries.hpp"
#include "lcrecon/transforms.hpp"

namespace lcrecon {

void SyntheticConfig::validate() const {
  if (n_rows < 2 || n_cols < 2) throw InvalidArgument("synthetic: lattice must be at least 2 x 2");
  if (!(kappa > 0.0)) throw InvalidArgument("synthetic: kappa must be positive");
  if (!(alpha > 0.0) || !(lambda > 0.0)) {
    throw InvalidArgument("synthetic: alpha and lambda must be positive");
  }
  if (!(tau_eps > 0.0)) throw InvalidArgument("synthetic: tau_eps must be positive");
  if (n_datasets < 1) throw InvalidArgument("synthetic: need at least one dataset");
  if (!(lcc_fraction >= 0.0 && lcc_fraction <= 1.0) ||
      !(alcc_fraction >= 0.0 && alcc_fraction <= 1.0)) {
    throw InvalidArgument("synthetic: observation fractions must lie in [0, 1]");
  }
  if (!(lpj_noise >= 0.0)) throw InvalidArgument("synthetic: lpj_noise must be non-negative");
  Eigen::LLT<Eigen::Matrix3d> llt(sigma);
  if (llt.info() != Eigen::Success || !sigma.isApprox(sigma.transpose())) {
    throw InvalidArgument("synthetic: sigma must be symmetric positive definite");
  }
  if (eps && eps->size() != n_datasets) {
    throw InvalidArgument("synthetic: fixed eps needs one value per dataset");
  }
}

LatentState GroundTruth::latent() const {
  LatentState s;
  s.eta = eta;
  s.beta = beta;
  s.eps = eps;
  s.log_alpha = std::log(alpha);
  s.log_lambda = std::log(lambda);
  return s;
}

namespace {

// Smooth terrain-like surface over the unit square.
double elevation_at(double u, double v) {
  return 300.0 + 400.0 * u * v + 150.0 * std::sin(2.0 * std::numbers::pi * u) * std::cos(std::numbers::pi * v);
}

std::vector<Index> choose_cells(Index n, double fraction, Rng& rng) {
  std::vector<Index> cells(static_cast<std::size_t>(n));
  std::iota(cells.begin(), cells.end(), Index{0});
  const auto keep = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  if (keep < cells.size()) {
    std::shuffle(cells.begin(), cells.end(), rng);
    cells.resize(keep);
    std::sort(cells.begin(), cells.end());
  }
  return cells;
}

}  // namespace

SyntheticData generate(const SyntheticConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  SyntheticData data;
  data.lattice = build_lattice(config.n_rows, config.n_cols);
  const Lattice& lattice = data.lattice;
  const Index n = lattice.size();

  Eigen::MatrixXd raw(n, 3);
  for (Index i = 0; i < n; ++i) {
    const double u = (static_cast<double>(lattice.col(i)) + 0.5) / static_cast<double>(lattice.n_cols);
    const double v = (static_cast<double>(lattice.row(i)) + 0.5) / static_cast<double>(lattice.n_rows);
    raw(i, 0) = elevation_at(u, v);
  }

  GroundTruth& t = data.truth;
  t.n_rows = config.n_rows;
  t.n_cols = config.n_cols;
  t.n_datasets = config.n_datasets;
  t.alpha = config.alpha;
  t.lambda = config.lambda;
  t.kappa = config.kappa;
  t.sigma = config.sigma;
  t.tau_eps = config.tau_eps;

  const Factorization factor(build_precision(lattice, config.kappa).matrix, config.kappa);
  FieldMatrix z(3, n);
  for (int f = 0; f < kFields; ++f) {
    z.row(f) = factor.sample_from_standard(standard_normal_vector(n, rng)).transpose();
  }
  t.x = Eigen::LLT<Eigen::Matrix3d>(config.sigma).matrixL() * z;

  if (config.eps) {
    t.eps = *config.eps;
  } else {
    t.eps = standard_normal_vector(config.n_datasets, rng) / std::sqrt(config.tau_eps);
  }

  // Elevation alone fixes the design used for the truth.
  const CovariateTable elev_only = CovariateTable::from_raw({"elevation"}, raw.leftCols(1));
  const ModelDesign design = ModelDesign::for_set(lattice, elev_only, CovariateSet::Elevation,
                                                  config.n_datasets);
  t.beta.resize(design.n_beta());
  for (int f = 0; f < kFields; ++f) {
    t.beta.segment(design.beta_offset(f), 2) = config.beta[static_cast<std::size_t>(f)];
  }
  t.eta = design.mean_field(t.beta) + t.x;

  for (int k = 0; k < 2; ++k) {
    raw.col(1 + k) = t.eta.row(k).transpose() + config.lpj_noise * standard_normal_vector(n, rng);
  }
  data.covariates = CovariateTable::from_raw({"elevation", "lpj1", "lpj2"}, raw);

  t.p_natural.resize(3, n);
  t.cover.resize(3, n);
  t.p_human.resize(n);
  t.p_human_dataset.resize(config.n_datasets, n);
  for (Index i = 0; i < n; ++i) {
    t.p_natural.col(i) = alr_inverse(t.eta(kEtaL1, i), t.eta(kEtaL2, i));
    t.p_human(i) = logit_inverse(t.eta(kEtaH, i));
    t.cover.col(i) = decompose_cover<double>(t.p_natural.col(i), t.p_human(i));
    for (int k = 0; k < config.n_datasets; ++k) {
      t.p_human_dataset(k, i) = logit_inverse(t.eta(kEtaH, i) + t.eps(k));
    }
  }

  const auto lcc_cells = choose_cells(n, config.lcc_fraction, rng);
  const auto alcc_cells = choose_cells(n, config.alcc_fraction, rng);

  ObservationSet& obs = data.obs;
  obs.n_datasets = config.n_datasets;
  for (Index cell : lcc_cells) {
    const Eigen::Vector3d shape = config.alpha * t.cover.col(cell);
    obs.lcc.push_back({cell, dirichlet_draw<3>(shape, rng)});
  }
  for (int k = 0; k < config.n_datasets; ++k) {
    for (Index cell : alcc_cells) {
      const double p = t.p_human_dataset(k, cell);
      obs.alcc.push_back({cell, k, beta_draw(config.lambda * p, config.lambda * (1.0 - p), rng)});
    }
  }
  obs.clamp_log["lcc"] = 0;
  obs.clamp_log["alcc"] = 0;
  apply_boundary_policy(obs);
  obs.validate(n);
  return data;
}

// ---- files -------------------------------------------------------------------------

namespace {

using nlohmann::json;

json to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

json to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Eigen::MatrixXd matrix_from(const json& j) {
  const auto rows = static_cast<Index>(j.size());
  const auto cols = rows > 0 ? static_cast<Index>(j[0].size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    if (static_cast<Index>(j[static_cast<std::size_t>(r)].size()) != cols) {
      throw DataError("truth: ragged matrix");
    }
    for (Index c = 0; c < cols; ++c) {
      m(r, c) = j[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].get<double>();
    }
  }
  return m;
}

Eigen::VectorXd vector_from(const json& j) {
  Eigen::VectorXd v(static_cast<Index>(j.size()));
  for (Index i = 0; i < v.size(); ++i) v(i) = j[static_cast<std::size_t>(i)].get<double>();
  return v;
}

}  // namespace

void write_synthetic(const SyntheticData& data, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  write_observations(data.obs, {dir / "lcc.csv", dir / "alcc.csv"});
  write_covariates(data.covariates, dir / "covariates.csv");

  const GroundTruth& t = data.truth;
  json j;
  j["n_rows"] = t.n_rows;
  j["n_cols"] = t.n_cols;
  j["n_datasets"] = t.n_datasets;
  j["alpha"] = t.alpha;
  j["lambda"] = t.lambda;
  j["kappa"] = t.kappa;
  j["tau_eps"] = t.tau_eps;
  j["sigma"] = to_json(Eigen::MatrixXd(t.sigma));
  j["beta"] = to_json(t.beta);
  j["eps"] = to_json(t.eps);
  j["x"] = to_json(Eigen::MatrixXd(t.x));
  j["eta"] = to_json(Eigen::MatrixXd(t.eta));
  j["p_natural"] = to_json(Eigen::MatrixXd(t.p_natural));
  j["p_human"] = to_json(t.p_human);
  j["cover"] = to_json(Eigen::MatrixXd(t.cover));
  j["p_human_dataset"] = to_json(t.p_human_dataset);
  j["clamped_lcc"] = data.obs.clamp_log.at("lcc");
  j["clamped_alcc"] = data.obs.clamp_log.at("alcc");
  write_file_atomic(dir / "truth.json", j.dump(1) + "\n");
}

GroundTruth read_truth(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  GroundTruth t;
  try {
    const json j = json::parse(is);
    t.n_rows = j.at("n_rows").get<Index>();
    t.n_cols = j.at("n_cols").get<Index>();
    t.n_datasets = j.at("n_datasets").get<int>();
    t.alpha = j.at("alpha").get<double>();
    t.lambda = j.at("lambda").get<double>();
    t.kappa = j.at("kappa").get<double>();
    t.tau_eps = j.at("tau_eps").get<double>();
    t.sigma = matrix_from(j.at("sigma"));
    t.beta = vector_from(j.at("beta"));
    t.eps = vector_from(j.at("eps"));
    t.x = matrix_from(j.at("x"));
    t.eta = matrix_from(j.at("eta"));
    t.p_natural = matrix_from(j.at("p_natural"));
    t.p_human = vector_from(j.at("p_human"));
    t.cover = matrix_from(j.at("cover"));
    t.p_human_dataset = matrix_from(j.at("p_human_dataset"));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  const Index n = t.n_rows * t.n_cols;
  if (t.eta.cols() != n || t.p_human.size() != n || t.eps.size() != t.n_datasets) {
    throw DataError(path.string() + ": array sizes do not match the lattice");
  }
  return t;
}

// ---- recovery ----------------------------------------------------------------------

RecoveryReport scoring(const ChainOutput& chain, const GroundTruth& truth) {
  if (chain.n_rows != truth.n_rows || chain.n_cols != truth.n_cols) {
    throw InvalidArgument("scoring: chain and truth lattices differ");
  }
  if (chain.n_datasets != truth.n_datasets) {
    throw InvalidArgument("scoring: chain and truth dataset counts differ");
  }
  const PosteriorSummary s = posterior_summaries(chain);
  RecoveryReport r;
  r.alpha = {truth.alpha, s.alpha};
  r.lambda = {truth.lambda, s.lambda};
  r.kappa = {truth.kappa, s.kappa};
  r.tau_eps = {truth.tau_eps, s.tau_eps};
  for (int k = 0; k < truth.n_datasets; ++k) {
    r.eps.push_back({truth.eps(k), s.eps[static_cast<std::size_t>(k)]});
  }

  const Index n = truth.n_rows * truth.n_cols;
  double sq_h = 0.0, sq_z = 0.0, sq_p = 0.0;
  Index covered = 0;
  for (Index i = 0; i < n; ++i) {
    const auto& c = s.cells[static_cast<std::size_t>(i)];
    sq_h += std::pow(c.p_human - truth.p_human(i), 2);
    sq_z += (c.cover - truth.cover.col(i)).squaredNorm();
    sq_p += (c.p_natural - truth.p_natural.col(i)).squaredNorm();
    if (truth.p_human(i) >= c.p_human_interval.lower && truth.p_human(i) <= c.p_human_interval.upper) {
      ++covered;
    }
  }
  r.p_human_rmse = std::sqrt(sq_h / static_cast<double>(n));
  r.cover_rmse = std::sqrt(sq_z / static_cast<double>(3 * n));
  r.natural_rmse = std::sqrt(sq_p / static_cast<double>(3 * n));
  r.p_human_coverage = static_cast<double>(covered) / static_cast<double>(n);

  const auto post = chain.posterior_samples();
  for (double level : {0.5, 0.8, 0.9, 0.95}) {
    Index hit = 0;
    std::vector<double> draws(post.size());
    for (Index i = 0; i < n; ++i) {
      for (std::size_t m = 0; m < post.size(); ++m) {
        draws[m] = logit_inverse(post[m]->latent.eta(kEtaH, i));
      }
      const double lo = empirical_quantile(draws, 0.5 - level / 2.0);
      const double hi = empirical_quantile(draws, 0.5 + level / 2.0);
      if (truth.p_human(i) >= lo && truth.p_human(i) <= hi) ++hit;
    }
    r.calibration.emplace_back(level, static_cast<double>(hit) / static_cast<double>(n));
  }
  return r;
}

}  // namespace lcrecon
