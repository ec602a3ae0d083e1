#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>

#include "lcrecon/likelihoods.hpp"
#include "lcrecon/model.hpp"
#include "lcrecon/sampler.hpp"
#include "lcrecon/summaries.hpp"

namespace lcrecon {

struct SyntheticConfig {
  Index n_rows = 20;
  Index n_cols = 20;
  double kappa = 0.3;
  Eigen::Matrix3d sigma = (Eigen::Matrix3d() << 1.0, 0.5, 0.2,
                                                0.5, 1.0, 0.3,
                                                0.2, 0.3, 1.0).finished();
  double alpha = 30.0;
  double lambda = 30.0;
  double tau_eps = 4.0;
  int n_datasets = 2;
  double lcc_fraction = 0.5;   // share of cells with a pollen composition
  double alcc_fraction = 1.0;  // share of cells with ALCC values (all datasets)
  // (intercept, standardised elevation) per field
  std::array<Eigen::Vector2d, kFields> beta = {Eigen::Vector2d(0.3, 0.5),
                                               Eigen::Vector2d(0.2, -0.4),
                                               Eigen::Vector2d(-1.0, 0.3)};
  std::optional<Eigen::VectorXd> eps;  // fixed offsets instead of drawing them
  double lpj_noise = 0.5;              // sd of the vegetation-model covariates around eta_L

  void validate() const;
};

struct GroundTruth {
  Index n_rows = 0;
  Index n_cols = 0;
  int n_datasets = 0;
  FieldMatrix x;
  FieldMatrix eta;
  Eigen::VectorXd beta;  // packed as ModelDesign::for_set(..., Elevation, ...)
  Eigen::VectorXd eps;
  double alpha = 0.0;
  double lambda = 0.0;
  double kappa = 0.0;
  Eigen::Matrix3d sigma;
  double tau_eps = 0.0;
  Eigen::Matrix3Xd p_natural;
  Eigen::VectorXd p_human;
  Eigen::Matrix3Xd cover;
  Eigen::MatrixXd p_human_dataset;  // n_datasets x n_cells

  // As a fitted state, for starting or checking chains.
  LatentState latent() const;
};

struct SyntheticData {
  Lattice lattice;
  ObservationSet obs;
  CovariateTable covariates;
  GroundTruth truth;
};

// Draws X ~ N(0, Sigma (x) Q(kappa)^-1), eta = B beta + X, then Dirichlet and
// Beta observations on the masked cells. Covariates are a smooth elevation
// surface plus lpj1, lpj2 (noisy eta_L1, eta_L2). Deterministic per seed.
SyntheticData generate(const SyntheticConfig& config, std::uint64_t seed);

// Writes lcc.csv, alcc.csv, covariates.csv and truth.json into `dir`.
void write_synthetic(const SyntheticData& data, const std::filesystem::path& dir);
GroundTruth read_truth(const std::filesystem::path& path);

struct CoverageItem {
  double truth = 0.0;
  Interval posterior;
  // Parameters stored on the log scale lose an ulp on the way back, so the
  // bounds get a 1e-12 relative allowance.
  bool covered() const {
    const double slack = 1e-12 * std::max(1.0, std::abs(truth));
    return truth >= posterior.lower - slack && truth <= posterior.upper + slack;
  }
};

struct RecoveryReport {
  CoverageItem alpha;
  CoverageItem lambda;
  CoverageItem kappa;
  CoverageItem tau_eps;
  std::vector<CoverageItem> eps;
  double p_human_coverage = 0.0;  // share of cells whose 95% interval covers the truth
  double p_human_rmse = 0.0;      // posterior-mean field vs truth
  double cover_rmse = 0.0;        // all three z components
  double natural_rmse = 0.0;      // all three p_L components
  // Empirical coverage of central intervals at each nominal level.
  std::vector<std::pair<double, double>> calibration;
};

RecoveryReport scoring(const ChainOutput& chain, const GroundTruth& truth);

}  // namespace lcrecon
