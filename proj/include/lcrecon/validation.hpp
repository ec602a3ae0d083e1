#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lcrecon/likelihoods.hpp"
#include "lcrecon/model.hpp"
#include "lcrecon/priors.hpp"
#include "lcrecon/sampler.hpp"

namespace lcrecon {

// Mean Aitchison distance ||clr(x) - clr(y)|| over pairs.
double acd(std::span<const Eigen::Vector3d> predicted, std::span<const Eigen::Vector3d> observed);
double rmse(std::span<const double> predicted, std::span<const double> observed);

// Cells removed before fitting. LCC and ALCC cells are drawn separately from
// the cells observed in each source; an ALCC cell leaves every dataset.
struct HoldoutPlan {
  std::uint64_t seed = 0;
  double fraction = 0.10;
  std::vector<Index> lcc_cells;
  std::vector<Index> alcc_cells;

  bool empty() const { return lcc_cells.empty() && alcc_cells.empty(); }
};

HoldoutPlan make_holdout(const ObservationSet& obs, double fraction, std::uint64_t seed);

struct ObservationSplit {
  ObservationSet train;
  std::vector<DirichletObs> lcc_test;
  std::vector<BetaObs> alcc_test;
};

// Throws InvalidArgument when the plan names cells that are not observed.
ObservationSplit split_observations(const ObservationSet& obs, const HoldoutPlan& plan);

struct ValidationResult {
  CovariateSet set = CovariateSet::Elevation;
  double acd = 0.0;
  std::vector<double> rmse;  // one per ALCC dataset
  Index n_lcc_test = 0;
  Index n_alcc_test = 0;     // cells
  double mala_acceptance = 0.0;
  double rw_acceptance = 0.0;
  // Likelihood terms evaluated at held-out cells during the fit; 0 when the
  // protocol is respected.
  std::uint64_t heldout_terms = 0;
};

struct ValidationTable {
  std::string label;
  std::vector<ValidationResult> results;  // empty for an empty plan
};

struct ValidationInputs {
  Lattice lattice;
  CovariateTable covariates;
  ObservationSet obs;
  std::vector<CovariateSet> sets = {CovariateSet::All, CovariateSet::Elevation};
  PriorConstants priors;
  SamplerConfig sampler;
  std::uint64_t seed = 1;
  std::string label = "synthetic";
};

// Fits each covariate set on the retained data and scores the posterior mean
// of z (ACD) and p_H (RMSE per dataset) at the held-out cells.
ValidationTable leave_out_run(const ValidationInputs& inputs, const HoldoutPlan& plan);

// One row per table: label, then ACD and RMSE per dataset, each for every
// covariate set (All before Elev.).
std::string validation_csv(const std::vector<ValidationTable>& tables);

}  // namespace lcrecon
