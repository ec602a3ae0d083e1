#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "lcrecon/model.hpp"

namespace lcrecon {

// Pollen-based land-cover composition observed at one cell.
struct DirichletObs {
  Index cell = 0;
  Eigen::Vector3d cover;
};

// One ALCC scenario value; `dataset` is 0-based internally.
struct BetaObs {
  Index cell = 0;
  int dataset = 0;
  double value = 0.5;
};

struct ObservationSet {
  int n_datasets = 1;
  std::vector<DirichletObs> lcc;
  std::vector<BetaObs> alcc;
  std::map<std::string, std::size_t> clamp_log;

  // Throws InvalidArgument on unknown cells, bad dataset indices, duplicate
  // (cell, dataset) pairs or boundary values.
  void validate(Index n_cells) const;
};

// ---- Beta(lambda p, lambda (1 - p)) ----------------------------------------

double beta_logpdf(double y, double lambda, double p);

struct BetaScore {
  double d_lambda = 0.0;
  double d_p = 0.0;
};
BetaScore beta_score(double y, double lambda, double p);

// Expected Fisher information in (lambda, p).
Eigen::Matrix2d beta_fisher(double lambda, double p);

// ---- Dirichlet(alpha z) -----------------------------------------------------

double dirichlet_logpdf(const Eigen::Vector3d& cover, double alpha,
                        const Eigen::Vector3d& z);

struct DirichletScore {
  double d_alpha = 0.0;
  Eigen::Vector3d d_z;  // unconstrained partials, alpha (log L_i - psi(alpha z_i))

  // Gradient along the simplex with z_U = 1 - z_C - z_B eliminated.
  Eigen::Vector2d tangent() const { return {d_z(0) - d_z(2), d_z(1) - d_z(2)}; }
};
DirichletScore dirichlet_score(const Eigen::Vector3d& cover, double alpha,
                               const Eigen::Vector3d& z);

// Expected Fisher information in the shape parameters a = alpha z:
// diag(psi'(a_i)) - psi'(sum a) 1 1^T.
Eigen::Matrix3d dirichlet_fisher_shape(double alpha, const Eigen::Vector3d& z);

// ---- joint observation model -----------------------------------------------

struct LogDensity {
  double value = 0.0;
  LatentState gradient;
};

// Per-cell counts of likelihood terms evaluated.
struct LikelihoodAudit {
  std::vector<std::uint64_t> lcc_terms;
  std::vector<std::uint64_t> alcc_terms;

  void reset(Index n_cells);
};

// Sum of Dirichlet and Beta log-densities over the observed cells with the
// chain-rule gradient in (eta, beta, eps, log alpha, log lambda). beta does not
// enter the likelihood, so its gradient is zero.
LogDensity total_loglik(const LatentState& state, const ObservationSet& obs,
                        LikelihoodAudit* audit = nullptr);

}  // namespace lcrecon
