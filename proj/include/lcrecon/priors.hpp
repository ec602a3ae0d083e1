#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "lcrecon/lattice.hpp"
#include "lcrecon/likelihoods.hpp"
#include "lcrecon/model.hpp"
#include "lcrecon/random.hpp"

namespace lcrecon {

// Gamma parameters are (shape, rate).
struct PriorConstants {
  double alpha_shape = 1.5;
  double alpha_rate = 0.1;
  double lambda_shape = 1.5;
  double lambda_rate = 0.1;
  double tau_shape = 1.5;
  double tau_rate = 0.1;
  double kappa_shape = 1.0;
  double kappa_rate = std::log(100.0) / std::sqrt(8.0);
  double sigma_df = 10.0;
  Eigen::Matrix3d sigma_scale = Eigen::Matrix3d::Identity();
};

double gamma_logpdf(double x, double shape, double rate);

// Hyper-parameter dependent pieces of the latent prior, computed once per
// (kappa, Sigma) and reused across evaluations.
struct PriorContext {
  const ModelDesign* design = nullptr;
  PriorConstants constants;
  HyperState hyper;
  SparsePrecision<double> q;
  double logdet_q = 0.0;
  Eigen::Matrix3d sigma_inv;
  double logdet_sigma = 0.0;

  PriorContext(const ModelDesign& design, const PriorConstants& constants,
               const HyperState& hyper, const SparsePrecision<double>& q,
               double logdet_q);
};

// log p(X | kappa, Sigma) + log p(beta | gamma, phi) + log p(eps | tau)
// + log p(log alpha) + log p(log lambda), with gradient in the latent block.
LogDensity log_prior(const LatentState& state, const PriorContext& ctx);

// Sigma | X, kappa ~ IW(S0 + X Q X^T, df0 + n).
Eigen::Matrix3d gibbs_sigma(const FieldMatrix& x, const SparsePrecision<double>& q,
                            const PriorConstants& constants, Rng& rng);

// tau | eps ~ Gamma(shape + K/2, rate + sum(eps^2)/2).
double gibbs_tau_eps(const Eigen::VectorXd& eps, const PriorConstants& constants,
                     Rng& rng);

// One sweep of the inverse-gamma augmentation of the grouped horseshoe:
// gamma_i^2, nu_i, phi^2, xi in that order.
void gibbs_horseshoe(const Eigen::VectorXd& beta,
                     const std::vector<std::vector<Index>>& groups,
                     HorseshoeState& hs, Rng& rng);

// log p(kappa | X, Sigma) on the log-kappa scale, up to a constant:
// 3/2 logdet Q - 1/2 tr(Sigma^-1 X Q X^T) + log Gamma(kappa) + log kappa.
double kappa_logpost(const Factorization& factor, const SparsePrecision<double>& q,
                     const FieldMatrix& x, const Eigen::Matrix3d& sigma,
                     const PriorConstants& constants);
double kappa_logpost(double kappa, const PrecisionFactory& factory,
                     const FieldMatrix& x, const Eigen::Matrix3d& sigma,
                     const PriorConstants& constants);

// Log-density of the hyper-parameters under their priors (horseshoe scales
// through their auxiliaries). Used for the joint log-posterior trace.
double hyper_log_prior(const HyperState& hyper, const PriorConstants& constants);

}  // namespace lcrecon
