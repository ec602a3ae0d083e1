#include "lcrecon/likelihoods.hpp"

#include <cmath>
#include <set>
#include <utility>

#include "lcrecon/error.hpp"
#include "lcrecon/special.hpp"
#include "lcrecon/transforms.hpp"

namespace lcrecon {

namespace {

bool open_unit(double v) { return v > 0.0 && v < 1.0; }

void check_beta_args(double y, double lambda, double p) {
  if (!open_unit(y)) throw InvalidArgument("beta: observation must lie in (0, 1)");
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw InvalidArgument("beta: lambda must be positive");
  }
  if (!open_unit(p)) throw InvalidArgument("beta: mean must lie in (0, 1)");
}

void check_dirichlet_args(const Eigen::Vector3d& cover, double alpha,
                          const Eigen::Vector3d& z) {
  if (!((cover.array() > 0.0).all() && (cover.array() < 1.0).all())) {
    throw InvalidArgument("dirichlet: observation must be interior");
  }
  if (!((z.array() > 0.0).all() && (z.array() < 1.0).all())) {
    throw InvalidArgument("dirichlet: mean composition must be interior");
  }
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw InvalidArgument("dirichlet: alpha must be positive");
  }
}

Eigen::Vector3d clamp_composition(const Eigen::Vector3d& z) {
  return z.unaryExpr([](double v) { return clamp_interior(v); });
}

}  // namespace

void ObservationSet::validate(Index n_cells) const {
  if (n_datasets < 1) throw InvalidArgument("observations: need at least one dataset");
  std::set<Index> seen_lcc;
  for (const auto& o : lcc) {
    if (o.cell < 0 || o.cell >= n_cells) throw InvalidArgument("observations: LCC cell outside lattice");
    if (!seen_lcc.insert(o.cell).second) throw InvalidArgument("observations: duplicate LCC cell");
    if (!((o.cover.array() > 0.0).all() && (o.cover.array() < 1.0).all())) {
      throw InvalidArgument("observations: LCC composition on the boundary");
    }
  }
  std::set<std::pair<Index, int>> seen_alcc;
  for (const auto& o : alcc) {
    if (o.cell < 0 || o.cell >= n_cells) throw InvalidArgument("observations: ALCC cell outside lattice");
    if (o.dataset < 0 || o.dataset >= n_datasets) {
      throw InvalidArgument("observations: ALCC dataset index out of range");
    }
    if (!seen_alcc.insert({o.cell, o.dataset}).second) {
      throw InvalidArgument("observations: duplicate (cell, dataset) ALCC pair");
    }
    if (!open_unit(o.value)) throw InvalidArgument("observations: ALCC value on the boundary");
  }
}

double beta_logpdf(double y, double lambda, double p) {
  check_beta_args(y, lambda, p);
  const double a = lambda * p;
  const double b = lambda * (1.0 - p);
  return std::lgamma(lambda) - std::lgamma(a) - std::lgamma(b) +
         (a - 1.0) * std::log(y) + (b - 1.0) * std::log1p(-y);
}

BetaScore beta_score(double y, double lambda, double p) {
  check_beta_args(y, lambda, p);
  const double a = lambda * p;
  const double b = lambda * (1.0 - p);
  const double log_y = std::log(y);
  const double log_1my = std::log1p(-y);
  const double psi_a = digamma(a);
  const double psi_b = digamma(b);
  BetaScore s;
  s.d_lambda = digamma(lambda) - p * psi_a - (1.0 - p) * psi_b + p * log_y +
               (1.0 - p) * log_1my;
  s.d_p = lambda * (-psi_a + psi_b + log_y - log_1my);
  return s;
}

Eigen::Matrix2d beta_fisher(double lambda, double p) {
  if (!(lambda > 0.0) || !open_unit(p)) {
    throw InvalidArgument("beta_fisher: need lambda > 0 and p in (0, 1)");
  }
  const double a = lambda * p;
  const double b = lambda * (1.0 - p);
  const double tri_a = trigamma(a);
  const double tri_b = trigamma(b);
  Eigen::Matrix2d info;
  info(0, 0) = -trigamma(lambda) + p * p * tri_a + (1.0 - p) * (1.0 - p) * tri_b;
  info(1, 1) = lambda * lambda * (tri_a + tri_b);
  info(0, 1) = a * tri_a - b * tri_b;
  info(1, 0) = info(0, 1);
  return info;
}

double dirichlet_logpdf(const Eigen::Vector3d& cover, double alpha,
                        const Eigen::Vector3d& z) {
  check_dirichlet_args(cover, alpha, z);
  double value = std::lgamma(alpha);
  for (int i = 0; i < 3; ++i) {
    const double a = alpha * z(i);
    value += -std::lgamma(a) + (a - 1.0) * std::log(cover(i));
  }
  return value;
}

DirichletScore dirichlet_score(const Eigen::Vector3d& cover, double alpha,
                               const Eigen::Vector3d& z) {
  check_dirichlet_args(cover, alpha, z);
  DirichletScore s;
  s.d_alpha = digamma(alpha);
  for (int i = 0; i < 3; ++i) {
    const double psi = digamma(alpha * z(i));
    const double log_l = std::log(cover(i));
    s.d_alpha += z(i) * (log_l - psi);
    s.d_z(i) = alpha * (log_l - psi);
  }
  return s;
}

Eigen::Matrix3d dirichlet_fisher_shape(double alpha, const Eigen::Vector3d& z) {
  if (!(alpha > 0.0)) throw InvalidArgument("dirichlet_fisher: alpha must be positive");
  Eigen::Matrix3d info = Eigen::Matrix3d::Constant(-trigamma(alpha * z.sum()));
  for (int i = 0; i < 3; ++i) info(i, i) += trigamma(alpha * z(i));
  return info;
}

void LikelihoodAudit::reset(Index n_cells) {
  lcc_terms.assign(static_cast<std::size_t>(n_cells), 0);
  alcc_terms.assign(static_cast<std::size_t>(n_cells), 0);
}

LogDensity total_loglik(const LatentState& state, const ObservationSet& obs,
                        LikelihoodAudit* audit) {
  const Index n = state.eta.cols();
  if (state.eps.size() != obs.n_datasets) {
    throw InvalidArgument("total_loglik: eps size does not match dataset count");
  }
  LogDensity out;
  out.gradient = LatentState::zeros(n, state.beta.size(), state.eps.size());
  if (audit && static_cast<Index>(audit->lcc_terms.size()) != n) audit->reset(n);

  const double alpha = std::exp(state.log_alpha);
  const double lambda = std::exp(state.log_lambda);

  std::vector<double> terms;
  std::vector<double> d_alpha_terms;
  std::vector<double> d_lambda_terms;
  terms.reserve(obs.lcc.size() + obs.alcc.size());
  d_alpha_terms.reserve(obs.lcc.size());
  d_lambda_terms.reserve(obs.alcc.size());

  for (const auto& o : obs.lcc) {
    if (o.cell < 0 || o.cell >= n) throw InvalidArgument("total_loglik: LCC cell outside lattice");
    const LinkVector<double> eta = state.eta.col(o.cell);
    const auto jac = link_jacobians(eta);
    const Eigen::Vector3d z = clamp_composition(jac.cover);
    terms.push_back(dirichlet_logpdf(o.cover, alpha, z));
    const auto score = dirichlet_score(o.cover, alpha, z);
    out.gradient.eta.col(o.cell) += jac.d_cover.transpose() * score.d_z;
    d_alpha_terms.push_back(alpha * score.d_alpha);
    if (audit) ++audit->lcc_terms[static_cast<std::size_t>(o.cell)];
  }

  std::vector<std::vector<double>> d_eps_terms(static_cast<std::size_t>(obs.n_datasets));
  for (const auto& o : obs.alcc) {
    if (o.cell < 0 || o.cell >= n) throw InvalidArgument("total_loglik: ALCC cell outside lattice");
    if (o.dataset < 0 || o.dataset >= obs.n_datasets) {
      throw InvalidArgument("total_loglik: ALCC dataset index out of range");
    }
    const double eta_hk = state.eta(kEtaH, o.cell) + state.eps(o.dataset);
    const double raw_p = logit_inverse(eta_hk);
    const double p = clamp_interior(raw_p);
    terms.push_back(beta_logpdf(o.value, lambda, p));
    const auto score = beta_score(o.value, lambda, p);
    const double d_eta = score.d_p * raw_p * (1.0 - raw_p);
    out.gradient.eta(kEtaH, o.cell) += d_eta;
    d_eps_terms[static_cast<std::size_t>(o.dataset)].push_back(d_eta);
    d_lambda_terms.push_back(lambda * score.d_lambda);
    if (audit) ++audit->alcc_terms[static_cast<std::size_t>(o.cell)];
  }

  out.value = pairwise_sum(terms);
  out.gradient.log_alpha = pairwise_sum(d_alpha_terms);
  out.gradient.log_lambda = pairwise_sum(d_lambda_terms);
  for (int k = 0; k < obs.n_datasets; ++k) {
    out.gradient.eps(k) = pairwise_sum(d_eps_terms[static_cast<std::size_t>(k)]);
  }
  return out;
}

}  // namespace lcrecon
