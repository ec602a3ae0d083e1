#include "lcrecon/priors.hpp"

#include <numbers>

#include "lcrecon/error.hpp"

namespace lcrecon {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

double inv_gamma_logpdf(double x, double shape, double scale) {
  return shape * std::log(scale) - std::lgamma(shape) - (shape + 1.0) * std::log(x) -
         scale / x;
}

double log_det_spd3(const Eigen::Matrix3d& m, const char* what) {
  Eigen::LLT<Eigen::Matrix3d> llt(m);
  if (llt.info() != Eigen::Success) {
    throw NumericError(std::string(what) + ": matrix is not positive definite");
  }
  return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

}  // namespace

double gamma_logpdf(double x, double shape, double rate) {
  if (!(x > 0.0)) throw InvalidArgument("gamma_logpdf: x must be positive");
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) -
         rate * x;
}

PriorContext::PriorContext(const ModelDesign& d, const PriorConstants& c,
                           const HyperState& h, const SparsePrecision<double>& qm,
                           double ld_q)
    : design(&d), constants(c), hyper(h), q(qm), logdet_q(ld_q) {
  Eigen::LLT<Eigen::Matrix3d> llt(h.sigma);
  if (llt.info() != Eigen::Success) {
    throw NumericError("prior: Sigma is not positive definite");
  }
  sigma_inv = llt.solve(Eigen::Matrix3d::Identity());
  logdet_sigma = log_det_spd3(h.sigma, "prior");
}

LogDensity log_prior(const LatentState& state, const PriorContext& ctx) {
  const ModelDesign& design = *ctx.design;
  const Index n = design.n_cells();
  const HyperState& h = ctx.hyper;
  const PriorConstants& c = ctx.constants;
  if (state.eta.cols() != n || state.beta.size() != design.n_beta() ||
      state.eps.size() != design.n_datasets()) {
    throw InvalidArgument("log_prior: state dimensions do not match the design");
  }
  if (!(h.tau_eps > 0.0) || !(h.horseshoe.phi > 0.0) ||
      !(h.horseshoe.gamma.array() > 0.0).all() ||
      h.horseshoe.gamma.size() != static_cast<Index>(design.groups().size())) {
    throw InvalidArgument("log_prior: hyper-parameters violate positivity");
  }

  LogDensity out;
  out.gradient = LatentState::zeros(n, design.n_beta(), design.n_datasets());

  // Separable GMRF on X = eta - B beta.
  const FieldMatrix x = state.eta - design.mean_field(state.beta);
  const FieldMatrix xq = x * ctx.q.matrix;  // Q symmetric
  const double quad = ctx.sigma_inv.cwiseProduct(xq * x.transpose()).sum();
  double value = 1.5 * ctx.logdet_q - 0.5 * static_cast<double>(n) * ctx.logdet_sigma -
                 1.5 * static_cast<double>(n) * kLog2Pi - 0.5 * quad;
  const FieldMatrix g_x = -(ctx.sigma_inv * xq);
  out.gradient.eta = g_x;
  out.gradient.beta = -design.mean_field_adjoint(g_x);

  // beta | gamma, phi
  const double phi2 = h.horseshoe.phi * h.horseshoe.phi;
  for (std::size_t g = 0; g < design.groups().size(); ++g) {
    const double gam = h.horseshoe.gamma(static_cast<Index>(g));
    const double var = phi2 * gam * gam;
    for (Index pos : design.groups()[g]) {
      const double b = state.beta(pos);
      value += -0.5 * (kLog2Pi + std::log(var)) - 0.5 * b * b / var;
      out.gradient.beta(pos) -= b / var;
    }
  }

  // eps | tau
  for (Index k = 0; k < state.eps.size(); ++k) {
    const double e = state.eps(k);
    value += 0.5 * (std::log(h.tau_eps) - kLog2Pi) - 0.5 * h.tau_eps * e * e;
    out.gradient.eps(k) = -h.tau_eps * e;
  }

  // Gamma priors on alpha, lambda with the log-scale Jacobian.
  const double alpha = std::exp(state.log_alpha);
  const double lambda = std::exp(state.log_lambda);
  value += gamma_logpdf(alpha, c.alpha_shape, c.alpha_rate) + state.log_alpha;
  value += gamma_logpdf(lambda, c.lambda_shape, c.lambda_rate) + state.log_lambda;
  out.gradient.log_alpha = c.alpha_shape - c.alpha_rate * alpha;
  out.gradient.log_lambda = c.lambda_shape - c.lambda_rate * lambda;

  out.value = value;
  return out;
}

Eigen::Matrix3d gibbs_sigma(const FieldMatrix& x, const SparsePrecision<double>& q,
                            const PriorConstants& constants, Rng& rng) {
  Eigen::Matrix3d scale = constants.sigma_scale;
  double df = constants.sigma_df;
  if (x.cols() > 0) {
    if (x.cols() != q.dimension()) throw InvalidArgument("gibbs_sigma: dimension mismatch");
    const Eigen::Matrix3d xqx = x * (q.matrix * x.transpose());
    scale += 0.5 * (xqx + xqx.transpose());
    df += static_cast<double>(x.cols());
  }
  Eigen::LLT<Eigen::Matrix3d> llt(scale);
  if (llt.info() != Eigen::Success) {
    throw NumericError("gibbs_sigma: posterior scale matrix is not positive definite");
  }
  Eigen::Matrix3d sigma = inverse_wishart<3>(scale, df, rng);
  if (Eigen::LLT<Eigen::Matrix3d>(sigma).info() != Eigen::Success) {
    throw NumericError("gibbs_sigma: sampled Sigma is not positive definite");
  }
  return sigma;
}

double gibbs_tau_eps(const Eigen::VectorXd& eps, const PriorConstants& constants,
                     Rng& rng) {
  if (eps.size() < 1) throw InvalidArgument("gibbs_tau_eps: need at least one offset");
  const double shape = constants.tau_shape + 0.5 * static_cast<double>(eps.size());
  const double rate = constants.tau_rate + 0.5 * eps.squaredNorm();
  return gamma_shape_rate(shape, rate, rng);
}

void gibbs_horseshoe(const Eigen::VectorXd& beta,
                     const std::vector<std::vector<Index>>& groups,
                     HorseshoeState& hs, Rng& rng) {
  const Index n_groups = static_cast<Index>(groups.size());
  if (hs.gamma.size() != n_groups || hs.nu.size() != n_groups) {
    throw InvalidArgument("gibbs_horseshoe: scale vectors do not match groups");
  }
  if (!(hs.phi > 0.0) || !(hs.xi > 0.0) || !(hs.gamma.array() > 0.0).all() ||
      !(hs.nu.array() > 0.0).all()) {
    throw InvalidArgument("gibbs_horseshoe: scales must be positive");
  }
  const double phi2 = hs.phi * hs.phi;
  Eigen::VectorXd sum_sq(n_groups);
  double total_m = 0.0;
  for (Index g = 0; g < n_groups; ++g) {
    double ss = 0.0;
    for (Index pos : groups[static_cast<std::size_t>(g)]) ss += beta(pos) * beta(pos);
    sum_sq(g) = ss;
    const double m = static_cast<double>(groups[static_cast<std::size_t>(g)].size());
    total_m += m;
    const double gamma2 =
        inv_gamma(0.5 * (1.0 + m), 1.0 / hs.nu(g) + ss / (2.0 * phi2), rng);
    hs.gamma(g) = std::sqrt(gamma2);
    hs.nu(g) = inv_gamma(1.0, 1.0 + 1.0 / gamma2, rng);
  }
  double scaled = 0.0;
  for (Index g = 0; g < n_groups; ++g) scaled += sum_sq(g) / (hs.gamma(g) * hs.gamma(g));
  const double new_phi2 = inv_gamma(0.5 * (1.0 + total_m), 1.0 / hs.xi + 0.5 * scaled, rng);
  hs.phi = std::sqrt(new_phi2);
  hs.xi = inv_gamma(1.0, 1.0 + 1.0 / new_phi2, rng);
}

double kappa_logpost(const Factorization& factor, const SparsePrecision<double>& q,
                     const FieldMatrix& x, const Eigen::Matrix3d& sigma,
                     const PriorConstants& constants) {
  KroneckerField<double> field{sigma, q};
  return 1.5 * factor.logdet() - 0.5 * kron_quadform(field, x) +
         gamma_logpdf(q.kappa, constants.kappa_shape, constants.kappa_rate) +
         std::log(q.kappa);
}

double kappa_logpost(double kappa, const PrecisionFactory& factory, const FieldMatrix& x,
                     const Eigen::Matrix3d& sigma, const PriorConstants& constants) {
  if (!(kappa > 0.0)) throw InvalidArgument("kappa_logpost: kappa must be positive");
  const auto q = factory.precision(kappa);
  const Factorization factor(q.matrix, kappa);
  return kappa_logpost(factor, q, x, sigma, constants);
}

double hyper_log_prior(const HyperState& hyper, const PriorConstants& c) {
  double value = gamma_logpdf(hyper.kappa, c.kappa_shape, c.kappa_rate) +
                 gamma_logpdf(hyper.tau_eps, c.tau_shape, c.tau_rate);
  // IW(S, df) for d = 3
  const double df = c.sigma_df;
  const double logdet_s = log_det_spd3(c.sigma_scale, "hyper prior");
  const double logdet_sigma = log_det_spd3(hyper.sigma, "hyper prior");
  const Eigen::Matrix3d sigma_inv = hyper.sigma.llt().solve(Eigen::Matrix3d::Identity());
  double log_multigamma = 3.0 / 2.0 * std::log(std::numbers::pi);  // d(d-1)/4 log pi
  for (int j = 0; j < 3; ++j) log_multigamma += std::lgamma(0.5 * (df - j));
  value += 0.5 * df * logdet_s - 0.5 * df * 3.0 * std::numbers::ln2 - log_multigamma -
           0.5 * (df + 4.0) * logdet_sigma - 0.5 * (c.sigma_scale * sigma_inv).trace();
  // gamma^2 | nu ~ IG(1/2, 1/nu), nu ~ IG(1/2, 1), same for phi^2 and xi.
  const auto& hs = hyper.horseshoe;
  for (Index g = 0; g < hs.gamma.size(); ++g) {
    value += inv_gamma_logpdf(hs.gamma(g) * hs.gamma(g), 0.5, 1.0 / hs.nu(g)) +
             inv_gamma_logpdf(hs.nu(g), 0.5, 1.0);
  }
  value += inv_gamma_logpdf(hs.phi * hs.phi, 0.5, 1.0 / hs.xi) +
           inv_gamma_logpdf(hs.xi, 0.5, 1.0);
  return value;
}

}  // namespace lcrecon
