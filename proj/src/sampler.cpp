#include "lcrecon/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "lcrecon/error.hpp"
#include "lcrecon/transforms.hpp"

namespace lcrecon {

// ---- layout -------------------------------------------------------------------

Index LatentLayout::log_alpha_index() const {
  if (!move_concentration) return -1;
  return eps_offset() + (move_offsets ? n_datasets : 0);
}

Index LatentLayout::log_lambda_index() const {
  if (!move_concentration) return -1;
  return log_alpha_index() + 1;
}

Index LatentLayout::dimension() const {
  return 3 * n_cells + n_beta + (move_offsets ? n_datasets : 0) +
         (move_concentration ? 2 : 0);
}

Eigen::VectorXd LatentLayout::pack(const LatentState& state) const {
  Eigen::VectorXd theta(dimension());
  for (int f = 0; f < kFields; ++f) {
    theta.segment(f * n_cells, n_cells) = state.eta.row(f).transpose();
  }
  theta.segment(3 * n_cells, n_beta) = state.beta;
  if (move_offsets) theta.segment(eps_offset(), n_datasets) = state.eps;
  if (move_concentration) {
    theta(log_alpha_index()) = state.log_alpha;
    theta(log_lambda_index()) = state.log_lambda;
  }
  return theta;
}

LatentState LatentLayout::unpack(const Eigen::VectorXd& theta,
                                 const LatentState& base) const {
  if (theta.size() != dimension()) throw InvalidArgument("unpack: wrong vector size");
  LatentState s = base;
  s.eta.resize(3, n_cells);
  for (int f = 0; f < kFields; ++f) {
    s.eta.row(f) = theta.segment(f * n_cells, n_cells).transpose();
  }
  s.beta = theta.segment(3 * n_cells, n_beta);
  if (move_offsets) s.eps = theta.segment(eps_offset(), n_datasets);
  if (move_concentration) {
    s.log_alpha = theta(log_alpha_index());
    s.log_lambda = theta(log_lambda_index());
  }
  return s;
}

// ---- target -------------------------------------------------------------------

LatentTarget::LatentTarget(LatentLayout layout, const PriorContext& prior,
                           const ObservationSet& obs, LatentState base,
                           LikelihoodAudit* audit)
    : layout_(layout), prior_(&prior), obs_(&obs), base_(std::move(base)), audit_(audit) {}

double LatentTarget::evaluate(const Eigen::VectorXd& theta,
                              Eigen::VectorXd& gradient) const {
  const LatentState state = unpack(theta);
  const LogDensity lik = total_loglik(state, *obs_, audit_);
  const LogDensity pri = log_prior(state, *prior_);
  LatentState g = lik.gradient;
  g.eta += pri.gradient.eta;
  g.beta += pri.gradient.beta;
  g.eps += pri.gradient.eps;
  g.log_alpha += pri.gradient.log_alpha;
  g.log_lambda += pri.gradient.log_lambda;
  gradient = layout_.pack(g);
  return lik.value + pri.value;
}

// ---- metric -------------------------------------------------------------------

namespace {

class SymmetricAssembler {
 public:
  explicit SymmetricAssembler(Index dim) : dim_(dim) {}

  void add(Index i, Index j, double v) {
    if (i < 0 || j < 0 || v == 0.0) return;
    triplets_.emplace_back(i, j, v);
    if (i != j) triplets_.emplace_back(j, i, v);
  }

  Eigen::SparseMatrix<double> build() const {
    Eigen::SparseMatrix<double> m(dim_, dim_);
    m.setFromTriplets(triplets_.begin(), triplets_.end());
    m.makeCompressed();
    return m;
  }

  std::vector<Eigen::Triplet<double>>& raw() { return triplets_; }

 private:
  Index dim_;
  std::vector<Eigen::Triplet<double>> triplets_;
};

Factorization factorize_metric(const Eigen::SparseMatrix<double>& p, const Factorization* like) {
  try {
    return like ? Factorization(p, *like) : Factorization(p);
  } catch (const NumericError&) {
    // Scale-aware jitter; only reached when the Fisher term is near-singular.
    Eigen::SparseMatrix<double> jittered = p;
    const double scale = std::max(1e-12, p.diagonal().cwiseAbs().maxCoeff());
    for (Index i = 0; i < p.rows(); ++i) jittered.coeffRef(i, i) += 1e-10 * scale;
    return Factorization(jittered);
  }
}

}  // namespace

MalaPreconditioner::MalaPreconditioner(const Eigen::SparseMatrix<double>& precision,
                                       const MalaPreconditioner* like)
    : precision_(precision), factor_(factorize_metric(precision, like ? &like->factor_ : nullptr)) {}

static Eigen::SparseMatrix<double> assemble_metric(const LatentTarget& target,
                                                   const LatentState& at) {
  const LatentLayout& lay = target.layout();
  const PriorContext& prior = target.prior();
  const ModelDesign& design = *prior.design;
  const ObservationSet& obs = target.observations();
  const Index n = lay.n_cells;
  const Eigen::Matrix3d& sinv = prior.sigma_inv;
  const Eigen::SparseMatrix<double>& q = prior.q.matrix;

  SymmetricAssembler asmb(lay.dimension());
  asmb.raw().reserve(static_cast<std::size_t>(q.nonZeros()) * 9 + 16 * static_cast<std::size_t>(n));

  // Sigma^-1 (x) Q on eta (full symmetric storage: add one entry per pair).
  for (Index col = 0; col < q.outerSize(); ++col) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(q, col); it; ++it) {
      for (int f = 0; f < kFields; ++f) {
        for (int g = 0; g < kFields; ++g) {
          asmb.raw().emplace_back(lay.eta_index(f, it.row()), lay.eta_index(g, it.col()),
                                  sinv(f, g) * it.value());
        }
      }
    }
  }

  // Coupling through X = eta - B beta: -P B and B^T P B.
  const Eigen::MatrixXd qd = q * design.design();
  const Eigen::MatrixXd dqd = design.design().transpose() * qd;
  const Index beta0 = 3 * n;
  for (int f = 0; f < kFields; ++f) {
    Index pos_f = design.beta_offset(f);
    for (Index col_f : design.field_columns(f)) {
      for (int g = 0; g < kFields; ++g) {
        if (sinv(g, f) == 0.0) continue;
        for (Index t = 0; t < n; ++t) {
          asmb.add(lay.eta_index(g, t), beta0 + pos_f, -sinv(g, f) * qd(t, col_f));
        }
        Index pos_g = design.beta_offset(g);
        for (Index col_g : design.field_columns(g)) {
          if (pos_g >= pos_f) {
            asmb.add(beta0 + pos_f, beta0 + pos_g, sinv(f, g) * dqd(col_f, col_g));
          }
          ++pos_g;
        }
      }
      ++pos_f;
    }
  }
  const auto& hs = prior.hyper.horseshoe;
  for (std::size_t gi = 0; gi < design.groups().size(); ++gi) {
    const double scale = hs.phi * hs.gamma(static_cast<Index>(gi));
    for (Index pos : design.groups()[gi]) asmb.add(beta0 + pos, beta0 + pos, 1.0 / (scale * scale));
  }

  const Index eps0 = lay.move_offsets ? lay.eps_offset() : -1;
  if (lay.move_offsets) {
    for (Index k = 0; k < lay.n_datasets; ++k) asmb.add(eps0 + k, eps0 + k, prior.hyper.tau_eps);
  }

  const Index ia = lay.log_alpha_index();
  const Index il = lay.log_lambda_index();
  const double alpha = std::exp(at.log_alpha);
  const double lambda = std::exp(at.log_lambda);
  if (lay.move_concentration) {
    asmb.add(ia, ia, prior.constants.alpha_rate * alpha);
    asmb.add(il, il, prior.constants.lambda_rate * lambda);
  }

  // Expected Fisher information of the Dirichlet terms in
  // (log alpha, eta_L1, eta_L2, eta_H) at each observed cell.
  for (const auto& o : obs.lcc) {
    const auto jac = link_jacobians<double>(at.eta.col(o.cell));
    const Eigen::Vector3d z = jac.cover.unaryExpr([](double v) { return clamp_interior(v); });
    const Eigen::Matrix3d info = dirichlet_fisher_shape(alpha, z);
    Eigen::Matrix<double, 3, 4> ja;
    ja.col(0) = alpha * z;
    ja.rightCols<3>() = alpha * jac.d_cover;
    const Eigen::Matrix4d fisher = ja.transpose() * info * ja;
    const std::array<Index, 4> idx{lay.move_concentration ? ia : -1,
                                   lay.eta_index(kEtaL1, o.cell),
                                   lay.eta_index(kEtaL2, o.cell),
                                   lay.eta_index(kEtaH, o.cell)};
    for (int r = 0; r < 4; ++r) {
      for (int c = r; c < 4; ++c) asmb.add(idx[static_cast<std::size_t>(r)], idx[static_cast<std::size_t>(c)], fisher(r, c));
    }
  }

  // Beta terms in (log lambda, eta_H, eps_k).
  for (const auto& o : obs.alcc) {
    const double raw_p = logit_inverse(at.eta(kEtaH, o.cell) + at.eps(o.dataset));
    const double p = clamp_interior(raw_p);
    const Eigen::Matrix2d info = beta_fisher(lambda, p);
    const double dl = lambda;
    const double dp = raw_p * (1.0 - raw_p);
    const double f_ll = dl * dl * info(0, 0);
    const double f_lp = dl * dp * info(0, 1);
    const double f_pp = dp * dp * info(1, 1);
    const Index ih = lay.eta_index(kEtaH, o.cell);
    const Index ie = lay.move_offsets ? eps0 + o.dataset : -1;
    if (lay.move_concentration) {
      asmb.add(il, il, f_ll);
      asmb.add(il, ih, f_lp);
      asmb.add(il, ie, f_lp);
    }
    asmb.add(ih, ih, f_pp);
    asmb.add(ih, ie, f_pp);
    asmb.add(ie, ie, f_pp);
  }
  return asmb.build();
}

MalaPreconditioner::MalaPreconditioner(const LatentTarget& target, const LatentState& at,
                                       const MalaPreconditioner* like)
    : MalaPreconditioner(assemble_metric(target, at), like) {}

// ---- MALA ---------------------------------------------------------------------

MalaPoint make_mala_point(const LatentTarget& target, const MalaPreconditioner& metric,
                          Eigen::VectorXd theta) {
  MalaPoint pt;
  pt.theta = std::move(theta);
  pt.log_density = target.evaluate(pt.theta, pt.gradient);
  for (Index i = 0; i < pt.gradient.size(); ++i) {
    if (!std::isfinite(pt.gradient(i))) {
      std::ostringstream msg;
      msg << "non-finite gradient at latent coordinate " << i;
      throw NumericError(msg.str(), i);
    }
  }
  if (!std::isfinite(pt.log_density)) throw NumericError("non-finite latent log-density");
  pt.drift = metric.apply_inverse(pt.gradient);
  return pt;
}

MalaOutcome mala_step(const LatentTarget& target, const MalaPreconditioner& metric,
                      double log_step, MalaPoint& current, Rng& rng) {
  const double h = std::exp(log_step);
  const Index dim = current.theta.size();
  const Eigen::VectorXd xi = standard_normal_vector(dim, rng);
  const double log_u = std::log(uniform01(rng));

  Eigen::VectorXd theta = current.theta + 0.5 * h * current.drift +
                          std::sqrt(h) * metric.correlated_noise(xi);
  MalaOutcome outcome;
  MalaPoint proposal;
  proposal.theta = std::move(theta);
  proposal.log_density = target.evaluate(proposal.theta, proposal.gradient);
  if (!std::isfinite(proposal.log_density) || !proposal.gradient.allFinite()) {
    outcome.log_accept_ratio = -std::numeric_limits<double>::infinity();
    return outcome;
  }
  proposal.drift = metric.apply_inverse(proposal.gradient);

  // Forward residual is sqrt(h) M^{1/2} xi, whose metric norm is h |xi|^2.
  const double log_q_forward = -0.5 * xi.squaredNorm();
  const Eigen::VectorXd back = current.theta - proposal.theta - 0.5 * h * proposal.drift;
  const double log_q_backward = -0.5 / h * metric.norm_sq(back);
  outcome.log_accept_ratio =
      proposal.log_density - current.log_density + log_q_backward - log_q_forward;
  if (log_u < outcome.log_accept_ratio) {
    outcome.accepted = true;
    current = std::move(proposal);
  }
  return outcome;
}

// ---- kappa --------------------------------------------------------------------

KappaState make_kappa_state(double kappa, const PrecisionFactory& factory,
                            const FieldMatrix& x, const Eigen::Matrix3d& sigma,
                            const PriorConstants& constants) {
  auto q = factory.precision(kappa);
  Factorization factor(q.matrix, kappa);
  const double lp = kappa_logpost(factor, q, x, sigma, constants);
  return KappaState{std::move(q), std::move(factor), lp};
}

KappaOutcome rw_kappa_step(KappaState& state, const PrecisionFactory& factory,
                           const FieldMatrix& x, const Eigen::Matrix3d& sigma,
                           const PriorConstants& constants, double log_step, double xi,
                           double log_u) {
  KappaOutcome outcome;
  // X or Sigma may have moved since the last call.
  state.log_post = kappa_logpost(state.factor, state.q, x, sigma, constants);
  if (xi == 0.0) {
    outcome.accepted = true;
    return outcome;
  }
  const double proposal = state.q.kappa * std::exp(std::exp(log_step) * xi);
  std::optional<KappaState> next;
  try {
    next.emplace(make_kappa_state(proposal, factory, x, sigma, constants));
  } catch (const NumericError&) {
    outcome.factorization_failed = true;
    return outcome;
  } catch (const InvalidArgument&) {
    // kappa under/overflowed to 0 or inf
    outcome.factorization_failed = true;
    return outcome;
  }
  if (std::isfinite(next->log_post) && log_u < next->log_post - state.log_post) {
    state = std::move(*next);
    outcome.accepted = true;
  }
  return outcome;
}

KappaOutcome rw_kappa_step(KappaState& state, const PrecisionFactory& factory,
                           const FieldMatrix& x, const Eigen::Matrix3d& sigma,
                           const PriorConstants& constants, double log_step, Rng& rng) {
  const double xi = standard_normal(rng);
  const double log_u = std::log(uniform01(rng));
  return rw_kappa_step(state, factory, x, sigma, constants, log_step, xi, log_u);
}

// ---- adaptation -----------------------------------------------------------------

AdaptState adapt_step(AdaptState adapt, Block block, bool accepted,
                      const AdaptSchedule& schedule) {
  if (adapt.frozen) return adapt;
  const double it = static_cast<double>(std::max<Index>(adapt.iteration, 1));
  const double rate = schedule.c * std::pow(it, -schedule.gamma);
  const double hit = accepted ? 1.0 : 0.0;
  if (block == Block::Mala) {
    adapt.log_step_mala += rate * (hit - adapt.target_mala);
  } else {
    adapt.log_step_rw += rate * (hit - adapt.target_rw);
  }
  return adapt;
}

// ---- initialisation -------------------------------------------------------------

namespace {

// Ridge-stabilised least squares of y on the given design columns.
Eigen::VectorXd least_squares(const ModelDesign& design, int field,
                              const std::vector<Index>& cells, const std::vector<double>& y) {
  const auto& cols = design.field_columns(field);
  const Index p = static_cast<Index>(cols.size());
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  if (cells.empty() || p == 0) return beta;
  Eigen::MatrixXd x(static_cast<Index>(cells.size()), p);
  Eigen::VectorXd rhs(static_cast<Index>(cells.size()));
  for (std::size_t i = 0; i < cells.size(); ++i) {
    for (Index j = 0; j < p; ++j) {
      x(static_cast<Index>(i), j) = design.design()(cells[i], cols[static_cast<std::size_t>(j)]);
    }
    rhs(static_cast<Index>(i)) = y[i];
  }
  Eigen::MatrixXd xtx = x.transpose() * x;
  xtx.diagonal().array() += 1e-6;
  beta = xtx.ldlt().solve(x.transpose() * rhs);
  return beta;
}

void fill_field(const ModelDesign& design, int field, const std::vector<Index>& cells,
                const std::vector<double>& y, LatentState& state) {
  const Eigen::VectorXd b = least_squares(design, field, cells, y);
  state.beta.segment(design.beta_offset(field), b.size()) = b;
  const auto& cols = design.field_columns(field);
  for (Index s = 0; s < design.n_cells(); ++s) {
    double v = 0.0;
    for (std::size_t j = 0; j < cols.size(); ++j) v += b(static_cast<Index>(j)) * design.design()(s, cols[j]);
    state.eta(field, s) = v;
  }
  for (std::size_t i = 0; i < cells.size(); ++i) state.eta(field, cells[i]) = y[i];
}

}  // namespace

LatentState initial_latent_state(const ModelDesign& design, const ObservationSet& obs) {
  const Index n = design.n_cells();
  LatentState state = LatentState::zeros(n, design.n_beta(), design.n_datasets());
  state.log_alpha = std::log(15.0);
  state.log_lambda = std::log(15.0);

  // eta_H from the across-dataset mean ALCC value per cell.
  std::vector<double> h_sum(static_cast<std::size_t>(n), 0.0);
  std::vector<int> h_count(static_cast<std::size_t>(n), 0);
  for (const auto& o : obs.alcc) {
    h_sum[static_cast<std::size_t>(o.cell)] += o.value;
    ++h_count[static_cast<std::size_t>(o.cell)];
  }
  std::vector<Index> h_cells;
  std::vector<double> h_y;
  for (Index s = 0; s < n; ++s) {
    const auto i = static_cast<std::size_t>(s);
    if (h_count[i] == 0) continue;
    h_cells.push_back(s);
    h_y.push_back(logit(std::clamp(h_sum[i] / h_count[i], 1e-4, 1.0 - 1e-4)));
  }
  fill_field(design, kEtaH, h_cells, h_y, state);

  // eta_L from the LCC composition with the human share removed.
  std::vector<Index> l_cells;
  std::vector<double> l_y1;
  std::vector<double> l_y2;
  for (const auto& o : obs.lcc) {
    const double ph = logit_inverse(state.eta(kEtaH, o.cell));
    Eigen::Vector3d p(o.cover(0) / (1.0 - ph), o.cover(1) / (1.0 - ph), 0.0);
    p(0) = std::max(p(0), 0.01);
    p(1) = std::max(p(1), 0.01);
    p(2) = std::max(1.0 - p(0) - p(1), 0.01);
    p /= p.sum();
    const Eigen::Vector2d y = alr_forward<double>(p);
    l_cells.push_back(o.cell);
    l_y1.push_back(y(0));
    l_y2.push_back(y(1));
  }
  fill_field(design, kEtaL1, l_cells, l_y1, state);
  fill_field(design, kEtaL2, l_cells, l_y2, state);
  return state;
}

HyperState initial_hyper_state(const ModelDesign& design) {
  HyperState h;
  h.kappa = 1.0;
  h.sigma = Eigen::Matrix3d::Identity();
  h.tau_eps = 1.0;
  const Index g = static_cast<Index>(design.groups().size());
  h.horseshoe.gamma = Eigen::VectorXd::Ones(g);
  h.horseshoe.nu = Eigen::VectorXd::Ones(g);
  h.horseshoe.phi = 1.0;
  h.horseshoe.xi = 1.0;
  return h;
}

// ---- fingerprint ------------------------------------------------------------------

namespace {

class Fnv1a {
 public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      hash_ ^= p[i];
      hash_ *= 1099511628211ULL;
    }
  }
  template <typename T>
  void value(const T& v) { bytes(&v, sizeof(T)); }
  void text(const std::string& s) {
    value(s.size());
    bytes(s.data(), s.size());
  }
  std::uint64_t digest() const { return hash_; }

 private:
  std::uint64_t hash_ = 14695981039346656037ULL;
};

}  // namespace

std::uint64_t config_fingerprint(const SamplerConfig& c, const PriorConstants& p,
                                 const ModelDesign& design) {
  Fnv1a h;
  h.value(c.iterations);
  h.value(c.burn_in);
  h.value(c.thin);
  h.value(c.precond_interval);
  h.value(c.precond_fraction);
  h.value(c.schedule.c);
  h.value(c.schedule.gamma);
  h.value(c.target_mala);
  h.value(c.target_rw);
  h.value(c.initial_step_mala.value_or(-1.0));
  h.value(c.initial_step_rw);
  for (bool b : {c.update.kappa, c.update.sigma, c.update.tau_eps, c.update.horseshoe,
                 c.update.concentration, c.update.offsets}) {
    h.value(static_cast<std::uint8_t>(b));
  }
  for (double v : {p.alpha_shape, p.alpha_rate, p.lambda_shape, p.lambda_rate, p.tau_shape,
                   p.tau_rate, p.kappa_shape, p.kappa_rate, p.sigma_df}) {
    h.value(v);
  }
  for (Index i = 0; i < 9; ++i) h.value(p.sigma_scale(i));
  h.value(design.lattice().n_rows);
  h.value(design.lattice().n_cols);
  h.value(design.n_datasets());
  for (const auto& terms : design.field_terms()) {
    h.value(terms.size());
    for (const auto& t : terms) h.text(t);
  }
  return h.digest();
}

// ---- chain ----------------------------------------------------------------------

std::vector<const ChainSample*> ChainOutput::posterior_samples() const {
  std::vector<const ChainSample*> out;
  for (const auto& s : samples) {
    if (s.iteration > config.burn_in) out.push_back(&s);
  }
  return out;
}

namespace {

std::string serialize_rng(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

double joint_log_posterior(const LatentState& latent, const PriorContext& ctx,
                           const ObservationSet& obs) {
  return total_loglik(latent, obs).value + log_prior(latent, ctx).value +
         hyper_log_prior(ctx.hyper, ctx.constants);
}

}  // namespace

ChainOutput run_chain(const ChainInputs& inputs, const SamplerConfig& config,
                      std::uint64_t seed) {
  if (!inputs.design || !inputs.obs) throw InvalidArgument("run_chain: missing design or data");
  if (config.iterations < 0 || config.burn_in < 0 || config.thin < 1) {
    throw InvalidArgument("run_chain: iterations/burn_in must be >= 0 and thin >= 1");
  }
  if (config.precond_interval < 1) throw InvalidArgument("run_chain: precond_interval must be >= 1");
  if (!(config.schedule.gamma > 0.5 && config.schedule.gamma <= 1.0)) {
    throw InvalidArgument("run_chain: adaptation exponent must lie in (0.5, 1]");
  }
  const ModelDesign& design = *inputs.design;
  const ObservationSet& obs = *inputs.obs;
  if (obs.n_datasets != design.n_datasets()) {
    throw InvalidArgument("run_chain: dataset count differs between data and design");
  }
  obs.validate(design.n_cells());

  ChainOutput out;
  out.seed = seed;
  out.config = config;
  out.config_fingerprint = config_fingerprint(config, inputs.priors, design);
  out.n_rows = design.lattice().n_rows;
  out.n_cols = design.lattice().n_cols;
  out.n_datasets = design.n_datasets();
  out.field_terms = design.field_terms();
  for (Index col : design.group_columns()) {
    out.group_names.push_back(design.column_names()[static_cast<std::size_t>(col)]);
  }

  Rng rng(seed);
  LatentState latent = inputs.initial_latent.value_or(initial_latent_state(design, obs));
  HyperState hyper = inputs.initial_hyper.value_or(initial_hyper_state(design));
  if (inputs.audit) inputs.audit->reset(design.n_cells());

  LatentLayout layout;
  layout.n_cells = design.n_cells();
  layout.n_beta = design.n_beta();
  layout.n_datasets = design.n_datasets();
  layout.move_concentration = config.update.concentration;
  layout.move_offsets = config.update.offsets;

  const PrecisionFactory factory(design.lattice());
  KappaState kappa_state = make_kappa_state(
      hyper.kappa, factory, latent.eta - design.mean_field(latent.beta), hyper.sigma,
      inputs.priors);

  AdaptState adapt;
  adapt.target_mala = config.target_mala;
  adapt.target_rw = config.target_rw;
  adapt.log_step_mala = std::log(config.initial_step_mala.value_or(
      std::pow(static_cast<double>(layout.dimension()), -1.0 / 3.0)));
  adapt.log_step_rw = std::log(config.initial_step_rw);
  adapt.frozen = config.burn_in == 0;

  const Index refresh_until = static_cast<Index>(
      std::floor(config.precond_fraction * static_cast<double>(config.burn_in)));

  auto record = [&](Index iteration) {
    const PriorContext ctx(design, inputs.priors, hyper, kappa_state.q,
                           kappa_state.factor.logdet());
    out.samples.push_back(
        ChainSample{iteration, latent, hyper, joint_log_posterior(latent, ctx, obs)});
  };
  record(0);

  const auto reserve = static_cast<std::size_t>(config.iterations);
  out.mala_accepted.reserve(reserve);
  out.rw_accepted.reserve(reserve);
  out.log_step_mala.reserve(reserve);
  out.log_step_rw.reserve(reserve);

  // The metric's Fisher part is evaluated at an anchor state refreshed during
  // early burn-in; its prior part follows the current hyper-parameters, which
  // are fixed while block 1 runs.
  LatentState anchor = latent;
  std::optional<MalaPreconditioner> metric;
  Index t = 0;
  try {
    for (t = 1; t <= config.iterations; ++t) {
      const bool in_burn_in = t <= config.burn_in;
      adapt.iteration = t;
      if (!in_burn_in) adapt.frozen = true;

      // Block 1: joint MALA over (eta, beta, eps, log alpha, log lambda).
      {
        const PriorContext ctx(design, inputs.priors, hyper, kappa_state.q,
                               kappa_state.factor.logdet());
        const LatentTarget target(layout, ctx, obs, latent, inputs.audit);
        if (in_burn_in && t <= refresh_until && t % config.precond_interval == 0) anchor = latent;
        metric = MalaPreconditioner(target, anchor, metric ? &*metric : nullptr);
        MalaPoint point = make_mala_point(target, *metric, layout.pack(latent));
        const MalaOutcome mo = mala_step(target, *metric, adapt.log_step_mala, point, rng);
        if (mo.accepted) latent = target.unpack(point.theta);
        ++out.mala.proposed;
        out.mala.accepted += mo.accepted;
        if (!in_burn_in) {
          ++out.mala.proposed_after_burn_in;
          out.mala.accepted_after_burn_in += mo.accepted;
        }
        out.mala_accepted.push_back(mo.accepted);
        adapt = adapt_step(adapt, Block::Mala, mo.accepted, config.schedule);
      }

      // Block 2: kappa random walk on the log scale, then Sigma | kappa.
      const FieldMatrix x = latent.eta - design.mean_field(latent.beta);
      bool rw_accepted = false;
      if (config.update.kappa) {
        const KappaOutcome ko = rw_kappa_step(kappa_state, factory, x, hyper.sigma,
                                              inputs.priors, adapt.log_step_rw, rng);
        rw_accepted = ko.accepted;
        hyper.kappa = kappa_state.q.kappa;
        ++out.rw.proposed;
        out.rw.accepted += ko.accepted;
        out.rw.failures += ko.factorization_failed;
        if (!in_burn_in) {
          ++out.rw.proposed_after_burn_in;
          out.rw.accepted_after_burn_in += ko.accepted;
        }
        adapt = adapt_step(adapt, Block::RandomWalk, ko.accepted, config.schedule);
      }
      out.rw_accepted.push_back(rw_accepted);
      if (config.update.sigma) hyper.sigma = gibbs_sigma(x, kappa_state.q, inputs.priors, rng);

      // Block 3: conjugate tau_eps and horseshoe scales.
      if (config.update.tau_eps) hyper.tau_eps = gibbs_tau_eps(latent.eps, inputs.priors, rng);
      if (config.update.horseshoe && !design.groups().empty()) {
        gibbs_horseshoe(latent.beta, design.groups(), hyper.horseshoe, rng);
      }

      out.log_step_mala.push_back(adapt.log_step_mala);
      out.log_step_rw.push_back(adapt.log_step_rw);
      out.completed_iterations = t;
      if (t > config.burn_in && (t - config.burn_in) % config.thin == 0) record(t);
    }
  } catch (const std::exception& e) {
    out.rng_state = serialize_rng(rng);
    const bool numeric = dynamic_cast<const NumericError*>(&e) != nullptr;
    std::ostringstream msg;
    msg << "chain aborted at iteration " << t << ": " << e.what();
    throw ChainAborted(msg.str(), std::move(out), numeric);
  }
  out.rng_state = serialize_rng(rng);
  return out;
}

}  // namespace lcrecon
