#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lcrecon/lattice.hpp"
#include "lcrecon/likelihoods.hpp"
#include "lcrecon/model.hpp"
#include "lcrecon/priors.hpp"
#include "lcrecon/random.hpp"

namespace lcrecon {

// Which latent coordinates the MALA block moves, and where they live in the
// packed vector: eta field-major (all eta_L1, all eta_L2, all eta_H), then
// beta, eps, log alpha, log lambda.
struct LatentLayout {
  Index n_cells = 0;
  Index n_beta = 0;
  Index n_datasets = 0;
  bool move_concentration = true;
  bool move_offsets = true;

  Index eps_offset() const { return 3 * n_cells + n_beta; }
  Index log_alpha_index() const;
  Index log_lambda_index() const;
  Index dimension() const;

  Eigen::VectorXd pack(const LatentState& state) const;
  // Coordinates outside the layout are copied from `base`.
  LatentState unpack(const Eigen::VectorXd& theta, const LatentState& base) const;
  Index eta_index(int field, Index cell) const { return field * n_cells + cell; }
};

// Log-density of the latent block given hyper-parameters and data.
class LatentTarget {
 public:
  LatentTarget(LatentLayout layout, const PriorContext& prior, const ObservationSet& obs,
               LatentState base, LikelihoodAudit* audit = nullptr);

  const LatentLayout& layout() const { return layout_; }
  const PriorContext& prior() const { return *prior_; }
  const ObservationSet& observations() const { return *obs_; }
  const LatentState& base() const { return base_; }

  double evaluate(const Eigen::VectorXd& theta, Eigen::VectorXd& gradient) const;
  LatentState unpack(const Eigen::VectorXd& theta) const { return layout_.unpack(theta, base_); }

 private:
  LatentLayout layout_;
  const PriorContext* prior_;
  const ObservationSet* obs_;
  LatentState base_;
  LikelihoodAudit* audit_;
};

// MALA metric: the latent prior precision (Sigma^-1 (x) Q with the
// eta/beta coupling, horseshoe and tau terms) at the target's hyper-parameters
// plus the expected Fisher information of the observations at `at`. Passing
// `like` reuses its symbolic factorisation when the sparsity pattern matches.
class MalaPreconditioner {
 public:
  MalaPreconditioner(const LatentTarget& target, const LatentState& at,
                     const MalaPreconditioner* like = nullptr);
  explicit MalaPreconditioner(const Eigen::SparseMatrix<double>& precision,
                              const MalaPreconditioner* like = nullptr);

  const Eigen::SparseMatrix<double>& precision() const { return precision_; }
  Index dimension() const { return precision_.rows(); }
  Eigen::VectorXd apply_inverse(const Eigen::VectorXd& g) const { return factor_.solve(g); }
  Eigen::VectorXd correlated_noise(const Eigen::VectorXd& xi) const {
    return factor_.sample_from_standard(xi);
  }
  double norm_sq(const Eigen::VectorXd& d) const { return d.dot(precision_ * d); }

 private:
  Eigen::SparseMatrix<double> precision_;
  Factorization factor_;
};

struct MalaPoint {
  Eigen::VectorXd theta;
  double log_density = 0.0;
  Eigen::VectorXd gradient;
  Eigen::VectorXd drift;  // M * gradient
};

// Throws NumericError carrying the first non-finite gradient coordinate.
MalaPoint make_mala_point(const LatentTarget& target, const MalaPreconditioner& metric,
                          Eigen::VectorXd theta);

struct MalaOutcome {
  bool accepted = false;
  double log_accept_ratio = 0.0;
};

// theta' = theta + (h/2) M grad + sqrt(h) M^{1/2} xi, exact MH correction.
// `current` is replaced on acceptance and untouched otherwise.
MalaOutcome mala_step(const LatentTarget& target, const MalaPreconditioner& metric,
                      double log_step, MalaPoint& current, Rng& rng);

// ---- block 2: log-kappa random walk ----------------------------------------

struct KappaState {
  SparsePrecision<double> q;
  Factorization factor;
  double log_post = 0.0;
};

KappaState make_kappa_state(double kappa, const PrecisionFactory& factory,
                            const FieldMatrix& x, const Eigen::Matrix3d& sigma,
                            const PriorConstants& constants);

struct KappaOutcome {
  bool accepted = false;
  bool factorization_failed = false;
};

// log kappa' = log kappa + exp(log_step) * xi. On acceptance `state` holds the
// new Q and its factor; a proposal that fails to factorise is rejected.
KappaOutcome rw_kappa_step(KappaState& state, const PrecisionFactory& factory,
                           const FieldMatrix& x, const Eigen::Matrix3d& sigma,
                           const PriorConstants& constants, double log_step, double xi,
                           double log_u);
KappaOutcome rw_kappa_step(KappaState& state, const PrecisionFactory& factory,
                           const FieldMatrix& x, const Eigen::Matrix3d& sigma,
                           const PriorConstants& constants, double log_step, Rng& rng);

// ---- adaptation --------------------------------------------------------------

struct AdaptSchedule {
  double c = 1.0;
  double gamma = 0.7;  // in (0.5, 1]
};

struct AdaptState {
  double log_step_mala = 0.0;
  double log_step_rw = std::log(0.5);
  Index iteration = 0;  // completed adaptation updates
  double target_mala = 0.57;
  double target_rw = 0.40;
  bool frozen = false;
};

enum class Block { Mala, RandomWalk };

// Robbins-Monro: log_step += c * iter^-gamma * (1{accepted} - target).
// No-op once frozen.
AdaptState adapt_step(AdaptState adapt, Block block, bool accepted,
                      const AdaptSchedule& schedule);

// ---- chain ---------------------------------------------------------------------

struct UpdateMask {
  bool kappa = true;
  bool sigma = true;
  bool tau_eps = true;
  bool horseshoe = true;
  bool concentration = true;  // log alpha, log lambda inside MALA
  bool offsets = true;        // eps inside MALA
};

struct SamplerConfig {
  Index iterations = 100000;
  Index burn_in = 10000;
  Index thin = 10;
  // Metric refresh period during the first `precond_fraction` of burn-in.
  Index precond_interval = 250;
  double precond_fraction = 0.5;
  AdaptSchedule schedule;
  double target_mala = 0.57;
  double target_rw = 0.40;
  std::optional<double> initial_step_mala;  // default D^{-1/3}
  double initial_step_rw = 0.5;
  UpdateMask update;
};

struct ChainSample {
  Index iteration = 0;
  LatentState latent;
  HyperState hyper;
  double log_posterior = 0.0;
};

struct BlockStats {
  std::uint64_t proposed = 0;
  std::uint64_t accepted = 0;
  std::uint64_t proposed_after_burn_in = 0;
  std::uint64_t accepted_after_burn_in = 0;
  std::uint64_t failures = 0;

  double rate() const { return proposed ? double(accepted) / double(proposed) : 0.0; }
  double rate_after_burn_in() const {
    return proposed_after_burn_in
               ? double(accepted_after_burn_in) / double(proposed_after_burn_in)
               : 0.0;
  }
};

struct ChainOutput {
  std::uint64_t seed = 0;
  std::uint64_t config_fingerprint = 0;
  std::string rng_state;
  Index n_rows = 0;
  Index n_cols = 0;
  int n_datasets = 1;
  std::array<std::vector<std::string>, kFields> field_terms;
  std::vector<std::string> group_names;
  SamplerConfig config;
  Index completed_iterations = 0;
  std::vector<ChainSample> samples;  // iteration 0 is the initial state
  std::vector<std::uint8_t> mala_accepted;  // per iteration
  std::vector<std::uint8_t> rw_accepted;
  std::vector<double> log_step_mala;  // per iteration, after adaptation
  std::vector<double> log_step_rw;
  BlockStats mala;
  BlockStats rw;

  // Samples strictly after burn-in.
  std::vector<const ChainSample*> posterior_samples() const;
};

// Raised when a step fails mid-run; carries everything sampled so far.
class ChainAborted : public std::runtime_error {
 public:
  ChainAborted(const std::string& what, ChainOutput partial, bool numeric)
      : std::runtime_error(what), partial_(std::move(partial)), numeric_(numeric) {}
  const ChainOutput& partial() const { return partial_; }
  bool numeric() const { return numeric_; }

 private:
  ChainOutput partial_;
  bool numeric_;
};

struct ChainInputs {
  const ModelDesign* design = nullptr;
  const ObservationSet* obs = nullptr;
  PriorConstants priors;
  // Optional starting point; defaults to the least-squares initialisation.
  std::optional<LatentState> initial_latent;
  std::optional<HyperState> initial_hyper;
  LikelihoodAudit* audit = nullptr;
};

// Least-squares initial latent state plus default hyper-parameters.
LatentState initial_latent_state(const ModelDesign& design, const ObservationSet& obs);
HyperState initial_hyper_state(const ModelDesign& design);

std::uint64_t config_fingerprint(const SamplerConfig& config, const PriorConstants& priors,
                                 const ModelDesign& design);

// Block 1 MALA, block 2 kappa random walk then Sigma Gibbs, block 3 tau_eps and
// horseshoe Gibbs. Deterministic given the seed.
ChainOutput run_chain(const ChainInputs& inputs, const SamplerConfig& config,
                      std::uint64_t seed);

}  // namespace lcrecon
