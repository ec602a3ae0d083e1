#include "lcrecon/validation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <limits>
#include <set>
#include <sstream>

#include "lcrecon/data_io.hpp"
#include "lcrecon/error.hpp"
#include "lcrecon/random.hpp"
#include "lcrecon/special.hpp"
#include "lcrecon/transforms.hpp"

namespace lcrecon {

double acd(std::span<const Eigen::Vector3d> predicted, std::span<const Eigen::Vector3d> observed) {
  if (predicted.size() != observed.size()) throw InvalidArgument("acd: length mismatch");
  if (predicted.empty()) throw InvalidArgument("acd: no compositions");
  std::vector<double> d(predicted.size());
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (!(predicted[i].minCoeff() > 0.0) || !(observed[i].minCoeff() > 0.0)) {
      throw InvalidArgument("acd: composition on the simplex boundary");
    }
    d[i] = (clr<double>(predicted[i]) - clr<double>(observed[i])).norm();
  }
  return pairwise_sum(d) / static_cast<double>(d.size());
}

double rmse(std::span<const double> predicted, std::span<const double> observed) {
  if (predicted.size() != observed.size()) throw InvalidArgument("rmse: length mismatch");
  if (predicted.empty()) throw InvalidArgument("rmse: no values");
  std::vector<double> sq(predicted.size());
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    sq[i] = (predicted[i] - observed[i]) * (predicted[i] - observed[i]);
  }
  return std::sqrt(pairwise_sum(sq) / static_cast<double>(sq.size()));
}

namespace {

std::vector<Index> draw_without_replacement(std::vector<Index> pool, double fraction, Rng& rng) {
  const auto take = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(pool.size())));
  std::shuffle(pool.begin(), pool.end(), rng);
  pool.resize(std::min(take, pool.size()));
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace

HoldoutPlan make_holdout(const ObservationSet& obs, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw InvalidArgument("make_holdout: fraction must lie in [0, 1]");
  }
  std::vector<Index> lcc;
  for (const auto& o : obs.lcc) lcc.push_back(o.cell);
  std::sort(lcc.begin(), lcc.end());
  std::set<Index> alcc_set;
  for (const auto& o : obs.alcc) alcc_set.insert(o.cell);

  Rng rng(seed);
  HoldoutPlan plan;
  plan.seed = seed;
  plan.fraction = fraction;
  plan.lcc_cells = draw_without_replacement(lcc, fraction, rng);
  plan.alcc_cells = draw_without_replacement({alcc_set.begin(), alcc_set.end()}, fraction, rng);
  return plan;
}

ObservationSplit split_observations(const ObservationSet& obs, const HoldoutPlan& plan) {
  const std::set<Index> lcc_out(plan.lcc_cells.begin(), plan.lcc_cells.end());
  const std::set<Index> alcc_out(plan.alcc_cells.begin(), plan.alcc_cells.end());
  ObservationSplit s;
  s.train.n_datasets = obs.n_datasets;
  s.train.clamp_log = obs.clamp_log;
  std::set<Index> lcc_seen, alcc_seen;
  for (const auto& o : obs.lcc) {
    if (lcc_out.count(o.cell)) {
      s.lcc_test.push_back(o);
      lcc_seen.insert(o.cell);
    } else {
      s.train.lcc.push_back(o);
    }
  }
  for (const auto& o : obs.alcc) {
    if (alcc_out.count(o.cell)) {
      s.alcc_test.push_back(o);
      alcc_seen.insert(o.cell);
    } else {
      s.train.alcc.push_back(o);
    }
  }
  if (lcc_seen.size() != lcc_out.size() || alcc_seen.size() != alcc_out.size()) {
    throw InvalidArgument("split_observations: plan holds out cells that are not observed");
  }
  return s;
}

ValidationTable leave_out_run(const ValidationInputs& inputs, const HoldoutPlan& plan) {
  ValidationTable table;
  table.label = inputs.label;
  if (plan.empty()) return table;

  const ObservationSplit split = split_observations(inputs.obs, plan);
  for (CovariateSet set : inputs.sets) {
    const ModelDesign design =
        ModelDesign::for_set(inputs.lattice, inputs.covariates, set, inputs.obs.n_datasets);
    LikelihoodAudit audit;
    audit.reset(inputs.lattice.size());
    ChainInputs ci;
    ci.design = &design;
    ci.obs = &split.train;
    ci.priors = inputs.priors;
    ci.audit = &audit;
    const ChainOutput chain = run_chain(ci, inputs.sampler, inputs.seed);
    const auto post = chain.posterior_samples();
    if (post.empty()) throw InvalidArgument("leave_out_run: no post-burn-in samples");

    // Posterior means at every cell.
    const Index n = inputs.lattice.size();
    Eigen::Matrix3Xd z_mean = Eigen::Matrix3Xd::Zero(3, n);
    Eigen::VectorXd h_mean = Eigen::VectorXd::Zero(n);
    for (const ChainSample* s : post) {
      for (Index i = 0; i < n; ++i) {
        const Eigen::Vector3d p = alr_inverse(s->latent.eta(kEtaL1, i), s->latent.eta(kEtaL2, i));
        const double h = logit_inverse(s->latent.eta(kEtaH, i));
        z_mean.col(i) += decompose_cover<double>(p, h);
        h_mean(i) += h;
      }
    }
    z_mean /= static_cast<double>(post.size());
    h_mean /= static_cast<double>(post.size());

    ValidationResult r;
    r.set = set;
    r.n_lcc_test = static_cast<Index>(split.lcc_test.size());
    r.n_alcc_test = static_cast<Index>(plan.alcc_cells.size());
    r.mala_acceptance = chain.mala.rate_after_burn_in();
    r.rw_acceptance = chain.rw.rate_after_burn_in();
    if (!split.lcc_test.empty()) {
      std::vector<Eigen::Vector3d> pred, obs;
      for (const auto& o : split.lcc_test) {
        pred.push_back(z_mean.col(o.cell));
        obs.push_back(o.cover);
      }
      r.acd = acd(pred, obs);
    } else {
      r.acd = std::numeric_limits<double>::quiet_NaN();
    }
    for (int k = 0; k < inputs.obs.n_datasets; ++k) {
      std::vector<double> pred, obs;
      for (const auto& o : split.alcc_test) {
        if (o.dataset != k) continue;
        pred.push_back(h_mean(o.cell));
        obs.push_back(o.value);
      }
      r.rmse.push_back(pred.empty() ? std::numeric_limits<double>::quiet_NaN() : rmse(pred, obs));
    }
    for (Index c : plan.lcc_cells) r.heldout_terms += audit.lcc_terms[static_cast<std::size_t>(c)];
    for (Index c : plan.alcc_cells) r.heldout_terms += audit.alcc_terms[static_cast<std::size_t>(c)];
    table.results.push_back(std::move(r));
  }
  return table;
}

std::string validation_csv(const std::vector<ValidationTable>& tables) {
  std::vector<CovariateSet> order;
  int n_datasets = 0;
  for (const auto& t : tables) {
    for (const auto& r : t.results) {
      if (std::find(order.begin(), order.end(), r.set) == order.end()) order.push_back(r.set);
      n_datasets = std::max(n_datasets, static_cast<int>(r.rmse.size()));
    }
  }
  std::sort(order.begin(), order.end(), [](CovariateSet a, CovariateSet b) {
    return static_cast<int>(a) > static_cast<int>(b);  // All first
  });
  std::ostringstream os;
  os << "label";
  for (CovariateSet s : order) os << ",acd_" << to_string(s);
  for (int k = 0; k < n_datasets; ++k) {
    for (CovariateSet s : order) os << ",rmse_" << (k + 1) << '_' << to_string(s);
  }
  os << '\n';
  for (const auto& t : tables) {
    os << t.label;
    const auto find = [&](CovariateSet s) -> const ValidationResult* {
      for (const auto& r : t.results) {
        if (r.set == s) return &r;
      }
      return nullptr;
    };
    for (CovariateSet s : order) {
      const auto* r = find(s);
      os << ',' << (r ? format_double(r->acd) : "");
    }
    for (int k = 0; k < n_datasets; ++k) {
      for (CovariateSet s : order) {
        const auto* r = find(s);
        os << ','
           << (r && k < static_cast<int>(r->rmse.size()) ? format_double(r->rmse[static_cast<std::size_t>(k)]) : "");
      }
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace lcrecon
