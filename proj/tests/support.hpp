#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <unistd.h>
#include <vector>

#include "lcrecon/lattice.hpp"
#include "lcrecon/likelihoods.hpp"
#include "lcrecon/model.hpp"
#include "lcrecon/random.hpp"
#include "lcrecon/sampler.hpp"
#include "lcrecon/transforms.hpp"

namespace lcrecon::testing {

inline Eigen::VectorXd central_difference(const std::function<double(const Eigen::VectorXd&)>& f,
                                          const Eigen::VectorXd& x, double h = 1e-6) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x;
  for (Index i = 0; i < x.size(); ++i) {
    xp(i) = x(i) + h;
    const double up = f(xp);
    xp(i) = x(i) - h;
    const double down = f(xp);
    xp(i) = x(i);
    g(i) = (up - down) / (2.0 * h);
  }
  return g;
}

// |a - b| / max(1, |b|), the scale-aware error used by every gradient check.
inline double relative_error(double a, double b) {
  return std::abs(a - b) / std::max(1.0, std::abs(b));
}

inline double max_relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  double worst = 0.0;
  for (Index i = 0; i < a.size(); ++i) worst = std::max(worst, relative_error(a(i), b(i)));
  return worst;
}

inline Eigen::Vector3d random_composition(Rng& rng, double concentration = 2.0) {
  return dirichlet_draw<3>(Eigen::Vector3d::Constant(concentration), rng);
}

// Smooth elevation plus two noisy extra covariates, enough for both sets.
inline CovariateTable smooth_covariates(const Lattice& lattice, std::uint64_t seed = 3) {
  Rng rng(seed);
  Eigen::MatrixXd raw(lattice.size(), 3);
  for (Index i = 0; i < lattice.size(); ++i) {
    const double r = static_cast<double>(lattice.row(i));
    const double c = static_cast<double>(lattice.col(i));
    raw(i, 0) = std::sin(0.7 * r) + 0.3 * c + 0.05 * standard_normal(rng);
    raw(i, 1) = standard_normal(rng);
    raw(i, 2) = standard_normal(rng);
  }
  return CovariateTable::from_raw({"elevation", "lpj1", "lpj2"}, raw);
}

inline ModelDesign small_design(Index rows, Index cols, int n_datasets,
                                CovariateSet set = CovariateSet::Elevation) {
  Lattice lattice = build_lattice(rows, cols);
  const CovariateTable cov = smooth_covariates(lattice);
  return ModelDesign::for_set(std::move(lattice), cov, set, n_datasets);
}

inline LatentState random_latent(const ModelDesign& design, Rng& rng, double scale = 0.7) {
  LatentState s = LatentState::zeros(design.n_cells(), design.n_beta(), design.n_datasets());
  for (Index i = 0; i < s.eta.size(); ++i) s.eta.data()[i] = scale * standard_normal(rng);
  for (Index i = 0; i < s.beta.size(); ++i) s.beta(i) = 0.5 * standard_normal(rng);
  for (Index i = 0; i < s.eps.size(); ++i) s.eps(i) = 0.3 * standard_normal(rng);
  s.log_alpha = std::log(5.0 + 20.0 * uniform01(rng));
  s.log_lambda = std::log(5.0 + 20.0 * uniform01(rng));
  return s;
}

// Observations at the given cells drawn from the model at `state`.
inline ObservationSet simulate_observations(const LatentState& state,
                                            const std::vector<Index>& lcc_cells,
                                            const std::vector<Index>& alcc_cells,
                                            int n_datasets, Rng& rng) {
  ObservationSet obs;
  obs.n_datasets = n_datasets;
  const double alpha = std::exp(state.log_alpha);
  const double lambda = std::exp(state.log_lambda);
  for (Index c : lcc_cells) {
    const auto j = link_jacobians<double>(state.eta.col(c));
    Eigen::Vector3d v = dirichlet_draw<3>(Eigen::Vector3d(alpha * j.cover), rng).cwiseMax(1e-4);
    obs.lcc.push_back({c, v / v.sum()});
  }
  for (Index c : alcc_cells) {
    for (int k = 0; k < n_datasets; ++k) {
      const double p = logit_inverse(state.eta(kEtaH, c) + state.eps(k));
      obs.alcc.push_back({c, k, std::clamp(beta_draw(lambda * p, lambda * (1 - p), rng), 1e-4, 1 - 1e-4)});
    }
  }
  return obs;
}

// A chain whose every post-burn-in sample equals the given state.
inline ChainOutput constant_chain(const ModelDesign& design, const LatentState& latent,
                                  const HyperState& hyper, Index n_samples = 120) {
  ChainOutput chain;
  chain.n_rows = design.lattice().n_rows;
  chain.n_cols = design.lattice().n_cols;
  chain.n_datasets = design.n_datasets();
  chain.field_terms = design.field_terms();
  chain.config.burn_in = 0;
  chain.config.thin = 1;
  chain.config.iterations = n_samples;
  chain.completed_iterations = n_samples;
  for (Index t = 0; t <= n_samples; ++t) chain.samples.push_back({t, latent, hyper, 0.0});
  return chain;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("lcrecon_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace lcrecon::testing

namespace lcrecon::testing {

// Regularised lower incomplete gamma for integer shape: 1 - e^-x sum_{k<n} x^k/k!.
inline double gamma_cdf(int shape, double x) {
  if (x <= 0.0) return 0.0;
  double term = 1.0, sum = 1.0;
  for (int k = 1; k < shape; ++k) {
    term *= x / k;
    sum += term;
  }
  return 1.0 - std::exp(-x) * sum;
}

// Kolmogorov-Smirnov p-value of a sample against a continuous CDF (asymptotic
// distribution with the Stephens small-sample correction).
template <typename Cdf>
double ks_pvalue(std::vector<double> sample, Cdf cdf) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  const double lambda = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d;
  if (lambda < 0.2) return 1.0;
  double p = 0.0;
  for (int k = 1; k <= 100; ++k) {
    p += 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
  }
  return std::clamp(p, 0.0, 1.0);
}

}  // namespace lcrecon::testing
