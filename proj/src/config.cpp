#include "lcrecon/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "lcrecon/error.hpp"

namespace lcrecon {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> words(const std::string& s) {
  std::vector<std::string> out;
  std::string w;
  std::istringstream ss(s);
  while (ss >> w) {
    // commas separate too
    std::size_t start = 0;
    for (std::size_t i = 0; i <= w.size(); ++i) {
      if (i == w.size() || w[i] == ',') {
        if (i > start) out.push_back(w.substr(start, i - start));
        start = i + 1;
      }
    }
  }
  return out;
}

double to_real(const std::string& key, const std::string& v) {
  double x = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
    throw InvalidArgument(key + ": expected a number, got '" + v + "'");
  }
  return x;
}

long long to_integer(const std::string& key, const std::string& v) {
  long long x = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
    throw InvalidArgument(key + ": expected an integer, got '" + v + "'");
  }
  return x;
}

std::uint64_t to_unsigned(const std::string& key, const std::string& v) {
  std::uint64_t x = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
    throw InvalidArgument(key + ": expected a non-negative integer, got '" + v + "'");
  }
  return x;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw InvalidArgument(key + ": expected true or false, got '" + v + "'");
}

Eigen::VectorXd to_vector(const std::string& key, const std::string& v) {
  const auto w = words(v);
  Eigen::VectorXd out(static_cast<Index>(w.size()));
  for (std::size_t i = 0; i < w.size(); ++i) out(static_cast<Index>(i)) = to_real(key, w[i]);
  return out;
}

Eigen::Matrix3d to_matrix3(const std::string& key, const std::string& v) {
  const Eigen::VectorXd x = to_vector(key, v);
  if (x.size() != 9) throw InvalidArgument(key + ": expected 9 numbers (row-major 3 x 3)");
  Eigen::Matrix3d m;
  for (Index i = 0; i < 9; ++i) m(i / 3, i % 3) = x(i);
  return m;
}

Eigen::Vector2d to_vector2(const std::string& key, const std::string& v) {
  const Eigen::VectorXd x = to_vector(key, v);
  if (x.size() != 2) throw InvalidArgument(key + ": expected 2 numbers (intercept, elevation)");
  return x;
}

CovariateSet to_set(const std::string& key, const std::string& v) {
  try {
    return covariate_set_from_string(v);
  } catch (const std::exception&) {
    throw InvalidArgument(key + ": expected elev or all, got '" + v + "'");
  }
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

const std::vector<std::pair<std::string, Setter>>& table() {
  static const std::vector<std::pair<std::string, Setter>> t = {
      {"lattice.rows", [](RunConfig& c, auto& k, auto& v) { c.n_rows = to_integer(k, v); }},
      {"lattice.cols", [](RunConfig& c, auto& k, auto& v) { c.n_cols = to_integer(k, v); }},
      {"lattice.lon0", [](RunConfig& c, auto& k, auto& v) { c.lon0 = to_real(k, v); }},
      {"lattice.lat0", [](RunConfig& c, auto& k, auto& v) { c.lat0 = to_real(k, v); }},
      {"lattice.spacing", [](RunConfig& c, auto& k, auto& v) { c.spacing = to_real(k, v); }},

      {"model.covariates", [](RunConfig& c, auto& k, auto& v) { c.covariates = to_set(k, v); }},
      {"model.datasets", [](RunConfig& c, auto& k, auto& v) { c.n_datasets = static_cast<int>(to_integer(k, v)); }},

      {"priors.alpha_shape", [](RunConfig& c, auto& k, auto& v) { c.priors.alpha_shape = to_real(k, v); }},
      {"priors.alpha_rate", [](RunConfig& c, auto& k, auto& v) { c.priors.alpha_rate = to_real(k, v); }},
      {"priors.lambda_shape", [](RunConfig& c, auto& k, auto& v) { c.priors.lambda_shape = to_real(k, v); }},
      {"priors.lambda_rate", [](RunConfig& c, auto& k, auto& v) { c.priors.lambda_rate = to_real(k, v); }},
      {"priors.tau_shape", [](RunConfig& c, auto& k, auto& v) { c.priors.tau_shape = to_real(k, v); }},
      {"priors.tau_rate", [](RunConfig& c, auto& k, auto& v) { c.priors.tau_rate = to_real(k, v); }},
      {"priors.kappa_shape", [](RunConfig& c, auto& k, auto& v) { c.priors.kappa_shape = to_real(k, v); }},
      {"priors.kappa_rate", [](RunConfig& c, auto& k, auto& v) { c.priors.kappa_rate = to_real(k, v); }},
      {"priors.sigma_df", [](RunConfig& c, auto& k, auto& v) { c.priors.sigma_df = to_real(k, v); }},
      {"priors.sigma_scale", [](RunConfig& c, auto& k, auto& v) { c.priors.sigma_scale = to_matrix3(k, v); }},

      {"mcmc.iterations", [](RunConfig& c, auto& k, auto& v) { c.sampler.iterations = to_integer(k, v); }},
      {"mcmc.burn_in", [](RunConfig& c, auto& k, auto& v) { c.sampler.burn_in = to_integer(k, v); }},
      {"mcmc.thin", [](RunConfig& c, auto& k, auto& v) { c.sampler.thin = to_integer(k, v); }},
      {"mcmc.seed", [](RunConfig& c, auto& k, auto& v) { c.seed = to_unsigned(k, v); }},
      {"mcmc.precond_interval", [](RunConfig& c, auto& k, auto& v) { c.sampler.precond_interval = to_integer(k, v); }},
      {"mcmc.precond_fraction", [](RunConfig& c, auto& k, auto& v) { c.sampler.precond_fraction = to_real(k, v); }},
      {"mcmc.adapt_c", [](RunConfig& c, auto& k, auto& v) { c.sampler.schedule.c = to_real(k, v); }},
      {"mcmc.adapt_gamma", [](RunConfig& c, auto& k, auto& v) { c.sampler.schedule.gamma = to_real(k, v); }},
      {"mcmc.target_mala", [](RunConfig& c, auto& k, auto& v) { c.sampler.target_mala = to_real(k, v); }},
      {"mcmc.target_rw", [](RunConfig& c, auto& k, auto& v) { c.sampler.target_rw = to_real(k, v); }},
      {"mcmc.step_mala", [](RunConfig& c, auto& k, auto& v) { c.sampler.initial_step_mala = to_real(k, v); }},
      {"mcmc.step_rw", [](RunConfig& c, auto& k, auto& v) { c.sampler.initial_step_rw = to_real(k, v); }},
      {"mcmc.update_kappa", [](RunConfig& c, auto& k, auto& v) { c.sampler.update.kappa = to_bool(k, v); }},
      {"mcmc.update_sigma", [](RunConfig& c, auto& k, auto& v) { c.sampler.update.sigma = to_bool(k, v); }},
      {"mcmc.update_tau", [](RunConfig& c, auto& k, auto& v) { c.sampler.update.tau_eps = to_bool(k, v); }},
      {"mcmc.update_horseshoe", [](RunConfig& c, auto& k, auto& v) { c.sampler.update.horseshoe = to_bool(k, v); }},

      {"data.lcc", [](RunConfig& c, auto&, auto& v) { c.lcc_path = v; }},
      {"data.alcc", [](RunConfig& c, auto&, auto& v) { c.alcc_path = v; }},
      {"data.covariates", [](RunConfig& c, auto&, auto& v) { c.covariates_path = v; }},

      {"output.dir", [](RunConfig& c, auto&, auto& v) { c.output_dir = v; }},

      {"synthetic.kappa", [](RunConfig& c, auto& k, auto& v) { c.synthetic.kappa = to_real(k, v); }},
      {"synthetic.sigma", [](RunConfig& c, auto& k, auto& v) { c.synthetic.sigma = to_matrix3(k, v); }},
      {"synthetic.alpha", [](RunConfig& c, auto& k, auto& v) { c.synthetic.alpha = to_real(k, v); }},
      {"synthetic.lambda", [](RunConfig& c, auto& k, auto& v) { c.synthetic.lambda = to_real(k, v); }},
      {"synthetic.tau_eps", [](RunConfig& c, auto& k, auto& v) { c.synthetic.tau_eps = to_real(k, v); }},
      {"synthetic.lcc_fraction", [](RunConfig& c, auto& k, auto& v) { c.synthetic.lcc_fraction = to_real(k, v); }},
      {"synthetic.alcc_fraction", [](RunConfig& c, auto& k, auto& v) { c.synthetic.alcc_fraction = to_real(k, v); }},
      {"synthetic.beta_l1", [](RunConfig& c, auto& k, auto& v) { c.synthetic.beta[0] = to_vector2(k, v); }},
      {"synthetic.beta_l2", [](RunConfig& c, auto& k, auto& v) { c.synthetic.beta[1] = to_vector2(k, v); }},
      {"synthetic.beta_h", [](RunConfig& c, auto& k, auto& v) { c.synthetic.beta[2] = to_vector2(k, v); }},
      {"synthetic.eps", [](RunConfig& c, auto& k, auto& v) { c.synthetic.eps = to_vector(k, v); }},
      {"synthetic.lpj_noise", [](RunConfig& c, auto& k, auto& v) { c.synthetic.lpj_noise = to_real(k, v); }},

      {"validation.fraction", [](RunConfig& c, auto& k, auto& v) { c.holdout_fraction = to_real(k, v); }},
      {"validation.seed", [](RunConfig& c, auto& k, auto& v) { c.holdout_seed = to_unsigned(k, v); }},
      {"validation.sets", [](RunConfig& c, auto& k, auto& v) {
         c.validation_sets.clear();
         for (const auto& w : words(v)) c.validation_sets.push_back(to_set(k, w));
       }},
      {"validation.label", [](RunConfig& c, auto&, auto& v) { c.validation_label = v; }},
  };
  return t;
}

}  // namespace

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> k = [] {
    std::vector<std::string> out;
    for (const auto& [name, setter] : table()) out.push_back(name);
    return out;
  }();
  return k;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  for (const auto& [name, setter] : table()) {
    if (name == key) {
      setter(*this, key, trim(value));
      return;
    }
  }
  throw InvalidArgument("unknown configuration key '" + key + "'");
}

void RunConfig::validate() const {
  if (n_rows < 1 || n_cols < 1) throw InvalidArgument("lattice: rows and cols must be positive");
  if (!(spacing > 0.0)) throw InvalidArgument("lattice.spacing must be positive");
  if (n_datasets < 1) throw InvalidArgument("model.datasets must be at least 1");
  for (double v : {priors.alpha_shape, priors.alpha_rate, priors.lambda_shape, priors.lambda_rate,
                   priors.tau_shape, priors.tau_rate, priors.kappa_shape, priors.kappa_rate}) {
    if (!(v > 0.0)) throw InvalidArgument("priors: gamma shapes and rates must be positive");
  }
  if (!(priors.sigma_df > 2.0)) throw InvalidArgument("priors.sigma_df must exceed 2");
  if (Eigen::LLT<Eigen::Matrix3d>(priors.sigma_scale).info() != Eigen::Success) {
    throw InvalidArgument("priors.sigma_scale must be positive definite");
  }
  if (sampler.iterations < 0 || sampler.burn_in < 0 || sampler.thin < 1) {
    throw InvalidArgument("mcmc: iterations and burn_in must be >= 0 and thin >= 1");
  }
  if (sampler.precond_interval < 1 || !(sampler.precond_fraction >= 0.0 && sampler.precond_fraction <= 1.0)) {
    throw InvalidArgument("mcmc: precond_interval >= 1 and precond_fraction in [0, 1]");
  }
  if (!(sampler.schedule.gamma > 0.5 && sampler.schedule.gamma <= 1.0) || !(sampler.schedule.c > 0.0)) {
    throw InvalidArgument("mcmc: adapt_gamma must lie in (0.5, 1] and adapt_c be positive");
  }
  for (double t : {sampler.target_mala, sampler.target_rw}) {
    if (!(t > 0.0 && t < 1.0)) throw InvalidArgument("mcmc: acceptance targets must lie in (0, 1)");
  }
  if ((sampler.initial_step_mala && !(*sampler.initial_step_mala > 0.0)) || !(sampler.initial_step_rw > 0.0)) {
    throw InvalidArgument("mcmc: initial step sizes must be positive");
  }
  if (!(holdout_fraction >= 0.0 && holdout_fraction <= 1.0)) {
    throw InvalidArgument("validation.fraction must lie in [0, 1]");
  }
  if (validation_sets.empty()) throw InvalidArgument("validation.sets must name at least one set");
}

Lattice RunConfig::lattice() const {
  Lattice l = build_lattice(n_rows, n_cols);
  l.lon0 = lon0;
  l.lat0 = lat0;
  l.spacing = spacing;
  return l;
}

RunConfig parse_run_config(const std::string& text, const std::string& name) {
  static const std::vector<std::string> sections = {"lattice", "model",     "priors",    "mcmc",
                                                    "data",    "output",    "synthetic", "validation"};
  RunConfig cfg;
  std::istringstream is(text);
  std::string line;
  std::string section;
  std::size_t n = 0;
  while (std::getline(is, line)) {
    ++n;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(name, n, "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (std::find(sections.begin(), sections.end(), section) == sections.end()) {
        throw ParseError(name, n, "unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(name, n, "expected key = value");
    if (section.empty()) throw ParseError(name, n, "key outside of a section");
    const std::string key = section + "." + trim(line.substr(0, eq));
    try {
      cfg.set(key, line.substr(eq + 1));
    } catch (const InvalidArgument& e) {
      throw ParseError(name, n, e.what());
    }
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  RunConfig cfg = parse_run_config(ss.str(), path.string());
  // Relative data paths are taken relative to the config file.
  const auto base = path.parent_path();
  for (auto* p : {&cfg.lcc_path, &cfg.alcc_path, &cfg.covariates_path}) {
    if (!p->empty() && p->is_relative()) *p = base / *p;
  }
  return cfg;
}

}  // namespace lcrecon
