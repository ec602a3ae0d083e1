#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lcrecon/model.hpp"
#include "lcrecon/priors.hpp"
#include "lcrecon/sampler.hpp"
#include "lcrecon/synthetic.hpp"

namespace lcrecon {

// Everything a run needs. Read from a sectioned key = value file; every key can
// also be set as `section.key`.
struct RunConfig {
  // [lattice]
  Index n_rows = 20;
  Index n_cols = 20;
  double lon0 = 0.0;
  double lat0 = 0.0;
  double spacing = 1.0;
  // [model]
  CovariateSet covariates = CovariateSet::Elevation;
  int n_datasets = 2;
  // [priors]
  PriorConstants priors;
  // [mcmc]
  SamplerConfig sampler;
  std::uint64_t seed = 1;
  // [data]
  std::filesystem::path lcc_path;
  std::filesystem::path alcc_path;
  std::filesystem::path covariates_path;
  // [output]
  std::filesystem::path output_dir = "out";
  // [synthetic]
  SyntheticConfig synthetic;
  // [validation]
  double holdout_fraction = 0.10;
  std::uint64_t holdout_seed = 1;
  std::vector<CovariateSet> validation_sets = {CovariateSet::All, CovariateSet::Elevation};
  std::string validation_label = "run";

  // Throws InvalidArgument for unknown keys or malformed values.
  void set(const std::string& key, const std::string& value);
  void validate() const;
  Lattice lattice() const;

  // All accepted keys in file order, as "section.key".
  static const std::vector<std::string>& keys();
};

// `# comment`, `[section]`, `key = value`. Unknown sections or keys are
// errors; line numbers are reported through ParseError.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig parse_run_config(const std::string& text, const std::string& name = "<config>");

}  // namespace lcrecon
