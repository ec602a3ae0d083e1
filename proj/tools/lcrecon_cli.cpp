#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lcrecon/checkpoint.hpp"
#include "lcrecon/config.hpp"
#include "lcrecon/data_io.hpp"
#include "lcrecon/error.hpp"
#include "lcrecon/sampler.hpp"
#include "lcrecon/synthetic.hpp"
#include "lcrecon/validation.hpp"

namespace fs = std::filesystem;
using namespace lcrecon;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

constexpr const char* kChainFile = "chain.lcrc";
constexpr const char* kPartialChainFile = "chain.partial.lcrc";

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Options shared by every subcommand: a config file, generic overrides and one
// flag per configuration key.
struct ConfigOptions {
  std::string config;
  std::vector<std::string> overrides;
  std::map<std::string, std::string> values;
  std::vector<std::pair<std::string, CLI::Option*>> flags;
  CLI::Option* seed = nullptr;
  std::string seed_value;

  void attach(CLI::App& app) {
    app.add_option("-c,--config", config, "Run configuration file");
    app.add_option("--set", overrides, "Override as section.key=value (repeatable)");
    seed = app.add_option("--seed", seed_value, "Alias for --mcmc.seed");
    for (const std::string& key : RunConfig::keys()) {
      flags.emplace_back(key, app.add_option("--" + key, values[key])->group("Configuration keys"));
    }
  }

  RunConfig resolve() const {
    RunConfig cfg;
    if (!config.empty()) {
      if (!fs::is_regular_file(config)) throw UsageError("config file '" + config + "' does not exist");
      try {
        cfg = load_run_config(config);
      } catch (const ParseError& e) {
        throw UsageError(e.what());
      }
    }
    for (const std::string& o : overrides) {
      const auto eq = o.find('=');
      if (eq == std::string::npos) throw UsageError("--set expects section.key=value, got '" + o + "'");
      cfg.set(o.substr(0, eq), o.substr(eq + 1));
    }
    for (const auto& [key, opt] : flags) {
      if (opt->count() > 0) cfg.set(key, values.at(key));
    }
    if (seed->count() > 0) cfg.set("mcmc.seed", seed_value);
    cfg.validate();
    return cfg;
  }
};

ObservationSet load_data(const RunConfig& cfg, const Lattice& lattice) {
  return load_observations(ObservationPaths{cfg.lcc_path, cfg.alcc_path}, lattice, cfg.n_datasets);
}

CovariateTable load_required_covariates(const RunConfig& cfg, const Lattice& lattice) {
  if (cfg.covariates_path.empty()) throw UsageError("data.covariates must be set");
  return load_covariates(cfg.covariates_path, lattice);
}

int run_simulate(const RunConfig& cfg) {
  SyntheticConfig sc = cfg.synthetic;
  sc.n_rows = cfg.n_rows;
  sc.n_cols = cfg.n_cols;
  sc.n_datasets = cfg.n_datasets;
  const SyntheticData data = generate(sc, cfg.seed);
  write_synthetic(data, cfg.output_dir);
  std::cout << "wrote synthetic data (" << data.obs.lcc.size() << " LCC cells, "
            << data.obs.alcc.size() << " ALCC values) to " << cfg.output_dir.string() << '\n';
  return kExitOk;
}

int run_fit(const RunConfig& cfg) {
  const Lattice lattice = cfg.lattice();
  const CovariateTable covariates = load_required_covariates(cfg, lattice);
  const ObservationSet obs = load_data(cfg, lattice);
  const ModelDesign design = ModelDesign::for_set(lattice, covariates, cfg.covariates, cfg.n_datasets);
  ChainInputs in;
  in.design = &design;
  in.obs = &obs;
  in.priors = cfg.priors;
  fs::create_directories(cfg.output_dir);
  try {
    const ChainOutput chain = run_chain(in, cfg.sampler, cfg.seed);
    write_chain(chain, cfg.output_dir / kChainFile);
    std::cout << "iterations " << chain.completed_iterations << ", samples " << chain.samples.size()
              << ", MALA acceptance " << chain.mala.rate_after_burn_in() << ", RW acceptance "
              << chain.rw.rate_after_burn_in() << '\n'
              << "checkpoint " << (cfg.output_dir / kChainFile).string() << '\n';
  } catch (const ChainAborted& e) {
    write_chain(e.partial(), cfg.output_dir / kPartialChainFile);
    std::cerr << "error: " << e.what() << "\npartial checkpoint "
              << (cfg.output_dir / kPartialChainFile).string() << '\n';
    return e.numeric() ? kExitNumeric : kExitData;
  }
  return kExitOk;
}

int run_validate(const RunConfig& cfg) {
  ValidationInputs in;
  in.lattice = cfg.lattice();
  in.covariates = load_required_covariates(cfg, in.lattice);
  in.obs = load_data(cfg, in.lattice);
  in.sets = cfg.validation_sets;
  in.priors = cfg.priors;
  in.sampler = cfg.sampler;
  in.seed = cfg.seed;
  in.label = cfg.validation_label;
  const HoldoutPlan plan = make_holdout(in.obs, cfg.holdout_fraction, cfg.holdout_seed);
  const ValidationTable table = leave_out_run(in, plan);
  const std::string csv = validation_csv({table});
  fs::create_directories(cfg.output_dir);
  write_file_atomic(cfg.output_dir / "validation.csv", csv);
  std::cout << csv;
  for (const auto& r : table.results) {
    std::cout << to_string(r.set) << ": " << r.n_lcc_test << " LCC and " << r.n_alcc_test
              << " ALCC cells held out, MALA acceptance " << r.mala_acceptance << ", RW acceptance "
              << r.rw_acceptance << '\n';
  }
  return kExitOk;
}

int run_summarize(const RunConfig& cfg, const std::string& checkpoint) {
  const fs::path path = checkpoint.empty() ? cfg.output_dir / kChainFile : fs::path(checkpoint);
  const ChainOutput chain = read_chain(path);
  const Lattice lattice = cfg.lattice();
  if (chain.n_rows != lattice.n_rows || chain.n_cols != lattice.n_cols) {
    throw DataError("checkpoint lattice differs from the configured lattice");
  }
  const CovariateTable covariates = load_required_covariates(cfg, lattice);
  const ModelDesign design = ModelDesign::for_set(lattice, covariates, cfg.covariates, chain.n_datasets);
  if (design.field_terms() != chain.field_terms) {
    throw DataError("checkpoint covariate terms differ from the configured covariate set");
  }
  const auto files = write_summaries(chain, design, cfg.output_dir);
  for (const auto& f : files) std::cout << (cfg.output_dir / f).string() << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compositional land-cover reconstruction on a lattice"};
  app.require_subcommand(1);

  ConfigOptions simulate_opts, fit_opts, validate_opts, summarize_opts;
  std::string checkpoint;
  auto* simulate = app.add_subcommand("simulate", "Write a synthetic dataset and its ground truth");
  auto* fit = app.add_subcommand("fit", "Run the sampler and write a checkpoint");
  auto* validate = app.add_subcommand("validate", "Leave-out validation: ACD and RMSE on held-out cells");
  auto* summarize = app.add_subcommand("summarize", "Posterior summaries, ellipses and heat maps from a checkpoint");
  simulate_opts.attach(*simulate);
  fit_opts.attach(*fit);
  validate_opts.attach(*validate);
  summarize_opts.attach(*summarize);
  summarize->add_option("--checkpoint", checkpoint, "Checkpoint file (default: <output.dir>/chain.lcrc)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (simulate->parsed()) return run_simulate(simulate_opts.resolve());
    if (fit->parsed()) return run_fit(fit_opts.resolve());
    if (validate->parsed()) return run_validate(validate_opts.resolve());
    if (summarize->parsed()) return run_summarize(summarize_opts.resolve(), checkpoint);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ChainAborted& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.numeric() ? kExitNumeric : kExitData;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kExitData;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
