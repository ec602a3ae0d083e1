#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <vector>

#include "lcrecon/likelihoods.hpp"
#include "lcrecon/model.hpp"
#include "lcrecon/summaries.hpp"

namespace lcrecon {

// Observed values closer than this to 0 or 1 are moved inside.
inline constexpr double kObservationClamp = 1e-5;

// Applies the boundary policy in place and returns the number of clamped
// components. A composition is renormalised first (only when its sum is off by
// more than rounding), then small components are raised to the clamp and the
// added mass is taken from the largest one. Idempotent.
std::size_t clamp_composition(Eigen::Vector3d& cover);
std::size_t clamp_fraction(double& value);

// Runs the policy over a whole set and records counts under "lcc" and "alcc".
void apply_boundary_policy(ObservationSet& obs);

struct ObservationPaths {
  std::filesystem::path lcc;
  std::filesystem::path alcc;
};

// lcc.csv: cell_id,L_C,L_B,L_U        alcc.csv: cell_id,dataset,H
// cell ids are 0-based row-major, datasets 1-based. An empty path or an empty
// file means no observations of that kind.
ObservationSet load_observations(const ObservationPaths& paths, const Lattice& lattice,
                                 int n_datasets);

// covariates.csv: cell_id,elevation[,lpj1,lpj2] with every cell exactly once.
CovariateTable load_covariates(const std::filesystem::path& path, const Lattice& lattice);

void write_observations(const ObservationSet& obs, const ObservationPaths& paths);
void write_covariates(const CovariateTable& covariates, const std::filesystem::path& path);

// ---- posterior output ----------------------------------------------------------

struct SummaryRow {
  Index cell_id = 0;
  Index row = 0;
  Index col = 0;
  Eigen::Vector3d p_natural = Eigen::Vector3d::Zero();
  double p_human = 0.0;
  Eigen::Vector3d cover = Eigen::Vector3d::Zero();
  double p_human_q025 = 0.0;
  double p_human_q975 = 0.0;
};

std::vector<SummaryRow> summary_rows(const PosteriorSummary& summary, const Lattice& lattice);
void write_summary_csv(const std::vector<SummaryRow>& rows, const std::filesystem::path& path);
std::vector<SummaryRow> read_summary_csv(const std::filesystem::path& path);

// Binary PPM (P6), one pixel per cell, north (last lattice row) at the top.
// Values are mapped linearly from [lo, hi] onto the 256-entry colormap.
void write_heatmap(const Eigen::VectorXd& values, const Lattice& lattice, double lo, double hi,
                   const std::filesystem::path& path);
Eigen::Vector3i colormap_entry(int index);

struct HeatmapImage {
  Index width = 0;
  Index height = 0;
  std::vector<unsigned char> rgb;
};
HeatmapImage read_ppm(const std::filesystem::path& path);

// Writes summaries.csv, ellipses.csv, parameters.csv, beta.csv,
// colormap.csv and one heat map per field into `dir`. Returns file names.
std::vector<std::string> write_summaries(const ChainOutput& chain, const ModelDesign& design,
                                         const std::filesystem::path& dir);

// Shortest decimal text that reads back to the same double.
std::string format_double(double v);

}  // namespace lcrecon
