#pragma once

#include <Eigen/Dense>
#include <array>
#include <string>
#include <vector>

#include "lcrecon/lattice.hpp"

namespace lcrecon {

inline constexpr int kFields = 3;
enum Field : int { kEtaL1 = 0, kEtaL2 = 1, kEtaH = 2 };

using FieldMatrix = Eigen::Matrix<double, 3, Eigen::Dynamic>;

// Everything the MALA block moves jointly. Also used to carry gradients.
struct LatentState {
  FieldMatrix eta;         // rows eta_L1, eta_L2, eta_H; one column per cell
  Eigen::VectorXd beta;    // packed per field, see ModelDesign
  Eigen::VectorXd eps;     // per-dataset offsets on eta_H
  double log_alpha = 0.0;
  double log_lambda = 0.0;

  static LatentState zeros(Index n_cells, Index n_beta, Index n_datasets);
  bool all_finite() const;
};

// Horseshoe scales with their inverse-gamma auxiliaries.
struct HorseshoeState {
  Eigen::VectorXd gamma;  // local scale per covariate group
  Eigen::VectorXd nu;     // auxiliary for gamma^2
  double phi = 1.0;       // global scale
  double xi = 1.0;        // auxiliary for phi^2
};

struct HyperState {
  double kappa = 1.0;
  Eigen::Matrix3d sigma = Eigen::Matrix3d::Identity();
  double tau_eps = 1.0;
  HorseshoeState horseshoe;
};

// Raw covariate columns (no intercept) with the standardisation applied at
// ingestion.
struct CovariateTable {
  std::vector<std::string> names;
  Eigen::MatrixXd raw;  // n_cells x names.size()
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  static CovariateTable from_raw(std::vector<std::string> names,
                                 Eigen::MatrixXd raw);
  Index column(const std::string& name) const;  // -1 when absent
  Eigen::MatrixXd standardized() const;
};

enum class CovariateSet { Elevation, All };

const char* to_string(CovariateSet set);
CovariateSet covariate_set_from_string(const std::string& text);

// Mean structure eta = B beta + X. Column 0 of `design` is the intercept; the
// rest are standardised covariates. beta is packed field by field.
class ModelDesign {
 public:
  ModelDesign(Lattice lattice, const CovariateTable& covariates,
              const std::array<std::vector<std::string>, kFields>& field_terms,
              int n_datasets);

  static ModelDesign for_set(Lattice lattice, const CovariateTable& covariates,
                             CovariateSet set, int n_datasets);

  const Lattice& lattice() const { return lattice_; }
  Index n_cells() const { return lattice_.size(); }
  int n_datasets() const { return n_datasets_; }
  Index n_beta() const { return n_beta_; }
  const Eigen::MatrixXd& design() const { return design_; }
  const std::vector<std::string>& column_names() const { return column_names_; }
  const std::vector<Index>& field_columns(int field) const {
    return field_columns_[static_cast<std::size_t>(field)];
  }
  Index beta_offset(int field) const { return beta_offset_[static_cast<std::size_t>(field)]; }
  // One horseshoe group per design column used by any field; each group
  // lists the beta positions sharing its local scale.
  const std::vector<std::vector<Index>>& groups() const { return groups_; }
  const std::vector<Index>& group_columns() const { return group_columns_; }
  const std::array<std::vector<std::string>, kFields>& field_terms() const {
    return field_terms_;
  }

  FieldMatrix mean_field(const Eigen::VectorXd& beta) const;
  // Adjoint of mean_field: d/dbeta of sum(G .* B beta).
  Eigen::VectorXd mean_field_adjoint(const FieldMatrix& g) const;

  // Coefficients on the raw covariate scale (intercept absorbs centring).
  Eigen::VectorXd beta_raw_scale(const Eigen::VectorXd& beta) const;

 private:
  Lattice lattice_;
  int n_datasets_;
  Eigen::MatrixXd design_;
  std::vector<std::string> column_names_;
  Eigen::VectorXd col_mean_;
  Eigen::VectorXd col_scale_;
  std::array<std::vector<std::string>, kFields> field_terms_;
  std::array<std::vector<Index>, kFields> field_columns_;
  std::array<Index, kFields> beta_offset_{};
  Index n_beta_ = 0;
  std::vector<std::vector<Index>> groups_;
  std::vector<Index> group_columns_;
};

}  // namespace lcrecon
