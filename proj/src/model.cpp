#include "lcrecon/model.hpp"

#include <algorithm>
#include <cmath>

#include "lcrecon/error.hpp"

namespace lcrecon {

LatentState LatentState::zeros(Index n_cells, Index n_beta, Index n_datasets) {
  LatentState s;
  s.eta = FieldMatrix::Zero(3, n_cells);
  s.beta = Eigen::VectorXd::Zero(n_beta);
  s.eps = Eigen::VectorXd::Zero(n_datasets);
  return s;
}

bool LatentState::all_finite() const {
  return eta.allFinite() && beta.allFinite() && eps.allFinite() &&
         std::isfinite(log_alpha) && std::isfinite(log_lambda);
}

CovariateTable CovariateTable::from_raw(std::vector<std::string> names,
                                        Eigen::MatrixXd raw) {
  if (static_cast<Index>(names.size()) != raw.cols()) {
    throw InvalidArgument("covariate names do not match columns");
  }
  if (!raw.allFinite()) throw DataError("covariates contain non-finite values");
  CovariateTable t;
  t.names = std::move(names);
  t.raw = std::move(raw);
  const Index n = t.raw.rows();
  t.mean = Eigen::VectorXd::Zero(t.raw.cols());
  t.scale = Eigen::VectorXd::Ones(t.raw.cols());
  for (Index j = 0; j < t.raw.cols(); ++j) {
    t.mean(j) = t.raw.col(j).mean();
    const double var =
        n > 1 ? (t.raw.col(j).array() - t.mean(j)).square().sum() / static_cast<double>(n - 1)
              : 0.0;
    if (!(var > 0.0)) {
      throw DataError("covariate '" + t.names[static_cast<std::size_t>(j)] +
                      "' is constant and cannot be standardised");
    }
    t.scale(j) = std::sqrt(var);
  }
  return t;
}

Index CovariateTable::column(const std::string& name) const {
  auto it = std::find(names.begin(), names.end(), name);
  return it == names.end() ? -1 : static_cast<Index>(it - names.begin());
}

Eigen::MatrixXd CovariateTable::standardized() const {
  Eigen::MatrixXd out(raw.rows(), raw.cols());
  for (Index j = 0; j < raw.cols(); ++j) {
    out.col(j) = (raw.col(j).array() - mean(j)) / scale(j);
  }
  return out;
}

const char* to_string(CovariateSet set) {
  return set == CovariateSet::Elevation ? "elev" : "all";
}

CovariateSet covariate_set_from_string(const std::string& text) {
  if (text == "elev" || text == "elevation") return CovariateSet::Elevation;
  if (text == "all") return CovariateSet::All;
  throw InvalidArgument("unknown covariate set '" + text + "' (expected elev|all)");
}

ModelDesign::ModelDesign(
    Lattice lattice, const CovariateTable& covariates,
    const std::array<std::vector<std::string>, kFields>& field_terms,
    int n_datasets)
    : lattice_(std::move(lattice)), n_datasets_(n_datasets), field_terms_(field_terms) {
  const Index n = lattice_.size();
  if (n_datasets < 1) throw InvalidArgument("ModelDesign: need at least one ALCC dataset");
  if (covariates.raw.cols() > 0 && covariates.raw.rows() != n) {
    throw InvalidArgument("ModelDesign: covariate rows do not match lattice size");
  }
  column_names_.push_back("intercept");
  for (const auto& name : covariates.names) column_names_.push_back(name);
  design_.resize(n, static_cast<Index>(column_names_.size()));
  design_.col(0).setOnes();
  col_mean_ = Eigen::VectorXd::Zero(design_.cols());
  col_scale_ = Eigen::VectorXd::Ones(design_.cols());
  if (covariates.raw.cols() > 0) {
    design_.rightCols(covariates.raw.cols()) = covariates.standardized();
    col_mean_.tail(covariates.raw.cols()) = covariates.mean;
    col_scale_.tail(covariates.raw.cols()) = covariates.scale;
  }

  std::vector<std::vector<Index>> by_column(column_names_.size());
  Index offset = 0;
  for (int f = 0; f < kFields; ++f) {
    beta_offset_[static_cast<std::size_t>(f)] = offset;
    for (const auto& term : field_terms[static_cast<std::size_t>(f)]) {
      auto it = std::find(column_names_.begin(), column_names_.end(), term);
      if (it == column_names_.end()) {
        throw InvalidArgument("ModelDesign: unknown covariate '" + term + "'");
      }
      const Index col = it - column_names_.begin();
      auto& cols = field_columns_[static_cast<std::size_t>(f)];
      if (std::find(cols.begin(), cols.end(), col) != cols.end()) {
        throw InvalidArgument("ModelDesign: duplicate covariate '" + term + "'");
      }
      cols.push_back(col);
      by_column[static_cast<std::size_t>(col)].push_back(offset++);
    }
  }
  n_beta_ = offset;
  for (std::size_t c = 0; c < by_column.size(); ++c) {
    if (by_column[c].empty()) continue;
    groups_.push_back(by_column[c]);
    group_columns_.push_back(static_cast<Index>(c));
  }
}

ModelDesign ModelDesign::for_set(Lattice lattice, const CovariateTable& covariates,
                                 CovariateSet set, int n_datasets) {
  std::array<std::vector<std::string>, kFields> terms;
  const std::vector<std::string> base{"intercept", "elevation"};
  terms[kEtaL1] = base;
  terms[kEtaL2] = base;
  terms[kEtaH] = base;
  if (set == CovariateSet::All) {
    for (int f : {kEtaL1, kEtaL2}) {
      terms[static_cast<std::size_t>(f)].push_back("lpj1");
      terms[static_cast<std::size_t>(f)].push_back("lpj2");
    }
  }
  return ModelDesign(std::move(lattice), covariates, terms, n_datasets);
}

FieldMatrix ModelDesign::mean_field(const Eigen::VectorXd& beta) const {
  if (beta.size() != n_beta_) throw InvalidArgument("mean_field: beta has wrong size");
  FieldMatrix out = FieldMatrix::Zero(3, n_cells());
  for (int f = 0; f < kFields; ++f) {
    const auto& cols = field_columns(f);
    Index pos = beta_offset(f);
    for (Index col : cols) out.row(f) += beta(pos++) * design_.col(col).transpose();
  }
  return out;
}

Eigen::VectorXd ModelDesign::mean_field_adjoint(const FieldMatrix& g) const {
  Eigen::VectorXd out(n_beta_);
  for (int f = 0; f < kFields; ++f) {
    Index pos = beta_offset(f);
    for (Index col : field_columns(f)) out(pos++) = g.row(f).dot(design_.col(col).transpose());
  }
  return out;
}

Eigen::VectorXd ModelDesign::beta_raw_scale(const Eigen::VectorXd& beta) const {
  Eigen::VectorXd out = beta;
  for (int f = 0; f < kFields; ++f) {
    const auto& cols = field_columns(f);
    Index pos = beta_offset(f);
    Index intercept_pos = -1;
    double shift = 0.0;
    for (Index col : cols) {
      if (col == 0) {
        intercept_pos = pos;
      } else {
        out(pos) = beta(pos) / col_scale_(col);
        shift += beta(pos) * col_mean_(col) / col_scale_(col);
      }
      ++pos;
    }
    if (intercept_pos >= 0) out(intercept_pos) -= shift;
  }
  return out;
}

}  // namespace lcrecon
