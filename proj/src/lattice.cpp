#include "lcrecon/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace lcrecon {

std::size_t Lattice::edge_count() const {
  std::size_t twice = 0;
  for (const auto& nb : neighbors) twice += nb.size();
  return twice / 2;
}

Lattice build_lattice(Index n_rows, Index n_cols) {
  if (n_rows < 1 || n_cols < 1) {
    throw InvalidArgument("build_lattice: dimensions must be at least 1");
  }
  Lattice lattice;
  lattice.n_rows = n_rows;
  lattice.n_cols = n_cols;
  lattice.neighbors.resize(static_cast<std::size_t>(n_rows * n_cols));
  for (Index r = 0; r < n_rows; ++r) {
    for (Index c = 0; c < n_cols; ++c) {
      auto& nb = lattice.neighbors[static_cast<std::size_t>(lattice.id(r, c))];
      if (r > 0) nb.push_back(lattice.id(r - 1, c));
      if (c > 0) nb.push_back(lattice.id(r, c - 1));
      if (c + 1 < n_cols) nb.push_back(lattice.id(r, c + 1));
      if (r + 1 < n_rows) nb.push_back(lattice.id(r + 1, c));
    }
  }
  return lattice;
}

struct Factorization::Symbolic {
  Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> p;  // applied as P Q P^T
  std::vector<int> outer;
  std::vector<int> inner;

  explicit Symbolic(const Eigen::SparseMatrix<double>& q)
      : outer(q.outerIndexPtr(), q.outerIndexPtr() + q.outerSize() + 1),
        inner(q.innerIndexPtr(), q.innerIndexPtr() + q.nonZeros()) {
    Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> pinv;
    const Eigen::SparseMatrix<double> full = q.selfadjointView<Eigen::Lower>();
    Eigen::AMDOrdering<int>()(full, pinv);
    p = pinv.inverse();
  }

  bool matches(const Eigen::SparseMatrix<double>& q) const {
    return q.isCompressed() && static_cast<std::size_t>(q.outerSize()) + 1 == outer.size() &&
           static_cast<std::size_t>(q.nonZeros()) == inner.size() &&
           std::equal(outer.begin(), outer.end(), q.outerIndexPtr()) &&
           std::equal(inner.begin(), inner.end(), q.innerIndexPtr());
  }
};

Factorization::Factorization(const Eigen::SparseMatrix<double>& q, double kappa)
    : dim_(q.rows()) {
  Eigen::SparseMatrix<double> compressed = q;
  compressed.makeCompressed();
  symbolic_ = std::make_shared<const Symbolic>(compressed);
  factorize(compressed, kappa);
}

Factorization::Factorization(const Eigen::SparseMatrix<double>& q, const Factorization& like)
    : dim_(q.rows()) {
  if (like.symbolic_ && like.symbolic_->matches(q)) {
    symbolic_ = like.symbolic_;
    factorize(q, 0.0);
  } else {
    *this = Factorization(q);
  }
}

void Factorization::factorize(const Eigen::SparseMatrix<double>& q, double kappa) {
  Eigen::SparseMatrix<double> permuted(q.rows(), q.cols());
  permuted.selfadjointView<Eigen::Lower>() = q.selfadjointView<Eigen::Lower>().twistedBy(symbolic_->p);
  auto solver = std::make_shared<Solver>(permuted);
  if (solver->info() != Eigen::Success) {
    std::ostringstream msg;
    msg << "sparse Cholesky failed (kappa=" << kappa << ", n=" << q.rows()
        << ", nnz=" << q.nonZeros() << ")";
    throw NumericError(msg.str());
  }
  // The diagonal leads each column of the stored lower factor.
  const auto& l = solver->matrixL().nestedExpression();
  double acc = 0.0;
  for (Index j = 0; j < l.outerSize(); ++j) acc += std::log(l.valuePtr()[l.outerIndexPtr()[j]]);
  logdet_ = 2.0 * acc;
  if (!std::isfinite(logdet_)) {
    std::ostringstream msg;
    msg << "non-finite log-determinant (kappa=" << kappa << ", n=" << q.rows()
        << ")";
    throw NumericError(msg.str());
  }
  solver_ = std::move(solver);
}

Eigen::VectorXd Factorization::solve(const Eigen::VectorXd& b) const {
  return symbolic_->p.transpose() * solver_->solve(symbolic_->p * b);
}

Eigen::VectorXd Factorization::sample_from_standard(
    const Eigen::VectorXd& xi) const {
  // P Q P^T = L L^T  =>  x = P^T L^-T xi has covariance Q^-1.
  const Eigen::VectorXd y = solver_->matrixU().solve(xi);
  return symbolic_->p.transpose() * y;
}

double Factorization::inverse_quadform(const Eigen::VectorXd& b) const {
  const Eigen::VectorXd pb = symbolic_->p * b;
  return solver_->matrixL().solve(pb).squaredNorm();
}

PrecisionFactory::PrecisionFactory(Lattice lattice)
    : lattice_(std::move(lattice)) {
  if (lattice_.size() == 0) throw InvalidArgument("PrecisionFactory: empty lattice");
  laplacian_ = graph_laplacian<double>(lattice_);
  laplacian_sq_ = Eigen::SparseMatrix<double>(laplacian_ * laplacian_);
  identity_.resize(lattice_.size(), lattice_.size());
  identity_.setIdentity();
}

SparsePrecision<double> PrecisionFactory::precision(double kappa) const {
  if (!(kappa > 0.0) || !std::isfinite(kappa)) {
    throw InvalidArgument("build_precision: kappa must be positive");
  }
  const double k2 = kappa * kappa;
  SparsePrecision<double> q;
  q.kappa = kappa;
  q.matrix = laplacian_sq_ + (2.0 * k2) * laplacian_ + (k2 * k2) * identity_;
  q.matrix.makeCompressed();
  return q;
}

Factorization PrecisionFactory::factorize(double kappa) const {
  return Factorization(precision(kappa).matrix, kappa);
}

}  // namespace lcrecon
