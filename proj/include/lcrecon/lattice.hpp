#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <cstddef>
#include <memory>
#include <utility>
#include <vector>

#include "lcrecon/error.hpp"

namespace lcrecon {

using Index = Eigen::Index;

// Regular grid with row-major cell ids and 4-neighbour adjacency.
struct Lattice {
  Index n_rows = 0;
  Index n_cols = 0;
  // Informational cell-centre coordinates in degrees (lower-left origin).
  double lon0 = 0.0;
  double lat0 = 0.0;
  double spacing = 1.0;
  std::vector<std::vector<Index>> neighbors;

  Index size() const { return n_rows * n_cols; }
  Index id(Index row, Index col) const { return row * n_cols + col; }
  Index row(Index id) const { return id / n_cols; }
  Index col(Index id) const { return id % n_cols; }
  std::pair<double, double> coordinates(Index id) const {
    return {lon0 + (static_cast<double>(col(id)) + 0.5) * spacing,
            lat0 + (static_cast<double>(row(id)) + 0.5) * spacing};
  }
  std::size_t edge_count() const;
};

Lattice build_lattice(Index n_rows, Index n_cols);

// Sparse precision Q(kappa) = (kappa^2 I + G)^T (kappa^2 I + G), where G is the
// combinatorial graph Laplacian of the lattice. No boundary correction and no
// variance normalisation.
template <typename Scalar>
struct SparsePrecision {
  Scalar kappa{};
  Eigen::SparseMatrix<Scalar> matrix;

  Index dimension() const { return matrix.rows(); }
};

template <typename Scalar>
Eigen::SparseMatrix<Scalar> graph_laplacian(const Lattice& lattice) {
  std::vector<Eigen::Triplet<Scalar>> triplets;
  triplets.reserve(static_cast<std::size_t>(lattice.size()) * 5);
  for (Index i = 0; i < lattice.size(); ++i) {
    const auto& nb = lattice.neighbors[static_cast<std::size_t>(i)];
    triplets.emplace_back(i, i, static_cast<Scalar>(nb.size()));
    for (Index j : nb) triplets.emplace_back(i, j, Scalar(-1));
  }
  Eigen::SparseMatrix<Scalar> g(lattice.size(), lattice.size());
  g.setFromTriplets(triplets.begin(), triplets.end());
  return g;
}

template <typename Scalar>
SparsePrecision<Scalar> build_precision(const Lattice& lattice, Scalar kappa) {
  if (!(kappa > Scalar(0))) {
    throw InvalidArgument("build_precision: kappa must be positive");
  }
  if (lattice.size() == 0) {
    throw InvalidArgument("build_precision: empty lattice");
  }
  // (k^2 I + G)^T (k^2 I + G) expanded; G is symmetric.
  const Eigen::SparseMatrix<Scalar> g = graph_laplacian<Scalar>(lattice);
  Eigen::SparseMatrix<Scalar> identity(g.rows(), g.cols());
  identity.setIdentity();
  const Scalar k2 = kappa * kappa;
  SparsePrecision<Scalar> q;
  q.kappa = kappa;
  q.matrix = Eigen::SparseMatrix<Scalar>(g * g) + (Scalar(2) * k2) * g +
             (k2 * k2) * identity;
  q.matrix.makeCompressed();
  return q;
}

// Sparse Cholesky with AMD ordering: solve, N(0, Q^-1) sampling, log-determinant.
// Immutable after construction; const members are safe to call concurrently.
// The ordering is computed once and applied explicitly, so factorisations of
// matrices sharing a pattern can share it.
class Factorization {
 public:
  using Solver = Eigen::SimplicialLLT<Eigen::SparseMatrix<double>, Eigen::Lower,
                                      Eigen::NaturalOrdering<int>>;

  explicit Factorization(const Eigen::SparseMatrix<double>& q,
                         double kappa = 0.0);
  // Reuses the ordering and symbolic analysis of `like` when q has the same
  // sparsity pattern; otherwise analyses afresh.
  Factorization(const Eigen::SparseMatrix<double>& q, const Factorization& like);

  Index dimension() const { return dim_; }
  double logdet() const { return logdet_; }
  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
  // x = Q^{-1/2} xi in the factor sense: x ~ N(0, Q^-1) when xi ~ N(0, I).
  Eigen::VectorXd sample_from_standard(const Eigen::VectorXd& xi) const;
  // b^T Q^{-1} b via one triangular solve.
  double inverse_quadform(const Eigen::VectorXd& b) const;

 private:
  struct Symbolic;
  void factorize(const Eigen::SparseMatrix<double>& q, double kappa);

  std::shared_ptr<const Symbolic> symbolic_;
  std::shared_ptr<const Solver> solver_;
  Index dim_ = 0;
  double logdet_ = 0.0;
};

// Q(kappa) for repeated kappa on one lattice: Q = G^2 + 2 kappa^2 G + kappa^4 I
// from cached G and G^2.
class PrecisionFactory {
 public:
  explicit PrecisionFactory(Lattice lattice);

  const Lattice& lattice() const { return lattice_; }
  SparsePrecision<double> precision(double kappa) const;
  Factorization factorize(double kappa) const;

 private:
  Lattice lattice_;
  Eigen::SparseMatrix<double> laplacian_;
  Eigen::SparseMatrix<double> laplacian_sq_;
  Eigen::SparseMatrix<double> identity_;
};

// Separable prior on the 3 x n field X: vec(X) ~ N(0, Sigma (x) Q^-1) with
// vec stacking fields, so the joint precision is Sigma^-1 (x) Q.
template <typename Scalar>
struct KroneckerField {
  Eigen::Matrix<Scalar, 3, 3> sigma = Eigen::Matrix<Scalar, 3, 3>::Identity();
  SparsePrecision<Scalar> q;
};

// tr(Sigma^-1 X Q X^T) = vec(X)^T (Sigma^-1 (x) Q) vec(X), without forming the
// Kronecker product.
template <typename Scalar>
Scalar kron_quadform(const KroneckerField<Scalar>& field,
                     const Eigen::Matrix<Scalar, 3, Eigen::Dynamic>& x) {
  if (x.cols() != field.q.dimension()) {
    throw InvalidArgument("kron_quadform: field has wrong number of cells");
  }
  Eigen::LLT<Eigen::Matrix<Scalar, 3, 3>> llt(field.sigma);
  if (llt.info() != Eigen::Success) {
    throw NumericError("kron_quadform: Sigma is not positive definite");
  }
  const Eigen::Matrix<Scalar, 3, 3> xqx = x * (field.q.matrix * x.transpose());
  const Eigen::Matrix<Scalar, 3, 3> sigma_inv =
      llt.solve(Eigen::Matrix<Scalar, 3, 3>::Identity());
  return sigma_inv.cwiseProduct(xqx).sum();
}

}  // namespace lcrecon
