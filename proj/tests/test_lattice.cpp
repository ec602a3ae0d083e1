#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "lcrecon/lattice.hpp"
#include "lcrecon/random.hpp"
#include "support.hpp"

using namespace lcrecon;

TEST_SUITE("lattice") {
  TEST_CASE("neighbour structure of small grids") {
    const Lattice one = build_lattice(1, 1);
    CHECK(one.size() == 1);
    CHECK(one.neighbors[0].empty());
    CHECK(one.edge_count() == 0);

    const Lattice two = build_lattice(2, 2);
    CHECK(two.size() == 4);
    CHECK(two.edge_count() == 4);

    const Lattice three = build_lattice(3, 3);
    CHECK(three.neighbors[static_cast<std::size_t>(three.id(1, 1))].size() == 4);
    for (Index corner : {three.id(0, 0), three.id(0, 2), three.id(2, 0), three.id(2, 2)}) {
      CHECK(three.neighbors[static_cast<std::size_t>(corner)].size() == 2);
    }
    CHECK_THROWS_AS(build_lattice(0, 3), InvalidArgument);
  }

  TEST_CASE("precision entries") {
    const auto q1 = build_precision(build_lattice(1, 1), 2.0);
    CHECK(Eigen::MatrixXd(q1.matrix)(0, 0) == doctest::Approx(16.0));

    const Eigen::MatrixXd q2 = Eigen::MatrixXd(build_precision(build_lattice(1, 2), 1.0).matrix);
    Eigen::Matrix2d expected;
    expected << 5, -4, -4, 5;
    CHECK((q2 - expected).norm() < 1e-12);

    const Lattice lattice = build_lattice(5, 5);
    const Eigen::MatrixXd q = Eigen::MatrixXd(build_precision(lattice, 1.0).matrix);
    CHECK(q.row(lattice.id(2, 2)).sum() == doctest::Approx(1.0));
    CHECK_THROWS_AS(build_precision(lattice, 0.0), InvalidArgument);
    CHECK_THROWS_AS(build_precision(lattice, -1.0), InvalidArgument);
  }

  TEST_CASE("precision is symmetric positive definite across kappa") {
    const Lattice lattice = build_lattice(6, 7);
    for (double kappa : {0.1, 1.0, 10.0}) {
      const Eigen::MatrixXd q = Eigen::MatrixXd(build_precision(lattice, kappa).matrix);
      CHECK((q - q.transpose()).norm() == 0.0);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(q);
      CHECK(es.eigenvalues().minCoeff() > 0.0);
    }
  }

  TEST_CASE("precision factory agrees with direct construction") {
    const Lattice lattice = build_lattice(4, 5);
    const PrecisionFactory factory(lattice);
    for (double kappa : {0.05, 0.3, 2.0}) {
      const Eigen::MatrixXd a = Eigen::MatrixXd(factory.precision(kappa).matrix);
      const Eigen::MatrixXd b = Eigen::MatrixXd(build_precision(lattice, kappa).matrix);
      CHECK((a - b).norm() <= 1e-12 * b.norm());
    }
  }

  TEST_CASE("log-determinant") {
    CHECK(Factorization(build_precision(build_lattice(1, 1), 2.0).matrix).logdet() ==
          doctest::Approx(std::log(16.0)).epsilon(1e-12));
    CHECK(Factorization(build_precision(build_lattice(1, 2), 1.0).matrix).logdet() ==
          doctest::Approx(std::log(9.0)).epsilon(1e-12));

    const Eigen::SparseMatrix<double> q = build_precision(build_lattice(5, 4), 0.4).matrix;
    const double dense = Eigen::LLT<Eigen::MatrixXd>(Eigen::MatrixXd(q)).matrixLLT().diagonal().array().log().sum() * 2.0;
    CHECK(Factorization(q).logdet() == doctest::Approx(dense).epsilon(1e-10));
  }

  TEST_CASE("solve, quadratic form and shared ordering") {
    const Lattice lattice = build_lattice(6, 6);
    const auto q = build_precision(lattice, 0.7).matrix;
    const Factorization f(q);
    Rng rng(5);
    const Eigen::VectorXd b = standard_normal_vector(lattice.size(), rng);
    const Eigen::VectorXd x = f.solve(b);
    CHECK((q * x - b).norm() < 1e-10 * b.norm());
    const Eigen::MatrixXd dense_inv = Eigen::MatrixXd(q).inverse();
    CHECK(f.inverse_quadform(b) == doctest::Approx(b.dot(dense_inv * b)).epsilon(1e-10));

    const auto q_other = build_precision(lattice, 1.9).matrix;
    const Factorization reused(q_other, f);
    const Factorization fresh(q_other);
    CHECK(reused.logdet() == doctest::Approx(fresh.logdet()).epsilon(1e-12));
    CHECK((reused.solve(b) - fresh.solve(b)).norm() < 1e-10 * fresh.solve(b).norm());
  }

  TEST_CASE("samples have covariance Q^-1") {
    const Lattice lattice = build_lattice(4, 4);
    const auto q = build_precision(lattice, 1.0).matrix;
    const Factorization f(q);
    const Eigen::MatrixXd cov = Eigen::MatrixXd(q).inverse();
    const Index n = lattice.size();
    const int draws = 100000;
    Rng rng(11);
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(n, n);
    for (int d = 0; d < draws; ++d) {
      const Eigen::VectorXd x = f.sample_from_standard(standard_normal_vector(n, rng));
      s.selfadjointView<Eigen::Lower>().rankUpdate(x);
    }
    s = s.selfadjointView<Eigen::Lower>();
    s /= draws;
    int outside = 0;
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j <= i; ++j) {
        // Var of x_i x_j under a Gaussian: S_ii S_jj + S_ij^2.
        const double se = std::sqrt((cov(i, i) * cov(j, j) + cov(i, j) * cov(i, j)) / draws);
        if (std::abs(s(i, j) - cov(i, j)) > 3.0 * se) ++outside;
      }
    }
    // 136 entries at 3 SE: a handful may legitimately fall outside.
    CHECK(outside <= 3);
  }

  TEST_CASE("Kronecker quadratic form") {
    KroneckerField<double> field;
    field.q = build_precision(build_lattice(2, 2), 0.8);
    Eigen::Matrix<double, 3, Eigen::Dynamic> x = Eigen::MatrixXd::Zero(3, 4);
    CHECK(kron_quadform(field, x) == 0.0);

    KroneckerField<double> scalar;
    scalar.q = build_precision(build_lattice(1, 1), 1.5);
    Eigen::Matrix<double, 3, Eigen::Dynamic> x1(3, 1);
    x1 << 0.3, -1.2, 2.0;
    const double q = Eigen::MatrixXd(scalar.q.matrix)(0, 0);
    CHECK(kron_quadform(scalar, x1) == doctest::Approx(q * x1.squaredNorm()));

    Rng rng(9);
    for (int trial = 0; trial < 5; ++trial) {
      Eigen::Matrix3d a = Eigen::Matrix3d::Random();
      field.sigma = a * a.transpose() + Eigen::Matrix3d::Identity();
      for (Index i = 0; i < x.size(); ++i) x.data()[i] = standard_normal(rng);
      const Eigen::MatrixXd qd = Eigen::MatrixXd(field.q.matrix);
      const Eigen::Matrix3d si = field.sigma.inverse();
      Eigen::MatrixXd kron(12, 12);
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) kron.block(4 * r, 4 * c, 4, 4) = si(r, c) * qd;
      Eigen::VectorXd v(12);
      for (int r = 0; r < 3; ++r) v.segment(4 * r, 4) = x.row(r).transpose();
      const double dense = v.dot(kron * v);
      CHECK(kron_quadform(field, x) == doctest::Approx(dense).epsilon(1e-10));
    }
  }
}
