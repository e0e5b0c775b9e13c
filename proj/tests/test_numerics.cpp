#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "oracles.hpp"
#include "sclft/numerics.hpp"

using namespace sclft;
using sclft::testing::random_matrix;
using sclft::testing::random_orthogonal;
using sclft::testing::random_unit_rows;

TEST_CASE("l2_normalize basics") {
  const Vector v = l2_normalize({3.0, 4.0});
  CHECK(v[0] == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(v[1] == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(std::abs(l2_norm(v) - 1.0) < 1e-12);

  CHECK_THROWS_AS(l2_normalize({0.0, 0.0}), Error);
  try {
    l2_normalize({0.0, 0.0});
  } catch (const Error& e) {
    CHECK(e.code() == Errc::zero_vector);
  }
}

TEST_CASE("l2_normalize is idempotent") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    Vector v(1 + rng.below(16));
    for (double& x : v) x = rng.uniform(-10.0, 10.0);
    if (l2_norm(v) < 1e-12) v[0] = 1.0;
    const Vector once = l2_normalize(v);
    const Vector twice = l2_normalize(once);
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(std::abs(once[i] - twice[i]) < 1e-15);
  }
}

TEST_CASE("softmax examples") {
  const Vector u = softmax({1.0, 1.0, 1.0});
  for (double x : u) CHECK(x == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  const Vector a = softmax({0.0, std::log(2.0)});
  CHECK(a[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(a[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));

  const Vector big = softmax({1000.0, 1000.0});
  CHECK(big[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(big[1] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("softmax sums to one and shifts away") {
  Rng rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    Vector logits(2 + rng.below(8));
    for (double& x : logits) x = rng.uniform(-30.0, 30.0);
    const Vector p = softmax(logits);
    double sum = 0.0;
    for (double x : p) {
      CHECK(x > 0.0);
      sum += x;
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);

    const double shift = rng.uniform(-100.0, 100.0);
    Vector shifted = logits;
    for (double& x : shifted) x += shift;
    const Vector q = softmax(shifted);
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(std::abs(p[i] - q[i]) < 1e-12);
  }
}

TEST_CASE("pairwise_dot on orthonormal and single rows") {
  Matrix two(2, 2);
  two(0, 0) = 1.0;
  two(1, 1) = 1.0;
  const Matrix g = pairwise_dot(EmbeddingMatrix::wrap_checked(two));
  CHECK(g(0, 0) == 1.0);
  CHECK(g(1, 1) == 1.0);
  CHECK(g(0, 1) == 0.0);
  CHECK(g(1, 0) == 0.0);

  Matrix one(1, 3);
  one(0, 1) = 1.0;
  const Matrix g1 = pairwise_dot(EmbeddingMatrix::wrap_checked(one));
  CHECK(g1.rows() == 1);
  CHECK(g1(0, 0) == 1.0);
}

TEST_CASE("pairwise_dot matches the double-loop oracle") {
  Rng rng(13);
  const Matrix z = random_unit_rows(8, 16, rng);
  const Matrix g = pairwise_dot(EmbeddingMatrix::wrap_checked(z));
  for (std::size_t i = 0; i < 8; ++i) {
    for (std::size_t j = 0; j < 8; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < 16; ++t) s += z(i, t) * z(j, t);
      CHECK(std::abs(g(i, j) - std::min(1.0, std::max(-1.0, s))) < 1e-12);
      CHECK(g(i, j) == g(j, i));
      CHECK(g(i, j) <= 1.0);
      CHECK(g(i, j) >= -1.0);
    }
  }
}

TEST_CASE("pairwise_dot is rotation invariant") {
  Rng rng(14);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d = 3 + rng.below(6);
    const Matrix z = random_unit_rows(5, d, rng);
    const Matrix q = random_orthogonal(d, rng);
    Matrix zr = matmul_bt(z, q);  // rotate all rows by the same orthogonal map
    const Matrix a = pairwise_dot(EmbeddingMatrix::wrap_checked(z));
    const Matrix b = pairwise_dot(EmbeddingMatrix::normalize_rows(zr));
    for (std::size_t i = 0; i < a.rows(); ++i)
      for (std::size_t j = 0; j < a.cols(); ++j) CHECK(std::abs(a(i, j) - b(i, j)) < 1e-9);
  }
}

namespace {

double column_variance(const Matrix& m, std::size_t col) {
  double mu = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i) mu += m(i, col);
  mu /= static_cast<double>(m.rows());
  double s = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i) s += (m(i, col) - mu) * (m(i, col) - mu);
  return s / static_cast<double>(m.rows() - 1);
}

}  // namespace

TEST_CASE("pca_project_2d preserves distances for 2-D inputs") {
  Rng rng(15);
  const Matrix x = random_matrix(12, 2, rng, 3.0);
  const Matrix y = pca_project_2d(x);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = i + 1; j < x.rows(); ++j) {
      const double dx0 = x(i, 0) - x(j, 0), dx1 = x(i, 1) - x(j, 1);
      const double dy0 = y(i, 0) - y(j, 0), dy1 = y(i, 1) - y(j, 1);
      CHECK(std::abs(std::sqrt(dx0 * dx0 + dx1 * dx1) - std::sqrt(dy0 * dy0 + dy1 * dy1)) < 1e-9);
    }
  }
}

TEST_CASE("pca_project_2d collapses collinear 3-D points") {
  Matrix x(6, 3);
  for (std::size_t i = 0; i < 6; ++i) {
    const double t = static_cast<double>(i) - 2.0;
    x(i, 0) = 1.0 * t;
    x(i, 1) = -2.0 * t;
    x(i, 2) = 0.5 * t;
  }
  const Matrix y = pca_project_2d(x);
  CHECK(column_variance(y, 1) < 1e-12);
}

TEST_CASE("pca_project_2d variances match the Eigen eigensolver oracle") {
  Rng rng(16);
  const Matrix x = random_matrix(10, 5, rng, 2.0);
  const Matrix y = pca_project_2d(x);

  Eigen::MatrixXd ex(10, 5);
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 5; ++j) ex(i, j) = x(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
  const Eigen::MatrixXd centered = ex.rowwise() - ex.colwise().mean();
  const Eigen::MatrixXd cov = centered.transpose() * centered / 9.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  const auto evals = solver.eigenvalues();  // ascending

  CHECK(std::abs(column_variance(y, 0) - evals(4)) < 1e-9);
  CHECK(std::abs(column_variance(y, 1) - evals(3)) < 1e-9);
  // total top-2 variance is preserved
  CHECK(std::abs(column_variance(y, 0) + column_variance(y, 1) - (evals(4) + evals(3))) < 1e-9);
}

TEST_CASE("pca_project_2d rejects identical rows") {
  Matrix x(4, 3, 1.25);
  CHECK_THROWS_AS(pca_project_2d(x), Error);
  try {
    pca_project_2d(x);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::degenerate_data);
  }
}

TEST_CASE("pca_project_2d sign convention is deterministic") {
  Rng rng(17);
  const Matrix x = random_matrix(9, 4, rng);
  const Matrix a = pca_project_2d(x);
  const Matrix b = pca_project_2d(x);
  CHECK(a == b);
}

TEST_CASE("symmetric_eigen agrees with Eigen on random symmetric matrices") {
  Rng rng(18);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t d = 2 + rng.below(7);
    Matrix s(d, d);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = i; j < d; ++j) s(i, j) = s(j, i) = rng.uniform(-2.0, 2.0);

    const SymmetricEigen mine = symmetric_eigen(s);

    Eigen::MatrixXd es(static_cast<int>(d), static_cast<int>(d));
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) es(static_cast<int>(i), static_cast<int>(j)) = s(i, j);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(es);

    for (std::size_t k = 0; k < d; ++k) {
      const double reference = solver.eigenvalues()(static_cast<int>(d - 1 - k));
      CHECK(std::abs(mine.values[k] - reference) < 1e-9);
    }
    // rows of `vectors` are unit and mutually orthogonal
    for (std::size_t a = 0; a < d; ++a) {
      for (std::size_t b = a; b < d; ++b) {
        const double expected = a == b ? 1.0 : 0.0;
        CHECK(std::abs(dot(mine.vectors.row(a), mine.vectors.row(b)) - expected) < 1e-9);
      }
    }
  }
}
