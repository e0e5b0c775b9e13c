#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sclft/error.hpp"

namespace sclft {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles. All loss/gradient numerics run in
/// double precision; see finite_difference_check for why.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), v_(rows * cols, fill) {}

  static Matrix from_rows(const std::vector<Vector>& rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return v_.size(); }
  bool empty() const { return v_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return v_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return v_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {v_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {v_.data() + i * cols_, cols_}; }

  double* data() { return v_.data(); }
  const double* data() const { return v_.data(); }

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  friend bool operator==(const Matrix& a, const Matrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.v_ == b.v_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> v_;
};

/// N x d batch of embeddings whose rows are unit l2 norm (within 1e-9).
/// Construct via normalize_rows() or wrap_checked().
class EmbeddingMatrix {
 public:
  /// Row-wise l2-normalizes `m`. Throws Errc::zero_vector on a zero row.
  static EmbeddingMatrix normalize_rows(const Matrix& m);

  /// Validates that rows are already unit norm (within 1e-9).
  static EmbeddingMatrix wrap_checked(Matrix m);

  std::size_t n() const { return m_.rows(); }
  std::size_t dim() const { return m_.cols(); }
  const Matrix& matrix() const { return m_; }
  std::span<const double> row(std::size_t i) const { return m_.row(i); }

 private:
  explicit EmbeddingMatrix(Matrix m) : m_(std::move(m)) {}
  Matrix m_;
};

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);

/// Scales v to unit l2 norm. Throws Errc::zero_vector if ||v|| < 1e-30.
Vector l2_normalize(const Vector& v);

/// Numerically stable softmax (max-subtraction); entries positive, sum 1.
Vector softmax(const Vector& logits);

/// C = A * B.
Matrix matmul(const Matrix& a, const Matrix& b);

/// C = A * B^T.
Matrix matmul_bt(const Matrix& a, const Matrix& b);

/// C = A^T * B.
Matrix matmul_at(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& m);

/// Gram matrix of unit-norm rows: symmetric, diagonal 1, entries in [-1, 1].
Matrix pairwise_dot(const EmbeddingMatrix& e);

/// Projects mean-centered rows of `m` onto the top-2 principal components.
/// Components are orthonormal with a fixed sign convention (first coordinate
/// of magnitude > 1e-12 is positive) so exports are deterministic.
/// Throws Errc::degenerate_data if all rows are identical.
Matrix pca_project_2d(const Matrix& m);

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues in descending order and matching unit eigenvectors
/// (as rows of `vectors`).
struct SymmetricEigen {
  Vector values;
  Matrix vectors;
};
SymmetricEigen symmetric_eigen(const Matrix& s);

}  // namespace sclft
