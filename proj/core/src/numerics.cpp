#include "sclft/numerics.hpp"

#include <algorithm>
#include <cmath>

namespace sclft {

Matrix Matrix::from_rows(const std::vector<Vector>& rows) {
  if (rows.empty()) return Matrix();
  Matrix m(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    require(rows[i].size() == m.cols(), Errc::shape_mismatch, "ragged rows in Matrix::from_rows");
    std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
  }
  return m;
}

double dot(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), Errc::shape_mismatch, "dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

Vector l2_normalize(const Vector& v) {
  const double n = l2_norm(v);
  require(n >= 1e-30, Errc::zero_vector, "l2_normalize: vector norm below 1e-30");
  Vector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / n;
  return out;
}

Vector softmax(const Vector& logits) {
  require(!logits.empty(), Errc::invalid_argument, "softmax: empty input");
  const double m = *std::max_element(logits.begin(), logits.end());
  Vector out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - m);
    sum += out[i];
  }
  for (double& x : out) x /= sum;
  return out;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.rows(), Errc::shape_mismatch, "matmul: inner dimension mismatch");
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  }
  return c;
}

Matrix matmul_bt(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.cols(), Errc::shape_mismatch, "matmul_bt: inner dimension mismatch");
  Matrix c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) c(i, j) = dot(a.row(i), b.row(j));
  }
  return c;
}

Matrix matmul_at(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows(), Errc::shape_mismatch, "matmul_at: inner dimension mismatch");
  Matrix c(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = a(k, i);
      if (aki == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aki * b(k, j);
    }
  }
  return c;
}

Matrix transpose(const Matrix& m) {
  Matrix t(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) t(j, i) = m(i, j);
  return t;
}

EmbeddingMatrix EmbeddingMatrix::normalize_rows(const Matrix& m) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double n = l2_norm(m.row(i));
    require(n >= 1e-30, Errc::zero_vector, "EmbeddingMatrix: zero row " + std::to_string(i));
    for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = m(i, j) / n;
  }
  return EmbeddingMatrix(std::move(out));
}

EmbeddingMatrix EmbeddingMatrix::wrap_checked(Matrix m) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double n = l2_norm(m.row(i));
    require(std::abs(n - 1.0) <= 1e-9, Errc::invalid_argument,
            "EmbeddingMatrix: row " + std::to_string(i) + " is not unit norm");
  }
  return EmbeddingMatrix(std::move(m));
}

Matrix pairwise_dot(const EmbeddingMatrix& e) {
  const std::size_t n = e.n();
  Matrix g(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    g(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = std::clamp(dot(e.row(i), e.row(j)), -1.0, 1.0);
      g(i, j) = d;
      g(j, i) = d;
    }
  }
  return g;
}

SymmetricEigen symmetric_eigen(const Matrix& s) {
  require(s.rows() == s.cols(), Errc::shape_mismatch, "symmetric_eigen: matrix not square");
  const std::size_t n = s.rows();
  Matrix a = s;
  Matrix v(n, n);
  for (std::size_t i = 0; i < n; ++i) v(i, i) = 1.0;

  double scale = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) scale = std::max(scale, std::abs(a(i, j)));
  const double tol = std::max(scale, 1.0) * 1e-15;

  // Cyclic Jacobi sweeps; n stays small (embedding dim), convergence is fast.
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p + 1 < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (std::sqrt(off) <= tol) break;

    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a(p, q)) <= tol * 1e-2) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - sn * akq;
          a(k, q) = sn * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - sn * aqk;
          a(q, k) = sn * apk + c * aqk;
          const double vpk = v(p, k), vqk = v(q, k);
          v(p, k) = c * vpk - sn * vqk;
          v(q, k) = sn * vpk + c * vqk;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });

  SymmetricEigen out;
  out.values.resize(n);
  out.vectors = Matrix(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    out.values[r] = a(order[r], order[r]);
    for (std::size_t k = 0; k < n; ++k) out.vectors(r, k) = v(order[r], k);
  }
  return out;
}

Matrix pca_project_2d(const Matrix& m) {
  const std::size_t n = m.rows();
  const std::size_t d = m.cols();
  require(n >= 2, Errc::invalid_argument, "pca_project_2d: need at least 2 rows");

  Vector mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) mean[j] += m(i, j);
  for (double& x : mean) x /= static_cast<double>(n);

  Matrix centered(n, d);
  double maxabs = 0.0, maxc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      centered(i, j) = m(i, j) - mean[j];
      maxabs = std::max(maxabs, std::abs(m(i, j)));
      maxc = std::max(maxc, std::abs(centered(i, j)));
    }
  }
  require(maxc > std::max(maxabs, 1.0) * 1e-12, Errc::degenerate_data,
          "pca_project_2d: all rows identical");

  // Sample covariance (1/(n-1)); projected column variances then equal the
  // top eigenvalues exactly.
  Matrix cov = matmul_at(centered, centered);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) cov(i, j) /= static_cast<double>(n - 1);

  const SymmetricEigen eig = symmetric_eigen(cov);
  const std::size_t ncomp = std::min<std::size_t>(2, d);

  Matrix comps(2, d);  // second component stays zero when d == 1
  for (std::size_t c = 0; c < ncomp; ++c) {
    double sign = 1.0;
    for (std::size_t j = 0; j < d; ++j) {
      if (std::abs(eig.vectors(c, j)) > 1e-12) {
        sign = eig.vectors(c, j) > 0.0 ? 1.0 : -1.0;
        break;
      }
    }
    for (std::size_t j = 0; j < d; ++j) comps(c, j) = sign * eig.vectors(c, j);
  }

  return matmul_bt(centered, comps);
}

}  // namespace sclft
