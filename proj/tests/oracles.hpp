// Test-only reference implementations, deliberately naive and independent
// of the library's computation paths.
#pragma once

#include <cmath>
#include <vector>

#include "sclft/objectives.hpp"
#include "sclft/rng.hpp"

namespace sclft::testing {

// Direct triple-loop evaluation of the supervised contrastive loss:
// sum_i -1/(N_yi - 1) sum_{j != i, y_j = y_i} log( exp(z_i.z_j/tau) /
// sum_{k != i} exp(z_i.z_k/tau) ), anchors without positives contribute 0.
inline double naive_scl_value(const Matrix& z, const std::vector<int>& labels, double tau) {
  const std::size_t n = z.rows();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t n_same = 0;
    for (std::size_t j = 0; j < n; ++j)
      if (labels[j] == labels[i]) ++n_same;
    if (n_same < 2) continue;

    double denom = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (k == i) continue;
      double s = 0.0;
      for (std::size_t t = 0; t < z.cols(); ++t) s += z(i, t) * z(k, t);
      denom += std::exp(s / tau);
    }
    double anchor = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || labels[j] != labels[i]) continue;
      double s = 0.0;
      for (std::size_t t = 0; t < z.cols(); ++t) s += z(i, t) * z(j, t);
      anchor += std::log(std::exp(s / tau) / denom);
    }
    total -= anchor / static_cast<double>(n_same - 1);
  }
  return total;
}

// Direct evaluation of the self-supervised contrastive loss under the
// partner convention: each view is contrasted against pair_of(i).
inline double naive_self_supervised_value(const Matrix& z, const std::vector<std::size_t>& pair_of,
                                          double tau) {
  const std::size_t n = z.rows();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double denom = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (k == i) continue;
      double s = 0.0;
      for (std::size_t t = 0; t < z.cols(); ++t) s += z(i, t) * z(k, t);
      denom += std::exp(s / tau);
    }
    double s = 0.0;
    for (std::size_t t = 0; t < z.cols(); ++t) s += z(i, t) * z(pair_of[i], t);
    total -= std::log(std::exp(s / tau) / denom);
  }
  return total;
}

inline Matrix random_unit_rows(std::size_t n, std::size_t d, Rng& rng) {
  Matrix m(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    double nrm = 0.0;
    do {
      nrm = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        m(i, j) = rng.normal();
        nrm += m(i, j) * m(i, j);
      }
      nrm = std::sqrt(nrm);
    } while (nrm < 1e-6);
    for (std::size_t j = 0; j < d; ++j) m(i, j) /= nrm;
  }
  return m;
}

inline std::vector<int> random_labels(std::size_t n, int classes, Rng& rng) {
  std::vector<int> labels(n);
  for (auto& l : labels) l = static_cast<int>(rng.below(static_cast<std::uint64_t>(classes)));
  return labels;
}

inline Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = scale * rng.normal();
  return m;
}

inline LabeledBatch random_labeled_batch(std::size_t n, int classes, std::size_t d, Rng& rng,
                                         bool with_logits = true) {
  const Matrix z = random_unit_rows(n, d, rng);
  const std::vector<int> labels = random_labels(n, classes, rng);
  Matrix logits;
  if (with_logits) logits = random_matrix(n, static_cast<std::size_t>(classes), rng);
  return LabeledBatch::make(EmbeddingMatrix::wrap_checked(z), std::move(logits), labels, classes);
}

// fixed-point-free involution over 2m views, randomly matched
inline std::vector<std::size_t> random_pairing(std::size_t views, Rng& rng) {
  std::vector<std::size_t> order(views);
  for (std::size_t i = 0; i < views; ++i) order[i] = i;
  rng.shuffle(order);
  std::vector<std::size_t> pair_of(views);
  for (std::size_t i = 0; i < views; i += 2) {
    pair_of[order[i]] = order[i + 1];
    pair_of[order[i + 1]] = order[i];
  }
  return pair_of;
}

inline AugmentedBatch random_augmented_batch(std::size_t views, std::size_t d, Rng& rng) {
  return AugmentedBatch::make(EmbeddingMatrix::wrap_checked(random_unit_rows(views, d, rng)),
                              random_pairing(views, rng));
}

// Random orthogonal matrix via Gram-Schmidt on a Gaussian matrix.
inline Matrix random_orthogonal(std::size_t d, Rng& rng) {
  Matrix q = random_matrix(d, d, rng);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      double proj = 0.0;
      for (std::size_t k = 0; k < d; ++k) proj += q(i, k) * q(j, k);
      for (std::size_t k = 0; k < d; ++k) q(i, k) -= proj * q(j, k);
    }
    double nrm = 0.0;
    for (std::size_t k = 0; k < d; ++k) nrm += q(i, k) * q(i, k);
    nrm = std::sqrt(nrm);
    for (std::size_t k = 0; k < d; ++k) q(i, k) /= nrm;
  }
  return q;
}

}  // namespace sclft::testing
