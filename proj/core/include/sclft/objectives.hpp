#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sclft/numerics.hpp"

namespace sclft {

enum class LossVariant { CE, SCL, Combined, SelfSupervised, CeCe };

std::string to_string(LossVariant v);
LossVariant loss_variant_from_string(const std::string& s);

/// Mixing weight lambda, temperature tau, and the objective selector.
struct LossConfig {
  double lambda = 0.9;
  double tau = 0.3;
  LossVariant variant = LossVariant::Combined;

  void validate() const;
};

/// A batch of N labeled examples: unit-norm embeddings for the contrastive
/// term, raw-head logits for the cross-entropy term.
class LabeledBatch {
 public:
  /// `logits` may be empty for contrastive-only evaluation. `num_classes`
  /// must match logits columns when logits are present.
  static LabeledBatch make(EmbeddingMatrix embeddings, Matrix logits, std::vector<int> labels,
                           int num_classes);

  std::size_t n() const { return labels_.size(); }
  int num_classes() const { return num_classes_; }
  const EmbeddingMatrix& embeddings() const { return embeddings_; }
  const Matrix& logits() const { return logits_; }
  bool has_logits() const { return !logits_.empty(); }
  const std::vector<int>& labels() const { return labels_; }
  /// Number of batch examples sharing label c.
  int class_count(int c) const { return class_counts_[static_cast<std::size_t>(c)]; }

  LabeledBatch with_embeddings(EmbeddingMatrix e) const;
  LabeledBatch with_logits(Matrix l) const;

 private:
  LabeledBatch(EmbeddingMatrix e, Matrix l, std::vector<int> labels, std::vector<int> counts,
               int num_classes);
  EmbeddingMatrix embeddings_;
  Matrix logits_;
  std::vector<int> labels_;
  std::vector<int> class_counts_;
  int num_classes_;
};

/// 2N unit-norm embeddings where pair_of is a fixed-point-free involution
/// mapping each augmented view to its partner.
class AugmentedBatch {
 public:
  static AugmentedBatch make(EmbeddingMatrix embeddings, std::vector<std::size_t> pair_of);

  std::size_t size() const { return pair_of_.size(); }
  const EmbeddingMatrix& embeddings() const { return embeddings_; }
  std::size_t pair_of(std::size_t i) const { return pair_of_[i]; }

  AugmentedBatch with_embeddings(EmbeddingMatrix e) const;

 private:
  AugmentedBatch(EmbeddingMatrix e, std::vector<std::size_t> p);
  EmbeddingMatrix embeddings_;
  std::vector<std::size_t> pair_of_;
};

struct LossOutput {
  double value = 0.0;
  std::optional<Matrix> grad_embeddings;  // d(value)/d(embeddings), ambient space
  std::optional<Matrix> grad_logits;      // d(value)/d(logits)
};

/// Mean multi-class cross entropy over softmax(logits) rows.
/// grad_logits = (softmax - onehot) / N.
LossOutput cross_entropy(const LabeledBatch& batch);

/// Supervised contrastive loss over unit-norm embeddings at temperature
/// cfg.tau. Anchors whose label appears only once in the batch contribute
/// exactly zero to value and gradient. Gradient flows through anchor,
/// positive, and negative roles (no stop-gradient).
LossOutput scl_loss(const LabeledBatch& batch, const LossConfig& cfg);

/// (1 - lambda) * cross_entropy + lambda * scl_loss. Endpoints are exact:
/// lambda=0 reproduces CE and lambda=1 reproduces SCL bit-for-bit.
LossOutput combined_loss(const LabeledBatch& batch, const LossConfig& cfg);

/// Contrastive loss over augmented views: each anchor i is contrasted
/// against its partner pair_of(i), all other 2N-1 views are negatives.
LossOutput self_supervised_loss(const AugmentedBatch& batch, const LossConfig& cfg);

/// Cross entropy over temperature-scaled normalized-embedding logits
/// (head_weights * z_i / tau). grad_logits refers to those scaled logits;
/// grad_embeddings is the chain through them back to the embeddings.
LossOutput ce_ce_loss(const LabeledBatch& batch, const Matrix& head_weights,
                      const LossConfig& cfg);

/// Dispatch on cfg.variant. CeCe mixes (1-lambda)*CE with lambda*ce_ce_loss
/// and requires head_weights; in that case grad_logits refers to
/// batch.logits only (the ce_ce head gradient is recovered by the caller
/// via ce_ce_loss). SelfSupervised uses the AugmentedBatch overload.
LossOutput evaluate_objective(const LabeledBatch& batch, const LossConfig& cfg,
                              const Matrix* head_weights = nullptr);
LossOutput evaluate_objective(const AugmentedBatch& batch, const LossConfig& cfg);

/// Per-row projection of an ambient-space gradient onto the tangent space
/// of the unit sphere: g - (g . z) z.
Matrix tangent_project(const Matrix& grad, const EmbeddingMatrix& z);

using LabeledLossFn = std::function<LossOutput(const LabeledBatch&)>;
using AugmentedLossFn = std::function<LossOutput(const AugmentedBatch&)>;

/// Central finite-difference check of analytic gradients; h in [1e-7, 1e-4].
/// Embedding perturbations are re-normalized and compared against the
/// tangent-projected analytic gradient (the unit-norm constraint makes the
/// raw ambient comparison ill-posed); logits are compared directly.
/// Returns the max relative error over entries with |analytic| > 1e-8.
double finite_difference_check(const LabeledLossFn& fn, const LabeledBatch& batch, double h);
double finite_difference_check(const AugmentedLossFn& fn, const AugmentedBatch& batch, double h);

}  // namespace sclft
