#include "sclft/objectives.hpp"

#include <algorithm>
#include <cmath>

namespace sclft {

std::string to_string(LossVariant v) {
  switch (v) {
    case LossVariant::CE: return "ce";
    case LossVariant::SCL: return "scl";
    case LossVariant::Combined: return "combined";
    case LossVariant::SelfSupervised: return "self_supervised";
    case LossVariant::CeCe: return "ce_ce";
  }
  return "?";
}

LossVariant loss_variant_from_string(const std::string& s) {
  if (s == "ce") return LossVariant::CE;
  if (s == "scl") return LossVariant::SCL;
  if (s == "combined") return LossVariant::Combined;
  if (s == "self_supervised" || s == "self") return LossVariant::SelfSupervised;
  if (s == "ce_ce" || s == "cece") return LossVariant::CeCe;
  raise(Errc::invalid_argument, "unknown loss variant: " + s);
}

void LossConfig::validate() const {
  require(lambda >= 0.0 && lambda <= 1.0, Errc::invalid_argument,
          "LossConfig: lambda must lie in [0, 1]");
  require(tau > 0.0, Errc::invalid_temperature, "LossConfig: tau must be positive");
}

LabeledBatch::LabeledBatch(EmbeddingMatrix e, Matrix l, std::vector<int> labels,
                           std::vector<int> counts, int num_classes)
    : embeddings_(std::move(e)),
      logits_(std::move(l)),
      labels_(std::move(labels)),
      class_counts_(std::move(counts)),
      num_classes_(num_classes) {}

LabeledBatch LabeledBatch::make(EmbeddingMatrix embeddings, Matrix logits,
                                std::vector<int> labels, int num_classes) {
  require(num_classes >= 2, Errc::invalid_argument, "LabeledBatch: need at least 2 classes");
  require(!labels.empty(), Errc::invalid_argument, "LabeledBatch: empty batch");
  require(labels.size() == embeddings.n(), Errc::shape_mismatch,
          "LabeledBatch: labels/embeddings size mismatch");
  if (!logits.empty()) {
    require(logits.rows() == labels.size() && logits.cols() == static_cast<std::size_t>(num_classes),
            Errc::shape_mismatch, "LabeledBatch: logits shape mismatch");
  }
  std::vector<int> counts(static_cast<std::size_t>(num_classes), 0);
  for (int y : labels) {
    require(y >= 0 && y < num_classes, Errc::invalid_argument,
            "LabeledBatch: label out of range");
    ++counts[static_cast<std::size_t>(y)];
  }
  return LabeledBatch(std::move(embeddings), std::move(logits), std::move(labels),
                      std::move(counts), num_classes);
}

LabeledBatch LabeledBatch::with_embeddings(EmbeddingMatrix e) const {
  require(e.n() == labels_.size(), Errc::shape_mismatch, "with_embeddings: size mismatch");
  return LabeledBatch(std::move(e), logits_, labels_, class_counts_, num_classes_);
}

LabeledBatch LabeledBatch::with_logits(Matrix l) const {
  return LabeledBatch::make(embeddings_, std::move(l), labels_, num_classes_);
}

AugmentedBatch::AugmentedBatch(EmbeddingMatrix e, std::vector<std::size_t> p)
    : embeddings_(std::move(e)), pair_of_(std::move(p)) {}

AugmentedBatch AugmentedBatch::make(EmbeddingMatrix embeddings,
                                    std::vector<std::size_t> pair_of) {
  const std::size_t n = embeddings.n();
  require(pair_of.size() == n, Errc::shape_mismatch,
          "AugmentedBatch: pair_of/embeddings size mismatch");
  require(n >= 2 && n % 2 == 0, Errc::invalid_pairing,
          "AugmentedBatch: need an even number of views");
  for (std::size_t i = 0; i < n; ++i) {
    require(pair_of[i] < n && pair_of[i] != i && pair_of[pair_of[i]] == i, Errc::invalid_pairing,
            "AugmentedBatch: pair_of is not a fixed-point-free involution");
  }
  return AugmentedBatch(std::move(embeddings), std::move(pair_of));
}

AugmentedBatch AugmentedBatch::with_embeddings(EmbeddingMatrix e) const {
  require(e.n() == pair_of_.size(), Errc::shape_mismatch, "with_embeddings: size mismatch");
  return AugmentedBatch(std::move(e), pair_of_);
}

LossOutput cross_entropy(const LabeledBatch& batch) {
  require(batch.has_logits(), Errc::invalid_argument, "cross_entropy: batch has no logits");
  const std::size_t n = batch.n();
  const std::size_t c = batch.logits().cols();
  const double inv_n = 1.0 / static_cast<double>(n);

  LossOutput out;
  out.grad_logits = Matrix(n, c);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = batch.logits().row(i);
    Vector p = softmax(Vector(row.begin(), row.end()));
    const std::size_t yi = static_cast<std::size_t>(batch.labels()[i]);
    // log p computed from the stable softmax; p[yi] > 0 by construction
    out.value -= inv_n * std::log(p[yi]);
    for (std::size_t j = 0; j < c; ++j) {
      (*out.grad_logits)(i, j) = (p[j] - (j == yi ? 1.0 : 0.0)) * inv_n;
    }
  }
  return out;
}

namespace {

// Row-wise softmax over k != i of the scaled similarity matrix s_ik = z_i.z_k/tau,
// plus log of each denominator. Shared by the supervised and self-supervised losses.
struct ContrastiveRows {
  Matrix p;        // p(i,k) = exp(s_ik) / sum_{k' != i} exp(s_ik'), p(i,i) = 0
  Vector log_den;  // log sum_{k != i} exp(s_ik)
  Matrix s;        // scaled similarities
};

ContrastiveRows contrastive_rows(const EmbeddingMatrix& z, double tau) {
  const std::size_t n = z.n();
  ContrastiveRows r;
  r.s = pairwise_dot(z);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k) r.s(i, k) /= tau;

  r.p = Matrix(n, n);
  r.log_den.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double m = -HUGE_VAL;
    for (std::size_t k = 0; k < n; ++k)
      if (k != i) m = std::max(m, r.s(i, k));
    double sum = 0.0;
    for (std::size_t k = 0; k < n; ++k)
      if (k != i) sum += std::exp(r.s(i, k) - m);
    r.log_den[i] = m + std::log(sum);
    for (std::size_t k = 0; k < n; ++k)
      if (k != i) r.p(i, k) = std::exp(r.s(i, k) - m) / sum;
  }
  return r;
}

// grad_Z = (G + G^T) Z / tau where G(i,k) = dL/ds_ik.
Matrix similarity_grad_to_embeddings(const Matrix& g, const EmbeddingMatrix& z, double tau) {
  const std::size_t n = z.n();
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k) a(i, k) = (g(i, k) + g(k, i)) / tau;
  return matmul(a, z.matrix());
}

}  // namespace

LossOutput scl_loss(const LabeledBatch& batch, const LossConfig& cfg) {
  require(cfg.tau > 0.0, Errc::invalid_temperature, "scl_loss: tau must be positive");
  const std::size_t n = batch.n();
  const EmbeddingMatrix& z = batch.embeddings();

  LossOutput out;
  if (n == 1) {
    // lone anchor: no positives and no negatives; defined as zero
    out.grad_embeddings = Matrix(1, z.dim());
    return out;
  }

  const ContrastiveRows r = contrastive_rows(z, cfg.tau);
  Matrix g(n, n);  // dL/ds
  for (std::size_t i = 0; i < n; ++i) {
    const int npos = batch.class_count(batch.labels()[i]) - 1;
    if (npos < 1) continue;  // degenerate anchor contributes exactly zero
    const double w = 1.0 / static_cast<double>(npos);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const bool positive = batch.labels()[j] == batch.labels()[i];
      if (positive) out.value -= w * (r.s(i, j) - r.log_den[i]);
      // d/ds_ij of -w * sum_{j in P(i)} (s_ij - log_den_i)
      g(i, j) = r.p(i, j) - (positive ? w : 0.0);
    }
  }
  out.grad_embeddings = similarity_grad_to_embeddings(g, z, cfg.tau);
  return out;
}

LossOutput combined_loss(const LabeledBatch& batch, const LossConfig& cfg) {
  cfg.validate();
  const LossOutput ce = cross_entropy(batch);
  const LossOutput scl = scl_loss(batch, cfg);
  LossOutput out;
  out.value = (1.0 - cfg.lambda) * ce.value + cfg.lambda * scl.value;
  out.grad_logits = *ce.grad_logits;
  for (double* p = out.grad_logits->data(); p != out.grad_logits->data() + out.grad_logits->size(); ++p)
    *p *= (1.0 - cfg.lambda);
  out.grad_embeddings = *scl.grad_embeddings;
  for (double* p = out.grad_embeddings->data();
       p != out.grad_embeddings->data() + out.grad_embeddings->size(); ++p)
    *p *= cfg.lambda;
  return out;
}

LossOutput self_supervised_loss(const AugmentedBatch& batch, const LossConfig& cfg) {
  require(cfg.tau > 0.0, Errc::invalid_temperature, "self_supervised_loss: tau must be positive");
  const std::size_t n = batch.size();
  const EmbeddingMatrix& z = batch.embeddings();

  const ContrastiveRows r = contrastive_rows(z, cfg.tau);
  LossOutput out;
  Matrix g(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t partner = batch.pair_of(i);
    out.value -= r.s(i, partner) - r.log_den[i];
    for (std::size_t k = 0; k < n; ++k) {
      if (k == i) continue;
      g(i, k) = r.p(i, k) - (k == partner ? 1.0 : 0.0);
    }
  }
  out.grad_embeddings = similarity_grad_to_embeddings(g, z, cfg.tau);
  return out;
}

LossOutput ce_ce_loss(const LabeledBatch& batch, const Matrix& head_weights,
                      const LossConfig& cfg) {
  require(cfg.tau > 0.0, Errc::invalid_temperature, "ce_ce_loss: tau must be positive");
  require(head_weights.cols() == batch.embeddings().dim(), Errc::shape_mismatch,
          "ce_ce_loss: head width does not match embedding dim");
  const std::size_t n = batch.n();
  const std::size_t c = head_weights.rows();
  require(c == static_cast<std::size_t>(batch.num_classes()), Errc::shape_mismatch,
          "ce_ce_loss: head rows do not match class count");

  // scaled logits' = Z W^T / tau over the normalized embeddings
  Matrix scaled = matmul_bt(batch.embeddings().matrix(), head_weights);
  for (double* p = scaled.data(); p != scaled.data() + scaled.size(); ++p) *p /= cfg.tau;

  const double inv_n = 1.0 / static_cast<double>(n);
  LossOutput out;
  out.grad_logits = Matrix(n, c);  // w.r.t. scaled logits'
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = scaled.row(i);
    Vector p = softmax(Vector(row.begin(), row.end()));
    const std::size_t yi = static_cast<std::size_t>(batch.labels()[i]);
    out.value -= inv_n * std::log(p[yi]);
    for (std::size_t j = 0; j < c; ++j)
      (*out.grad_logits)(i, j) = (p[j] - (j == yi ? 1.0 : 0.0)) * inv_n;
  }
  // chain to embeddings: dL/dZ = G' W / tau
  Matrix ge = matmul(*out.grad_logits, head_weights);
  for (double* p = ge.data(); p != ge.data() + ge.size(); ++p) *p /= cfg.tau;
  out.grad_embeddings = std::move(ge);
  return out;
}

LossOutput evaluate_objective(const LabeledBatch& batch, const LossConfig& cfg,
                              const Matrix* head_weights) {
  switch (cfg.variant) {
    case LossVariant::CE:
      return cross_entropy(batch);
    case LossVariant::SCL:
      return scl_loss(batch, cfg);
    case LossVariant::Combined:
      return combined_loss(batch, cfg);
    case LossVariant::CeCe: {
      cfg.validate();
      require(head_weights != nullptr, Errc::invalid_argument,
              "evaluate_objective: ce_ce needs head weights");
      const LossOutput ce = cross_entropy(batch);
      const LossOutput cc = ce_ce_loss(batch, *head_weights, cfg);
      LossOutput out;
      out.value = (1.0 - cfg.lambda) * ce.value + cfg.lambda * cc.value;
      out.grad_logits = *ce.grad_logits;
      for (double* p = out.grad_logits->data();
           p != out.grad_logits->data() + out.grad_logits->size(); ++p)
        *p *= (1.0 - cfg.lambda);
      out.grad_embeddings = *cc.grad_embeddings;
      for (double* p = out.grad_embeddings->data();
           p != out.grad_embeddings->data() + out.grad_embeddings->size(); ++p)
        *p *= cfg.lambda;
      return out;
    }
    case LossVariant::SelfSupervised:
      raise(Errc::invalid_argument,
            "evaluate_objective: self_supervised needs an AugmentedBatch");
  }
  raise(Errc::invalid_argument, "evaluate_objective: unknown variant");
}

LossOutput evaluate_objective(const AugmentedBatch& batch, const LossConfig& cfg) {
  require(cfg.variant == LossVariant::SelfSupervised, Errc::invalid_argument,
          "evaluate_objective: AugmentedBatch overload is self_supervised only");
  return self_supervised_loss(batch, cfg);
}

Matrix tangent_project(const Matrix& grad, const EmbeddingMatrix& z) {
  require(grad.rows() == z.n() && grad.cols() == z.dim(), Errc::shape_mismatch,
          "tangent_project: shape mismatch");
  Matrix out = grad;
  for (std::size_t i = 0; i < grad.rows(); ++i) {
    const double radial = dot(grad.row(i), z.row(i));
    for (std::size_t j = 0; j < grad.cols(); ++j) out(i, j) -= radial * z.row(i)[j];
  }
  return out;
}

namespace {

void check_fd_step(double h) {
  require(h >= 1e-7 && h <= 1e-4, Errc::invalid_argument,
          "finite_difference_check: h must lie in [1e-7, 1e-4]");
}

EmbeddingMatrix perturb_row_renormalized(const EmbeddingMatrix& e, std::size_t i, std::size_t j,
                                         double delta) {
  Matrix m = e.matrix();
  m(i, j) += delta;
  const double nrm = l2_norm(m.row(i));
  for (std::size_t k = 0; k < m.cols(); ++k) m(i, k) /= nrm;
  return EmbeddingMatrix::wrap_checked(std::move(m));
}

template <typename Batch, typename Fn>
double fd_embeddings(const Fn& fn, const Batch& batch, const Matrix& analytic, double h) {
  const Matrix proj = tangent_project(analytic, batch.embeddings());
  double max_rel = 0.0;
  for (std::size_t i = 0; i < proj.rows(); ++i) {
    for (std::size_t j = 0; j < proj.cols(); ++j) {
      const double ana = proj(i, j);
      if (std::abs(ana) <= 1e-8) continue;
      const double lp =
          fn(batch.with_embeddings(perturb_row_renormalized(batch.embeddings(), i, j, h))).value;
      const double lm =
          fn(batch.with_embeddings(perturb_row_renormalized(batch.embeddings(), i, j, -h))).value;
      const double num = (lp - lm) / (2.0 * h);
      max_rel = std::max(max_rel, std::abs(num - ana) / std::abs(ana));
    }
  }
  return max_rel;
}

}  // namespace

double finite_difference_check(const LabeledLossFn& fn, const LabeledBatch& batch, double h) {
  check_fd_step(h);
  const LossOutput base = fn(batch);
  double max_rel = 0.0;

  if (base.grad_logits && batch.has_logits()) {
    for (std::size_t i = 0; i < batch.logits().rows(); ++i) {
      for (std::size_t j = 0; j < batch.logits().cols(); ++j) {
        const double ana = (*base.grad_logits)(i, j);
        if (std::abs(ana) <= 1e-8) continue;
        Matrix lp = batch.logits(), lm = batch.logits();
        lp(i, j) += h;
        lm(i, j) -= h;
        const double num =
            (fn(batch.with_logits(std::move(lp))).value - fn(batch.with_logits(std::move(lm))).value) /
            (2.0 * h);
        max_rel = std::max(max_rel, std::abs(num - ana) / std::abs(ana));
      }
    }
  }
  if (base.grad_embeddings) {
    max_rel = std::max(max_rel, fd_embeddings(fn, batch, *base.grad_embeddings, h));
  }
  return max_rel;
}

double finite_difference_check(const AugmentedLossFn& fn, const AugmentedBatch& batch, double h) {
  check_fd_step(h);
  const LossOutput base = fn(batch);
  if (!base.grad_embeddings) return 0.0;
  return fd_embeddings(fn, batch, *base.grad_embeddings, h);
}

}  // namespace sclft
