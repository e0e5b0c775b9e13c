#include "sclft/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace sclft {

void TrainConfig::validate() const {
  require(learning_rate > 0.0, Errc::invalid_argument, "TrainConfig: learning_rate must be > 0");
  require(patience >= 1, Errc::invalid_argument, "TrainConfig: patience must be >= 1");
  require(max_epochs >= 1, Errc::invalid_argument, "TrainConfig: max_epochs must be >= 1");
  require(dropout_rate >= 0.0 && dropout_rate < 1.0, Errc::invalid_argument,
          "TrainConfig: dropout_rate outside [0, 1)");
  loss.validate();
  const bool contrastive =
      loss.variant == LossVariant::SCL || loss.variant == LossVariant::Combined;
  require(!contrastive || batch_size >= 2, Errc::invalid_argument,
          "TrainConfig: contrastive losses need batch_size >= 2");
  require(batch_size >= 1, Errc::invalid_argument, "TrainConfig: batch_size must be >= 1");
}

OptimizerState OptimizerState::like(const ModelParams& p) {
  OptimizerState s;
  for (const auto span : param_tensors(p)) {
    s.m.emplace_back(span.size(), 0.0);
    s.v.emplace_back(span.size(), 0.0);
  }
  return s;
}

void adam_update(std::span<double> params, std::span<const double> grads, std::span<double> m,
                 std::span<double> v, std::int64_t t, double lr, const AdamHyper& hyper) {
  require(params.size() == grads.size() && params.size() == m.size() && params.size() == v.size(),
          Errc::shape_mismatch, "adam_update: size mismatch");
  const double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m[i] = hyper.beta1 * m[i] + (1.0 - hyper.beta1) * grads[i];
    v[i] = hyper.beta2 * v[i] + (1.0 - hyper.beta2) * grads[i] * grads[i];
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + hyper.eps);
  }
}

void adam_step(ModelParams& params, const ModelParams& grads, OptimizerState& state, double lr) {
  auto p = param_tensors(params);
  const auto g = param_tensors(grads);
  require(p.size() == g.size() && p.size() == state.m.size(), Errc::shape_mismatch,
          "adam_step: state/params mismatch");
  ++state.t;
  for (std::size_t k = 0; k < p.size(); ++k) {
    adam_update(p[k], g[k], state.m[k], state.v[k], state.t, lr, state.hyper);
  }
}

EarlyStopper::Decision EarlyStopper::observe(double validation_accuracy) {
  ++epoch_;
  Decision d;
  if (validation_accuracy > best_) {
    best_ = validation_accuracy;
    best_epoch_ = epoch_;
    since_best_ = 0;
    d.improved = true;
  } else {
    ++since_best_;
    d.stop = since_best_ >= patience_;
  }
  return d;
}

double measure_throughput(const ThroughputMeter& meter, std::size_t min_steps) {
  require(meter.steps >= min_steps, Errc::insufficient_runs,
          "measure_throughput: need at least " + std::to_string(min_steps) + " optimizer steps");
  return meter.rate();
}

Matrix featurize(const Dataset& ds, const EncoderConfig& cfg) {
  require(!ds.empty(), Errc::empty_dataset, "featurize: empty dataset");
  Matrix features(ds.size(), cfg.vocab_hash_dim);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const Example& e = ds.examples[i];
    const auto a = whitespace_tokenize(e.text_a);
    std::optional<std::vector<std::string>> b;
    if (e.text_b) b = whitespace_tokenize(*e.text_b);
    const ComposedInput composed = compose_input(a, b ? &*b : nullptr, cfg);
    const Vector x = hash_features(composed, cfg);
    std::copy(x.begin(), x.end(), features.row(i).begin());
  }
  return features;
}

namespace {

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(rows.size(), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy(m.row(rows[i]).begin(), m.row(rows[i]).end(), out.row(i).begin());
  return out;
}

void scale_in_place(Matrix& m, double s) {
  for (double* p = m.data(); p != m.data() + m.size(); ++p) *p *= s;
}

void add_in_place(Matrix& dst, const Matrix& src) {
  for (std::size_t i = 0; i < dst.rows(); ++i)
    for (std::size_t j = 0; j < dst.cols(); ++j) dst(i, j) += src(i, j);
}

// Forward + analytic backward for one mini-batch; returns the batch loss
// value and accumulates parameter gradients.
double batch_loss_and_grads(const Matrix& features, const std::vector<int>& labels,
                            const Model& model, const ModelParams& params,
                            const TrainConfig& cfg, Rng& rng, ModelParams& grads) {
  const LossConfig& loss = cfg.loss;
  const ForwardCache fc = encoder_forward_train(features, params, cfg.dropout_rate, rng);
  const Matrix& raw = fc.raw;
  const EmbeddingMatrix z = EmbeddingMatrix::normalize_rows(raw);
  Matrix grad_raw(raw.rows(), raw.cols());
  double value = 0.0;

  // CE consumes the raw-head logits; the contrastive terms consume the
  // normalized copy.
  switch (loss.variant) {
    case LossVariant::CE: {
      Matrix logits = classify(raw, params);
      const auto batch = LabeledBatch::make(z, std::move(logits), labels, model.num_classes);
      const LossOutput lo = cross_entropy(batch);
      value = lo.value;
      head_backward(raw, params, *lo.grad_logits, grads, &grad_raw);
      break;
    }
    case LossVariant::SCL: {
      const auto batch = LabeledBatch::make(z, Matrix(), labels, model.num_classes);
      const LossOutput lo = scl_loss(batch, loss);
      value = lo.value;
      add_in_place(grad_raw, normalize_backward(raw, z, *lo.grad_embeddings));
      break;
    }
    case LossVariant::Combined: {
      Matrix logits = classify(raw, params);
      const auto batch = LabeledBatch::make(z, std::move(logits), labels, model.num_classes);
      const LossOutput lo = combined_loss(batch, loss);  // blocks already lambda-scaled
      value = lo.value;
      head_backward(raw, params, *lo.grad_logits, grads, &grad_raw);
      add_in_place(grad_raw, normalize_backward(raw, z, *lo.grad_embeddings));
      break;
    }
    case LossVariant::CeCe: {
      Matrix logits = classify(raw, params);
      const auto batch = LabeledBatch::make(z, std::move(logits), labels, model.num_classes);
      const LossOutput ce = cross_entropy(batch);
      const LossOutput cc = ce_ce_loss(batch, params.head_w, loss);
      value = (1.0 - loss.lambda) * ce.value + loss.lambda * cc.value;

      Matrix gl = *ce.grad_logits;
      scale_in_place(gl, 1.0 - loss.lambda);
      head_backward(raw, params, gl, grads, &grad_raw);

      // scaled-logit path: dW += lambda/tau * G'^T Z, dZ = lambda/tau * G' W
      Matrix gw = matmul_at(*cc.grad_logits, z.matrix());
      scale_in_place(gw, loss.lambda / loss.tau);
      add_in_place(grads.head_w, gw);
      Matrix gz = *cc.grad_embeddings;
      scale_in_place(gz, loss.lambda);
      add_in_place(grad_raw, normalize_backward(raw, z, gz));
      break;
    }
    case LossVariant::SelfSupervised:
      raise(Errc::invalid_argument,
            "train_run: self_supervised is a library objective, not a classification "
            "training objective");
  }

  encoder_backward(fc, params, grad_raw, grads);
  return value;
}

}  // namespace

double evaluate(const Model& model, const Dataset& ds) {
  require(!ds.empty(), Errc::empty_dataset, "evaluate: empty dataset");
  const Matrix features = featurize(ds, model.config);
  const EncodeResult enc = encode_features(features, model.params);
  const Matrix logits = classify(enc.raw, model.params);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    std::size_t arg = 0;
    for (std::size_t j = 1; j < logits.cols(); ++j)
      if (logits(i, j) > logits(i, arg)) arg = j;
    if (static_cast<int>(arg) == ds.examples[i].label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(ds.size());
}

TrainResult train_run(const Dataset& train, const Dataset& validation, const Model& init,
                      const TrainConfig& cfg) {
  cfg.validate();
  require(!train.empty(), Errc::empty_dataset, "train_run: empty training set");
  require(train.num_classes == init.num_classes, Errc::config_mismatch,
          "train_run: dataset classes do not match model head");
  for (const Example& e : train.examples)
    require(e.label < init.num_classes, Errc::invalid_argument, "train_run: label out of range");

  using Clock = std::chrono::steady_clock;

  const Matrix features = featurize(train, init.config);
  Model model = init;
  OptimizerState opt = OptimizerState::like(model.params);
  Rng rng(mix_seed(cfg.seed, 0x7e41));

  EarlyStopper stopper(cfg.patience);
  TrainResult result;
  result.best = checkpoint_from_model(model);

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t batches = 0;

    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      const std::span<const std::size_t> idx(order.data() + start, stop - start);
      const Matrix x = gather_rows(features, idx);
      std::vector<int> labels(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) labels[i] = train.examples[idx[i]].label;

      const auto t0 = Clock::now();
      ModelParams grads = zero_like(model.params);
      loss_sum += batch_loss_and_grads(x, labels, model, model.params, cfg, rng, grads);
      adam_step(model.params, grads, opt, cfg.learning_rate);
      result.throughput.add(std::chrono::duration<double>(Clock::now() - t0).count());
      ++batches;
    }

    const double val_acc = evaluate(model, validation);
    EpochMetrics em;
    em.epoch = epoch;
    em.train_loss = loss_sum / static_cast<double>(batches);
    em.validation_accuracy = val_acc;
    em.updates_per_second = result.throughput.rate();
    result.history.push_back(em);

    const auto decision = stopper.observe(val_acc);
    if (decision.improved) {
      CheckpointMeta meta;
      meta.step = opt.t;
      meta.metrics["validation_accuracy"] = val_acc;
      meta.metrics["train_loss"] = em.train_loss;
      meta.metrics["epoch"] = static_cast<double>(epoch);
      result.best = checkpoint_from_model(model, std::move(meta));
    }
    if (decision.stop) break;
  }

  result.best_validation_accuracy = stopper.best();
  result.best_epoch = stopper.best_epoch();
  return result;
}

}  // namespace sclft
