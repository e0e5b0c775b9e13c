#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "sclft/checkpoint.hpp"
#include "sclft/data.hpp"
#include "sclft/objectives.hpp"

namespace sclft {

struct TrainConfig {
  // 1e-3 converges in seconds on the desk-scale MLP; 1e-5 is the
  // full-scale fine-tuning default and is far too slow here.
  double learning_rate = 1e-3;
  std::size_t batch_size = 16;
  double dropout_rate = 0.1;
  std::size_t max_epochs = 100;
  std::size_t patience = 5;
  LossConfig loss;
  std::uint64_t seed = 1;

  void validate() const;
};

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct OptimizerState {
  std::int64_t t = 0;
  std::vector<Vector> m;
  std::vector<Vector> v;
  AdamHyper hyper;

  static OptimizerState like(const ModelParams& p);
};

/// One bias-corrected Adam update on a flat parameter block.
void adam_update(std::span<double> params, std::span<const double> grads, std::span<double> m,
                 std::span<double> v, std::int64_t t, double lr, const AdamHyper& hyper);

/// Applies adam_update across every tensor of `params`; increments state.t.
void adam_step(ModelParams& params, const ModelParams& grads, OptimizerState& state, double lr);

struct EpochMetrics {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double validation_accuracy = 0.0;
  std::optional<double> test_accuracy;
  double updates_per_second = 0.0;
};

/// Tracks best validation accuracy; stops after `patience` epochs without
/// strict improvement.
class EarlyStopper {
 public:
  explicit EarlyStopper(std::size_t patience) : patience_(patience) {}

  struct Decision {
    bool improved = false;
    bool stop = false;
  };
  Decision observe(double validation_accuracy);

  double best() const { return best_; }
  std::size_t best_epoch() const { return best_epoch_; }

 private:
  std::size_t patience_;
  double best_ = -1.0;
  std::size_t best_epoch_ = 0;
  std::size_t epoch_ = 0;
  std::size_t since_best_ = 0;
};

/// Wall-clock over optimizer steps only (data loading excluded).
struct ThroughputMeter {
  std::size_t steps = 0;
  double seconds = 0.0;

  void add(double step_seconds) {
    ++steps;
    seconds += step_seconds;
  }
  double rate() const { return seconds > 0.0 ? static_cast<double>(steps) / seconds : 0.0; }
};

/// Steps per second with the >= 50-step measurement floor enforced.
double measure_throughput(const ThroughputMeter& meter, std::size_t min_steps = 50);

struct TrainResult {
  Checkpoint best;
  std::vector<EpochMetrics> history;
  double best_validation_accuracy = 0.0;
  std::size_t best_epoch = 0;
  ThroughputMeter throughput;
};

/// Fine-tunes `init` on `train`, early-stopping on validation accuracy,
/// and returns the checkpoint of the best epoch. Deterministic in
/// (datasets, init, cfg.seed).
TrainResult train_run(const Dataset& train, const Dataset& validation, const Model& init,
                      const TrainConfig& cfg);

/// Fraction of argmax-correct predictions; logit ties break toward the
/// lower class index.
double evaluate(const Model& model, const Dataset& ds);

/// Hashed bag-of-tokens features for every example (composed with special
/// tokens first). Row order follows the dataset.
Matrix featurize(const Dataset& ds, const EncoderConfig& cfg);

}  // namespace sclft
