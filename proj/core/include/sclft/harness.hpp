#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sclft/data.hpp"
#include "sclft/stats.hpp"
#include "sclft/trainer.hpp"

namespace sclft {

struct ProtocolConfig {
  std::size_t n_labeled = 20;
  std::size_t n_samples = 10;
  std::size_t top_k = 3;
  std::vector<std::uint64_t> seeds;  // empty => 1..n_samples
  std::vector<double> lambda_grid = {0.1, 0.3, 0.5, 0.7, 0.9, 1.0};
  std::vector<double> tau_grid = {0.1, 0.3, 0.5, 0.7};
  std::vector<double> noise_temperatures = {0.3, 0.5, 0.7, 0.9};
  std::vector<std::size_t> batch_sizes = {16, 64, 256};
  std::size_t transfer_per_class = 20;
  NoiseChannelConfig noise;  // ratio / max_corruption knobs for the noise protocol
  std::size_t jobs = 1;

  void validate() const;
  std::vector<std::uint64_t> resolved_seeds() const;
};

/// One training run inside a protocol. updates_per_second and steps are
/// wall-clock telemetry: they go to the timings sidecar, never into the
/// deterministic record/report files.
struct RunRecord {
  std::string group;
  std::size_t sample_index = 0;
  std::uint64_t seed = 0;
  LossConfig loss;
  std::size_t n_train = 0;
  std::size_t epochs = 0;
  double validation_accuracy = 0.0;
  double test_accuracy = 0.0;
  double updates_per_second = 0.0;
  std::size_t steps = 0;
};

struct ReportRow {
  std::string label;
  std::size_t n = 0;
  double mean_test = 0.0;
  double std_test = 0.0;  // population std
  double mean_validation = 0.0;
  std::optional<double> p_value;  // Welch's t-test vs baseline
};

/// Indices of the top-k records by validation accuracy (ties break toward
/// the lower sample index).
std::vector<std::size_t> select_top_k(const std::vector<RunRecord>& records, std::size_t k);

/// Mean / population-std over the chosen records' test accuracies, plus a
/// Welch p-value when baseline test accuracies are supplied.
ReportRow report_from_records(const std::string& label, const std::vector<RunRecord>& records,
                              const std::vector<std::size_t>& chosen,
                              const std::vector<double>* baseline_test = nullptr);

/// Groups records by their group label and reports each group, with
/// p-values against the baseline group of the same label (or the single
/// baseline group when labels differ). Needs >= 2 records per group.
std::vector<ReportRow> aggregate_report(const std::vector<RunRecord>& records,
                                        const std::vector<RunRecord>& baseline_records);

std::string loss_label(const LossConfig& cfg);

struct FewshotResult {
  std::vector<RunRecord> records;
  std::vector<std::size_t> top_indices;
  ReportRow report;
};

/// Trains one model per stratified sample (one seed each), selects the
/// top-k by validation accuracy, and reports their test statistics.
FewshotResult run_fewshot(const Splits& splits, const ProtocolConfig& cfg,
                          const TrainConfig& train_cfg, const EncoderConfig& encoder_cfg);

struct SweepCell {
  double lambda = 0.0;
  double tau = 0.0;
  ReportRow report;
};

struct SweepResult {
  double best_lambda = 0.0;
  double best_tau = 0.0;
  std::vector<SweepCell> cells;
  std::vector<RunRecord> records;
};

/// Full lambda x tau grid under identical sampling seeds; the winner has
/// the best top-k mean validation accuracy, ties broken toward larger
/// lambda then smaller tau.
SweepResult run_sweep(const Splits& splits, const ProtocolConfig& cfg,
                      const TrainConfig& train_cfg, const EncoderConfig& encoder_cfg);

struct NoiseResult {
  std::vector<ReportRow> rows;           // configured loss, one row per temperature
  std::vector<ReportRow> baseline_rows;  // CE counterpart (empty when the loss is CE)
  std::vector<RunRecord> records;
};

/// Per temperature: augments one fixed base sample per seed at ratio 1:3
/// through the noise channel and runs the few-shot protocol on it;
/// validation and test sets stay fixed across temperatures. A CE
/// counterpart trained on the same augmented data provides the p-values.
NoiseResult run_noise_robustness(const Splits& splits, const ProtocolConfig& cfg,
                                 const TrainConfig& train_cfg, const EncoderConfig& encoder_cfg);

struct TransferResult {
  ReportRow transfer;  // p-value vs scratch
  ReportRow scratch;
  std::vector<RunRecord> records;
};

/// Initializes the encoder from `source`, reinitializes the head for the
/// target class count, and runs the few-shot protocol with
/// transfer_per_class labeled examples per class, paired against
/// from-scratch runs on the same samples.
TransferResult run_transfer(const Checkpoint& source, const Splits& target,
                            const ProtocolConfig& cfg, const TrainConfig& train_cfg,
                            const EncoderConfig& encoder_cfg);

struct AblationCell {
  std::size_t batch_size = 0;
  std::string variant;
  ReportRow report;
  double mean_updates_per_second = 0.0;
};

struct AblationResult {
  std::vector<AblationCell> cells;
  std::vector<RunRecord> records;
};

/// CE and the configured contrastive loss at each batch size, with
/// updates-per-second per cell. Epoch counts are raised so every run does
/// at least 50 optimizer steps; early stopping is disabled.
AblationResult run_batch_ablation(const Splits& splits, const ProtocolConfig& cfg,
                                  const TrainConfig& train_cfg, const EncoderConfig& encoder_cfg);

struct EmbeddingSummary {
  double intra_class_mean_cosine = 0.0;
  double inter_class_mean_cosine = 0.0;
  std::size_t n_rows = 0;
};

EmbeddingSummary embedding_cosine_summary(const EmbeddingMatrix& z, const std::vector<int>& labels);

/// TSV with one row per example (id, label, d raw dims, 2 PCA dims) plus a
/// sibling <stem>_summary.json with the cosine-similarity summary.
EmbeddingSummary export_embeddings(const Model& model, const Dataset& ds,
                                   const std::filesystem::path& path);

// Deterministic output files (byte-identical across reruns of the same
// seeds) and the wall-clock sidecar.
void write_records_jsonl(const std::filesystem::path& path, const std::vector<RunRecord>& records);
void write_report_tsv(const std::filesystem::path& path, const std::vector<ReportRow>& rows);
void write_timings_tsv(const std::filesystem::path& path, const std::vector<RunRecord>& records);

/// Runs fn(0..n-1) on up to `jobs` threads; each index owns its outputs.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn);

}  // namespace sclft
