#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sclft/error.hpp"

namespace sclft {

struct Example {
  std::string id;
  std::string text_a;
  std::optional<std::string> text_b;
  int label = 0;
};

struct Dataset {
  std::vector<Example> examples;
  int num_classes = 0;
  std::vector<std::string> label_names;  // index -> display name

  std::size_t size() const { return examples.size(); }
  bool empty() const { return examples.empty(); }
  bool has_pairs() const;
  /// Per-class frequencies; sums to 1.
  std::vector<double> label_distribution() const;
  Dataset subset(const std::vector<std::size_t>& indices) const;
};

/// Loads line-delimited JSON records {id?, text_a, text_b?, label}.
/// Labels are either integers (used as class indices) or strings (resolved
/// through `label_map` when given, otherwise assigned by sorted order).
/// Throws Errc::parse_error with the offending line number,
/// Errc::unknown_label, or Errc::empty_file.
Dataset load_dataset(const std::filesystem::path& path,
                     const std::map<std::string, int>* label_map = nullptr);

/// Label-map file: one JSON object {"name": index, ...}.
std::map<std::string, int> load_label_map(const std::filesystem::path& path);

void save_dataset(const std::filesystem::path& path, const Dataset& ds);

/// Largest-remainder apportionment of n by `distribution`, minimum 1 for
/// every class with nonzero frequency; remainder ties break toward the
/// lower class index. Exposed for direct verification.
std::vector<std::size_t> stratified_counts(const std::vector<double>& distribution, std::size_t n);

/// Stratified sample of n examples; within-class selection is uniform
/// without replacement. Deterministic in (ds, n, seed).
/// Throws Errc::too_few_examples if n < #classes or a class is exhausted.
Dataset stratified_sample(const Dataset& ds, std::size_t n, std::uint64_t seed);

/// Exactly `per_class` examples from every class (uniform, no replacement).
Dataset sample_per_class(const Dataset& ds, std::size_t per_class, std::uint64_t seed);

struct SplitSpec {
  std::optional<std::size_t> validation_size;  // default min(500, 10% of |ds|)
  std::optional<std::size_t> test_size;        // default mirrors validation
  std::uint64_t seed = 0;
};

struct Splits {
  Dataset train;
  Dataset validation;
  Dataset test;
};

/// Disjoint stratified (train, validation, test) splits; whatever is not
/// sampled into validation/test stays in train.
Splits make_splits(const Dataset& ds, const SplitSpec& spec);

/// Simulated noise channel standing in for a round-trip paraphrase model.
/// temperature is the single noise knob: per-token corruption probability
/// is min(T, 1) * max_corruption.
struct NoiseChannelConfig {
  double temperature = 0.3;
  std::size_t ratio = 3;  // augmented copies per supervised example
  double max_corruption = 0.3;
  std::uint64_t seed = 0;

  void validate() const;
};

struct AugmentStats {
  std::size_t tokens_seen = 0;
  std::size_t tokens_corrupted = 0;
  double corrupted_fraction() const {
    return tokens_seen == 0 ? 0.0 : static_cast<double>(tokens_corrupted) / static_cast<double>(tokens_seen);
  }
};

/// Emits each original followed by `ratio` corrupted copies (labels
/// preserved, ids suffixed "-augK"). Corruption ops per token: delete,
/// duplicate, swap with the preceding token, or replace with a random
/// vocabulary token. T=0 yields byte-identical copies. Texts never come
/// out empty: a delete that would empty the text is skipped.
Dataset augment_noise(const Dataset& ds, const NoiseChannelConfig& cfg,
                      AugmentStats* stats = nullptr);

/// Deterministic synthetic classification data: each example mixes tokens from
/// its class pool and a shared pool. Used by tests and demo runs.
struct SyntheticSpec {
  int classes = 4;
  std::size_t examples = 2000;
  std::size_t vocab_per_class = 30;
  std::size_t shared_vocab = 60;
  std::size_t tokens_per_example = 12;
  double class_token_prob = 0.5;  // 1.0 => fully class-specific vocabulary
  std::uint64_t seed = 7;
};

Dataset make_synthetic_dataset(const SyntheticSpec& spec);

}  // namespace sclft
