#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sclft/numerics.hpp"
#include "sclft/rng.hpp"

namespace sclft {

inline constexpr const char* kClsToken = "[CLS]";
inline constexpr const char* kSepToken = "[SEP]";
inline constexpr const char* kEosToken = "[EOS]";

struct EncoderConfig {
  std::size_t vocab_hash_dim = 512;
  std::vector<std::size_t> hidden_dims = {64};
  std::size_t embed_dim = 16;
  std::size_t max_len = 64;
  std::uint64_t seed = 42;

  void validate() const;
  bool operator==(const EncoderConfig&) const = default;
};

/// Token sequence [CLS] a... [EOS] or [CLS] a... [SEP] b... [EOS],
/// always within max_len. Built by compose_input.
struct ComposedInput {
  std::vector<std::string> tokens;
  bool is_pair = false;
};

std::vector<std::string> whitespace_tokenize(const std::string& text);

/// Composes special tokens around one or two token sequences. Overlong
/// content is truncated from the tail of the flattened content (sentence_b
/// first); special tokens are never dropped.
ComposedInput compose_input(std::span<const std::string> sentence_a,
                            const std::vector<std::string>* sentence_b,
                            const EncoderConfig& cfg);

/// Signed feature-hashing bag of tokens: FNV-1a 64-bit with a splitmix64
/// finalizer picks the bucket, bit 63 picks the sign.
Vector hash_features(const ComposedInput& input, const EncoderConfig& cfg);

struct LayerParams {
  Matrix w;  // out x in
  Vector b;
  bool operator==(const LayerParams&) const = default;
};

struct ModelParams {
  std::vector<LayerParams> layers;  // tanh MLP: hash_dim -> hidden... -> embed_dim
  Matrix head_w;                    // C x d
  Vector head_b;                    // C
  bool operator==(const ModelParams&) const = default;
};

/// Flat views over every parameter tensor, in a fixed order shared by the
/// optimizer and the checkpoint blob.
std::vector<std::span<double>> param_tensors(ModelParams& p);
std::vector<std::span<const double>> param_tensors(const ModelParams& p);
std::size_t param_count(const ModelParams& p);
ModelParams zero_like(const ModelParams& p);

/// All-zero parameters with the shapes implied by (cfg, num_classes).
ModelParams zero_params(const EncoderConfig& cfg, int num_classes);

struct Model {
  EncoderConfig config;
  int num_classes = 2;
  ModelParams params;
};

/// Xavier-uniform weights (a = sqrt(6/(fan_in+fan_out))), MLP biases 0.01
/// so no output can be the exact zero vector, head bias 0. Seeded.
ModelParams init_params(const EncoderConfig& cfg, int num_classes, std::uint64_t seed);
Model make_model(const EncoderConfig& cfg, int num_classes);
Model make_model(const EncoderConfig& cfg, int num_classes, std::uint64_t seed);

struct EncodeResult {
  Matrix raw;                 // N x d encoder outputs
  EmbeddingMatrix normalized; // row-wise unit norm copy
};

/// Deterministic eval-mode encoding (no dropout).
EncodeResult encode_batch(const std::vector<ComposedInput>& inputs, const ModelParams& params,
                          const EncoderConfig& cfg);
EncodeResult encode_features(const Matrix& features, const ModelParams& params);

/// logits = raw * head_w^T + head_b.
Matrix classify(const Matrix& raw, const ModelParams& params);

/// Training-mode forward: inverted dropout on hidden-layer activations.
/// Caches everything encoder_backward needs.
struct ForwardCache {
  Matrix features;
  std::vector<Matrix> inputs;       // what each layer consumed
  std::vector<Matrix> activations;  // tanh outputs per layer (pre-dropout)
  std::vector<Matrix> masks;        // scaled dropout masks, hidden layers only
  Matrix raw;                       // == activations.back()
};
ForwardCache encoder_forward_train(const Matrix& features, const ModelParams& params,
                                   double dropout_rate, Rng& rng);

/// Accumulates dL/d(layer params) into `grads` given dL/d(raw output).
void encoder_backward(const ForwardCache& cache, const ModelParams& params,
                      const Matrix& grad_raw, ModelParams& grads);

/// Accumulates head gradients; optionally adds dL/d(raw) into grad_raw.
void head_backward(const Matrix& raw, const ModelParams& params, const Matrix& grad_logits,
                   ModelParams& grads, Matrix* grad_raw);

/// Chain rule through row-wise l2 normalization: given dL/dz for z = r/||r||,
/// returns dL/dr.
Matrix normalize_backward(const Matrix& raw, const EmbeddingMatrix& z, const Matrix& grad_z);

}  // namespace sclft
