#include "sclft/encoder.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace sclft {

void EncoderConfig::validate() const {
  require(embed_dim >= 2, Errc::invalid_argument, "EncoderConfig: embed_dim must be >= 2");
  require(max_len >= 4, Errc::invalid_argument, "EncoderConfig: max_len must be >= 4");
  require(vocab_hash_dim >= 1, Errc::invalid_argument, "EncoderConfig: vocab_hash_dim must be >= 1");
  for (std::size_t w : hidden_dims)
    require(w >= 1, Errc::invalid_argument, "EncoderConfig: hidden widths must be positive");
}

std::vector<std::string> whitespace_tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

ComposedInput compose_input(std::span<const std::string> sentence_a,
                            const std::vector<std::string>* sentence_b,
                            const EncoderConfig& cfg) {
  cfg.validate();
  require(!sentence_a.empty(), Errc::invalid_argument, "compose_input: empty sentence_a");

  const bool pair = sentence_b != nullptr;
  const std::size_t specials = pair ? 3 : 2;
  const std::size_t budget = cfg.max_len > specials ? cfg.max_len - specials : 0;

  // keep the first `budget` tokens of the flattened content [a..., b...]
  const std::size_t keep_a = std::min(sentence_a.size(), budget);
  const std::size_t keep_b = pair ? std::min(sentence_b->size(), budget - keep_a) : 0;

  ComposedInput out;
  out.is_pair = pair;
  out.tokens.reserve(specials + keep_a + keep_b);
  out.tokens.emplace_back(kClsToken);
  out.tokens.insert(out.tokens.end(), sentence_a.begin(), sentence_a.begin() + keep_a);
  if (pair) {
    out.tokens.emplace_back(kSepToken);
    out.tokens.insert(out.tokens.end(), sentence_b->begin(), sentence_b->begin() + keep_b);
  }
  out.tokens.emplace_back(kEosToken);
  return out;
}

namespace {

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

Vector hash_features(const ComposedInput& input, const EncoderConfig& cfg) {
  Vector x(cfg.vocab_hash_dim, 0.0);
  for (const std::string& tok : input.tokens) {
    const std::uint64_t h = mix64(fnv1a64(tok));
    const std::size_t bucket = static_cast<std::size_t>(h % cfg.vocab_hash_dim);
    x[bucket] += (h >> 63) ? -1.0 : 1.0;
  }
  return x;
}

std::vector<std::span<double>> param_tensors(ModelParams& p) {
  std::vector<std::span<double>> spans;
  for (LayerParams& l : p.layers) {
    spans.emplace_back(l.w.data(), l.w.size());
    spans.emplace_back(l.b.data(), l.b.size());
  }
  spans.emplace_back(p.head_w.data(), p.head_w.size());
  spans.emplace_back(p.head_b.data(), p.head_b.size());
  return spans;
}

std::vector<std::span<const double>> param_tensors(const ModelParams& p) {
  std::vector<std::span<const double>> spans;
  for (const LayerParams& l : p.layers) {
    spans.emplace_back(l.w.data(), l.w.size());
    spans.emplace_back(l.b.data(), l.b.size());
  }
  spans.emplace_back(p.head_w.data(), p.head_w.size());
  spans.emplace_back(p.head_b.data(), p.head_b.size());
  return spans;
}

std::size_t param_count(const ModelParams& p) {
  std::size_t n = 0;
  for (const auto s : param_tensors(p)) n += s.size();
  return n;
}

ModelParams zero_like(const ModelParams& p) {
  ModelParams z;
  z.layers.reserve(p.layers.size());
  for (const LayerParams& l : p.layers)
    z.layers.push_back({Matrix(l.w.rows(), l.w.cols()), Vector(l.b.size(), 0.0)});
  z.head_w = Matrix(p.head_w.rows(), p.head_w.cols());
  z.head_b = Vector(p.head_b.size(), 0.0);
  return z;
}

ModelParams zero_params(const EncoderConfig& cfg, int num_classes) {
  cfg.validate();
  require(num_classes >= 2, Errc::invalid_argument, "zero_params: need at least 2 classes");
  std::vector<std::size_t> dims;
  dims.push_back(cfg.vocab_hash_dim);
  dims.insert(dims.end(), cfg.hidden_dims.begin(), cfg.hidden_dims.end());
  dims.push_back(cfg.embed_dim);
  ModelParams p;
  for (std::size_t k = 0; k + 1 < dims.size(); ++k)
    p.layers.push_back({Matrix(dims[k + 1], dims[k]), Vector(dims[k + 1], 0.0)});
  p.head_w = Matrix(static_cast<std::size_t>(num_classes), cfg.embed_dim);
  p.head_b = Vector(static_cast<std::size_t>(num_classes), 0.0);
  return p;
}

ModelParams init_params(const EncoderConfig& cfg, int num_classes, std::uint64_t seed) {
  cfg.validate();
  require(num_classes >= 2, Errc::invalid_argument, "init_params: need at least 2 classes");
  Rng rng(seed);

  std::vector<std::size_t> dims;
  dims.push_back(cfg.vocab_hash_dim);
  dims.insert(dims.end(), cfg.hidden_dims.begin(), cfg.hidden_dims.end());
  dims.push_back(cfg.embed_dim);

  ModelParams p;
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    const std::size_t fan_in = dims[k], fan_out = dims[k + 1];
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    LayerParams layer{Matrix(fan_out, fan_in), Vector(fan_out, 0.01)};
    for (std::size_t i = 0; i < fan_out; ++i)
      for (std::size_t j = 0; j < fan_in; ++j) layer.w(i, j) = rng.uniform(-a, a);
    p.layers.push_back(std::move(layer));
  }

  const std::size_t c = static_cast<std::size_t>(num_classes);
  const double a = std::sqrt(6.0 / static_cast<double>(cfg.embed_dim + c));
  p.head_w = Matrix(c, cfg.embed_dim);
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = 0; j < cfg.embed_dim; ++j) p.head_w(i, j) = rng.uniform(-a, a);
  p.head_b = Vector(c, 0.0);
  return p;
}

Model make_model(const EncoderConfig& cfg, int num_classes) {
  return make_model(cfg, num_classes, cfg.seed);
}

Model make_model(const EncoderConfig& cfg, int num_classes, std::uint64_t seed) {
  return Model{cfg, num_classes, init_params(cfg, num_classes, seed)};
}

namespace {

// act = tanh(in * W^T + b), one layer
Matrix layer_forward(const Matrix& in, const LayerParams& l) {
  Matrix z = matmul_bt(in, l.w);
  for (std::size_t i = 0; i < z.rows(); ++i)
    for (std::size_t j = 0; j < z.cols(); ++j) z(i, j) = std::tanh(z(i, j) + l.b[j]);
  return z;
}

}  // namespace

ForwardCache encoder_forward_train(const Matrix& features, const ModelParams& params,
                                   double dropout_rate, Rng& rng) {
  require(dropout_rate >= 0.0 && dropout_rate < 1.0, Errc::invalid_argument,
          "encoder_forward_train: dropout_rate must lie in [0, 1)");
  ForwardCache c;
  c.features = features;
  const std::size_t n_layers = params.layers.size();
  Matrix cur = features;
  for (std::size_t k = 0; k < n_layers; ++k) {
    c.inputs.push_back(cur);
    Matrix act = layer_forward(cur, params.layers[k]);
    c.activations.push_back(act);
    const bool hidden = k + 1 < n_layers;
    if (hidden) {
      Matrix mask(act.rows(), act.cols(), 1.0);
      if (dropout_rate > 0.0) {
        const double scale = 1.0 / (1.0 - dropout_rate);
        for (std::size_t i = 0; i < mask.rows(); ++i)
          for (std::size_t j = 0; j < mask.cols(); ++j)
            mask(i, j) = rng.bernoulli(dropout_rate) ? 0.0 : scale;
      }
      for (std::size_t i = 0; i < act.rows(); ++i)
        for (std::size_t j = 0; j < act.cols(); ++j) act(i, j) *= mask(i, j);
      c.masks.push_back(std::move(mask));
      cur = std::move(act);
    } else {
      cur = act;
    }
  }
  c.raw = cur;
  return c;
}

EncodeResult encode_features(const Matrix& features, const ModelParams& params) {
  Matrix cur = features;
  for (const LayerParams& l : params.layers) cur = layer_forward(cur, l);
  EmbeddingMatrix normalized = EmbeddingMatrix::normalize_rows(cur);
  return EncodeResult{std::move(cur), std::move(normalized)};
}

EncodeResult encode_batch(const std::vector<ComposedInput>& inputs, const ModelParams& params,
                          const EncoderConfig& cfg) {
  require(!inputs.empty(), Errc::invalid_argument, "encode_batch: empty input list");
  Matrix features(inputs.size(), cfg.vocab_hash_dim);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const Vector x = hash_features(inputs[i], cfg);
    std::copy(x.begin(), x.end(), features.row(i).begin());
  }
  return encode_features(features, params);
}

Matrix classify(const Matrix& raw, const ModelParams& params) {
  require(raw.cols() == params.head_w.cols(), Errc::shape_mismatch,
          "classify: raw width does not match head");
  Matrix logits = matmul_bt(raw, params.head_w);
  for (std::size_t i = 0; i < logits.rows(); ++i)
    for (std::size_t j = 0; j < logits.cols(); ++j) logits(i, j) += params.head_b[j];
  return logits;
}

void encoder_backward(const ForwardCache& cache, const ModelParams& params,
                      const Matrix& grad_raw, ModelParams& grads) {
  const std::size_t n_layers = params.layers.size();
  require(grads.layers.size() == n_layers, Errc::shape_mismatch,
          "encoder_backward: grads shape mismatch");
  Matrix d_out = grad_raw;
  for (std::size_t k = n_layers; k-- > 0;) {
    const Matrix& act = cache.activations[k];
    const bool hidden = k + 1 < n_layers;
    Matrix dz(act.rows(), act.cols());
    for (std::size_t i = 0; i < act.rows(); ++i) {
      for (std::size_t j = 0; j < act.cols(); ++j) {
        double g = d_out(i, j);
        if (hidden) g *= cache.masks[k](i, j);
        dz(i, j) = g * (1.0 - act(i, j) * act(i, j));  // tanh'
      }
    }
    const Matrix& in = cache.inputs[k];
    Matrix dw = matmul_at(dz, in);  // out x in
    LayerParams& lg = grads.layers[k];
    for (std::size_t i = 0; i < dw.rows(); ++i)
      for (std::size_t j = 0; j < dw.cols(); ++j) lg.w(i, j) += dw(i, j);
    for (std::size_t i = 0; i < dz.rows(); ++i)
      for (std::size_t j = 0; j < dz.cols(); ++j) lg.b[j] += dz(i, j);
    if (k > 0) d_out = matmul(dz, params.layers[k].w);
  }
}

void head_backward(const Matrix& raw, const ModelParams& params, const Matrix& grad_logits,
                   ModelParams& grads, Matrix* grad_raw) {
  require(grad_logits.rows() == raw.rows() && grad_logits.cols() == params.head_w.rows(),
          Errc::shape_mismatch, "head_backward: gradient shape mismatch");
  Matrix dw = matmul_at(grad_logits, raw);  // C x d
  for (std::size_t i = 0; i < dw.rows(); ++i)
    for (std::size_t j = 0; j < dw.cols(); ++j) grads.head_w(i, j) += dw(i, j);
  for (std::size_t i = 0; i < grad_logits.rows(); ++i)
    for (std::size_t j = 0; j < grad_logits.cols(); ++j) grads.head_b[j] += grad_logits(i, j);
  if (grad_raw != nullptr) {
    const Matrix dr = matmul(grad_logits, params.head_w);  // N x d
    for (std::size_t i = 0; i < dr.rows(); ++i)
      for (std::size_t j = 0; j < dr.cols(); ++j) (*grad_raw)(i, j) += dr(i, j);
  }
}

Matrix normalize_backward(const Matrix& raw, const EmbeddingMatrix& z, const Matrix& grad_z) {
  require(raw.rows() == grad_z.rows() && raw.cols() == grad_z.cols(), Errc::shape_mismatch,
          "normalize_backward: shape mismatch");
  Matrix out(raw.rows(), raw.cols());
  for (std::size_t i = 0; i < raw.rows(); ++i) {
    const double nrm = l2_norm(raw.row(i));
    const double radial = dot(grad_z.row(i), z.row(i));
    for (std::size_t j = 0; j < raw.cols(); ++j)
      out(i, j) = (grad_z(i, j) - radial * z.row(i)[j]) / nrm;
  }
  return out;
}

}  // namespace sclft
