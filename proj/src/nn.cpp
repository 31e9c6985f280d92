#include "confusio/nn.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "confusio/error.hpp"

namespace confusio::nn {

namespace {

ad::Tensor uniform(ad::Shape shape, double bound, Rng& rng) {
  ad::Tensor t(std::move(shape));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : t.values()) v = dist(rng);
  return t;
}

ad::Tensor normal(ad::Shape shape, double stddev, Rng& rng) {
  ad::Tensor t(std::move(shape));
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& v : t.values()) v = dist(rng);
  return t;
}

BlockShape block_shape(std::size_t dim, std::size_t heads, std::size_t ff) { return {dim, heads, ff}; }

}  // namespace

void add_linear(ad::ParameterStore& store, const std::string& name, std::size_t in, std::size_t out,
                Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
  store.add(name + ".w", uniform({in, out}, bound, rng));
  store.add(name + ".b", ad::Tensor({1, out}));
}

ad::Var linear(ad::Tape& tape, const std::string& name, ad::Var x) {
  ad::Var w = tape.param(name + ".w");
  ad::Var b = tape.param(name + ".b");
  const std::size_t n = x.value().rows();
  ad::Var ones = tape.constant(ad::Tensor({n, 1}, 1.0));
  return ad::add(ad::matmul(x, w), ad::matmul(ones, b));
}

void add_layer_norm(ad::ParameterStore& store, const std::string& name, std::size_t dim) {
  store.add(name + ".gamma", ad::Tensor({1, dim}, 1.0));
  store.add(name + ".beta", ad::Tensor({1, dim}));
}

ad::Var layer_norm(ad::Tape& tape, const std::string& name, ad::Var x) {
  return ad::layer_norm(x, tape.param(name + ".gamma"), tape.param(name + ".beta"));
}

ad::Var scaled_dot_attention(ad::Var q, ad::Var k, ad::Var v) {
  const auto& qv = q.value();
  const auto& kv = k.value();
  const auto& vv = v.value();
  if (qv.rank() != 2 || kv.rank() != 2 || vv.rank() != 2 || qv.cols() != kv.cols() ||
      kv.rows() != vv.rows())
    throw ShapeError("scaled_dot_attention: Q " + qv.shape_string() + ", K " + kv.shape_string() +
                     ", V " + vv.shape_string() + " are incompatible");
  const double dk = static_cast<double>(kv.cols());
  ad::Var weights = ad::softmax(ad::scale(ad::matmul(q, k, true), 1.0 / std::sqrt(dk)));
  return ad::matmul(weights, v);
}

void add_transformer_block(ad::ParameterStore& store, const std::string& name, const BlockShape& shape,
                           Rng& rng) {
  for (const char* p : {".q", ".k", ".v", ".o"}) add_linear(store, name + ".attn" + p, shape.dim, shape.dim, rng);
  add_layer_norm(store, name + ".ln1", shape.dim);
  add_linear(store, name + ".ff1", shape.dim, shape.feedforward, rng);
  add_linear(store, name + ".ff2", shape.feedforward, shape.dim, rng);
  add_layer_norm(store, name + ".ln2", shape.dim);
}

ad::Var transformer_block(ad::Tape& tape, const std::string& name, const BlockShape& shape, ad::Var x) {
  ad::Var q = linear(tape, name + ".attn.q", x);
  ad::Var k = linear(tape, name + ".attn.k", x);
  ad::Var v = linear(tape, name + ".attn.v", x);
  const std::size_t dh = shape.dim / shape.heads;
  std::vector<ad::Var> heads;
  heads.reserve(shape.heads);
  for (std::size_t h = 0; h < shape.heads; ++h) {
    const std::size_t lo = h * dh, hi = lo + dh;
    heads.push_back(scaled_dot_attention(ad::slice(q, 1, lo, hi), ad::slice(k, 1, lo, hi),
                                         ad::slice(v, 1, lo, hi)));
  }
  ad::Var attn = linear(tape, name + ".attn.o", heads.size() == 1 ? heads[0] : ad::concat(heads, 1));
  ad::Var h = layer_norm(tape, name + ".ln1", ad::add(x, attn));
  ad::Var ff = linear(tape, name + ".ff2", ad::gelu(linear(tape, name + ".ff1", h)));
  return layer_norm(tape, name + ".ln2", ad::add(h, ff));
}

void EncoderConfig::validate() const {
  if (vocab_size == 0) throw ConfigError("encoder: vocab_size must be positive");
  if (model_dim == 0 || num_heads == 0 || feedforward_dim == 0 || max_sequence_length == 0)
    throw ConfigError("encoder: dimensions must be positive");
  if (model_dim % num_heads != 0)
    throw ConfigError("encoder: model_dim " + std::to_string(model_dim) + " is not divisible by num_heads " +
                      std::to_string(num_heads));
}

void add_text_encoder(ad::ParameterStore& store, const std::string& name, const EncoderConfig& cfg,
                      Rng& rng) {
  cfg.validate();
  const double sd = 1.0 / std::sqrt(static_cast<double>(cfg.model_dim));
  store.add(name + ".tok", normal({cfg.vocab_size, cfg.model_dim}, sd, rng));
  store.add(name + ".pos", normal({cfg.max_sequence_length, cfg.model_dim}, sd, rng));
  add_layer_norm(store, name + ".emb_ln", cfg.model_dim);
  const auto shape = block_shape(cfg.model_dim, cfg.num_heads, cfg.feedforward_dim);
  for (std::size_t l = 0; l < cfg.num_layers; ++l)
    add_transformer_block(store, name + ".block" + std::to_string(l), shape, rng);
}

ad::Var text_encoder(ad::Tape& tape, const std::string& name, const EncoderConfig& cfg,
                     std::span<const std::size_t> tokens) {
  if (tokens.empty()) throw ValidationError("text_encoder: empty token sequence");
  const auto used = tokens.first(std::min(tokens.size(), cfg.max_sequence_length));
  std::vector<std::size_t> positions(used.size());
  for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = i;
  ad::Var x = ad::add(ad::embedding(tape.param(name + ".tok"), used),
                      ad::embedding(tape.param(name + ".pos"), positions));
  x = layer_norm(tape, name + ".emb_ln", x);
  const auto shape = block_shape(cfg.model_dim, cfg.num_heads, cfg.feedforward_dim);
  for (std::size_t l = 0; l < cfg.num_layers; ++l)
    x = transformer_block(tape, name + ".block" + std::to_string(l), shape, x);
  return cfg.pooling == Pooling::Mean ? ad::mean_rows(x) : ad::slice(x, 0, 0, 1);
}

void IntermConfig::validate() const {
  if (embedding_dim == 0 || num_heads == 0 || feedforward_dim == 0 || output_dim == 0)
    throw ConfigError("interm encoder: dimensions must be positive");
  if (embedding_dim % num_heads != 0)
    throw ConfigError("interm encoder: embedding_dim " + std::to_string(embedding_dim) +
                      " is not divisible by num_heads " + std::to_string(num_heads));
}

Buckets bucket_scores(const FactorScores& scores) {
  Buckets b{};
  for (auto k : kAllFeatures) {
    const auto [lo, hi] = score_range(k);
    double s = scores[k];
    if (std::isnan(s)) s = lo;
    b[feature_index(k)] = static_cast<std::size_t>(std::lround(std::clamp(s, lo, hi)));
  }
  return b;
}

void add_interm_encoder(ad::ParameterStore& store, const std::string& name, const IntermConfig& cfg,
                        Rng& rng) {
  cfg.validate();
  const double sd = 1.0 / std::sqrt(static_cast<double>(cfg.embedding_dim));
  for (auto k : kAllFeatures)
    store.add(name + ".emb." + std::string(feature_name(k)), normal({kScoreBuckets, cfg.embedding_dim}, sd, rng));
  const auto shape = block_shape(cfg.embedding_dim, cfg.num_heads, cfg.feedforward_dim);
  for (std::size_t l = 0; l < cfg.num_layers; ++l)
    add_transformer_block(store, name + ".block" + std::to_string(l), shape, rng);
  add_linear(store, name + ".proj", cfg.embedding_dim, cfg.output_dim, rng);
}

ad::Var interm_encoder(ad::Tape& tape, const std::string& name, const IntermConfig& cfg,
                       const Buckets& buckets) {
  std::vector<ad::Var> rows;
  rows.reserve(kNumFeatures);
  for (auto k : kAllFeatures) {
    const std::size_t idx = buckets[feature_index(k)];
    rows.push_back(ad::embedding(tape.param(name + ".emb." + std::string(feature_name(k))),
                                 std::span<const std::size_t>(&idx, 1)));
  }
  ad::Var x = ad::concat(rows, 0);
  const auto shape = block_shape(cfg.embedding_dim, cfg.num_heads, cfg.feedforward_dim);
  for (std::size_t l = 0; l < cfg.num_layers; ++l)
    x = transformer_block(tape, name + ".block" + std::to_string(l), shape, x);
  return linear(tape, name + ".proj", ad::mean_rows(x));
}

}  // namespace confusio::nn
