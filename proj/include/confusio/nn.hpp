#pragma once

// Layers over the autodiff tape. Every layer is a set of named parameters in
// a ParameterStore (created by add_*) and a function that applies them.

#include <array>
#include <cstddef>
#include <random>
#include <span>
#include <string>

#include "confusio/autodiff.hpp"
#include "confusio/corpus.hpp"

namespace confusio::nn {

using Rng = std::mt19937_64;

// y = x W + b; parameters "<name>.w" (in x out) and "<name>.b" (1 x out).
void add_linear(ad::ParameterStore& store, const std::string& name, std::size_t in, std::size_t out,
                Rng& rng);
ad::Var linear(ad::Tape& tape, const std::string& name, ad::Var x);

// Parameters "<name>.gamma", "<name>.beta".
void add_layer_norm(ad::ParameterStore& store, const std::string& name, std::size_t dim);
ad::Var layer_norm(ad::Tape& tape, const std::string& name, ad::Var x);

// softmax(Q K^T / sqrt(d_k)) V.
ad::Var scaled_dot_attention(ad::Var q, ad::Var k, ad::Var v);

struct BlockShape {
  std::size_t dim = 64;
  std::size_t heads = 4;
  std::size_t feedforward = 128;
};

// Post-norm block: h = LN(x + MHA(x)); y = LN(h + FFN(h)), GELU in the FFN.
void add_transformer_block(ad::ParameterStore& store, const std::string& name, const BlockShape& shape,
                           Rng& rng);
ad::Var transformer_block(ad::Tape& tape, const std::string& name, const BlockShape& shape, ad::Var x);

enum class Pooling { Mean, LeadingToken };

struct EncoderConfig {
  std::size_t vocab_size = 0;
  std::size_t model_dim = 64;
  std::size_t num_layers = 2;
  std::size_t num_heads = 4;
  std::size_t feedforward_dim = 128;
  std::size_t max_sequence_length = 256;
  Pooling pooling = Pooling::Mean;

  void validate() const;
};

// Token and position embeddings, embedding norm, blocks, pooling.
void add_text_encoder(ad::ParameterStore& store, const std::string& name, const EncoderConfig& cfg,
                      Rng& rng);
// tokens -> 1 x model_dim. Sequences longer than max_sequence_length are
// truncated.
ad::Var text_encoder(ad::Tape& tape, const std::string& name, const EncoderConfig& cfg,
                     std::span<const std::size_t> tokens);

struct IntermConfig {
  std::size_t embedding_dim = 300;
  std::size_t num_layers = 6;
  std::size_t num_heads = 6;
  std::size_t feedforward_dim = 512;
  std::size_t output_dim = 64;

  void validate() const;
};

inline constexpr std::size_t kScoreBuckets = 6;  // integer points 0..5
using Buckets = std::array<std::size_t, kNumFeatures>;

// Clamp to the factor's scale, then round half away from zero.
Buckets bucket_scores(const FactorScores& scores);

// One 6-row embedding table per factor ("<name>.emb.<feature>"), blocks,
// mean pooling and the output projection "<name>.proj".
void add_interm_encoder(ad::ParameterStore& store, const std::string& name, const IntermConfig& cfg,
                        Rng& rng);
ad::Var interm_encoder(ad::Tape& tape, const std::string& name, const IntermConfig& cfg,
                       const Buckets& buckets);

}  // namespace confusio::nn
