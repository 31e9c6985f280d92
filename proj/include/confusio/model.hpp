#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "confusio/autodiff.hpp"
#include "confusio/checkpoint.hpp"
#include "confusio/corpus.hpp"
#include "confusio/nn.hpp"

namespace confusio {

// Word-level vocabulary. Id 0 is the unknown token, id 1 the leading [CLS].
class TokenVocab {
 public:
  static constexpr std::size_t kUnk = 0;
  static constexpr std::size_t kCls = 1;

  TokenVocab();
  // Terms ordered by descending frequency, then lexicographically; at most
  // max_size entries including the two specials (0 = unbounded).
  static TokenVocab build(const std::vector<CaseDocument>& docs, std::size_t max_size = 0);
  static TokenVocab from_terms(std::vector<std::string> terms);

  // [CLS] followed by the tokens of `text`, truncated to max_len.
  std::vector<std::size_t> encode(std::string_view text, std::size_t max_len) const;
  std::size_t size() const noexcept { return terms_.size(); }
  const std::vector<std::string>& terms() const noexcept { return terms_; }

 private:
  std::vector<std::string> terms_;
  std::unordered_map<std::string, std::size_t> index_;
};

enum class Mode { EndToEnd, MultiTask, Fusion };

// "end2end", "multitask", "fusion".
std::string_view mode_name(Mode m) noexcept;
Mode mode_from_name(std::string_view name);

struct ModelConfig {
  Mode mode = Mode::Fusion;
  // vocab_size is taken from the vocabulary when the model is built.
  nn::EncoderConfig encoder;
  nn::IntermConfig interm;
  double smooth_l1_beta = 1.0;
  // End-to-end models may drop one of the two disjoint sub-models.
  bool classify = true;
  bool regress = true;
  // Fusion training: feed gold factor scores to E_interm instead of f2's.
  bool teacher_forcing = false;
  // Fusion training: weight of the f2 regression loss added to the
  // classification loss. With 0, f2 stays as initialised.
  double fusion_regression_weight = 0.0;

  void validate() const;
};

struct FusionOutput {
  ad::Var fused;
  ad::Var s1;
  ad::Var s2;
};

// s1 = tanh(gate1([V_text, V_interm])), s2 = tanh(gate2([V_interm, V_text])),
// V_fusion = s1 V_text + s2 V_interm. `head` names the gate parameters
// "<head>.gate1" and "<head>.gate2".
FusionOutput fuse(ad::Tape& tape, const std::string& head, ad::Var v_text, ad::Var v_interm);
// Eq. 4 with given gates.
ad::Var gated_sum(ad::Var s1, ad::Var s2, ad::Var v_text, ad::Var v_interm);

// Mean over rows of -log softmax(logits)[target]; logits m x 2.
ad::Var cross_entropy_loss(ad::Var logits, std::span<const Judgment> targets);
// Elementwise smooth L1, averaged over all elements.
ad::Var smooth_l1_loss(ad::Var pred, const ad::Tensor& target, double beta = 1.0);
// Scalar reference form of one element.
double smooth_l1(double diff, double beta = 1.0);

struct ForwardOptions {
  // Fusion: scores fed to E_interm in place of f2's predictions.
  std::optional<FactorScores> interm_scores;
  // Fusion: whether f2's scores must be computed when interm_scores is set.
  bool need_scores = true;
};

struct ForwardResult {
  std::optional<ad::Var> logits;  // 1 x 2
  std::optional<ad::Var> scores;  // 1 x 5
  std::optional<nn::Buckets> buckets;
  std::optional<ad::Var> v_text;
  std::optional<ad::Var> v_interm;
  std::optional<ad::Var> s1;
  std::optional<ad::Var> s2;
};

class Model {
 public:
  Model(ModelConfig cfg, TokenVocab vocab, std::uint64_t seed);

  const ModelConfig& config() const noexcept { return cfg_; }
  const TokenVocab& vocab() const noexcept { return vocab_; }
  ad::ParameterStore& params() noexcept { return params_; }
  const ad::ParameterStore& params() const noexcept { return params_; }
  std::uint64_t seed() const noexcept { return seed_; }
  bool trained() const noexcept { return trained_; }
  void set_trained(bool t) noexcept { trained_ = t; }

  bool has_classifier() const noexcept { return cfg_.classify; }
  bool has_regressor() const noexcept { return cfg_.regress; }

  std::vector<std::size_t> tokens(const CaseDocument& doc) const;
  // Pooled output of the named encoder ("f1.enc", "f2.enc", "shared.enc").
  ad::Var encode_text(ad::Tape& tape, const std::string& encoder, const CaseDocument& doc) const;
  ad::Var interm_encode(ad::Tape& tape, const FactorScores& scores, nn::Buckets* buckets = nullptr) const;
  // `tape` must have been built over this model's parameters.
  ForwardResult forward(ad::Tape& tape, const CaseDocument& doc, const ForwardOptions& opts = {}) const;

  // Copies every parameter of `source` whose name starts with one of
  // `prefixes` and that this model has with the same shape.
  std::size_t init_from(const Model& source, std::span<const std::string> prefixes);

  Checkpoint to_checkpoint() const;
  static Model from_checkpoint(const Checkpoint& ckpt);
  void save(const std::filesystem::path& path) const;
  static Model load(const std::filesystem::path& path);

 private:
  ModelConfig cfg_;
  TokenVocab vocab_;
  std::uint64_t seed_;
  ad::ParameterStore params_;
  bool trained_ = false;
};

struct Prediction {
  std::optional<Judgment> label;
  std::array<double, 2> probabilities{};
  double confidence = 0.0;  // max softmax probability
  std::optional<FactorScores> scores;
  std::optional<nn::Buckets> buckets;
};

// Inference without recording gradients.
Prediction predict(const Model& model, const CaseDocument& doc, const ForwardOptions& opts = {});
FactorScores predict_intermediate(const Model& model, const CaseDocument& doc);

}  // namespace confusio
