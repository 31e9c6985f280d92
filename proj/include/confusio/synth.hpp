#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "confusio/corpus.hpp"
#include "confusio/rules.hpp"

namespace confusio {

// Categorical distribution over score values for one factor.
struct ScoreWeights {
  std::vector<std::pair<double, double>> entries;  // (score, weight)
};

struct SynthConfig {
  std::size_t num_docs = 426;
  double noise_rate = 0.0;
  std::uint64_t seed = 0;
  // Defaults to uniform over the integer points of each factor's scale.
  std::array<ScoreWeights, kNumFeatures> score_distribution = default_score_distribution();
  // Size of the pseudo-word pool used for trademark names.
  std::size_t vocabulary_size = 200;
  // Labels are rule outcomes; factor draws with an undecided outcome are
  // redrawn, up to `max_redraws` times per document.
  RuleSet ruleset = builtin_ruleset("annotator1_reconciled");
  std::size_t max_redraws = 1000;
  Source source = Source::Synthetic;
  std::string id_prefix = "syn";

  static std::array<ScoreWeights, kNumFeatures> default_score_distribution();

  void validate() const;
};

// Phrase bank size per (feature, rounded score).
inline constexpr std::size_t kTemplateVariants = 3;

// The deterministic phrase encoding `score` for `feature`; `variant` selects
// one of the bank entries.
std::string score_phrase(FeatureKind feature, double score, std::size_t variant);

// The i-th pseudo-word of the trademark-name pool.
std::string pseudo_word(std::size_t index);

std::vector<CaseDocument> generate_synthetic(const SynthConfig& config);

}  // namespace confusio
