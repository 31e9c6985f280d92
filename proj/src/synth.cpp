#include "confusio/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "confusio/error.hpp"

namespace confusio {

namespace {

using Bank = std::array<std::array<const char*, kTemplateVariants>, 6>;

// Indexed by rounded score 0..5. Row 0 is unused for factors whose scale
// starts at 1.
const Bank kGoods = {{
    {"", "", ""},
    {"the goods and services are dissimilar",
     "the contested goods are dissimilar to the earlier services",
     "the goods differ in nature and purpose from the services"},
    {"the goods are similar only to a low degree",
     "the services share a low degree of similarity with the goods",
     "the goods and services are remotely similar"},
    {"the goods and services are similar to an average degree",
     "the goods are similar to the earlier services",
     "the contested services are moderately similar to the goods"},
    {"the goods are highly similar",
     "the goods and services show a high degree of similarity",
     "the contested services are closely related to the earlier goods"},
    {"the goods and services are identical",
     "the contested goods are identical to the earlier goods",
     "identical services are covered by both marks"},
}};

const Bank kVisual = {{
    {"", "", ""},
    {"visually the signs are dissimilar", "the marks are visually different",
     "visually the signs have nothing in common"},
    {"visually the signs coincide only to a low degree",
     "the marks are visually similar to a low degree", "visually the overlap is faint"},
    {"visually the signs are similar to an average degree",
     "the marks are visually similar to an average degree",
     "visually the marks are moderately similar"},
    {"visually the signs are highly similar", "the marks are visually similar to a high degree",
     "visually the signs are close"},
    {"visually the signs are identical", "the marks are visually identical",
     "visually the signs coincide entirely"},
}};

const Bank kPhonetic = {{
    {"phonetically the comparison is neutral", "aurally the marks cannot be compared",
     "phonetically no comparison is possible"},
    {"phonetically the signs are dissimilar", "aurally the marks sound different",
     "phonetically the marks have nothing in common"},
    {"phonetically the signs are similar to a low degree",
     "aurally the marks coincide only slightly", "phonetically the overlap is faint"},
    {"phonetically the signs are similar to an average degree",
     "aurally the marks are moderately similar",
     "phonetically the pronunciation is similar to an average degree"},
    {"phonetically the signs are highly similar", "aurally the marks sound alike to a high degree",
     "phonetically the pronunciation is close"},
    {"phonetically the signs are identical", "aurally the marks are pronounced identically",
     "phonetically the pronunciation coincides entirely"},
}};

const Bank kConceptual = {{
    {"conceptually neither sign has a meaning", "conceptually the comparison is neutral",
     "conceptually no meaning can be attributed to the marks"},
    {"conceptually the signs are dissimilar", "the marks convey conceptually different ideas",
     "conceptually the marks have nothing in common"},
    {"conceptually the signs are similar to a low degree",
     "conceptually the meanings overlap only slightly", "conceptually the link is faint"},
    {"conceptually the signs are similar to an average degree",
     "conceptually the marks are moderately similar",
     "conceptually the meanings are similar to an average degree"},
    {"conceptually the signs are highly similar", "conceptually the meanings are close",
     "the marks are conceptually similar to a high degree"},
    {"conceptually the signs are identical", "conceptually the marks convey the same idea",
     "the meanings are conceptually identical"},
}};

const Bank kAttention = {{
    {"", "", ""},
    {"the relevant public displays a low level of attention",
     "the attentiveness of the public is low", "consumers pay little attention"},
    {"the level of attention is below average", "the attentiveness of consumers is reduced",
     "the public pays somewhat limited attention"},
    {"the level of attention is average", "the attentiveness of the public is average",
     "the public pays an ordinary degree of attention"},
    {"the level of attention is high", "the attentiveness of consumers is high",
     "the public pays considerable attention"},
    {"the level of attention is very high", "the public displays a heightened attentiveness",
     "consumers pay particularly close attention"},
}};

constexpr std::array<const char*, 6> kOpenings = {
    "", "the board finds that ", "it must be held that ", "in the present case ",
    "consequently ", "as regards the comparison "};

constexpr std::array<const char*, 16> kSyllables = {"ka", "lo", "ri",  "zen", "ta", "mo",
                                                    "vi", "sul", "dor", "pe", "nix", "qua",
                                                    "bel", "tor", "fa", "gu"};

const Bank& bank_for(FeatureKind k) {
  switch (k) {
    case FeatureKind::GoodsServices: return kGoods;
    case FeatureKind::Visual: return kVisual;
    case FeatureKind::Phonetic: return kPhonetic;
    case FeatureKind::Conceptual: return kConceptual;
    case FeatureKind::Attention: return kAttention;
  }
  return kGoods;
}

std::string capitalized_sentence(std::string body) {
  if (!body.empty() && body.front() >= 'a' && body.front() <= 'z')
    body.front() = static_cast<char>(body.front() - 'a' + 'A');
  body += '.';
  return body;
}

}  // namespace

std::array<ScoreWeights, kNumFeatures> SynthConfig::default_score_distribution() {
  std::array<ScoreWeights, kNumFeatures> dist;
  for (auto k : kAllFeatures) {
    const auto r = score_range(k);
    for (double v = r.lo; v <= r.hi; v += 1.0) dist[feature_index(k)].entries.emplace_back(v, 1.0);
  }
  return dist;
}

void SynthConfig::validate() const {
  if (!(noise_rate >= 0.0 && noise_rate <= 1.0))
    throw ConfigError("synth: noise_rate must lie in [0, 1]");
  if (vocabulary_size < 2) throw ConfigError("synth: vocabulary_size must be at least 2");
  if (vocabulary_size > kSyllables.size() * kSyllables.size() * kSyllables.size())
    throw ConfigError("synth: vocabulary_size exceeds the pseudo-word pool");
  for (auto k : kAllFeatures) {
    const auto& d = score_distribution[feature_index(k)];
    if (d.entries.empty())
      throw ConfigError("synth: empty score distribution for '" + std::string(feature_name(k)) +
                        "'");
    double total = 0.0;
    for (auto [score, w] : d.entries) {
      const auto r = score_range(k);
      if (score < r.lo || score > r.hi)
        throw ConfigError("synth: score outside the scale of '" + std::string(feature_name(k)) +
                          "'");
      if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("synth: negative score weight");
      total += w;
    }
    if (!(total > 0.0)) throw ConfigError("synth: all score weights are zero");
  }
}

std::string score_phrase(FeatureKind feature, double score, std::size_t variant) {
  const auto r = score_range(feature);
  const double clamped = std::clamp(score, r.lo, r.hi);
  const auto bucket = static_cast<std::size_t>(std::lround(clamped));
  return bank_for(feature)[bucket][variant % kTemplateVariants];
}

std::string pseudo_word(std::size_t index) {
  const std::size_t n = kSyllables.size();
  return std::string(kSyllables[index % n]) + kSyllables[(index / n) % n] +
         kSyllables[(index / (n * n)) % n];
}

std::vector<CaseDocument> generate_synthetic(const SynthConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);

  std::array<std::discrete_distribution<std::size_t>, kNumFeatures> pickers;
  for (auto k : kAllFeatures) {
    std::vector<double> weights;
    for (auto [_, w] : config.score_distribution[feature_index(k)].entries) weights.push_back(w);
    pickers[feature_index(k)] = std::discrete_distribution<std::size_t>(weights.begin(), weights.end());
  }
  std::bernoulli_distribution flip(config.noise_rate);
  std::uniform_int_distribution<std::size_t> variant(0, kTemplateVariants - 1);
  std::uniform_int_distribution<std::size_t> opening(0, kOpenings.size() - 1);
  std::uniform_int_distribution<std::size_t> name(0, config.vocabulary_size - 1);

  std::vector<CaseDocument> docs;
  docs.reserve(config.num_docs);
  for (std::size_t i = 0; i < config.num_docs; ++i) {
    FactorScores factors;
    Outcome outcome = Outcome::Undetermined;
    for (std::size_t attempt = 0;; ++attempt) {
      if (attempt >= config.max_redraws)
        throw ConfigError("synth: no decided rule outcome after " +
                          std::to_string(config.max_redraws) + " draws; check the rule set");
      for (auto k : kAllFeatures) {
        const auto& entries = config.score_distribution[feature_index(k)].entries;
        factors[k] = entries[pickers[feature_index(k)](rng)].first;
      }
      outcome = evaluate_rules(config.ruleset, factors);
      if (outcome == Outcome::Confusion || outcome == Outcome::NoConfusion) break;
    }
    Judgment judgment = outcome == Outcome::Confusion ? Judgment::Confusion : Judgment::NoConfusion;
    if (flip(rng))
      judgment = judgment == Judgment::Confusion ? Judgment::NoConfusion : Judgment::Confusion;

    auto order = kAllFeatures;
    std::shuffle(order.begin(), order.end(), rng);

    CaseDocument doc;
    char id[32];
    std::snprintf(id, sizeof id, "-%06zu", i);
    doc.id = config.id_prefix + id;
    const std::string earlier = pseudo_word(name(rng));
    const std::string contested = pseudo_word(name(rng));
    for (std::size_t s = 0; s < order.size(); ++s) {
      const auto k = order[s];
      std::string body = kOpenings[opening(rng)];
      if (s == 0) body = "as regards the marks " + earlier + " and " + contested + " " + body;
      body += score_phrase(k, factors[k], variant(rng));
      doc.sentences.push_back({k, capitalized_sentence(std::move(body))});
    }
    doc.factors = factors;
    doc.judgment = judgment;
    doc.source = config.source;
    docs.push_back(std::move(doc));
  }
  return docs;
}

}  // namespace confusio
