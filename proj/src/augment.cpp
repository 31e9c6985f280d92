#include "confusio/augment.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <map>
#include <ostream>
#include <random>
#include <set>

#include "confusio/error.hpp"
#include "confusio/textsim.hpp"

namespace confusio {

namespace {

std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

struct PoolSentence {
  std::size_t doc;
  std::string text;
};

}  // namespace

KeywordTable default_keywords() {
  KeywordTable table;
  table[feature_index(FeatureKind::GoodsServices)] = {"goods", "services"};
  table[feature_index(FeatureKind::Visual)] = {"visually"};
  table[feature_index(FeatureKind::Phonetic)] = {"phonetically", "aurally"};
  table[feature_index(FeatureKind::Conceptual)] = {"conceptually"};
  table[feature_index(FeatureKind::Attention)] = {"attention", "attentiveness"};
  return table;
}

void AugmentConfig::validate() const {
  if (top_k < 1) throw ConfigError("augment: top_k must be at least 1");
  for (auto k : kAllFeatures) {
    const auto& words = keywords[feature_index(k)];
    if (words.empty() || std::any_of(words.begin(), words.end(),
                                     [](const std::string& w) { return w.empty(); }))
      throw ConfigError("augment: feature '" + std::string(feature_name(k)) +
                        "' needs at least one non-empty keyword");
  }
}

bool has_keyword(const KeywordTable& keywords, FeatureKind feature, std::string_view text) {
  const auto lowered = lowercase(text);
  const auto& words = keywords[feature_index(feature)];
  return std::any_of(words.begin(), words.end(), [&](const std::string& w) {
    return lowered.find(lowercase(w)) != std::string::npos;
  });
}

std::vector<CandidateSentence> extract_candidates(const std::vector<CaseDocument>& clean_train,
                                                  const std::vector<CaseDocument>& pool,
                                                  const AugmentConfig& cfg) {
  cfg.validate();
  if (clean_train.empty()) throw ValidationError("extract_candidates: empty clean training set");
  if (pool.empty()) throw ValidationError("extract_candidates: empty pool");
  for (const auto& d : clean_train)
    if (!d.factors || !d.judgment)
      throw ValidationError("extract_candidates: clean document '" + d.id +
                            "' lacks factors or judgment");

  std::vector<PoolSentence> pool_sentences;
  for (std::size_t d = 0; d < pool.size(); ++d)
    for (const auto& s : pool[d].sentences)
      for (auto& piece : split_sentences(s.text)) pool_sentences.push_back({d, std::move(piece)});

  // One TF-IDF space over clean and pool sentences.
  std::vector<Tokens> tokens;
  for (const auto& d : clean_train)
    for (const auto& s : d.sentences) tokens.push_back(tokenize(s.text));
  for (const auto& p : pool_sentences) tokens.push_back(tokenize(p.text));
  auto [vocab, vectors] = fit_tfidf(tokens);
  const std::size_t pool_offset = vectors.size() - pool_sentences.size();

  // Retrieval is restricted to pool sentences with a keyword of the feature.
  std::array<std::vector<std::size_t>, kNumFeatures> eligible;
  std::array<std::vector<SparseVector>, kNumFeatures> eligible_vectors;
  for (std::size_t i = 0; i < pool_sentences.size(); ++i)
    for (auto k : kAllFeatures)
      if (has_keyword(cfg.keywords, k, pool_sentences[i].text)) {
        eligible[feature_index(k)].push_back(i);
        eligible_vectors[feature_index(k)].push_back(vectors[pool_offset + i]);
      }

  std::vector<CandidateSentence> out;
  std::size_t row = 0;
  for (const auto& doc : clean_train) {
    for (std::size_t si = 0; si < doc.sentences.size(); ++si, ++row) {
      const auto& clean = doc.sentences[si];
      const auto f = feature_index(clean.feature);
      for (const auto& hit : top_k_similar(vectors[row], eligible_vectors[f], cfg.top_k)) {
        if (hit.score <= 0.0) continue;
        const auto& ps = pool_sentences[eligible[f][hit.index]];
        CandidateSentence c;
        c.pool_doc_id = pool[ps.doc].id;
        c.sentence = {clean.feature, ps.text};
        c.matched_clean_sentence_id = doc.id + "#" + std::to_string(si);
        c.similarity = std::clamp(hit.score, 0.0, 1.0);
        c.inherited_score = (*doc.factors)[clean.feature];
        c.inherited_judgment = *doc.judgment;
        out.push_back(std::move(c));
      }
    }
  }
  return out;
}

std::vector<CaseDocument> randomize_assemble(const std::vector<CandidateSentence>& candidates,
                                             const AugmentConfig& cfg) {
  std::array<std::vector<const CandidateSentence*>, kNumFeatures> by_feature;
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& c : candidates)
    if (seen.emplace(c.pool_doc_id, c.sentence.text).second)
      by_feature[feature_index(c.sentence.feature)].push_back(&c);
  for (auto k : kAllFeatures)
    if (by_feature[feature_index(k)].empty())
      throw ValidationError("randomize_assemble: no candidates for feature '" +
                            std::string(feature_name(k)) + "'");

  std::mt19937_64 rng(cfg.seed);
  std::vector<CaseDocument> docs;
  const std::size_t draws = cfg.draws();
  docs.reserve(draws);
  for (std::size_t i = 0; i < draws; ++i) {
    CaseDocument doc;
    char id[48];
    std::snprintf(id, sizeof id, "aug-%llu-%06zu", static_cast<unsigned long long>(cfg.seed), i);
    doc.id = id;
    doc.source = Source::Augmented;
    FactorScores factors;
    for (auto k : kAllFeatures) {
      const auto& pool = by_feature[feature_index(k)];
      std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
      const auto* c = pool[pick(rng)];
      doc.sentences.push_back(c->sentence);
      factors[k] = c->inherited_score;
      doc.provenance.push_back(c->inherited_judgment);
    }
    doc.factors = factors;
    docs.push_back(std::move(doc));
  }
  return docs;
}

std::string_view reject_code(RejectReason r) noexcept {
  switch (r) {
    case RejectReason::KeywordFail: return "KEYWORD_FAIL";
    case RejectReason::RuleUndetermined: return "RULE_UNDETERMINED";
    case RejectReason::RuleConflict: return "RULE_CONFLICT";
    case RejectReason::LabelDisagree: return "LABEL_DISAGREE";
  }
  return "KEYWORD_FAIL";
}

std::vector<CaseDocument> filter_candidates(const std::vector<CaseDocument>& docs,
                                            const AugmentConfig& cfg,
                                            std::vector<RejectRecord>* rejects) {
  std::vector<CaseDocument> kept;
  auto reject = [&](const CaseDocument& d, RejectReason r, Outcome o) {
    if (rejects) rejects->push_back({d.id, r, o});
  };
  for (const auto& d : docs) {
    if (!d.factors) throw ValidationError("filter_candidates: document '" + d.id + "' lacks factors");
    const Outcome outcome = evaluate_rules(cfg.ruleset, *d.factors);
    const bool keywords_ok = std::all_of(d.sentences.begin(), d.sentences.end(), [&](const Sentence& s) {
      return has_keyword(cfg.keywords, s.feature, s.text);
    });
    if (!keywords_ok) {
      reject(d, RejectReason::KeywordFail, outcome);
    } else if (outcome == Outcome::Undetermined) {
      reject(d, RejectReason::RuleUndetermined, outcome);
    } else if (outcome == Outcome::Conflict) {
      reject(d, RejectReason::RuleConflict, outcome);
    } else {
      kept.push_back(d);
    }
  }
  return kept;
}

std::vector<CaseDocument> assign_pseudolabels(const std::vector<CaseDocument>& docs, TiePolicy tie) {
  std::vector<CaseDocument> out;
  out.reserve(docs.size());
  for (const auto& d : docs) {
    if (d.provenance.empty())
      throw ValidationError("assign_pseudolabels: document '" + d.id + "' has no provenance");
    CaseDocument labelled = d;
    labelled.judgment = majority_label(d.provenance, tie);
    out.push_back(std::move(labelled));
  }
  return out;
}

AugmentResult run_pipeline(const std::vector<CaseDocument>& clean_train,
                           const std::vector<CaseDocument>& pool, const AugmentConfig& cfg) {
  AugmentResult result;
  if (cfg.max_output == 0) return result;
  const auto candidates = extract_candidates(clean_train, pool, cfg);
  result.candidates = candidates.size();
  const auto drafts = randomize_assemble(candidates, cfg);
  result.drafts = drafts.size();
  const auto filtered = filter_candidates(drafts, cfg, &result.rejects);
  for (auto& d : assign_pseudolabels(filtered, cfg.tie_policy)) {
    if (result.documents.size() == cfg.max_output) break;
    if (cfg.require_label_agreement) {
      const Outcome o = evaluate_rules(cfg.ruleset, *d.factors);
      const Judgment ruled = o == Outcome::Confusion ? Judgment::Confusion : Judgment::NoConfusion;
      if (ruled != *d.judgment) {
        result.rejects.push_back({d.id, RejectReason::LabelDisagree, o});
        continue;
      }
    }
    validate_document(d);
    result.documents.push_back(std::move(d));
  }
  return result;
}

void write_rejects(std::ostream& out, const std::vector<RejectRecord>& rejects) {
  for (const auto& r : rejects)
    out << r.doc_id << '\t' << reject_code(r.reason) << '\t' << outcome_name(r.outcome) << '\n';
}

}  // namespace confusio
