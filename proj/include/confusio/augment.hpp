#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "confusio/corpus.hpp"
#include "confusio/rules.hpp"

namespace confusio {

// A pool sentence retrieved for one clean sentence; it takes over the clean
// sentence's feature, score and document judgment.
struct CandidateSentence {
  std::string pool_doc_id;
  Sentence sentence;
  std::string matched_clean_sentence_id;  // "<doc id>#<sentence index>"
  double similarity = 0.0;
  double inherited_score = 0.0;
  Judgment inherited_judgment = Judgment::NoConfusion;
};

using KeywordTable = std::array<std::vector<std::string>, kNumFeatures>;

KeywordTable default_keywords();

struct AugmentConfig {
  std::size_t top_k = 3;
  KeywordTable keywords = default_keywords();
  RuleSet ruleset = builtin_ruleset("annotator1");
  std::uint64_t seed = 0;
  std::size_t max_output = 2852;
  // Assembled drafts before filtering; 0 means 4 * max_output.
  std::size_t num_draws = 0;
  TiePolicy tie_policy = TiePolicy::NoConfusion;
  // Drop assembled documents whose rule outcome differs from the
  // majority-vote pseudo-label.
  bool require_label_agreement = true;

  void validate() const;
  std::size_t draws() const { return num_draws ? num_draws : 4 * max_output; }
};

// Case-insensitive substring test against the feature's keyword list.
bool has_keyword(const KeywordTable& keywords, FeatureKind feature, std::string_view text);

// For every clean sentence, the top_k most similar pool sentences among those
// carrying a keyword of the clean sentence's feature. Output order is
// (clean document, clean sentence, rank).
std::vector<CandidateSentence> extract_candidates(const std::vector<CaseDocument>& clean_train,
                                                  const std::vector<CaseDocument>& pool,
                                                  const AugmentConfig& cfg);

// Deduplicates by (pool doc, text), then draws cfg.draws() documents with one
// uniformly chosen candidate per feature. Factors are the inherited scores;
// the five source judgments go to `provenance`. Sources may repeat.
std::vector<CaseDocument> randomize_assemble(const std::vector<CandidateSentence>& candidates,
                                             const AugmentConfig& cfg);

enum class RejectReason { KeywordFail, RuleUndetermined, RuleConflict, LabelDisagree };

std::string_view reject_code(RejectReason r) noexcept;

struct RejectRecord {
  std::string doc_id;
  RejectReason reason;
  Outcome outcome;
};

// Keeps documents whose every sentence has a keyword of its feature and whose
// rule outcome is decided.
std::vector<CaseDocument> filter_candidates(const std::vector<CaseDocument>& docs,
                                            const AugmentConfig& cfg,
                                            std::vector<RejectRecord>* rejects = nullptr);

// Final judgment = majority of the provenance judgments; scores unchanged.
std::vector<CaseDocument> assign_pseudolabels(const std::vector<CaseDocument>& docs,
                                              TiePolicy tie = TiePolicy::NoConfusion);

struct AugmentResult {
  std::vector<CaseDocument> documents;
  std::vector<RejectRecord> rejects;
  std::size_t candidates = 0;
  std::size_t drafts = 0;
};

// extraction -> randomization -> filtering -> assigning, truncated to
// cfg.max_output; outputs are tagged Source::Augmented.
AugmentResult run_pipeline(const std::vector<CaseDocument>& clean_train,
                           const std::vector<CaseDocument>& pool, const AugmentConfig& cfg);

// id<TAB>reason<TAB>outcome, one line per rejected draft.
void write_rejects(std::ostream& out, const std::vector<RejectRecord>& rejects);

}  // namespace confusio
