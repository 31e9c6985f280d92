#include <doctest.h>

#include <map>
#include <set>
#include <sstream>

#include "confusio/augment.hpp"
#include "confusio/error.hpp"
#include "confusio/synth.hpp"
#include "confusio/textsim.hpp"

using namespace confusio;

namespace {

CaseDocument clean_doc(const std::string& id, std::array<double, 5> scores, Judgment j,
                       std::array<std::string, 5> texts) {
  CaseDocument d;
  d.id = id;
  for (auto k : kAllFeatures) d.sentences.push_back({k, texts[feature_index(k)]});
  FactorScores f;
  f.values = scores;
  d.factors = f;
  d.judgment = j;
  return d;
}

CandidateSentence candidate(FeatureKind k, const std::string& pool_id, double score, Judgment j) {
  CandidateSentence c;
  c.pool_doc_id = pool_id;
  c.sentence = {k, std::string(feature_name(k)) + " sentence from " + pool_id};
  c.inherited_score = score;
  c.inherited_judgment = j;
  return c;
}

std::vector<CaseDocument> synth(std::size_t n, std::uint64_t seed, const std::string& prefix = "syn") {
  SynthConfig c;
  c.num_docs = n;
  c.seed = seed;
  c.id_prefix = prefix;
  return generate_synthetic(c);
}

std::vector<Judgment> votes(std::initializer_list<int> v) {
  std::vector<Judgment> out;
  for (int i : v) out.push_back(i ? Judgment::Confusion : Judgment::NoConfusion);
  return out;
}

}  // namespace

TEST_CASE("keyword test is a case-insensitive substring match") {
  auto kw = default_keywords();
  CHECK(has_keyword(kw, FeatureKind::Conceptual, "Conceptually, the marks differ."));
  CHECK(has_keyword(kw, FeatureKind::Phonetic, "AURALLY close"));
  CHECK_FALSE(has_keyword(kw, FeatureKind::Visual, "Conceptually, the marks differ."));
  for (auto k : kAllFeatures) CHECK_FALSE(kw[feature_index(k)].empty());
}

TEST_CASE("exact copy is the top candidate") {
  auto clean = synth(5, 1);
  std::vector<CaseDocument> pool = {clean[2]};
  pool[0].id = "copy";
  AugmentConfig cfg;
  cfg.top_k = 1;
  auto cands = extract_candidates(clean, pool, cfg);
  REQUIRE(cands.size() == 25);
  for (auto& c : cands) {
    const auto clean_id = c.matched_clean_sentence_id.substr(0, c.matched_clean_sentence_id.find('#'));
    if (clean_id != clean[2].id) continue;
    CHECK(c.similarity == doctest::Approx(1.0));
    CHECK(c.pool_doc_id == "copy");
  }
  for (auto& c : cands) {
    const auto hash = c.matched_clean_sentence_id.find('#');
    const auto& src = *std::find_if(clean.begin(), clean.end(), [&](auto& d) {
      return d.id == c.matched_clean_sentence_id.substr(0, hash);
    });
    const auto& s = src.sentences.at(std::stoul(c.matched_clean_sentence_id.substr(hash + 1)));
    CHECK(c.sentence.feature == s.feature);
    CHECK(c.inherited_score == (*src.factors)[s.feature]);
    CHECK(c.inherited_judgment == *src.judgment);
    CHECK(c.similarity >= 0.0);
    CHECK(c.similarity <= 1.0 + 1e-12);
  }
}

TEST_CASE("top-1 candidate is the brute-force argmax") {
  std::array<std::string, 5> texts = {"goods alpha beta", "visually gamma", "aurally delta", "conceptually eps",
                                      "attention zeta"};
  auto c = clean_doc("c", {5, 5, 5, 5, 5}, Judgment::Confusion, texts);
  CaseDocument pool;
  pool.id = "p";
  pool.source = Source::Augmented;
  pool.sentences = {{FeatureKind::GoodsServices, "goods alpha"},
                    {FeatureKind::GoodsServices, "goods beta beta beta gamma"},
                    {FeatureKind::GoodsServices, "services omega"}};
  AugmentConfig cfg;
  cfg.top_k = 1;
  auto cands = extract_candidates({c}, {pool}, cfg);

  std::vector<Tokens> corpus;
  for (auto& s : pool.sentences) corpus.push_back(tokenize(s.text));
  auto [vocab, vecs] = fit_tfidf(corpus);
  auto q = transform(vocab, tokenize(texts[0]));
  std::size_t best = 0;
  for (std::size_t i = 1; i < vecs.size(); ++i)
    if (cosine(q, vecs[i]) > cosine(q, vecs[best])) best = i;

  bool seen = false;
  for (auto& cand : cands)
    if (cand.matched_clean_sentence_id == "c#0") {
      CHECK(cand.sentence.text == pool.sentences[best].text);
      seen = true;
    }
  CHECK(seen);
}

TEST_CASE("extraction errors") {
  AugmentConfig cfg;
  auto clean = synth(3, 1);
  CHECK_THROWS_AS(extract_candidates({}, clean, cfg), ValidationError);
  CHECK_THROWS_AS(extract_candidates(clean, {}, cfg), ValidationError);
  cfg.top_k = 0;
  CHECK_THROWS_AS(extract_candidates(clean, clean, cfg), ConfigError);
}

TEST_CASE("assembly with one candidate per feature") {
  std::vector<CandidateSentence> cands;
  const std::array<double, 5> scores = {4, 2, 0, 3, 5};
  for (auto k : kAllFeatures) cands.push_back(candidate(k, "p", scores[feature_index(k)], Judgment::Confusion));
  AugmentConfig cfg;
  cfg.num_draws = 4;
  auto docs = randomize_assemble(cands, cfg);
  REQUIRE(docs.size() == 4);
  for (auto& d : docs) {
    CHECK(d.factors->values == scores);
    CHECK(d.provenance.size() == 5);
    CHECK(d.sentences.size() == 5);
    CHECK(d.source == Source::Augmented);
  }
  CHECK(docs[0].sentences == docs[3].sentences);
}

TEST_CASE("assembly is seeded and near uniform") {
  std::vector<CandidateSentence> cands;
  for (auto k : kAllFeatures)
    for (int i = 0; i < 2; ++i) cands.push_back(candidate(k, "p" + std::to_string(i), 1 + i, Judgment::Confusion));
  AugmentConfig cfg;
  cfg.num_draws = 10;
  cfg.seed = 3;
  CHECK(randomize_assemble(cands, cfg) == randomize_assemble(cands, cfg));

  cfg.num_draws = 1000;
  auto docs = randomize_assemble(cands, cfg);
  std::map<std::array<double, 5>, int> counts;
  for (auto& d : docs) ++counts[d.factors->values];
  // Chi-square over the 32 equally likely combinations, 31 degrees of
  // freedom; 61.1 is the 0.001 critical value.
  double chi = 0.0;
  const double expected = 1000.0 / 32;
  CHECK(counts.size() == 32);
  for (auto& [_, n] : counts) chi += (n - expected) * (n - expected) / expected;
  chi += (32 - counts.size()) * expected;
  CHECK(chi < 61.1);
}

TEST_CASE("assembly deduplicates and requires every feature") {
  std::vector<CandidateSentence> cands;
  for (auto k : kAllFeatures) cands.push_back(candidate(k, "p", 3, Judgment::Confusion));
  cands.push_back(candidate(FeatureKind::Visual, "p", 1, Judgment::NoConfusion));
  AugmentConfig cfg;
  cfg.num_draws = 50;
  for (auto& d : randomize_assemble(cands, cfg)) CHECK((*d.factors)[FeatureKind::Visual] == 3);

  cands.erase(cands.begin() + 2);
  cands.pop_back();
  try {
    randomize_assemble(cands, cfg);
    FAIL("expected an error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("phonetic") != std::string::npos);
  }
}

TEST_CASE("filtering") {
  std::array<std::string, 5> ok = {"The goods match.", "Visually close.", "Aurally close.", "Conceptually close.",
                                   "High attention."};
  AugmentConfig cfg;
  auto keep = clean_doc("keep", {5, 5, 5, 5, 5}, Judgment::Confusion, ok);
  auto texts = ok;
  texts[1] = "The images are close.";
  auto no_kw = clean_doc("nokw", {5, 5, 5, 5, 5}, Judgment::Confusion, texts);
  auto conflict = clean_doc("conflict", {4, 1, 1, 3, 3}, Judgment::Confusion, ok);
  auto undecided = clean_doc("undecided", {3, 3, 3, 3, 3}, Judgment::Confusion, ok);
  std::vector<RejectRecord> rejects;
  auto kept = filter_candidates({keep, no_kw, conflict, undecided}, cfg, &rejects);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].id == "keep");
  REQUIRE(rejects.size() == 3);
  CHECK(rejects[0].reason == RejectReason::KeywordFail);
  CHECK(rejects[1].reason == RejectReason::RuleConflict);
  CHECK(rejects[1].outcome == Outcome::Conflict);
  CHECK(rejects[2].reason == RejectReason::RuleUndetermined);

  std::ostringstream out;
  write_rejects(out, rejects);
  CHECK(out.str() == "nokw\tKEYWORD_FAIL\tconfusion\nconflict\tRULE_CONFLICT\tconflict\n"
                     "undecided\tRULE_UNDETERMINED\tundetermined\n");
}

TEST_CASE("pseudo-labels are provenance majorities") {
  CaseDocument d;
  d.id = "d";
  FactorScores f;
  f.values = {1, 2, 3, 4, 5};
  d.factors = f;
  d.provenance = votes({1, 1, 1, 0, 0});
  CHECK(assign_pseudolabels({d})[0].judgment == Judgment::Confusion);
  d.provenance = votes({1, 1, 1, 1, 1});
  CHECK(assign_pseudolabels({d})[0].judgment == Judgment::Confusion);
  d.provenance = votes({0, 0, 1, 1, 0});
  auto out = assign_pseudolabels({d});
  CHECK(out[0].judgment == Judgment::NoConfusion);
  CHECK(out[0].factors == d.factors);
  d.provenance.clear();
  CHECK_THROWS_AS(assign_pseudolabels({d}), ValidationError);
}

TEST_CASE("pipeline on copies of clean documents") {
  auto clean = synth(40, 2);
  auto pool = clean;
  for (auto& p : pool) {
    p.id = "copy-" + p.id;
    p.factors.reset();
    p.judgment.reset();
  }
  AugmentConfig cfg;
  cfg.ruleset = builtin_ruleset("annotator1_reconciled");
  cfg.max_output = 100;
  auto res = run_pipeline(clean, pool, cfg);
  CHECK_FALSE(res.documents.empty());
  CHECK(res.documents.size() <= 100);
  CHECK(res.drafts == cfg.draws());

  std::set<double> seen_scores[5];
  for (auto& c : clean)
    for (auto k : kAllFeatures) seen_scores[feature_index(k)].insert((*c.factors)[k]);
  for (auto& d : res.documents) {
    CHECK(d.source == Source::Augmented);
    CHECK_NOTHROW(validate_document(d));
    const Outcome o = evaluate_rules(cfg.ruleset, *d.factors);
    CHECK(o == (d.judgment == Judgment::Confusion ? Outcome::Confusion : Outcome::NoConfusion));
    for (auto k : kAllFeatures) CHECK(seen_scores[feature_index(k)].contains((*d.factors)[k]));
    for (auto& s : d.sentences) CHECK(has_keyword(cfg.keywords, s.feature, s.text));
  }
  CHECK(run_pipeline(clean, pool, cfg).documents == res.documents);

  cfg.max_output = 0;
  CHECK(run_pipeline(clean, pool, cfg).documents.empty());
}

TEST_CASE("verbatim annotator 1 keeps only confusion outputs") {
  auto clean = synth(30, 4);
  auto pool = synth(40, 5, "pool");
  AugmentConfig cfg;
  cfg.max_output = 50;
  for (auto& d : run_pipeline(clean, pool, cfg).documents) CHECK(d.judgment == Judgment::Confusion);
}
