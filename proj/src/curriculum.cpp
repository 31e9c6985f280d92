#include "confusio/curriculum.hpp"

#include <algorithm>
#include <map>
#include <ostream>
#include <set>

#include "confusio/error.hpp"

namespace confusio {

std::string_view bin_name(Bin b) noexcept {
  switch (b) {
    case Bin::B1: return "b1";
    case Bin::B2: return "b2";
    case Bin::B3: return "b3";
  }
  return "b3";
}

Bin bin_from_name(std::string_view name) {
  if (name == "b1") return Bin::B1;
  if (name == "b2") return Bin::B2;
  if (name == "b3") return Bin::B3;
  throw ConfigError("unknown bin '" + std::string(name) + "' (expected b1, b2 or b3)");
}

void CurriculumConfig::validate() const {
  if (!(threshold > 0.5 && threshold <= 1.0)) throw ConfigError("curriculum: threshold must lie in (0.5, 1]");
  std::set<Bin> seen;
  for (auto b : bins_used)
    if (!seen.insert(b).second) throw ConfigError("curriculum: bin '" + std::string(bin_name(b)) + "' listed twice");
  if (!(final_lr_scale > 0.0)) throw ConfigError("curriculum: final_lr_scale must be positive");
}

std::vector<ConfidenceRecord> score_confidence(const Model& m_init, const std::vector<CaseDocument>& augmented) {
  if (!m_init.trained()) throw Error("score_confidence: M_init has not been trained");
  if (!m_init.has_classifier()) throw Error("score_confidence: M_init has no classifier");
  std::vector<ConfidenceRecord> out;
  out.reserve(augmented.size());
  for (const auto& d : augmented) {
    if (!d.judgment) throw ValidationError("score_confidence: document '" + d.id + "' has no pseudo-label");
    const auto p = predict(m_init, d);
    out.push_back({d.id, *p.label, *d.judgment, p.confidence, *p.label == *d.judgment});
  }
  return out;
}

Bin bin_of(const ConfidenceRecord& r, double threshold) {
  if (!r.correct) return Bin::B3;
  return r.probability >= threshold ? Bin::B1 : Bin::B2;
}

BinPartition partition_bins(const std::vector<ConfidenceRecord>& records, const CurriculumConfig& cfg) {
  BinPartition p;
  for (const auto& r : records) p.bins[static_cast<std::size_t>(bin_of(r, cfg.threshold))].push_back(r.doc_id);
  return p;
}

void write_bin_audit(std::ostream& out, const std::vector<ConfidenceRecord>& records, double threshold) {
  for (const auto& r : records)
    out << r.doc_id << '\t' << r.probability << '\t' << (r.correct ? "true" : "false") << '\t'
        << bin_name(bin_of(r, threshold)) << '\n';
}

CurriculumResult run_curriculum(const DatasetSplit& clean, const std::vector<CaseDocument>& augmented,
                                const CurriculumConfig& cfg, const TrainConfig& train_cfg,
                                const ModelFactory& factory, const Model* m_init) {
  cfg.validate();
  train_cfg.validate();
  if (clean.train.empty()) throw ValidationError("run_curriculum: empty clean training set");

  std::vector<std::string> warnings;
  std::optional<Model> own_init;
  if (!m_init) {
    own_init.emplace(factory());
    train(*own_init, clean.train, clean.validation, train_cfg);
    m_init = &*own_init;
  }

  std::vector<ConfidenceRecord> records;
  BinPartition partition;
  if (!augmented.empty()) {
    records = score_confidence(*m_init, augmented);
    partition = partition_bins(records, cfg);
  }

  std::map<std::string, const CaseDocument*> by_id;
  for (const auto& d : augmented) by_id.emplace(d.id, &d);

  TrainConfig stage_cfg = train_cfg;
  if (cfg.epochs_per_stage) stage_cfg.epochs = cfg.epochs_per_stage;
  stage_cfg.seed = cfg.seed;

  Model model = factory();
  std::vector<StageLog> stages;
  std::vector<CaseDocument> pool;
  std::size_t selected = 0;
  for (auto b : cfg.bins_used) selected += partition[b].size();
  if (selected == 0) {
    warnings.push_back("curriculum: selected bins are empty; training on clean data only");
  } else {
    std::size_t stage_no = 0;
    for (auto b : cfg.bins_used) {
      if (partition[b].empty()) continue;
      for (const auto& id : partition[b]) pool.push_back(*by_id.at(id));
      std::vector<CaseDocument> docs = clean.train;
      docs.insert(docs.end(), pool.begin(), pool.end());
      StageLog log;
      log.name = "stage" + std::to_string(++stage_no);
      log.introduced = {b};
      log.clean_docs = clean.train.size();
      log.augmented_docs = pool.size();
      log.learning_rate = stage_cfg.adam.lr;
      stage_cfg.seed = cfg.seed + stage_no;
      log.result = train(model, docs, clean.validation, stage_cfg);
      stages.push_back(std::move(log));
    }
  }

  TrainConfig final_cfg = stage_cfg;
  final_cfg.adam.lr = train_cfg.adam.lr * cfg.final_lr_scale;
  final_cfg.seed = cfg.seed + stages.size() + 1;
  StageLog last;
  last.name = "clean";
  last.clean_docs = clean.train.size();
  last.learning_rate = final_cfg.adam.lr;
  last.result = train(model, clean.train, clean.validation, final_cfg);
  stages.push_back(std::move(last));

  return {std::move(model), std::move(records), std::move(partition), std::move(stages), std::move(warnings)};
}

}  // namespace confusio
