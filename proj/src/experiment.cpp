#include "confusio/experiment.hpp"

#include <fstream>
#include <sstream>

#include "confusio/error.hpp"

namespace confusio {

std::string_view data_split_name(DataSplit s) noexcept {
  switch (s) {
    case DataSplit::Clean: return "clean";
    case DataSplit::Augmented: return "augmented";
    case DataSplit::Mix: return "mix";
  }
  return "clean";
}

DataSplit data_split_from_name(std::string_view name) {
  if (name == "clean") return DataSplit::Clean;
  if (name == "augmented") return DataSplit::Augmented;
  if (name == "mix") return DataSplit::Mix;
  throw ConfigError("unknown split '" + std::string(name) + "' (expected clean, augmented or mix)");
}

void ExperimentSpec::validate() const {
  model.validate();
  train.validate();
  curriculum.validate();
  if (use_curriculum && split == DataSplit::Clean)
    throw ConfigError("curriculum training needs augmented data; split 'clean' cannot be combined with it");
  if (use_curriculum && !model.classify)
    throw ConfigError("curriculum training needs a classifier");
}

std::vector<CaseDocument> ExperimentData::training_docs(DataSplit split) const {
  std::vector<CaseDocument> out;
  if (split != DataSplit::Augmented) out = clean.train;
  if (split != DataSplit::Clean) out.insert(out.end(), augmented.begin(), augmented.end());
  if (out.empty()) throw ValidationError("split '" + std::string(data_split_name(split)) + "' has no documents");
  return out;
}

namespace {

TrainResult run_training(Model& model, const std::vector<CaseDocument>& docs, const std::vector<CaseDocument>& val,
                         const TrainConfig& cfg, const RunOptions& opts, const std::string& stage) {
  Trainer trainer(model, docs, val, cfg);
  std::optional<std::filesystem::path> state;
  if (opts.state_dir) state = *opts.state_dir / (stage + ".state");
  if (state && opts.resume && std::filesystem::exists(*state)) trainer.load_state(load_checkpoint(*state));
  while (!trainer.done()) {
    trainer.run_epoch();
    if (state) save_checkpoint(*state, trainer.save_state());
  }
  return trainer.finish();
}

ModelConfig with_mode(ModelConfig cfg, Mode mode) {
  cfg.mode = mode;
  cfg.classify = cfg.regress = true;
  return cfg;
}

const std::vector<std::string> kEncoderPrefixes = {"f1.enc.", "f2.enc.", "f2.out."};

}  // namespace

SeedOutcome train_seed(const ExperimentSpec& spec, const ExperimentData& data, const TokenVocab& vocab,
                       std::uint64_t seed, const RunOptions& opts) {
  spec.validate();
  ModelCache local;
  ModelCache& cache = opts.cache ? *opts.cache : local;
  std::vector<RunLog> logs;
  TrainConfig tcfg = spec.train;
  tcfg.seed = seed;
  const auto& val = data.clean.validation;

  // Fine-tuned end-to-end model of a split, trained once per cache.
  auto end_to_end = [&](DataSplit split) -> const Model& {
    const std::string key(data_split_name(split));
    if (auto it = cache.end_to_end.find(key); it != cache.end_to_end.end()) return it->second;
    Model m(with_mode(spec.model, Mode::EndToEnd), vocab, seed);
    logs.push_back({"end2end-" + key, run_training(m, data.training_docs(split), val, tcfg, opts, "end2end-" + key)});
    return cache.end_to_end.emplace(key, std::move(m)).first->second;
  };
  auto fresh = [&](DataSplit split) {
    Model m(spec.model, vocab, seed);
    if (spec.model.mode == Mode::Fusion) m.init_from(end_to_end(split), kEncoderPrefixes);
    return m;
  };

  if (!spec.use_curriculum) {
    Model m = fresh(spec.split);
    const std::string stage(mode_name(spec.model.mode));
    logs.push_back({stage, run_training(m, data.training_docs(spec.split), val, tcfg, opts, stage)});
    return {std::move(m), std::move(logs), {}, {}};
  }

  const std::string mode(mode_name(spec.model.mode));
  auto init_it = cache.clean_init.find(mode);
  if (init_it == cache.clean_init.end()) {
    Model m = fresh(DataSplit::Clean);
    logs.push_back({"init-" + mode, run_training(m, data.clean.train, val, tcfg, opts, "init-" + mode)});
    init_it = cache.clean_init.emplace(mode, std::move(m)).first;
  }
  CurriculumConfig ccfg = spec.curriculum;
  ccfg.seed = seed;
  auto result = run_curriculum(data.clean, data.augmented, ccfg, tcfg, [&] { return fresh(DataSplit::Clean); },
                               &init_it->second);
  for (auto& s : result.stages) logs.push_back({"curriculum-" + s.name, std::move(s.result)});
  return {std::move(result.model), std::move(logs), std::move(result.records), std::move(result.warnings)};
}

TestMetrics evaluate_model(const Model& model, const std::vector<CaseDocument>& test) {
  if (test.empty()) throw ValidationError("evaluate: empty test set");
  TestMetrics m;
  std::vector<Judgment> preds, golds;
  std::vector<PredictionRecord> records;
  std::vector<FactorScores> spred, sgold;
  for (const auto& d : test) {
    auto p = predict(model, d);
    if (p.label && d.judgment) {
      preds.push_back(*p.label);
      golds.push_back(*d.judgment);
      records.push_back({d.id, *d.judgment, *p.label, p.confidence});
    }
    if (p.scores && d.factors) {
      spred.push_back(*p.scores);
      sgold.push_back(*d.factors);
    }
    m.predictions.push_back({d.id, std::move(p)});
  }
  if (!preds.empty()) {
    m.macro_f1 = macro_f1(preds, golds, &m.warnings);
    auto e = ece(records);
    m.ece = e.ece;
    m.reliability = std::move(e.table);
  }
  if (!spred.empty()) {
    const auto err = mae_mse(spred, sgold);
    m.mae = err.mae;
    m.mse = err.mse;
  }
  return m;
}

namespace {

Json opt(const std::optional<double>& v) { return v ? Json(*v) : Json(); }

}  // namespace

Json metrics_to_json(const TestMetrics& m) {
  Json j;
  j["macro_f1"] = opt(m.macro_f1);
  j["mae"] = opt(m.mae);
  j["mse"] = opt(m.mse);
  j["ece"] = opt(m.ece);
  if (m.reliability) {
    auto& rows = j["reliability"] = Json::array();
    for (const auto& b : m.reliability->bins)
      rows.push_back({{"bin", b.index},
                      {"lo", b.lo},
                      {"hi", b.hi},
                      {"count", b.count},
                      {"accuracy", b.accuracy},
                      {"confidence", b.confidence}});
  } else {
    j["reliability"] = nullptr;
  }
  return j;
}

Json trace_to_json(const std::vector<RunLog>& logs) {
  Json out = Json::array();
  for (const auto& l : logs) {
    Json epochs = Json::array();
    for (const auto& e : l.result.trace)
      epochs.push_back({{"epoch", e.epoch},
                        {"steps", e.steps},
                        {"train_loss", e.train_loss},
                        {"val_macro_f1", opt(e.val_macro_f1)},
                        {"val_mae", opt(e.val_mae)}});
    out.push_back({{"stage", l.stage},
                   {"best_classification_epoch",
                    l.result.best_classification_epoch ? Json(*l.result.best_classification_epoch) : Json()},
                   {"best_regression_epoch",
                    l.result.best_regression_epoch ? Json(*l.result.best_regression_epoch) : Json()},
                   {"epochs", std::move(epochs)}});
  }
  return out;
}

std::string predictions_jsonl(const TestMetrics& m) {
  std::ostringstream out;
  for (const auto& dp : m.predictions) {
    const auto& p = dp.prediction;
    Json j;
    j["id"] = dp.id;
    j["label"] = p.label ? Json(judgment_value(*p.label)) : Json();
    j["probabilities"] = p.label ? Json(p.probabilities) : Json();
    j["scores"] = p.scores ? Json(p.scores->values) : Json();
    j["buckets"] = p.buckets ? Json(*p.buckets) : Json();
    out << j.dump() << '\n';
  }
  return out.str();
}

}  // namespace confusio
