#pragma once

// One training run of the experimental grid (model x data split, optionally
// with the curriculum) and its test-set evaluation.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "confusio/config_json.hpp"
#include "confusio/curriculum.hpp"
#include "confusio/eval.hpp"
#include "confusio/model.hpp"
#include "confusio/train.hpp"

namespace confusio {

enum class DataSplit { Clean, Augmented, Mix };

// "clean", "augmented", "mix".
std::string_view data_split_name(DataSplit s) noexcept;
DataSplit data_split_from_name(std::string_view name);

struct ExperimentSpec {
  ModelConfig model;
  TrainConfig train;
  CurriculumConfig curriculum;
  DataSplit split = DataSplit::Clean;
  bool use_curriculum = false;

  void validate() const;
};

struct ExperimentData {
  DatasetSplit clean;
  std::vector<CaseDocument> augmented;

  // Training documents of a split: clean train, augmented, or both.
  std::vector<CaseDocument> training_docs(DataSplit split) const;
};

// Models reused across runs of one seed: end-to-end checkpoints by split
// (the initialisation of fusion models) and clean-only models by mode (the
// curriculum's M_init).
struct ModelCache {
  std::map<std::string, Model> end_to_end;
  std::map<std::string, Model> clean_init;
};

struct RunLog {
  std::string stage;
  TrainResult result;
};

struct SeedOutcome {
  Model model;
  std::vector<RunLog> logs;
  std::vector<ConfidenceRecord> records;
  std::vector<std::string> warnings;
};

struct RunOptions {
  // Training-state files are written here after every epoch when set.
  std::optional<std::filesystem::path> state_dir;
  // Continue from existing state files.
  bool resume = false;
  ModelCache* cache = nullptr;
};

// Fusion models start f1/f2 from an end-to-end model trained on the same
// split; curriculum runs use a clean-only M_init of the same mode.
SeedOutcome train_seed(const ExperimentSpec& spec, const ExperimentData& data, const TokenVocab& vocab,
                       std::uint64_t seed, const RunOptions& opts = {});

struct DocPrediction {
  std::string id;
  Prediction prediction;
};

struct TestMetrics {
  std::optional<double> macro_f1;
  std::optional<double> mae;
  std::optional<double> mse;
  std::optional<double> ece;
  std::optional<ReliabilityTable> reliability;
  std::vector<DocPrediction> predictions;
  std::vector<std::string> warnings;
};

// Classification metrics are absent for models without a classifier, and
// regression metrics for models without a regressor.
TestMetrics evaluate_model(const Model& model, const std::vector<CaseDocument>& test);

Json metrics_to_json(const TestMetrics& m);
Json trace_to_json(const std::vector<RunLog>& logs);
// One JSON object per line: id, label, probabilities, scores, buckets.
std::string predictions_jsonl(const TestMetrics& m);

}  // namespace confusio
