#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "confusio/autodiff.hpp"
#include "confusio/checkpoint.hpp"
#include "confusio/corpus.hpp"
#include "confusio/model.hpp"

namespace confusio {

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 8;
  ad::AdamConfig adam;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochMetrics {
  std::size_t epoch = 0;  // 1-based
  std::size_t steps = 0;  // optimizer steps so far
  double train_loss = 0.0;
  std::optional<double> val_macro_f1;
  std::optional<double> val_mae;

  bool operator==(const EpochMetrics&) const = default;
};

struct TrainResult {
  std::vector<EpochMetrics> trace;
  std::optional<std::size_t> best_classification_epoch;
  std::optional<std::size_t> best_regression_epoch;
  std::size_t steps = 0;
};

// Mini-batch training with per-epoch validation. The parameters of the
// classification path keep their values from the epoch with the best
// validation macro F1, those of the regression path from the epoch with the
// lowest validation MAE (end-to-end models select the two disjoint
// sub-models separately; other modes select everything by macro F1).
// Improvements must be strict. Without validation data the final parameters
// are kept.
class Trainer {
 public:
  Trainer(Model& model, std::vector<CaseDocument> train, std::vector<CaseDocument> validation, TrainConfig cfg);

  bool done() const noexcept { return epoch_ >= cfg_.epochs; }
  std::size_t epoch() const noexcept { return epoch_; }
  const EpochMetrics& run_epoch();
  // Installs the selected parameters and marks the model trained.
  TrainResult finish();

  // Everything needed to continue bit-identically: parameters, moment
  // estimates, step count, trace and the best-so-far snapshots.
  Checkpoint save_state() const;
  void load_state(const Checkpoint& state);

  const std::vector<EpochMetrics>& trace() const noexcept { return trace_; }

 private:
  enum class Task { Classification, Regression };
  Task task_of(const std::string& param) const;
  double train_batch(const std::vector<std::size_t>& batch);
  void validate_epoch(EpochMetrics& m);

  Model& model_;
  std::vector<CaseDocument> train_;
  std::vector<CaseDocument> val_;
  TrainConfig cfg_;
  std::size_t epoch_ = 0;
  std::vector<EpochMetrics> trace_;
  std::optional<double> best_f1_;
  std::optional<double> best_mae_;
  std::optional<std::size_t> best_f1_epoch_;
  std::optional<std::size_t> best_mae_epoch_;
  std::map<std::string, ad::Tensor> best_cls_;
  std::map<std::string, ad::Tensor> best_reg_;
  // Fusion without a regression loss: f2 is frozen, so its predictions for
  // the training documents are computed once.
  std::vector<std::optional<FactorScores>> fed_scores_;
};

TrainResult train(Model& model, const std::vector<CaseDocument>& train, const std::vector<CaseDocument>& validation,
                  const TrainConfig& cfg);

// The training objective of the model's mode over `docs`, without updating
// anything.
double evaluate_loss(const Model& model, const std::vector<CaseDocument>& docs);

}  // namespace confusio
