#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "confusio/corpus.hpp"
#include "confusio/model.hpp"
#include "confusio/train.hpp"

namespace confusio {

struct ConfidenceRecord {
  std::string doc_id;
  Judgment predicted = Judgment::NoConfusion;
  Judgment pseudo = Judgment::NoConfusion;
  double probability = 0.5;  // max of the two-way softmax
  bool correct = false;      // predicted == pseudo
};

enum class Bin : std::uint8_t { B1 = 0, B2 = 1, B3 = 2 };

// "b1", "b2", "b3".
std::string_view bin_name(Bin b) noexcept;
Bin bin_from_name(std::string_view name);

struct BinPartition {
  std::array<std::vector<std::string>, 3> bins;  // doc ids, input order

  const std::vector<std::string>& operator[](Bin b) const { return bins[static_cast<std::size_t>(b)]; }
};

struct CurriculumConfig {
  double threshold = 0.99;
  std::vector<Bin> bins_used = {Bin::B1, Bin::B2};
  // Epochs of each stage; 0 takes the training config's epoch count.
  std::size_t epochs_per_stage = 0;
  // Learning-rate factor of the final clean-only stage.
  double final_lr_scale = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
};

// One record per augmented document, scored by a model trained on clean data
// only. Every document needs a (pseudo) judgment.
std::vector<ConfidenceRecord> score_confidence(const Model& m_init, const std::vector<CaseDocument>& augmented);

// b1 = correct with p >= threshold, b2 = remaining correct, b3 = the rest.
BinPartition partition_bins(const std::vector<ConfidenceRecord>& records, const CurriculumConfig& cfg);

Bin bin_of(const ConfidenceRecord& r, double threshold);

// id<TAB>p<TAB>correct<TAB>bin per augmented document.
void write_bin_audit(std::ostream& out, const std::vector<ConfidenceRecord>& records, double threshold);

struct StageLog {
  std::string name;
  std::vector<Bin> introduced;  // bins first added in this stage
  std::size_t clean_docs = 0;
  std::size_t augmented_docs = 0;
  double learning_rate = 0.0;
  TrainResult result;
};

struct CurriculumResult {
  Model model;
  std::vector<ConfidenceRecord> records;
  BinPartition partition;
  std::vector<StageLog> stages;
  std::vector<std::string> warnings;
};

// Builds an untrained model of the desired architecture.
using ModelFactory = std::function<Model()>;

// (1) M_init trained on clean data (or the one supplied); (2) augmented data
// scored and binned; (3) a fresh model trained stage by stage on the clean
// set plus the bins of cfg.bins_used introduced in order; (4) a final
// clean-only stage at final_lr_scale times the learning rate. Each stage
// keeps its best validation checkpoint.
CurriculumResult run_curriculum(const DatasetSplit& clean, const std::vector<CaseDocument>& augmented,
                                const CurriculumConfig& cfg, const TrainConfig& train_cfg,
                                const ModelFactory& factory, const Model* m_init = nullptr);

}  // namespace confusio
