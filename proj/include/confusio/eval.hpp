#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "confusio/corpus.hpp"

namespace confusio {

// Unweighted mean of the two per-class F1 scores. A class absent from both
// inputs scores 0 and adds a warning.
double macro_f1(std::span<const Judgment> preds, std::span<const Judgment> golds,
                std::vector<std::string>* warnings = nullptr);

struct ErrorMetrics {
  double mae = 0.0;
  double mse = 0.0;
};

// Means over all 5n factor values.
ErrorMetrics mae_mse(std::span<const FactorScores> preds, std::span<const FactorScores> golds);

struct PredictionRecord {
  std::string id;
  Judgment gold = Judgment::NoConfusion;
  Judgment predicted = Judgment::NoConfusion;
  double confidence = 0.0;  // probability of the predicted class
};

struct ReliabilityBin {
  std::size_t index = 0;  // 1-based
  double lo = 0.0;        // interval (lo, hi]
  double hi = 0.0;
  std::size_t count = 0;
  double accuracy = 0.0;  // 0 for empty bins
  double confidence = 0.0;
};

struct ReliabilityTable {
  std::vector<ReliabilityBin> bins;
};

struct EceResult {
  double ece = 0.0;
  ReliabilityTable table;
};

inline constexpr std::size_t kDefaultCalibrationBins = 5;

// Bins are ((m-1)/M, m/M]; a confidence of exactly 0 falls in bin 1.
EceResult ece(std::span<const PredictionRecord> records, std::size_t num_bins = kDefaultCalibrationBins);

// Bin of one confidence value, 1-based.
std::size_t calibration_bin(double confidence, std::size_t num_bins);

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation; 0 for a single run
  std::size_t n = 0;
};

MeanStd mean_std(std::span<const double> values);

}  // namespace confusio
