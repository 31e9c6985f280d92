#include "confusio/eval.hpp"

#include <algorithm>
#include <cmath>

#include "confusio/error.hpp"

namespace confusio {

double macro_f1(std::span<const Judgment> preds, std::span<const Judgment> golds,
                std::vector<std::string>* warnings) {
  if (preds.size() != golds.size())
    throw ValidationError("macro_f1: " + std::to_string(preds.size()) + " predictions for " +
                          std::to_string(golds.size()) + " gold labels");
  if (preds.empty()) throw ValidationError("macro_f1: empty input");
  double total = 0.0;
  for (Judgment c : {Judgment::NoConfusion, Judgment::Confusion}) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      const bool p = preds[i] == c, g = golds[i] == c;
      tp += p && g;
      fp += p && !g;
      fn += !p && g;
    }
    if (tp + fp + fn == 0) {
      if (warnings)
        warnings->push_back("macro_f1: class " + std::to_string(judgment_value(c)) +
                            " absent from predictions and gold labels; its F1 counts as 0");
      continue;
    }
    total += 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
  }
  return total / 2.0;
}

ErrorMetrics mae_mse(std::span<const FactorScores> preds, std::span<const FactorScores> golds) {
  if (preds.size() != golds.size())
    throw ValidationError("mae_mse: " + std::to_string(preds.size()) + " predictions for " +
                          std::to_string(golds.size()) + " targets");
  if (preds.empty()) throw ValidationError("mae_mse: empty input");
  double abs_sum = 0.0, sq_sum = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i)
    for (std::size_t k = 0; k < kNumFeatures; ++k) {
      const double d = preds[i].values[k] - golds[i].values[k];
      abs_sum += std::abs(d);
      sq_sum += d * d;
    }
  const double n = static_cast<double>(preds.size() * kNumFeatures);
  return {abs_sum / n, sq_sum / n};
}

std::size_t calibration_bin(double confidence, std::size_t num_bins) {
  if (!(confidence >= 0.0 && confidence <= 1.0))
    throw ValidationError("confidence " + std::to_string(confidence) + " outside [0, 1]");
  const double m = static_cast<double>(num_bins);
  auto b = static_cast<std::size_t>(std::ceil(confidence * m));
  // ceil can land one off when confidence * M is not exact.
  while (b > 1 && confidence <= static_cast<double>(b - 1) / m) --b;
  while (b < num_bins && confidence > static_cast<double>(b) / m) ++b;
  return std::clamp<std::size_t>(b, 1, num_bins);
}

EceResult ece(std::span<const PredictionRecord> records, std::size_t num_bins) {
  if (records.empty()) throw ValidationError("ece: no records");
  if (num_bins == 0) throw ValidationError("ece: need at least one bin");
  EceResult r;
  r.table.bins.resize(num_bins);
  std::vector<double> correct(num_bins), conf(num_bins);
  for (const auto& rec : records) {
    const auto b = calibration_bin(rec.confidence, num_bins) - 1;
    ++r.table.bins[b].count;
    correct[b] += rec.predicted == rec.gold ? 1.0 : 0.0;
    conf[b] += rec.confidence;
  }
  const double n = static_cast<double>(records.size());
  const double m = static_cast<double>(num_bins);
  for (std::size_t b = 0; b < num_bins; ++b) {
    auto& bin = r.table.bins[b];
    bin.index = b + 1;
    bin.lo = static_cast<double>(b) / m;
    bin.hi = static_cast<double>(b + 1) / m;
    if (bin.count == 0) continue;
    const double c = static_cast<double>(bin.count);
    bin.accuracy = correct[b] / c;
    bin.confidence = conf[b] / c;
    r.ece += c / n * std::abs(bin.accuracy - bin.confidence);
  }
  return r;
}

MeanStd mean_std(std::span<const double> values) {
  if (values.empty()) throw ValidationError("mean_std: no values");
  MeanStd r;
  r.n = values.size();
  for (double v : values) r.mean += v;
  r.mean /= static_cast<double>(r.n);
  if (r.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - r.mean) * (v - r.mean);
    r.stddev = std::sqrt(ss / static_cast<double>(r.n - 1));
  }
  return r;
}

}  // namespace confusio
