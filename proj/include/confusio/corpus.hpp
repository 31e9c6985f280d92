#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace confusio {

// The five intermediate-label factors, in annotation order X1..X5.
enum class FeatureKind : std::uint8_t {
  GoodsServices = 0,
  Visual = 1,
  Phonetic = 2,
  Conceptual = 3,
  Attention = 4,
};

inline constexpr std::size_t kNumFeatures = 5;
inline constexpr std::array<FeatureKind, kNumFeatures> kAllFeatures = {
    FeatureKind::GoodsServices, FeatureKind::Visual, FeatureKind::Phonetic,
    FeatureKind::Conceptual, FeatureKind::Attention};

constexpr std::size_t feature_index(FeatureKind k) noexcept {
  return static_cast<std::size_t>(k);
}

// Wire name: "goods", "visual", "phonetic", "conceptual", "attention".
std::string_view feature_name(FeatureKind k) noexcept;
FeatureKind feature_from_name(std::string_view name);

// Inclusive annotation scale of a factor. Phonetic and conceptual admit 0
// ("neutral"); the others start at 1.
struct ScoreRange {
  double lo;
  double hi;
};
constexpr ScoreRange score_range(FeatureKind k) noexcept {
  return (k == FeatureKind::Phonetic || k == FeatureKind::Conceptual) ? ScoreRange{0.0, 5.0}
                                                                       : ScoreRange{1.0, 5.0};
}

struct Sentence {
  FeatureKind feature;
  std::string text;

  bool operator==(const Sentence&) const = default;
};

// Factor scores on the annotation scale. Half points are allowed.
struct FactorScores {
  std::array<double, kNumFeatures> values{};

  double& operator[](FeatureKind k) { return values[feature_index(k)]; }
  double operator[](FeatureKind k) const { return values[feature_index(k)]; }

  // Throws ValidationError naming the first out-of-range factor.
  void validate() const;

  bool operator==(const FactorScores&) const = default;
};

enum class Judgment : std::uint8_t { NoConfusion = 0, Confusion = 1 };

constexpr int judgment_value(Judgment j) noexcept { return static_cast<int>(j); }

enum class Source : std::uint8_t { Clean, Augmented, Synthetic };

std::string_view source_name(Source s) noexcept;
Source source_from_name(std::string_view name);

struct CaseDocument {
  std::string id;
  std::vector<Sentence> sentences;
  std::optional<FactorScores> factors;
  std::optional<Judgment> judgment;
  Source source = Source::Clean;
  // Judgments of the documents an augmented sample was assembled from.
  // In-memory only; not part of the record format.
  std::vector<Judgment> provenance;

  // Sentences joined with single spaces, in order.
  std::string text() const;

  bool operator==(const CaseDocument&) const = default;
};

// Per-kind cap on sentences in one document.
inline constexpr std::size_t kDefaultSentencesPerFeatureCap = 8;

// Checks the type invariants; throws ValidationError.
void validate_document(const CaseDocument& doc,
                       std::size_t per_feature_cap = kDefaultSentencesPerFeatureCap);

struct DatasetSplit {
  std::vector<CaseDocument> train;
  std::vector<CaseDocument> validation;
  std::vector<CaseDocument> test;
};

struct SplitCounts {
  std::size_t train = 0;
  std::size_t validation = 0;
  std::size_t test = 0;
};

// --- line-delimited record I/O -------------------------------------------

// One record per line. `line` is used for error messages only.
CaseDocument parse_record(std::string_view json_line, std::size_t line = 1);
std::string format_record(const CaseDocument& doc);

std::vector<CaseDocument> read_dataset(std::istream& in);
void write_dataset(std::ostream& out, const std::vector<CaseDocument>& docs);

// Loads a dataset file. When `source_tag` is given, every record must carry
// that source.
std::vector<CaseDocument> load_dataset(const std::filesystem::path& path,
                                       std::optional<Source> source_tag = std::nullopt);
void save_dataset(const std::filesystem::path& path, const std::vector<CaseDocument>& docs);

// Seeded shuffle, then contiguous slices of the requested sizes.
DatasetSplit split_dataset(const std::vector<CaseDocument>& docs, SplitCounts counts,
                           std::uint64_t seed);

}  // namespace confusio
