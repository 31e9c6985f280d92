#include "confusio/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "confusio/error.hpp"

namespace confusio {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, kNumFeatures> kFeatureNames = {
    "goods", "visual", "phonetic", "conceptual", "attention"};

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

double read_score(const json& obj, FeatureKind k, std::size_t line) {
  const auto name = std::string(feature_name(k));
  auto it = obj.find(name);
  if (it == obj.end()) throw ParseError(line, "factors: missing '" + name + "'");
  if (!it->is_number()) throw ParseError(line, "factors: '" + name + "' is not a number");
  return it->get<double>();
}

}  // namespace

std::string_view feature_name(FeatureKind k) noexcept { return kFeatureNames[feature_index(k)]; }

FeatureKind feature_from_name(std::string_view name) {
  for (auto k : kAllFeatures)
    if (feature_name(k) == name) return k;
  throw ValidationError("unknown feature '" + std::string(name) + "'");
}

std::string_view source_name(Source s) noexcept {
  switch (s) {
    case Source::Clean: return "clean";
    case Source::Augmented: return "augmented";
    case Source::Synthetic: return "synthetic";
  }
  return "clean";
}

Source source_from_name(std::string_view name) {
  if (name == "clean") return Source::Clean;
  if (name == "augmented") return Source::Augmented;
  if (name == "synthetic") return Source::Synthetic;
  throw ValidationError("unknown source '" + std::string(name) + "'");
}

void FactorScores::validate() const {
  for (auto k : kAllFeatures) {
    const double v = (*this)[k];
    const auto r = score_range(k);
    if (!(v >= r.lo && v <= r.hi)) {
      std::ostringstream os;
      os << "factor '" << feature_name(k) << "' = " << v << " outside [" << r.lo << ", " << r.hi
         << "]";
      throw ValidationError(os.str());
    }
  }
}

std::string CaseDocument::text() const {
  std::string out;
  for (const auto& s : sentences) {
    if (!out.empty()) out += ' ';
    out += s.text;
  }
  return out;
}

void validate_document(const CaseDocument& doc, std::size_t per_feature_cap) {
  if (doc.id.empty()) throw ValidationError("document id is empty");
  std::array<std::size_t, kNumFeatures> counts{};
  for (const auto& s : doc.sentences) {
    if (blank(s.text)) throw ValidationError("document '" + doc.id + "': blank sentence");
    if (++counts[feature_index(s.feature)] > per_feature_cap)
      throw ValidationError("document '" + doc.id + "': more than " +
                            std::to_string(per_feature_cap) + " '" +
                            std::string(feature_name(s.feature)) + "' sentences");
  }
  if (doc.factors) doc.factors->validate();
  if (doc.source == Source::Clean && (!doc.factors || !doc.judgment))
    throw ValidationError("clean document '" + doc.id + "' lacks factors or judgment");
}

CaseDocument parse_record(std::string_view json_line, std::size_t line) {
  json j;
  try {
    j = json::parse(json_line);
  } catch (const json::parse_error& e) {
    throw ParseError(line, std::string("malformed record: ") + e.what());
  }
  if (!j.is_object()) throw ParseError(line, "record is not an object");
  static const std::set<std::string> kFields = {"id", "sentences", "factors", "judgment", "source"};
  for (const auto& [key, _] : j.items())
    if (!kFields.contains(key)) throw ParseError(line, "unknown field '" + key + "'");
  for (const auto& key : kFields)
    if (!j.contains(key)) throw ParseError(line, "missing field '" + key + "'");

  CaseDocument doc;
  if (!j["id"].is_string()) throw ParseError(line, "'id' must be a string");
  doc.id = j["id"].get<std::string>();

  if (!j["sentences"].is_array()) throw ParseError(line, "'sentences' must be an array");
  for (const auto& s : j["sentences"]) {
    if (!s.is_object() || !s.contains("feature") || !s.contains("text") || s.size() != 2 ||
        !s["feature"].is_string() || !s["text"].is_string())
      throw ParseError(line, "sentence must be {feature, text}");
    try {
      doc.sentences.push_back({feature_from_name(s["feature"].get<std::string>()),
                               s["text"].get<std::string>()});
    } catch (const ValidationError& e) {
      throw ParseError(line, e.what());
    }
  }

  const auto& f = j["factors"];
  if (!f.is_null()) {
    if (!f.is_object() || f.size() != kNumFeatures)
      throw ParseError(line, "'factors' must be an object of five numbers or null");
    FactorScores scores;
    for (auto k : kAllFeatures) scores[k] = read_score(f, k, line);
    doc.factors = scores;
  }

  const auto& jd = j["judgment"];
  if (jd.is_array()) throw ParseError(line, "split decisions (multiple judgments) are not supported");
  if (!jd.is_null()) {
    if (!jd.is_number_integer()) throw ParseError(line, "'judgment' must be 0, 1 or null");
    const auto v = jd.get<long long>();
    if (v != 0 && v != 1) throw ParseError(line, "'judgment' must be 0, 1 or null");
    doc.judgment = v == 1 ? Judgment::Confusion : Judgment::NoConfusion;
  }

  if (!j["source"].is_string()) throw ParseError(line, "'source' must be a string");
  try {
    doc.source = source_from_name(j["source"].get<std::string>());
  } catch (const ValidationError& e) {
    throw ParseError(line, e.what());
  }
  validate_document(doc);
  return doc;
}

std::string format_record(const CaseDocument& doc) {
  json j = json::object();
  j["id"] = doc.id;
  json sentences = json::array();
  for (const auto& s : doc.sentences)
    sentences.push_back({{"feature", feature_name(s.feature)}, {"text", s.text}});
  j["sentences"] = std::move(sentences);
  if (doc.factors) {
    json f = json::object();
    for (auto k : kAllFeatures) f[std::string(feature_name(k))] = (*doc.factors)[k];
    j["factors"] = std::move(f);
  } else {
    j["factors"] = nullptr;
  }
  if (doc.judgment)
    j["judgment"] = judgment_value(*doc.judgment);
  else
    j["judgment"] = nullptr;
  j["source"] = source_name(doc.source);
  return j.dump();
}

std::vector<CaseDocument> read_dataset(std::istream& in) {
  std::vector<CaseDocument> docs;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (blank(line)) continue;
    docs.push_back(parse_record(line, number));
  }
  return docs;
}

void write_dataset(std::ostream& out, const std::vector<CaseDocument>& docs) {
  for (const auto& d : docs) out << format_record(d) << '\n';
}

std::vector<CaseDocument> load_dataset(const std::filesystem::path& path,
                                       std::optional<Source> source_tag) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open dataset '" + path.string() + "'");
  auto docs = read_dataset(in);
  if (source_tag) {
    for (std::size_t i = 0; i < docs.size(); ++i)
      if (docs[i].source != *source_tag)
        throw ValidationError("document '" + docs[i].id + "' has source '" +
                              std::string(source_name(docs[i].source)) + "', expected '" +
                              std::string(source_name(*source_tag)) + "'");
  }
  return docs;
}

void save_dataset(const std::filesystem::path& path, const std::vector<CaseDocument>& docs) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write dataset '" + path.string() + "'");
  write_dataset(out, docs);
}

DatasetSplit split_dataset(const std::vector<CaseDocument>& docs, SplitCounts counts,
                           std::uint64_t seed) {
  const std::size_t wanted = counts.train + counts.validation + counts.test;
  if (wanted > docs.size())
    throw ValidationError("split of " + std::to_string(wanted) + " documents requested from " +
                          std::to_string(docs.size()));
  std::set<std::string_view> ids;
  for (const auto& d : docs)
    if (!ids.insert(d.id).second) throw ValidationError("duplicate document id '" + d.id + "'");

  std::vector<std::size_t> order(docs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  DatasetSplit split;
  auto take = [&](std::vector<CaseDocument>& dst, std::size_t begin, std::size_t n) {
    dst.reserve(n);
    for (std::size_t i = begin; i < begin + n; ++i) dst.push_back(docs[order[i]]);
  };
  take(split.train, 0, counts.train);
  take(split.validation, counts.train, counts.validation);
  take(split.test, counts.train + counts.validation, counts.test);
  return split;
}

}  // namespace confusio
