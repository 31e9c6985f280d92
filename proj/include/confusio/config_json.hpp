#pragma once

// JSON forms of the configuration structs. Readers reject unknown keys and
// leave absent keys at their defaults.

#include <optional>
#include <set>
#include <string>

#include <json.hpp>

#include "confusio/augment.hpp"
#include "confusio/corpus.hpp"
#include "confusio/curriculum.hpp"
#include "confusio/error.hpp"
#include "confusio/model.hpp"
#include "confusio/synth.hpp"
#include "confusio/train.hpp"

namespace confusio {

using Json = nlohmann::json;

// Tracks which keys of an object were consumed.
class ObjectReader {
 public:
  ObjectReader(const Json& j, std::string context);

  bool has(const std::string& key) const { return obj_.contains(key); }
  const Json& raw(const std::string& key);

  template <typename T>
  void read(const std::string& key, T& out) {
    if (!obj_.contains(key)) return;
    used_.insert(key);
    try {
      out = obj_.at(key).get<T>();
    } catch (const Json::exception& e) {
      throw ConfigError(context_ + "." + key + ": " + e.what());
    }
  }

  template <typename T>
  void read(const std::string& key, std::optional<T>& out) {
    if (!obj_.contains(key) || obj_.at(key).is_null()) {
      used_.insert(key);
      return;
    }
    T value{};
    read(key, value);
    out = std::move(value);
  }

  // Throws ConfigError naming the first unknown key.
  void finish() const;
  const std::string& context() const noexcept { return context_; }

 private:
  const Json& obj_;
  std::string context_;
  std::set<std::string> used_;
};

Json encoder_config_to_json(const nn::EncoderConfig& c);
nn::EncoderConfig encoder_config_from_json(const Json& j);
Json interm_config_to_json(const nn::IntermConfig& c);
nn::IntermConfig interm_config_from_json(const Json& j);
Json model_config_to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const Json& j);

Json train_config_to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const Json& j);
CurriculumConfig curriculum_config_from_json(const Json& j);
SynthConfig synth_config_from_json(const Json& j);
AugmentConfig augment_config_from_json(const Json& j);
SplitCounts split_counts_from_json(const Json& j);

}  // namespace confusio
