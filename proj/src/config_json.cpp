#include "confusio/config_json.hpp"

#include "confusio/error.hpp"

namespace confusio {

ObjectReader::ObjectReader(const Json& j, std::string context) : obj_(j), context_(std::move(context)) {
  if (!j.is_object()) throw ConfigError(context_ + ": expected an object");
}

const Json& ObjectReader::raw(const std::string& key) {
  used_.insert(key);
  return obj_.at(key);
}

void ObjectReader::finish() const {
  for (const auto& [key, _] : obj_.items())
    if (!used_.contains(key)) throw ConfigError(context_ + ": unknown key '" + key + "'");
}

namespace {

nn::Pooling pooling_from_name(const std::string& s) {
  if (s == "mean") return nn::Pooling::Mean;
  if (s == "leading") return nn::Pooling::LeadingToken;
  throw ConfigError("encoder.pooling: expected 'mean' or 'leading', got '" + s + "'");
}

}  // namespace

Json encoder_config_to_json(const nn::EncoderConfig& c) {
  return {{"vocab_size", c.vocab_size},
          {"model_dim", c.model_dim},
          {"num_layers", c.num_layers},
          {"num_heads", c.num_heads},
          {"feedforward_dim", c.feedforward_dim},
          {"max_sequence_length", c.max_sequence_length},
          {"pooling", c.pooling == nn::Pooling::Mean ? "mean" : "leading"}};
}

nn::EncoderConfig encoder_config_from_json(const Json& j) {
  nn::EncoderConfig c;
  ObjectReader r(j, "encoder");
  r.read("vocab_size", c.vocab_size);
  r.read("model_dim", c.model_dim);
  r.read("num_layers", c.num_layers);
  r.read("num_heads", c.num_heads);
  r.read("feedforward_dim", c.feedforward_dim);
  r.read("max_sequence_length", c.max_sequence_length);
  std::string pooling = "mean";
  r.read("pooling", pooling);
  c.pooling = pooling_from_name(pooling);
  r.finish();
  return c;
}

Json interm_config_to_json(const nn::IntermConfig& c) {
  return {{"embedding_dim", c.embedding_dim},
          {"num_layers", c.num_layers},
          {"num_heads", c.num_heads},
          {"feedforward_dim", c.feedforward_dim},
          {"output_dim", c.output_dim}};
}

nn::IntermConfig interm_config_from_json(const Json& j) {
  nn::IntermConfig c;
  ObjectReader r(j, "interm");
  r.read("embedding_dim", c.embedding_dim);
  r.read("num_layers", c.num_layers);
  r.read("num_heads", c.num_heads);
  r.read("feedforward_dim", c.feedforward_dim);
  r.read("output_dim", c.output_dim);
  r.finish();
  return c;
}

Json model_config_to_json(const ModelConfig& c) {
  return {{"mode", std::string(mode_name(c.mode))},
          {"encoder", encoder_config_to_json(c.encoder)},
          {"interm", interm_config_to_json(c.interm)},
          {"smooth_l1_beta", c.smooth_l1_beta},
          {"classify", c.classify},
          {"regress", c.regress},
          {"teacher_forcing", c.teacher_forcing},
          {"fusion_regression_weight", c.fusion_regression_weight}};
}

ModelConfig model_config_from_json(const Json& j) {
  ModelConfig c;
  ObjectReader r(j, "model");
  std::string mode(mode_name(c.mode));
  r.read("mode", mode);
  c.mode = mode_from_name(mode);
  if (r.has("encoder")) c.encoder = encoder_config_from_json(r.raw("encoder"));
  if (r.has("interm")) c.interm = interm_config_from_json(r.raw("interm"));
  r.read("smooth_l1_beta", c.smooth_l1_beta);
  r.read("classify", c.classify);
  r.read("regress", c.regress);
  r.read("teacher_forcing", c.teacher_forcing);
  r.read("fusion_regression_weight", c.fusion_regression_weight);
  r.finish();
  c.validate();
  return c;
}

Json train_config_to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"lr", c.adam.lr},
          {"beta1", c.adam.beta1},
          {"beta2", c.adam.beta2},
          {"eps", c.adam.eps},
          {"weight_decay", c.adam.weight_decay},
          {"seed", c.seed}};
}

TrainConfig train_config_from_json(const Json& j) {
  TrainConfig c;
  ObjectReader r(j, "train");
  r.read("epochs", c.epochs);
  r.read("batch_size", c.batch_size);
  r.read("lr", c.adam.lr);
  r.read("beta1", c.adam.beta1);
  r.read("beta2", c.adam.beta2);
  r.read("eps", c.adam.eps);
  r.read("weight_decay", c.adam.weight_decay);
  r.read("seed", c.seed);
  r.finish();
  c.validate();
  return c;
}

CurriculumConfig curriculum_config_from_json(const Json& j) {
  CurriculumConfig c;
  ObjectReader r(j, "curriculum");
  r.read("threshold", c.threshold);
  if (r.has("bins_used")) {
    c.bins_used.clear();
    for (const auto& b : r.raw("bins_used")) {
      if (!b.is_string()) throw ConfigError("curriculum.bins_used: expected bin names");
      c.bins_used.push_back(bin_from_name(b.get<std::string>()));
    }
  }
  r.read("epochs_per_stage", c.epochs_per_stage);
  r.read("final_lr_scale", c.final_lr_scale);
  r.read("seed", c.seed);
  r.finish();
  c.validate();
  return c;
}

SynthConfig synth_config_from_json(const Json& j) {
  SynthConfig c;
  ObjectReader r(j, "synth");
  r.read("num_docs", c.num_docs);
  r.read("noise_rate", c.noise_rate);
  r.read("seed", c.seed);
  r.read("vocabulary_size", c.vocabulary_size);
  if (r.has("ruleset")) {
    const auto& v = r.raw("ruleset");
    if (!v.is_string()) throw ConfigError("synth.ruleset: expected a name or path");
    c.ruleset = resolve_ruleset(v.get<std::string>());
  }
  r.read("max_redraws", c.max_redraws);
  if (r.has("source")) c.source = source_from_name(r.raw("source").get<std::string>());
  r.read("id_prefix", c.id_prefix);
  if (r.has("score_distribution")) {
    ObjectReader sd(r.raw("score_distribution"), "synth.score_distribution");
    for (auto k : kAllFeatures) {
      const std::string name(feature_name(k));
      if (!sd.has(name)) continue;
      auto& w = c.score_distribution[feature_index(k)];
      w.entries.clear();
      for (const auto& pair : sd.raw(name)) {
        if (!pair.is_array() || pair.size() != 2)
          throw ConfigError("synth.score_distribution." + name + ": expected [score, weight] pairs");
        w.entries.emplace_back(pair[0].get<double>(), pair[1].get<double>());
      }
    }
    sd.finish();
  }
  r.finish();
  c.validate();
  return c;
}

AugmentConfig augment_config_from_json(const Json& j) {
  AugmentConfig c;
  ObjectReader r(j, "augment");
  r.read("top_k", c.top_k);
  if (r.has("ruleset")) {
    const auto& v = r.raw("ruleset");
    if (!v.is_string()) throw ConfigError("augment.ruleset: expected a name or path");
    c.ruleset = resolve_ruleset(v.get<std::string>());
  }
  r.read("seed", c.seed);
  r.read("max_output", c.max_output);
  r.read("num_draws", c.num_draws);
  if (r.has("tie_policy")) {
    const auto t = r.raw("tie_policy").get<std::string>();
    if (t == "no_confusion") c.tie_policy = TiePolicy::NoConfusion;
    else if (t == "confusion") c.tie_policy = TiePolicy::Confusion;
    else throw ConfigError("augment.tie_policy: expected 'confusion' or 'no_confusion'");
  }
  r.read("require_label_agreement", c.require_label_agreement);
  if (r.has("keywords")) {
    ObjectReader kw(r.raw("keywords"), "augment.keywords");
    for (auto k : kAllFeatures) kw.read(std::string(feature_name(k)), c.keywords[feature_index(k)]);
    kw.finish();
  }
  r.finish();
  c.validate();
  return c;
}

SplitCounts split_counts_from_json(const Json& j) {
  SplitCounts c;
  ObjectReader r(j, "split_counts");
  r.read("train", c.train);
  r.read("validation", c.validation);
  r.read("test", c.test);
  r.finish();
  return c;
}

}  // namespace confusio
