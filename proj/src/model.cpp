#include "confusio/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <json.hpp>

#include "confusio/config_json.hpp"
#include "confusio/error.hpp"
#include "confusio/textsim.hpp"

namespace confusio {

// --- vocabulary -------------------------------------------------------------

TokenVocab::TokenVocab() : terms_{"[UNK]", "[CLS]"}, index_{{"[UNK]", kUnk}, {"[CLS]", kCls}} {}

TokenVocab TokenVocab::from_terms(std::vector<std::string> terms) {
  TokenVocab v;
  for (auto& t : terms) {
    if (t == "[UNK]" || t == "[CLS]") continue;
    if (!v.index_.emplace(t, v.terms_.size()).second)
      throw ValidationError("vocabulary: duplicate term '" + t + "'");
    v.terms_.push_back(std::move(t));
  }
  return v;
}

TokenVocab TokenVocab::build(const std::vector<CaseDocument>& docs, std::size_t max_size) {
  std::map<std::string, std::size_t> counts;
  for (const auto& d : docs)
    for (const auto& s : d.sentences)
      for (auto& t : tokenize(s.text)) ++counts[t];
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (max_size) ranked.resize(std::min(ranked.size(), max_size > 2 ? max_size - 2 : 0));
  std::vector<std::string> terms;
  terms.reserve(ranked.size());
  for (auto& [t, _] : ranked) terms.push_back(t);
  return from_terms(std::move(terms));
}

std::vector<std::size_t> TokenVocab::encode(std::string_view text, std::size_t max_len) const {
  std::vector<std::size_t> ids{kCls};
  for (const auto& t : tokenize(text)) {
    if (ids.size() >= max_len) break;
    auto it = index_.find(t);
    ids.push_back(it == index_.end() ? kUnk : it->second);
  }
  return ids;
}

// --- configuration ------------------------------------------------------------

std::string_view mode_name(Mode m) noexcept {
  switch (m) {
    case Mode::EndToEnd: return "end2end";
    case Mode::MultiTask: return "multitask";
    case Mode::Fusion: return "fusion";
  }
  return "fusion";
}

Mode mode_from_name(std::string_view name) {
  if (name == "end2end") return Mode::EndToEnd;
  if (name == "multitask") return Mode::MultiTask;
  if (name == "fusion") return Mode::Fusion;
  throw ConfigError("unknown mode '" + std::string(name) + "' (expected end2end, multitask or fusion)");
}

void ModelConfig::validate() const {
  if (!(smooth_l1_beta > 0.0)) throw ConfigError("smooth_l1_beta must be positive");
  if (!(fusion_regression_weight >= 0.0)) throw ConfigError("fusion_regression_weight must be non-negative");
  if (!classify && !regress) throw ConfigError("model needs at least one of classify, regress");
  if (mode != Mode::EndToEnd && !(classify && regress))
    throw ConfigError(std::string(mode_name(mode)) + " models need both the classifier and the regressor");
  interm.validate();
}

// --- functional pieces -----------------------------------------------------------

ad::Var gated_sum(ad::Var s1, ad::Var s2, ad::Var v_text, ad::Var v_interm) {
  return ad::add(ad::mul(s1, v_text), ad::mul(s2, v_interm));
}

FusionOutput fuse(ad::Tape& tape, const std::string& head, ad::Var v_text, ad::Var v_interm) {
  if (v_text.value().shape() != v_interm.value().shape() || v_text.value().rank() != 2 ||
      v_text.value().rows() != 1)
    throw ShapeError("fuse: V_text " + v_text.value().shape_string() + " and V_interm " +
                     v_interm.value().shape_string() + " must be equal-width row vectors");
  const std::array<ad::Var, 2> ti{v_text, v_interm};
  const std::array<ad::Var, 2> it{v_interm, v_text};
  const auto gate_in = tape.value(tape.param(head + ".gate1.w")).rows();
  if (gate_in != 2 * v_text.value().cols())
    throw ShapeError("fuse: gate expects width " + std::to_string(gate_in) + ", got 2 x " +
                     std::to_string(v_text.value().cols()));
  ad::Var s1 = ad::tanh(nn::linear(tape, head + ".gate1", ad::concat(ti, 1)));
  ad::Var s2 = ad::tanh(nn::linear(tape, head + ".gate2", ad::concat(it, 1)));
  return {gated_sum(s1, s2, v_text, v_interm), s1, s2};
}

ad::Var cross_entropy_loss(ad::Var logits, std::span<const Judgment> targets) {
  const auto& lv = logits.value();
  if (targets.empty()) throw ValidationError("cross_entropy_loss: empty batch");
  if (lv.rank() != 2 || lv.cols() != 2 || lv.rows() != targets.size())
    throw ShapeError("cross_entropy_loss: logits " + lv.shape_string() + " for " +
                     std::to_string(targets.size()) + " targets");
  ad::Tensor onehot(lv.shape());
  for (std::size_t i = 0; i < targets.size(); ++i) onehot.at(i, judgment_value(targets[i])) = 1.0;
  ad::Var picked = ad::mul(ad::log(ad::softmax(logits)), logits.tape->constant(std::move(onehot)));
  return ad::scale(ad::sum(picked), -1.0 / static_cast<double>(targets.size()));
}

double smooth_l1(double diff, double beta) {
  if (!(beta > 0.0)) throw ValidationError("smooth_l1: beta must be positive");
  const double a = std::abs(diff);
  return a < beta ? 0.5 * diff * diff / beta : a - 0.5 * beta;
}

ad::Var smooth_l1_loss(ad::Var pred, const ad::Tensor& target, double beta) {
  if (!(beta > 0.0)) throw ValidationError("smooth_l1_loss: beta must be positive");
  const auto& pv = pred.value();
  if (pv.shape() != target.shape())
    throw ShapeError("smooth_l1_loss: prediction " + pv.shape_string() + " vs target " + target.shape_string());
  if (pv.empty()) throw ValidationError("smooth_l1_loss: empty input");
  ad::Tape& t = *pred.tape;
  // Branch masks are constants: the quadratic part inside the knee, the
  // linear part (with the sign of the difference) outside.
  ad::Tensor quad(pv.shape()), sign(pv.shape()), offset(pv.shape());
  for (std::size_t i = 0; i < pv.size(); ++i) {
    const double d = pv[i] - target[i];
    if (std::abs(d) < beta) {
      quad[i] = 0.5 / beta;
    } else {
      sign[i] = d > 0 ? 1.0 : -1.0;
      offset[i] = -0.5 * beta;
    }
  }
  ad::Var d = ad::sub(pred, t.constant(target));
  ad::Var l = ad::add(ad::add(ad::mul(ad::mul(d, d), t.constant(std::move(quad))),
                              ad::mul(d, t.constant(std::move(sign)))),
                      t.constant(std::move(offset)));
  return ad::mean(l);
}

// --- model ------------------------------------------------------------------

Model::Model(ModelConfig cfg, TokenVocab vocab, std::uint64_t seed)
    : cfg_(std::move(cfg)), vocab_(std::move(vocab)), seed_(seed) {
  cfg_.encoder.vocab_size = vocab_.size();
  cfg_.validate();
  cfg_.encoder.validate();
  nn::Rng rng(seed);
  const std::size_t d = cfg_.encoder.model_dim;
  switch (cfg_.mode) {
    case Mode::EndToEnd:
      if (cfg_.classify) {
        nn::add_text_encoder(params_, "f1.enc", cfg_.encoder, rng);
        nn::add_linear(params_, "f1.out", d, 2, rng);
      }
      if (cfg_.regress) {
        nn::add_text_encoder(params_, "f2.enc", cfg_.encoder, rng);
        nn::add_linear(params_, "f2.out", d, kNumFeatures, rng);
      }
      break;
    case Mode::MultiTask:
      nn::add_text_encoder(params_, "shared.enc", cfg_.encoder, rng);
      nn::add_linear(params_, "f1.out", d, 2, rng);
      nn::add_linear(params_, "f2.out", d, kNumFeatures, rng);
      break;
    case Mode::Fusion: {
      const std::size_t w = cfg_.interm.output_dim;
      nn::add_text_encoder(params_, "f1.enc", cfg_.encoder, rng);
      nn::add_text_encoder(params_, "f2.enc", cfg_.encoder, rng);
      nn::add_linear(params_, "f2.out", d, kNumFeatures, rng);
      nn::add_interm_encoder(params_, "interm", cfg_.interm, rng);
      nn::add_linear(params_, "fusion.adapter", d, w, rng);
      nn::add_linear(params_, "fusion.gate1", 2 * w, 1, rng);
      nn::add_linear(params_, "fusion.gate2", 2 * w, 1, rng);
      nn::add_linear(params_, "fusion.cls", w, 2, rng);
      break;
    }
  }
}

std::vector<std::size_t> Model::tokens(const CaseDocument& doc) const {
  if (doc.sentences.empty()) throw ValidationError("document '" + doc.id + "' has no sentences");
  auto ids = vocab_.encode(doc.text(), cfg_.encoder.max_sequence_length);
  if (ids.size() < 2) throw ValidationError("document '" + doc.id + "' has no tokens");
  return ids;
}

ad::Var Model::encode_text(ad::Tape& tape, const std::string& encoder, const CaseDocument& doc) const {
  return nn::text_encoder(tape, encoder, cfg_.encoder, tokens(doc));
}

ad::Var Model::interm_encode(ad::Tape& tape, const FactorScores& scores, nn::Buckets* buckets) const {
  if (cfg_.mode != Mode::Fusion) throw Error("interm_encode: model has no intermediate encoder");
  const auto b = nn::bucket_scores(scores);
  if (buckets) *buckets = b;
  return nn::interm_encoder(tape, "interm", cfg_.interm, b);
}

namespace {

FactorScores scores_of(const ad::Tensor& row) {
  FactorScores s;
  for (std::size_t i = 0; i < kNumFeatures; ++i) s.values[i] = row[i];
  return s;
}

}  // namespace

ForwardResult Model::forward(ad::Tape& tape, const CaseDocument& doc, const ForwardOptions& opts) const {
  if (tape.params() != &params_) throw Error("forward: tape is not bound to this model's parameters");
  ForwardResult r;
  switch (cfg_.mode) {
    case Mode::EndToEnd:
      if (cfg_.classify) r.logits = nn::linear(tape, "f1.out", encode_text(tape, "f1.enc", doc));
      if (cfg_.regress) r.scores = nn::linear(tape, "f2.out", encode_text(tape, "f2.enc", doc));
      break;
    case Mode::MultiTask: {
      ad::Var h = encode_text(tape, "shared.enc", doc);
      r.logits = nn::linear(tape, "f1.out", h);
      r.scores = nn::linear(tape, "f2.out", h);
      break;
    }
    case Mode::Fusion: {
      if (!opts.interm_scores || opts.need_scores)
        r.scores = nn::linear(tape, "f2.out", encode_text(tape, "f2.enc", doc));
      const FactorScores fed = opts.interm_scores ? *opts.interm_scores : scores_of(r.scores->value());
      nn::Buckets b{};
      r.v_interm = interm_encode(tape, fed, &b);
      r.buckets = b;
      r.v_text = nn::linear(tape, "fusion.adapter", encode_text(tape, "f1.enc", doc));
      auto f = fuse(tape, "fusion", *r.v_text, *r.v_interm);
      r.s1 = f.s1;
      r.s2 = f.s2;
      r.logits = nn::linear(tape, "fusion.cls", f.fused);
      break;
    }
  }
  return r;
}

std::size_t Model::init_from(const Model& source, std::span<const std::string> prefixes) {
  std::size_t copied = 0;
  for (const auto& [name, p] : source.params_.items()) {
    const bool wanted = std::any_of(prefixes.begin(), prefixes.end(),
                                    [&](const std::string& pre) { return name.starts_with(pre); });
    if (!wanted || !params_.contains(name)) continue;
    auto& dst = params_.at(name);
    if (dst.value.shape() != p.value.shape())
      throw ShapeError("init_from: parameter '" + name + "' has shape " + p.value.shape_string() +
                       " in the source and " + dst.value.shape_string() + " here");
    dst.value = p.value;
    ++copied;
  }
  return copied;
}

Checkpoint Model::to_checkpoint() const {
  nlohmann::json meta;
  meta["format"] = "confusio-model";
  meta["config"] = model_config_to_json(cfg_);
  meta["bucketing"] = "clamp to scale, round half away from zero, buckets 0..5";
  meta["seed"] = seed_;
  meta["trained"] = trained_;
  meta["vocab"] = vocab_.terms();
  Checkpoint ckpt;
  ckpt.metadata = meta.dump();
  for (const auto& [name, p] : params_.items()) ckpt.tensors.emplace(name, p.value);
  return ckpt;
}

Model Model::from_checkpoint(const Checkpoint& ckpt) {
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(ckpt.metadata);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("model checkpoint: bad metadata: ") + e.what());
  }
  if (meta.value("format", "") != "confusio-model") throw Error("model checkpoint: not a model checkpoint");
  auto cfg = model_config_from_json(meta.at("config"));
  auto terms = meta.at("vocab").get<std::vector<std::string>>();
  Model m(std::move(cfg), TokenVocab::from_terms(std::move(terms)), meta.at("seed").get<std::uint64_t>());
  if (m.params_.items().size() != ckpt.tensors.size())
    throw Error("model checkpoint: expected " + std::to_string(m.params_.items().size()) + " tensors, found " +
                std::to_string(ckpt.tensors.size()));
  for (auto& [name, p] : m.params_.items()) {
    auto it = ckpt.tensors.find(name);
    if (it == ckpt.tensors.end()) throw Error("model checkpoint: missing tensor '" + name + "'");
    if (it->second.shape() != p.value.shape())
      throw ShapeError("model checkpoint: tensor '" + name + "' has shape " + it->second.shape_string() +
                       ", expected " + p.value.shape_string());
    p.value = it->second;
  }
  m.trained_ = meta.at("trained").get<bool>();
  return m;
}

void Model::save(const std::filesystem::path& path) const { save_checkpoint(path, to_checkpoint()); }

Model Model::load(const std::filesystem::path& path) { return from_checkpoint(load_checkpoint(path)); }

// --- inference ------------------------------------------------------------------

Prediction predict(const Model& model, const CaseDocument& doc, const ForwardOptions& opts) {
  // A non-recording tape never writes to the store.
  ad::Tape tape(const_cast<ad::ParameterStore*>(&model.params()), false);
  const auto r = model.forward(tape, doc, opts);
  Prediction p;
  if (r.logits) {
    const auto& l = r.logits->value();
    const double m = std::max(l[0], l[1]);
    const double e0 = std::exp(l[0] - m), e1 = std::exp(l[1] - m);
    p.probabilities = {e0 / (e0 + e1), e1 / (e0 + e1)};
    p.label = p.probabilities[1] > p.probabilities[0] ? Judgment::Confusion : Judgment::NoConfusion;
    p.confidence = std::max(p.probabilities[0], p.probabilities[1]);
  }
  if (r.scores) p.scores = scores_of(r.scores->value());
  p.buckets = r.buckets;
  return p;
}

FactorScores predict_intermediate(const Model& model, const CaseDocument& doc) {
  if (!model.has_regressor()) throw Error("predict_intermediate: model has no regression head");
  auto p = predict(model, doc);
  return *p.scores;
}

}  // namespace confusio
