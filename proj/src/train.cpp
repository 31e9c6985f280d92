#include "confusio/train.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include <json.hpp>

#include "confusio/error.hpp"
#include "confusio/eval.hpp"

namespace confusio {

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("train: batch_size must be at least 1");
  if (!(adam.lr > 0.0)) throw ConfigError("train: learning rate must be positive");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0))
    throw ConfigError("train: adam betas must lie in [0, 1)");
  if (!(adam.eps > 0.0)) throw ConfigError("train: adam eps must be positive");
  if (!(adam.weight_decay >= 0.0)) throw ConfigError("train: weight_decay must be non-negative");
}

namespace {

// The mode's objective over `docs`; `fed` optionally supplies E_interm's input
// per document. Returns nullopt when no document contributes a term.
std::optional<ad::Var> objective(ad::Tape& tape, const Model& model, std::span<const CaseDocument* const> docs,
                                 std::span<const std::optional<FactorScores>> fed) {
  const auto& cfg = model.config();
  const bool fusion = cfg.mode == Mode::Fusion;
  const double reg_weight = fusion ? cfg.fusion_regression_weight : 1.0;
  std::vector<ad::Var> logits, scores;
  std::vector<Judgment> labels;
  std::vector<FactorScores> targets;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    const CaseDocument& doc = *docs[i];
    ForwardOptions opts;
    if (fusion && i < fed.size() && fed[i]) {
      opts.interm_scores = fed[i];
      opts.need_scores = reg_weight > 0.0;
    }
    const auto r = model.forward(tape, doc, opts);
    if (r.logits && doc.judgment) {
      logits.push_back(*r.logits);
      labels.push_back(*doc.judgment);
    }
    if (r.scores && doc.factors && reg_weight > 0.0) {
      scores.push_back(*r.scores);
      targets.push_back(*doc.factors);
    }
  }
  std::optional<ad::Var> loss;
  if (!logits.empty()) loss = cross_entropy_loss(ad::concat(logits, 0), labels);
  if (!scores.empty()) {
    ad::Tensor target({targets.size(), kNumFeatures});
    for (std::size_t i = 0; i < targets.size(); ++i)
      for (std::size_t k = 0; k < kNumFeatures; ++k) target.at(i, k) = targets[i].values[k];
    ad::Var reg = smooth_l1_loss(ad::concat(scores, 0), target, cfg.smooth_l1_beta);
    if (reg_weight != 1.0) reg = ad::scale(reg, reg_weight);
    loss = loss ? ad::add(*loss, reg) : reg;
  }
  return loss;
}

std::map<std::string, ad::Tensor> snapshot(const ad::ParameterStore& store) {
  std::map<std::string, ad::Tensor> out;
  for (const auto& [name, p] : store.items()) out.emplace(name, p.value);
  return out;
}

std::uint64_t epoch_seed(std::uint64_t seed, std::size_t epoch) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch)};
  std::uint64_t out;
  std::array<std::uint32_t, 2> w{};
  seq.generate(w.begin(), w.end());
  out = (static_cast<std::uint64_t>(w[0]) << 32) | w[1];
  return out;
}

nlohmann::json opt_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

std::optional<double> json_opt(const nlohmann::json& j) {
  return j.is_null() ? std::nullopt : std::optional<double>(j.get<double>());
}

}  // namespace

Trainer::Trainer(Model& model, std::vector<CaseDocument> train, std::vector<CaseDocument> validation,
                 TrainConfig cfg)
    : model_(model), train_(std::move(train)), val_(std::move(validation)), cfg_(std::move(cfg)) {
  cfg_.validate();
  if (train_.empty()) throw ValidationError("train: empty training set");
  const auto& mc = model_.config();
  if (mc.mode == Mode::Fusion) {
    fed_scores_.resize(train_.size());
    if (mc.teacher_forcing) {
      for (std::size_t i = 0; i < train_.size(); ++i) fed_scores_[i] = train_[i].factors;
    } else if (mc.fusion_regression_weight == 0.0) {
      for (std::size_t i = 0; i < train_.size(); ++i) fed_scores_[i] = predict_intermediate(model_, train_[i]);
    }
  }
  best_cls_ = snapshot(model_.params());
  best_reg_ = best_cls_;
}

Trainer::Task Trainer::task_of(const std::string& param) const {
  const auto& mc = model_.config();
  if (mc.mode == Mode::EndToEnd) return param.starts_with("f2.") ? Task::Regression : Task::Classification;
  return model_.has_classifier() ? Task::Classification : Task::Regression;
}

double Trainer::train_batch(const std::vector<std::size_t>& batch) {
  auto& store = model_.params();
  store.zero_grad();
  std::vector<const CaseDocument*> docs;
  std::vector<std::optional<FactorScores>> fed;
  for (auto i : batch) {
    docs.push_back(&train_[i]);
    if (!fed_scores_.empty()) fed.push_back(fed_scores_[i]);
  }
  double value = 0.0;
  {
    ad::Tape tape(&store);
    auto loss = objective(tape, model_, docs, fed);
    if (!loss) throw ValidationError("train: batch has no labelled document for this model");
    value = loss->value().item();
    if (!std::isfinite(value)) throw Error("train: loss became non-finite");
    tape.backward(*loss);
  }
  ad::optimizer_step(store, cfg_.adam);
  return value;
}

void Trainer::validate_epoch(EpochMetrics& m) {
  std::vector<Judgment> preds, golds;
  std::vector<FactorScores> spred, sgold;
  for (const auto& d : val_) {
    const auto p = predict(model_, d);
    if (p.label && d.judgment) {
      preds.push_back(*p.label);
      golds.push_back(*d.judgment);
    }
    if (p.scores && d.factors) {
      spred.push_back(*p.scores);
      sgold.push_back(*d.factors);
    }
  }
  if (!preds.empty()) m.val_macro_f1 = macro_f1(preds, golds);
  if (!spred.empty()) m.val_mae = mae_mse(spred, sgold).mae;
}

const EpochMetrics& Trainer::run_epoch() {
  if (done()) throw Error("train: all epochs already run");
  std::vector<std::size_t> order(train_.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(epoch_seed(cfg_.seed, epoch_));
  std::shuffle(order.begin(), order.end(), rng);

  EpochMetrics m;
  double loss_sum = 0.0;
  std::size_t batches = 0;
  for (std::size_t start = 0; start < order.size(); start += cfg_.batch_size) {
    const std::size_t end = std::min(order.size(), start + cfg_.batch_size);
    loss_sum += train_batch({order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(end)});
    ++batches;
  }
  ++epoch_;
  m.epoch = epoch_;
  m.steps = model_.params().step();
  m.train_loss = loss_sum / static_cast<double>(batches);
  validate_epoch(m);

  const bool f1_better = m.val_macro_f1 && (!best_f1_ || *m.val_macro_f1 > *best_f1_);
  const bool mae_better = m.val_mae && (!best_mae_ || *m.val_mae < *best_mae_);
  if (f1_better) {
    best_f1_ = m.val_macro_f1;
    best_f1_epoch_ = m.epoch;
  }
  if (mae_better) {
    best_mae_ = m.val_mae;
    best_mae_epoch_ = m.epoch;
  }
  for (const auto& [name, p] : model_.params().items()) {
    // Without a validation signal for a task, its latest values are kept.
    const bool cls = task_of(name) == Task::Classification;
    const bool signal = cls ? m.val_macro_f1.has_value() : m.val_mae.has_value();
    if (cls && (f1_better || !signal)) best_cls_[name] = p.value;
    if (!cls && (mae_better || !signal)) best_reg_[name] = p.value;
  }
  trace_.push_back(m);
  return trace_.back();
}

TrainResult Trainer::finish() {
  while (!done()) run_epoch();
  for (auto& [name, p] : model_.params().items())
    p.value = task_of(name) == Task::Classification ? best_cls_.at(name) : best_reg_.at(name);
  model_.set_trained(true);
  TrainResult r;
  r.trace = trace_;
  r.best_classification_epoch = best_f1_epoch_;
  r.best_regression_epoch = best_mae_epoch_;
  r.steps = model_.params().step();
  return r;
}

Checkpoint Trainer::save_state() const {
  nlohmann::json meta;
  meta["format"] = "confusio-train-state";
  meta["epoch"] = epoch_;
  meta["step"] = model_.params().step();
  meta["best_f1"] = opt_json(best_f1_);
  meta["best_mae"] = opt_json(best_mae_);
  meta["best_f1_epoch"] = best_f1_epoch_ ? nlohmann::json(*best_f1_epoch_) : nlohmann::json();
  meta["best_mae_epoch"] = best_mae_epoch_ ? nlohmann::json(*best_mae_epoch_) : nlohmann::json();
  auto& trace = meta["trace"] = nlohmann::json::array();
  for (const auto& e : trace_)
    trace.push_back({{"epoch", e.epoch},
                     {"steps", e.steps},
                     {"train_loss", e.train_loss},
                     {"val_macro_f1", opt_json(e.val_macro_f1)},
                     {"val_mae", opt_json(e.val_mae)}});
  Checkpoint c;
  c.metadata = meta.dump();
  for (const auto& [name, p] : model_.params().items()) {
    c.tensors.emplace("param/" + name, p.value);
    c.tensors.emplace("m/" + name, p.m.empty() ? ad::Tensor(p.value.shape()) : p.m);
    c.tensors.emplace("v/" + name, p.v.empty() ? ad::Tensor(p.value.shape()) : p.v);
    c.tensors.emplace("best_cls/" + name, best_cls_.at(name));
    c.tensors.emplace("best_reg/" + name, best_reg_.at(name));
  }
  return c;
}

void Trainer::load_state(const Checkpoint& state) {
  const auto meta = nlohmann::json::parse(state.metadata);
  if (meta.value("format", "") != "confusio-train-state") throw Error("not a training state checkpoint");
  auto tensor = [&](const std::string& key, const ad::Tensor& like) -> const ad::Tensor& {
    auto it = state.tensors.find(key);
    if (it == state.tensors.end()) throw Error("training state: missing tensor '" + key + "'");
    if (it->second.shape() != like.shape()) throw ShapeError("training state: tensor '" + key + "' has wrong shape");
    return it->second;
  };
  for (auto& [name, p] : model_.params().items()) {
    p.value = tensor("param/" + name, p.value);
    p.m = tensor("m/" + name, p.value);
    p.v = tensor("v/" + name, p.value);
    best_cls_[name] = tensor("best_cls/" + name, p.value);
    best_reg_[name] = tensor("best_reg/" + name, p.value);
  }
  model_.params().set_step(meta.at("step").get<std::size_t>());
  epoch_ = meta.at("epoch").get<std::size_t>();
  best_f1_ = json_opt(meta.at("best_f1"));
  best_mae_ = json_opt(meta.at("best_mae"));
  best_f1_epoch_ = meta.at("best_f1_epoch").is_null() ? std::nullopt
                                                      : std::optional(meta.at("best_f1_epoch").get<std::size_t>());
  best_mae_epoch_ = meta.at("best_mae_epoch").is_null()
                        ? std::nullopt
                        : std::optional(meta.at("best_mae_epoch").get<std::size_t>());
  trace_.clear();
  for (const auto& e : meta.at("trace"))
    trace_.push_back({e.at("epoch").get<std::size_t>(), e.at("steps").get<std::size_t>(),
                      e.at("train_loss").get<double>(), json_opt(e.at("val_macro_f1")),
                      json_opt(e.at("val_mae"))});
}

TrainResult train(Model& model, const std::vector<CaseDocument>& train, const std::vector<CaseDocument>& validation,
                  const TrainConfig& cfg) {
  Trainer t(model, train, validation, cfg);
  return t.finish();
}

double evaluate_loss(const Model& model, const std::vector<CaseDocument>& docs) {
  if (docs.empty()) throw ValidationError("evaluate_loss: no documents");
  ad::Tape tape(const_cast<ad::ParameterStore*>(&model.params()), false);
  std::vector<const CaseDocument*> ptrs;
  for (const auto& d : docs) ptrs.push_back(&d);
  auto loss = objective(tape, model, ptrs, {});
  if (!loss) throw ValidationError("evaluate_loss: no labelled document for this model");
  return loss->value().item();
}

}  // namespace confusio
