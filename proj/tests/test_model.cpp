#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "confusio/error.hpp"
#include "confusio/eval.hpp"
#include "confusio/model.hpp"
#include "confusio/synth.hpp"
#include "confusio/train.hpp"

using namespace confusio;
using namespace confusio::ad;

namespace {

std::vector<CaseDocument> docs(std::size_t n, std::uint64_t seed = 1) {
  SynthConfig c;
  c.num_docs = n;
  c.seed = seed;
  return generate_synthetic(c);
}

ModelConfig micro(Mode mode, std::size_t layers = 1) {
  ModelConfig cfg;
  cfg.mode = mode;
  cfg.encoder.model_dim = 8;
  cfg.encoder.num_layers = layers;
  cfg.encoder.num_heads = 2;
  cfg.encoder.feedforward_dim = 16;
  cfg.encoder.max_sequence_length = 24;
  cfg.interm.embedding_dim = 8;
  cfg.interm.num_layers = 1;
  cfg.interm.num_heads = 2;
  cfg.interm.feedforward_dim = 16;
  cfg.interm.output_dim = 6;
  return cfg;
}

FactorScores scores(std::array<double, 5> v) {
  FactorScores f;
  f.values = v;
  return f;
}

Tensor value_of(Model& m, const std::function<Var(Tape&)>& f) {
  Tape t(&m.params(), false);
  return f(t).value();
}

double grad_norm(const Model& m, const std::string& prefix) {
  double s = 0;
  for (const auto& [name, p] : m.params().items())
    if (name.starts_with(prefix))
      for (double g : p.grad.values()) s += g * g;
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("attention hand cases") {
  Tape t;
  auto v = t.constant(Tensor::matrix(1, 3, {4, 5, 6}));
  auto out = nn::scaled_dot_attention(t.constant(Tensor::matrix(2, 2, {9, -3, 0.1, 7})),
                                      t.constant(Tensor::matrix(1, 2, {1, 2})), v)
                 .value();
  CHECK(out == Tensor::matrix(2, 3, {4, 5, 6, 4, 5, 6}));

  auto avg = nn::scaled_dot_attention(t.constant(Tensor::matrix(1, 2, {0, 1})),
                                      t.constant(Tensor::matrix(2, 2, {1, 0, -1, 0})),
                                      t.constant(Tensor::matrix(2, 2, {2, 4, 6, 0})))
                 .value();
  CHECK(avg.at(0, 0) == doctest::Approx(4.0));
  CHECK(avg.at(0, 1) == doctest::Approx(2.0));

  auto hand = nn::scaled_dot_attention(t.constant(Tensor::matrix(1, 2, {1, 0})),
                                       t.constant(Tensor::matrix(2, 2, {1, 0, 0, 1})),
                                       t.constant(Tensor::matrix(2, 2, {1, 0, 0, 1})))
                  .value();
  const double w = 1 / (1 + std::exp(-1 / std::sqrt(2.0)));
  CHECK(hand.at(0, 0) == doctest::Approx(w));
  CHECK(hand.at(0, 0) == doctest::Approx(0.6698).epsilon(1e-4));
  CHECK(hand.at(0, 1) == doctest::Approx(0.3302).epsilon(1e-4));

  CHECK_THROWS_AS(nn::scaled_dot_attention(t.constant(Tensor({1, 3})), t.constant(Tensor({2, 2})),
                                           t.constant(Tensor({2, 2}))),
                  ShapeError);
  CHECK_THROWS_AS(nn::scaled_dot_attention(t.constant(Tensor({1, 2})), t.constant(Tensor({2, 2})),
                                           t.constant(Tensor({3, 2}))),
                  ShapeError);
}

TEST_CASE("token vocabulary") {
  CaseDocument d;
  d.sentences = {{FeatureKind::Visual, "b a b c"}, {FeatureKind::Phonetic, "a b"}};
  auto v = TokenVocab::build({d});
  CHECK(v.terms() == std::vector<std::string>{"[UNK]", "[CLS]", "b", "a", "c"});
  CHECK(v.encode("A z b", 10) == std::vector<std::size_t>{TokenVocab::kCls, 3, TokenVocab::kUnk, 2});
  CHECK(v.encode("a b c", 2).size() == 2);
  CHECK(TokenVocab::build({d}, 4).size() == 4);
  CHECK(TokenVocab().size() == 2);
}

TEST_CASE("text encoder shape and determinism") {
  auto ds = docs(3);
  Model m(micro(Mode::Fusion), TokenVocab::build(ds), 1);
  auto enc = [&](const CaseDocument& d) { return value_of(m, [&](Tape& t) { return m.encode_text(t, "f1.enc", d); }); };
  CHECK(enc(ds[0]) == enc(ds[0]));
  CHECK(enc(ds[0]).shape() == Shape{1, 8});
  CaseDocument one;
  one.sentences = {{FeatureKind::Visual, "x"}};
  CHECK(enc(one).shape() == Shape{1, 8});
  CHECK(m.tokens(ds[0]).size() == 24);
  CaseDocument empty;
  CHECK_THROWS(enc(empty));

  // Each document is encoded on its own, so order does not matter.
  auto a = enc(ds[1]), b = enc(ds[2]);
  CHECK(enc(ds[2]) == b);
  CHECK(enc(ds[1]) == a);
}

TEST_CASE("bucketing") {
  auto b = nn::bucket_scores(scores({2.4, 2.6, 7.2, -1, 0.5}));
  CHECK(b == nn::Buckets{2, 3, 5, 0, 1});
  CHECK(nn::bucket_scores(scores({0, 0, 0, 0, 0}))[0] == 1);
  CHECK(nn::bucket_scores(scores({NAN, 3, 3, 3, 3}))[0] == 1);
}

TEST_CASE("intermediate encoder") {
  Model m(micro(Mode::Fusion), TokenVocab(), 2);
  auto enc = [&](const FactorScores& s) {
    return value_of(m, [&](Tape& t) { return m.interm_encode(t, s); });
  };
  CHECK(enc(scores({3, 3, 3, 3, 3})) == enc(scores({3, 3, 3, 3, 3})));
  CHECK(enc(scores({3, 3, 3, 3, 3})).shape() == Shape{1, 6});
  CHECK(enc(scores({2.4, 3, 3, 3, 3})) != enc(scores({2.6, 3, 3, 3, 3})));
  CHECK(enc(scores({7.2, 3, 3, 3, 3})) == enc(scores({5, 3, 3, 3, 3})));
  nn::Buckets b{};
  Tape t(&m.params(), false);
  m.interm_encode(t, scores({7.2, 2.4, 0, 1, 5}), &b);
  CHECK(b == nn::Buckets{5, 2, 0, 1, 5});
}

TEST_CASE("fusion gate") {
  Tape t;
  auto fused = gated_sum(t.constant(Tensor::scalar(0.5)), t.constant(Tensor::scalar(-0.25)),
                         t.constant(Tensor::matrix(1, 2, {2, 0})), t.constant(Tensor::matrix(1, 2, {0, 4})));
  CHECK(fused.value() == Tensor::matrix(1, 2, {1, -1}));

  ParameterStore store;
  nn::Rng rng(1);
  nn::add_linear(store, "h.gate1", 6, 1, rng);
  nn::add_linear(store, "h.gate2", 6, 1, rng);
  for (auto& [_, p] : store.items())
    for (auto& v : p.value.values()) v *= 3;
  Tape ft(&store);
  auto vt = ft.constant(Tensor::matrix(1, 3, {3, -2, 9}));
  auto out = fuse(ft, "h", vt, ft.constant(Tensor({1, 3})));
  const double s1 = out.s1.value().item(), s2 = out.s2.value().item();
  CHECK(s1 > -1);
  CHECK(s1 < 1);
  CHECK(s2 > -1);
  CHECK(s2 < 1);
  for (std::size_t i = 0; i < 3; ++i) CHECK(out.fused.value()[i] == doctest::Approx(s1 * vt.value()[i]));
  CHECK_THROWS_AS(fuse(ft, "h", vt, ft.constant(Tensor({1, 4}))), ShapeError);
}

TEST_CASE("cross entropy") {
  Tape t;
  const std::vector<Judgment> zero = {Judgment::NoConfusion};
  CHECK(cross_entropy_loss(t.constant(Tensor::matrix(1, 2, {2, 0})), zero).value().item() ==
        doctest::Approx(-std::log(std::exp(2.0) / (std::exp(2.0) + 1))));
  CHECK(cross_entropy_loss(t.constant(Tensor::matrix(1, 2, {2, 0})), zero).value().item() ==
        doctest::Approx(0.1269).epsilon(1e-3));
  const std::vector<Judgment> mixed = {Judgment::NoConfusion, Judgment::Confusion, Judgment::Confusion};
  CHECK(cross_entropy_loss(t.constant(Tensor({3, 2}, 0.7)), mixed).value().item() == doctest::Approx(std::log(2.0)));
  const double sure = cross_entropy_loss(t.constant(Tensor::matrix(1, 2, {0, 800})), {&mixed[1], 1}).value().item();
  CHECK(sure >= 0.0);
  CHECK(sure < 1e-8);
  const double wrong = cross_entropy_loss(t.constant(Tensor::matrix(1, 2, {800, 0})), {&mixed[1], 1}).value().item();
  CHECK(wrong == doctest::Approx(-std::log(kLogEpsilon)));
  CHECK_THROWS(cross_entropy_loss(t.constant(Tensor({0, 2})), {}));
  CHECK_THROWS_AS(cross_entropy_loss(t.constant(Tensor({2, 2})), zero), ShapeError);
}

TEST_CASE("smooth L1") {
  Tape t;
  auto target = Tensor::matrix(1, 5, {1, 2, 3, 4, 5});
  CHECK(smooth_l1_loss(t.constant(target), target).value().item() == 0.0);
  CHECK(smooth_l1_loss(t.constant(Tensor::scalar(0.5)), Tensor::scalar(0.0)).value().item() == 0.125);
  CHECK(smooth_l1_loss(t.constant(Tensor::scalar(3.0)), Tensor::scalar(0.0)).value().item() == 2.5);
  CHECK(smooth_l1_loss(t.constant(Tensor::matrix(1, 2, {0.5, -3})), Tensor({1, 2})).value().item() ==
        doctest::Approx((0.125 + 2.5) / 2));
  for (double beta : {0.5, 1.0, 2.0})
    CHECK(std::abs(smooth_l1(beta - 1e-7, beta) - smooth_l1(beta + 1e-7, beta)) < 1e-6);
  CHECK(std::abs(smooth_l1(1 - 1e-12) - smooth_l1(1 + 1e-12)) < 1e-9);
  CHECK_THROWS_AS(smooth_l1_loss(t.constant(Tensor({1, 5})), Tensor({1, 4})), ShapeError);
  CHECK_THROWS(smooth_l1(1.0, 0.0));
}

TEST_CASE("forward shapes in every mode") {
  auto ds = docs(2);
  for (Mode mode : {Mode::EndToEnd, Mode::MultiTask, Mode::Fusion}) {
    CAPTURE(mode_name(mode));
    Model m(micro(mode), TokenVocab::build(ds), 3);
    Tape t(&m.params());
    auto r = m.forward(t, ds[0]);
    REQUIRE(r.logits);
    REQUIRE(r.scores);
    CHECK(r.logits->value().shape() == Shape{1, 2});
    CHECK(r.scores->value().shape() == Shape{1, 5});
    CHECK(predict_intermediate(m, ds[0]) == predict_intermediate(m, ds[0]));
    auto p = predict(m, ds[0]);
    CHECK(p.probabilities[0] + p.probabilities[1] == doctest::Approx(1.0));
    CHECK(p.confidence == std::max(p.probabilities[0], p.probabilities[1]));
    CHECK(mode_from_name(mode_name(mode)) == mode);
  }
  Model m(micro(Mode::Fusion), TokenVocab::build(ds), 3);
  ParameterStore other;
  Tape wrong(&other);
  CHECK_THROWS(m.forward(wrong, ds[0]));
  CHECK_THROWS(mode_from_name("ensemble"));
}

TEST_CASE("end-to-end sub-models are disjoint") {
  auto cfg = micro(Mode::EndToEnd);
  cfg.regress = false;
  auto ds = docs(1);
  Model m(cfg, TokenVocab::build(ds), 3);
  auto p = predict(m, ds[0]);
  CHECK(p.label);
  CHECK_FALSE(p.scores);
  for (auto& [name, _] : m.params().items()) CHECK_FALSE(name.starts_with("f2."));
}

TEST_CASE("multitask shares one encoder") {
  auto ds = docs(2);
  Model mt(micro(Mode::MultiTask), TokenVocab::build(ds), 4);
  Model e2e(micro(Mode::EndToEnd), TokenVocab::build(ds), 4);
  CHECK(mt.params().parameter_count() < e2e.params().parameter_count());
  for (auto& [name, _] : mt.params().items()) CHECK_FALSE(name.starts_with("f1.enc"));

  auto before = predict(mt, ds[0]);
  for (auto& [name, p] : mt.params().items())
    if (name.starts_with("shared.enc") && name.ends_with(".w"))
      for (auto& v : p.value.values()) v *= 1.5;
  auto after = predict(mt, ds[0]);
  CHECK(before.probabilities != after.probabilities);
  CHECK(before.scores != after.scores);
}

TEST_CASE("fusion gradients reach f1 and E_interm") {
  auto ds = docs(2);
  Model m(micro(Mode::Fusion), TokenVocab::build(ds), 5);
  m.params().zero_grad();
  Tape t(&m.params());
  auto r = m.forward(t, ds[0]);
  const Judgment y = *ds[0].judgment;
  t.backward(cross_entropy_loss(*r.logits, {&y, 1}));
  CHECK(grad_norm(m, "f1.enc.") > 0);
  CHECK(grad_norm(m, "interm.") > 0);
  CHECK(grad_norm(m, "fusion.") > 0);
}

TEST_CASE("zeroed E_interm projection leaves only the text path") {
  auto ds = docs(2);
  Model m(micro(Mode::Fusion), TokenVocab::build(ds), 6);
  ForwardOptions a, b;
  a.interm_scores = scores({1, 1, 0, 0, 1});
  b.interm_scores = scores({5, 5, 5, 5, 5});
  CHECK(predict(m, ds[0], a).probabilities != predict(m, ds[0], b).probabilities);
  for (auto& [name, p] : m.params().items())
    if (name.starts_with("interm.proj")) std::fill(p.value.values().begin(), p.value.values().end(), 0.0);
  CHECK(predict(m, ds[0], a).probabilities == predict(m, ds[0], b).probabilities);
  Tape t(&m.params(), false);
  auto r = m.forward(t, ds[0], a);
  for (double v : r.v_interm->value().values()) CHECK(v == 0.0);
}

TEST_CASE("full-model gradient check") {
  auto ds = docs(2);
  for (Mode mode : {Mode::EndToEnd, Mode::Fusion}) {
    CAPTURE(mode_name(mode));
    auto cfg = micro(mode, 2);
    cfg.encoder.max_sequence_length = 12;
    Model m(cfg, TokenVocab::build(ds), 7);
    Tensor target({1, 5});
    for (std::size_t i = 0; i < 5; ++i) target[i] = ds[0].factors->values[i];
    const Judgment y = *ds[0].judgment;
    auto loss = [&](Tape& t) {
      auto r = m.forward(t, ds[0]);
      return add(cross_entropy_loss(*r.logits, {&y, 1}), smooth_l1_loss(*r.scores, target));
    };
    CHECK(grad_check_params(m.params(), loss, 1e-6, 12) <= 1e-5);
  }
}

TEST_CASE("checkpoint round trip reproduces forward outputs bitwise") {
  auto ds = docs(3);
  for (Mode mode : {Mode::EndToEnd, Mode::MultiTask, Mode::Fusion}) {
    Model m(micro(mode), TokenVocab::build(ds), 8);
    m.set_trained(true);
    auto path = std::filesystem::temp_directory_path() / "confusio-test-model.ckpt";
    m.save(path);
    Model back = Model::load(path);
    CHECK(back.config().mode == mode);
    CHECK(back.trained());
    CHECK(back.vocab().terms() == m.vocab().terms());
    for (auto& d : ds) {
      auto p = predict(m, d), q = predict(back, d);
      CHECK(p.probabilities == q.probabilities);
      CHECK(p.scores == q.scores);
    }
    auto ckpt = m.to_checkpoint();
    ckpt.tensors.begin()->second = Tensor({1, 1});
    CHECK_THROWS(Model::from_checkpoint(ckpt));
  }
}

TEST_CASE("init_from copies matching parameters") {
  auto ds = docs(2);
  Model e2e(micro(Mode::EndToEnd), TokenVocab::build(ds), 1);
  Model fusion(micro(Mode::Fusion), TokenVocab::build(ds), 2);
  const std::vector<std::string> prefixes = {"f1.enc.", "f2."};
  CHECK(fusion.init_from(e2e, prefixes) > 0);
  CHECK(fusion.params().at("f1.enc.tok").value == e2e.params().at("f1.enc.tok").value);
  CHECK(fusion.params().at("f2.out.w").value == e2e.params().at("f2.out.w").value);
  CHECK(predict_intermediate(fusion, ds[0]) == predict_intermediate(e2e, ds[0]));
}

TEST_CASE("regressor overfits ten documents") {
  auto ds = docs(10, 4);
  auto cfg = micro(Mode::EndToEnd);
  cfg.classify = false;
  cfg.encoder.max_sequence_length = 64;
  cfg.encoder.model_dim = 16;
  cfg.encoder.feedforward_dim = 32;
  Model m(cfg, TokenVocab::build(ds), 9);
  TrainConfig tc;
  tc.batch_size = 10;
  tc.epochs = 200;
  tc.adam.lr = 0.01;
  auto res = train(m, ds, {}, tc);
  CHECK(res.steps == 200);
  std::vector<FactorScores> pred, gold;
  for (auto& d : ds) {
    pred.push_back(predict_intermediate(m, d));
    gold.push_back(*d.factors);
  }
  CHECK(mae_mse(pred, gold).mae < 0.1);
}

TEST_CASE("model configuration validation") {
  auto cfg = micro(Mode::Fusion);
  cfg.encoder.num_heads = 3;
  CHECK_THROWS(Model(cfg, TokenVocab(), 1));
  cfg = micro(Mode::Fusion);
  cfg.smooth_l1_beta = 0;
  CHECK_THROWS(Model(cfg, TokenVocab(), 1));
  cfg = micro(Mode::Fusion);
  cfg.classify = false;
  CHECK_THROWS(Model(cfg, TokenVocab(), 1));
}
