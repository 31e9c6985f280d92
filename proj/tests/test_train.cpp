#include <doctest.h>

#include "confusio/error.hpp"
#include "confusio/synth.hpp"
#include "confusio/train.hpp"

using namespace confusio;

namespace {

std::vector<CaseDocument> docs(std::size_t n, std::uint64_t seed = 1) {
  SynthConfig c;
  c.num_docs = n;
  c.seed = seed;
  return generate_synthetic(c);
}

ModelConfig micro(Mode mode) {
  ModelConfig cfg;
  cfg.mode = mode;
  cfg.encoder.model_dim = 8;
  cfg.encoder.num_layers = 1;
  cfg.encoder.num_heads = 2;
  cfg.encoder.feedforward_dim = 16;
  cfg.encoder.max_sequence_length = 48;
  cfg.interm.embedding_dim = 8;
  cfg.interm.num_layers = 1;
  cfg.interm.num_heads = 2;
  cfg.interm.feedforward_dim = 16;
  cfg.interm.output_dim = 8;
  return cfg;
}

std::map<std::string, ad::Tensor> values(const Model& m) {
  std::map<std::string, ad::Tensor> out;
  for (const auto& [name, p] : m.params().items()) out[name] = p.value;
  return out;
}

}  // namespace

TEST_CASE("one epoch of eight documents at batch eight is one step") {
  auto ds = docs(8);
  Model m(micro(Mode::MultiTask), TokenVocab::build(ds), 1);
  TrainConfig tc;
  tc.epochs = 1;
  auto r = train(m, ds, {}, tc);
  CHECK(r.steps == 1);
  CHECK(m.params().step() == 1);
  REQUIRE(r.trace.size() == 1);
  CHECK(r.trace[0].steps == 1);
  CHECK(m.trained());

  Model m2(micro(Mode::MultiTask), TokenVocab::build(ds), 1);
  auto ds9 = docs(9);
  tc.epochs = 2;
  CHECK(train(m2, ds9, {}, tc).steps == 4);
}

TEST_CASE("loss on a fixed batch decreases over the first five steps") {
  auto ds = docs(8, 3);
  for (Mode mode : {Mode::EndToEnd, Mode::MultiTask, Mode::Fusion}) {
    CAPTURE(mode_name(mode));
    Model m(micro(mode), TokenVocab::build(ds), 2);
    TrainConfig tc;
    tc.epochs = 5;
    tc.adam.lr = 3e-3;
    Trainer trainer(m, ds, {}, tc);
    double last = evaluate_loss(m, ds);
    CHECK(last > 0);
    while (!trainer.done()) {
      trainer.run_epoch();
      const double now = evaluate_loss(m, ds);
      CHECK(now < last);
      last = now;
    }
  }
}

TEST_CASE("same seed gives identical traces and parameters") {
  auto ds = docs(20);
  auto val = docs(6, 2);
  auto run = [&](std::uint64_t seed) {
    Model m(micro(Mode::EndToEnd), TokenVocab::build(ds), 3);
    TrainConfig tc;
    tc.epochs = 3;
    tc.seed = seed;
    auto r = train(m, ds, val, tc);
    return std::pair{r.trace, values(m)};
  };
  auto a = run(5), b = run(5), c = run(6);
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
  CHECK(a.first != c.first);
}

TEST_CASE("resuming from saved state is bit identical") {
  auto ds = docs(20);
  auto val = docs(6, 2);
  TrainConfig tc;
  tc.epochs = 4;
  for (Mode mode : {Mode::EndToEnd, Mode::Fusion}) {
    CAPTURE(mode_name(mode));
    Model full(micro(mode), TokenVocab::build(ds), 4);
    auto ref = train(full, ds, val, tc);

    Model first(micro(mode), TokenVocab::build(ds), 4);
    Checkpoint state;
    {
      Trainer t(first, ds, val, tc);
      t.run_epoch();
      t.run_epoch();
      state = t.save_state();
    }
    std::stringstream bytes;
    write_checkpoint(bytes, state);
    Model second(micro(mode), TokenVocab::build(ds), 99);
    Trainer t(second, ds, val, tc);
    t.load_state(read_checkpoint(bytes));
    CHECK(t.epoch() == 2);
    while (!t.done()) t.run_epoch();
    auto r = t.finish();
    CHECK(r.trace == ref.trace);
    CHECK(r.best_classification_epoch == ref.best_classification_epoch);
    CHECK(values(second) == values(full));
  }
}

TEST_CASE("best epochs are selected by strict improvement") {
  auto ds = docs(24);
  auto val = docs(10, 2);
  Model m(micro(Mode::EndToEnd), TokenVocab::build(ds), 5);
  TrainConfig tc;
  tc.epochs = 5;
  tc.adam.lr = 5e-3;
  auto r = train(m, ds, val, tc);
  REQUIRE(r.best_classification_epoch);
  REQUIRE(r.best_regression_epoch);
  std::size_t best_f1 = 0, best_mae = 0;
  for (std::size_t i = 0; i < r.trace.size(); ++i) {
    if (*r.trace[i].val_macro_f1 > *r.trace[best_f1].val_macro_f1) best_f1 = i;
    if (*r.trace[i].val_mae < *r.trace[best_mae].val_mae) best_mae = i;
  }
  CHECK(*r.best_classification_epoch == best_f1 + 1);
  CHECK(*r.best_regression_epoch == best_mae + 1);
}

TEST_CASE("fusion training without a regression weight leaves f2 unchanged") {
  auto ds = docs(16);
  Model m(micro(Mode::Fusion), TokenVocab::build(ds), 6);
  auto before = values(m);
  TrainConfig tc;
  tc.epochs = 2;
  train(m, ds, {}, tc);
  auto after = values(m);
  std::size_t changed = 0;
  for (auto& [name, v] : before) {
    if (name.starts_with("f2.")) CHECK(after.at(name) == v);
    if (name.starts_with("f1.") && after.at(name) != v) ++changed;
  }
  CHECK(changed > 0);
}

TEST_CASE("training errors") {
  auto ds = docs(4);
  Model m(micro(Mode::EndToEnd), TokenVocab::build(ds), 7);
  TrainConfig tc;
  CHECK_THROWS(train(m, {}, {}, tc));
  tc.batch_size = 0;
  CHECK_THROWS_AS(train(m, ds, {}, tc), ConfigError);
}
