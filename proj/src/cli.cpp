#include "confusio/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <atomic>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "confusio/error.hpp"

namespace confusio {

namespace fs = std::filesystem;

namespace {

Json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw ConfigError("config '" + path.string() + "': " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw Error("write to '" + path.string() + "' failed");
}

void write_json(const fs::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

std::optional<fs::path> resolve(const std::optional<std::string>& p, const fs::path& base) {
  if (!p) return std::nullopt;
  fs::path path(*p);
  return path.is_absolute() ? path : base / path;
}

std::size_t thread_count() {
  const char* env = std::getenv("CONFUSIO_THREADS");
  if (!env || !*env) return 1;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (*end != '\0' || n < 1) throw ConfigError("CONFUSIO_THREADS must be a positive integer, got '" + std::string(env) + "'");
  return static_cast<std::size_t>(n);
}

const fs::path& require(const std::optional<fs::path>& p, const char* key) {
  if (!p) throw ConfigError(std::string("config: data.") + key + " is required for this command");
  return *p;
}

std::mutex log_mutex;

void log(const std::string& line) {
  std::lock_guard lock(log_mutex);
  std::cerr << line << '\n';
}

}  // namespace

RunConfig parse_run_config(const Json& input, const fs::path& base_dir, const CliOverrides& ov) {
  Json j = input;
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  if (ov.seed) {
    j["seeds"] = Json::array({*ov.seed});
    for (const char* k : {"synth", "augment"}) {
      if (!j.contains(k)) j[k] = Json::object();
      j[k]["seed"] = *ov.seed;
    }
  }
  if (ov.mode) {
    if (!j.contains("model")) j["model"] = Json::object();
    j["model"]["mode"] = *ov.mode;
  }
  if (ov.split) j["split"] = *ov.split;
  if (ov.curriculum) j["use_curriculum"] = true;
  if (ov.out) j["out"] = ov.out->string();

  RunConfig cfg;
  ObjectReader r(j, "config");
  if (r.has("synth")) cfg.synth = synth_config_from_json(r.raw("synth"));
  if (r.has("pool")) cfg.pool = synth_config_from_json(r.raw("pool"));
  if (r.has("split_counts")) cfg.split_counts = split_counts_from_json(r.raw("split_counts"));
  if (r.has("data")) {
    ObjectReader d(r.raw("data"), "config.data");
    std::optional<std::string> train, validation, test, augmented, pool;
    d.read("train", train);
    d.read("validation", validation);
    d.read("test", test);
    d.read("augmented", augmented);
    d.read("pool", pool);
    d.finish();
    cfg.data = {resolve(train, base_dir), resolve(validation, base_dir), resolve(test, base_dir),
                resolve(augmented, base_dir), resolve(pool, base_dir)};
  }
  if (r.has("augment")) cfg.augment = augment_config_from_json(r.raw("augment"));
  if (r.has("model")) cfg.experiment.model = model_config_from_json(r.raw("model"));
  if (r.has("train")) cfg.experiment.train = train_config_from_json(r.raw("train"));
  if (r.has("curriculum")) cfg.experiment.curriculum = curriculum_config_from_json(r.raw("curriculum"));
  std::string split(data_split_name(cfg.experiment.split));
  r.read("split", split);
  cfg.experiment.split = data_split_from_name(split);
  r.read("use_curriculum", cfg.experiment.use_curriculum);
  r.read("seeds", cfg.seeds);
  if (cfg.seeds.empty()) throw ConfigError("config: seeds must not be empty");
  r.read("vocab_max_size", cfg.vocab_max_size);
  std::optional<std::string> out;
  r.read("out", out);
  r.finish();
  if (ov.out) cfg.out = *ov.out;
  else if (out) cfg.out = *resolve(out, base_dir);
  cfg.experiment.validate();
  cfg.effective = std::move(j);
  return cfg;
}

RunConfig load_run_config(const fs::path& path, const CliOverrides& ov) {
  return parse_run_config(read_json_file(path), path.parent_path(), ov);
}

void cmd_synth(const RunConfig& cfg) {
  fs::create_directories(cfg.out);
  const auto docs = generate_synthetic(cfg.synth);
  SplitCounts counts;
  if (cfg.split_counts) {
    counts = *cfg.split_counts;
  } else {
    counts.train = docs.size() / 2;
    counts.validation = docs.size() / 8;
    counts.test = docs.size() - counts.train - counts.validation;
  }
  const auto split = split_dataset(docs, counts, cfg.synth.seed);
  save_dataset(cfg.out / "train.jsonl", split.train);
  save_dataset(cfg.out / "validation.jsonl", split.validation);
  save_dataset(cfg.out / "test.jsonl", split.test);
  if (cfg.pool) save_dataset(cfg.out / "pool.jsonl", generate_synthetic(*cfg.pool));
  write_json(cfg.out / "config.json", cfg.effective);
  log("synth: " + std::to_string(split.train.size()) + "/" + std::to_string(split.validation.size()) + "/" +
      std::to_string(split.test.size()) + " documents written to " + cfg.out.string());
}

void cmd_augment(const RunConfig& cfg) {
  const auto clean = load_dataset(require(cfg.data.train, "train"));
  const auto pool = load_dataset(require(cfg.data.pool, "pool"));
  if (pool.empty()) throw ValidationError("augment: the pool is empty");
  const auto result = run_pipeline(clean, pool, cfg.augment);
  fs::create_directories(cfg.out);
  save_dataset(cfg.out / "augmented.jsonl", result.documents);
  {
    std::ofstream rejects(cfg.out / "rejects.tsv", std::ios::binary);
    write_rejects(rejects, result.rejects);
  }
  Json summary;
  summary["candidates"] = result.candidates;
  summary["drafts"] = result.drafts;
  summary["kept"] = result.documents.size();
  Json reasons = Json::object();
  for (auto reason : {RejectReason::KeywordFail, RejectReason::RuleUndetermined, RejectReason::RuleConflict,
                      RejectReason::LabelDisagree}) {
    std::size_t n = 0;
    for (const auto& rj : result.rejects) n += rj.reason == reason;
    reasons[std::string(reject_code(reason))] = n;
  }
  summary["rejected"] = reasons;
  write_json(cfg.out / "augment_summary.json", summary);
  write_json(cfg.out / "config.json", cfg.effective);
  log("augment: kept " + std::to_string(result.documents.size()) + " of " + std::to_string(result.drafts) +
      " drafts");
}

namespace {

struct SeedReport {
  std::uint64_t seed = 0;
  TestMetrics metrics;
};

void run_one_seed(const RunConfig& cfg, const ExperimentData& data, const TokenVocab& vocab,
                  const std::vector<CaseDocument>& test, std::uint64_t seed, bool resume, SeedReport& report) {
  const fs::path dir = cfg.out / ("seed-" + std::to_string(seed));
  fs::create_directories(dir);
  RunOptions opts;
  opts.state_dir = dir;
  opts.resume = resume;
  auto outcome = train_seed(cfg.experiment, data, vocab, seed, opts);
  for (const auto& w : outcome.warnings) log("seed " + std::to_string(seed) + ": warning: " + w);
  outcome.model.save(dir / "model.ckpt");
  write_json(dir / "trace.json", trace_to_json(outcome.logs));
  if (!outcome.records.empty()) {
    std::ofstream bins(dir / "bins.tsv", std::ios::binary);
    write_bin_audit(bins, outcome.records, cfg.experiment.curriculum.threshold);
  }
  report.seed = seed;
  report.metrics = evaluate_model(outcome.model, test);
  write_json(dir / "metrics.json", metrics_to_json(report.metrics));
  write_text(dir / "predictions.jsonl", predictions_jsonl(report.metrics));
  for (const auto& w : report.metrics.warnings) log("seed " + std::to_string(seed) + ": warning: " + w);
  std::ostringstream line;
  line << "seed " << seed << ":";
  if (report.metrics.macro_f1) line << " macro_f1=" << *report.metrics.macro_f1;
  if (report.metrics.mae) line << " mae=" << *report.metrics.mae;
  if (report.metrics.ece) line << " ece=" << *report.metrics.ece;
  log(line.str());
}

Json aggregate(const std::vector<SeedReport>& reports, std::optional<double> TestMetrics::*field) {
  std::vector<double> values;
  for (const auto& r : reports)
    if (r.metrics.*field) values.push_back(*(r.metrics.*field));
  if (values.empty()) return nullptr;
  const auto ms = mean_std(values);
  return {{"mean", ms.mean}, {"std", ms.stddev}, {"n", ms.n}};
}

}  // namespace

void cmd_train(const RunConfig& cfg, bool resume) {
  const auto& spec = cfg.experiment;
  ExperimentData data;
  data.clean.train = load_dataset(require(cfg.data.train, "train"));
  data.clean.validation = load_dataset(require(cfg.data.validation, "validation"));
  const auto test = load_dataset(require(cfg.data.test, "test"));
  if (spec.split != DataSplit::Clean || spec.use_curriculum)
    data.augmented = load_dataset(require(cfg.data.augmented, "augmented"));
  std::vector<CaseDocument> vocab_docs = data.clean.train;
  vocab_docs.insert(vocab_docs.end(), data.augmented.begin(), data.augmented.end());
  const auto vocab = TokenVocab::build(vocab_docs, cfg.vocab_max_size);

  fs::create_directories(cfg.out);
  write_json(cfg.out / "config.json", cfg.effective);

  std::vector<SeedReport> reports(cfg.seeds.size());
  const std::size_t workers = std::min(thread_count(), cfg.seeds.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i)
      run_one_seed(cfg, data, vocab, test, cfg.seeds[i], resume, reports[i]);
  } else {
    std::vector<std::exception_ptr> errors(cfg.seeds.size());
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i; (i = next++) < cfg.seeds.size();) {
          try {
            run_one_seed(cfg, data, vocab, test, cfg.seeds[i], resume, reports[i]);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  Json report;
  report["command"] = "train";
  report["mode"] = mode_name(spec.model.mode);
  report["split"] = data_split_name(spec.split);
  report["curriculum"] = spec.use_curriculum;
  auto& seeds = report["seeds"] = Json::array();
  std::ostringstream csv;
  csv << "seed,macro_f1\n";
  for (const auto& r : reports) {
    seeds.push_back({{"seed", r.seed}, {"metrics", metrics_to_json(r.metrics)}});
    if (r.metrics.macro_f1) csv << r.seed << ',' << Json(*r.metrics.macro_f1).dump() << '\n';
  }
  report["aggregate"] = {{"macro_f1", aggregate(reports, &TestMetrics::macro_f1)},
                         {"mae", aggregate(reports, &TestMetrics::mae)},
                         {"mse", aggregate(reports, &TestMetrics::mse)},
                         {"ece", aggregate(reports, &TestMetrics::ece)}};
  write_json(cfg.out / "report.json", report);
  write_text(cfg.out / "f1.csv", csv.str());
}

void cmd_eval(const RunConfig& cfg, const fs::path& checkpoint) {
  const Model model = Model::load(checkpoint);
  const auto test = load_dataset(require(cfg.data.test, "test"));
  const auto metrics = evaluate_model(model, test);
  fs::create_directories(cfg.out);
  Json report;
  report["command"] = "eval";
  report["mode"] = mode_name(model.config().mode);
  report["checkpoint"] = checkpoint.filename().string();
  report["metrics"] = metrics_to_json(metrics);
  write_json(cfg.out / "metrics.json", report);
  write_text(cfg.out / "predictions.jsonl", predictions_jsonl(metrics));
  for (const auto& w : metrics.warnings) log("warning: " + w);
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Trademark confusion prediction with intermediate labels"};
  app.require_subcommand(1);
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out, mode, split, checkpoint;
  bool curriculum = false, resume = false;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config, "experiment configuration (JSON)")->required();
    sub->add_option("--seed", seed, "single seed overriding the configuration");
    sub->add_option("--out", out, "output directory");
  };
  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  auto* augment = app.add_subcommand("augment", "build the augmented dataset");
  auto* trainc = app.add_subcommand("train", "train one model per seed and evaluate it");
  auto* evalc = app.add_subcommand("eval", "evaluate a checkpoint on the test set");
  for (auto* s : {synth, augment, trainc, evalc}) common(s);
  trainc->add_option("--mode", mode, "end2end, multitask or fusion");
  trainc->add_option("--split", split, "clean, augmented or mix");
  trainc->add_flag("--curriculum", curriculum, "train with the confidence-binned curriculum");
  trainc->add_flag("--resume", resume, "continue from saved training state");
  evalc->add_option("--checkpoint", checkpoint, "model checkpoint")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    CliOverrides ov;
    ov.seed = seed;
    if (out) ov.out = fs::path(*out);
    ov.mode = mode;
    ov.split = split;
    ov.curriculum = curriculum;
    const auto cfg = load_run_config(config, ov);
    if (synth->parsed()) cmd_synth(cfg);
    else if (augment->parsed()) cmd_augment(cfg);
    else if (trainc->parsed()) cmd_train(cfg, resume);
    else cmd_eval(cfg, *checkpoint);
  } catch (const ConfigError& e) {
    std::cerr << "confusio: configuration error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "confusio: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace confusio
