#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "confusio/augment.hpp"
#include "confusio/config_json.hpp"
#include "confusio/experiment.hpp"
#include "confusio/synth.hpp"

namespace confusio {

struct CliOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
  std::optional<std::string> mode;
  std::optional<std::string> split;
  bool curriculum = false;
  bool resume = false;
};

struct DataPaths {
  std::optional<std::filesystem::path> train;
  std::optional<std::filesystem::path> validation;
  std::optional<std::filesystem::path> test;
  std::optional<std::filesystem::path> augmented;
  std::optional<std::filesystem::path> pool;
};

// Everything one experiment needs; relative paths resolve against the
// directory of the config file.
struct RunConfig {
  Json effective;  // the configuration after command-line overrides
  SynthConfig synth;
  std::optional<SynthConfig> pool;
  std::optional<SplitCounts> split_counts;
  DataPaths data;
  AugmentConfig augment;
  ExperimentSpec experiment;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  std::size_t vocab_max_size = 0;
  std::filesystem::path out = "out";
};

RunConfig parse_run_config(const Json& j, const std::filesystem::path& base_dir, const CliOverrides& ov = {});
RunConfig load_run_config(const std::filesystem::path& path, const CliOverrides& ov = {});

// Each writes into cfg.out and throws on failure.
void cmd_synth(const RunConfig& cfg);
void cmd_augment(const RunConfig& cfg);
void cmd_train(const RunConfig& cfg, bool resume = false);
void cmd_eval(const RunConfig& cfg, const std::filesystem::path& checkpoint);

// Entry point shared by the executable and the tests; returns the exit code.
int run_cli(int argc, const char* const* argv);

}  // namespace confusio
