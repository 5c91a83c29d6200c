#pragma once

// Subcommand pipeline: validate -> judge -> score -> meta -> export-viz, with
// files handed between stages.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "argue/core_model.hpp"
#include "argue/judgment.hpp"
#include "argue/metrics.hpp"

namespace argue::cli {

enum ExitCode : int {
  kOk = 0,
  kValidation = 1,
  kIo = 2,
  kJudgeFailure = 3,
  kIncomplete = 4,
  kMisaligned = 5,
  kUsage = 64,
};

enum class JudgeMode { Oracle, Llm, HumanLog };

struct Config {
  std::filesystem::path runs;
  std::filesystem::path topics;
  std::filesystem::path nuggets;
  std::optional<std::filesystem::path> qrels;
  std::optional<std::filesystem::path> docs;
  std::filesystem::path cache_dir = ".argue-cache";
  std::filesystem::path out;
  std::filesystem::path log;
  std::optional<std::filesystem::path> human_log;
  std::optional<std::filesystem::path> prompts_dir;
  std::vector<std::filesystem::path> scores;
  std::vector<std::filesystem::path> human;
  std::vector<std::filesystem::path> automatic;
  std::optional<std::filesystem::path> pair_table;

  JudgeMode judge = JudgeMode::Oracle;
  std::string endpoint;
  std::string model;
  std::string api_key_env;
  std::size_t concurrency = 8;
  int max_attempts = 5;
  int retry_base_ms = 500;
  int timeout_s = 120;
  int max_tokens = 64;

  double alpha = 0.05;
  metrics::PrecisionMode precision_mode = metrics::PrecisionMode::CitedOnly;
  ImportanceWeights weights;
  bool allow_partial = false;
  std::optional<std::string> run_id;
  std::vector<std::string> metrics;  // meta: which topic-score fields to compare
};

/// Throws ConfigError when an invariant fails (weights positive,
/// concurrency >= 1, LLM judge needs endpoint and model, ...).
void check_config(const Config& config);

int cmd_validate(const Config& config, std::ostream& out, std::ostream& err);
int cmd_judge(const Config& config, std::ostream& out, std::ostream& err);
int cmd_score(const Config& config, std::ostream& out, std::ostream& err);
int cmd_meta(const Config& config, std::ostream& out, std::ostream& err);
int cmd_export_viz(const Config& config, std::ostream& out, std::ostream& err);

/// Parses `args` (without the program name) and dispatches.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Bundle consumed by the viewer, from replayed judgments and a scores file.
json build_viz_bundle(std::span<const Report> reports, const NuggetBank& bank,
                      const JudgmentLog& log, const json& scores_document);

}  // namespace argue::cli
