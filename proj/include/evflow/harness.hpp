#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "evflow/config.hpp"
#include "evflow/gateway.hpp"
#include "evflow/orchestrator.hpp"
#include "evflow/prompts.hpp"

namespace evflow {

struct TaskManifestEntry {
  std::string id;
  std::filesystem::path frames_dir;  // resolved against the manifest's directory
  std::string question;
  std::vector<Option> options;
  std::string answer;
};

/// JSONL manifest; throws Errc::schema citing line numbers.
std::vector<TaskManifestEntry> load_manifest(const std::filesystem::path& path);
TaskManifestEntry parse_manifest_entry(const nlohmann::json& j, const std::filesystem::path& base_dir);

struct TaskResult {
  std::string id;
  std::string predicted;
  std::string answer;
  bool correct = false;
  bool errored = false;
};

struct EvalReport {
  std::string label;
  std::vector<TaskResult> tasks;
  double accuracy = 0.0;
  std::size_t parsed = 0;
  std::size_t unparsed = 0;
  std::size_t errored = 0;
  nlohmann::json config;

  nlohmann::json to_json() const;
};

struct EvalOptions {
  std::optional<std::filesystem::path> out_dir;  // traces, answers.jsonl, report.json
  std::string label = "default";
};

/// Runs every task on a pool of cfg.workers threads. Failures count as wrong.
EvalReport evaluate(const std::vector<TaskManifestEntry>& manifest, const PipelineConfig& cfg, Backends backends,
                    const PromptSet& prompts, const EvalOptions& options = {});

using SweepGrid = std::map<std::string, std::vector<double>>;

/// Cartesian grid over {k, K, N, tau}; every point is validated before any run.
std::vector<PipelineConfig> expand_sweep(const PipelineConfig& base, const SweepGrid& grid,
                                         std::vector<std::string>* labels = nullptr);

std::vector<EvalReport> sweep(const std::vector<TaskManifestEntry>& manifest, const PipelineConfig& cfg,
                              const SweepGrid& grid, Backends backends, const PromptSet& prompts,
                              const std::optional<std::filesystem::path>& out_dir = std::nullopt);

inline const std::vector<double> kDefaultKernelGrid{1, 3, 5, 7, 9};
inline const std::vector<double> kDefaultTauGrid{0.5, 0.6, 0.7, 0.8, 0.9};

struct OracleSample {
  std::string id;
  std::vector<int> baseline_scores;
  double baseline_mean = 0.0;
  double hap_score = 0.0;
};

struct OracleReport {
  std::vector<OracleSample> samples;
  std::vector<std::string> skipped;
  double avg_baseline = 0.0;
  double avg_hap = 0.0;
  double high_sufficiency_rate_baseline = 0.0;
  double high_sufficiency_rate_hap = 0.0;
  std::int64_t seed = 0;

  nlohmann::json to_json() const;
};

inline constexpr double kHighSufficiency = 4.0;

/// First integer in [1,5] in the reply.
std::optional<int> parse_judge_score(std::string_view reply);

/// Aggregates over samples; high sufficiency means score >= 4.
void aggregate_oracle(OracleReport& report);

struct OracleOptions {
  std::optional<std::size_t> sample;  // random subset of this size drawn with cfg.seed
};

OracleReport oracle_assess(const std::vector<TaskManifestEntry>& manifest, const PipelineConfig& cfg,
                           Backends pipeline, ChatClient& judge, const PromptSet& prompts,
                           const OracleOptions& options = {});

/// Method | Avg. Score (1-5) | High-Sufficiency Rate
std::string render_oracle_table(const OracleReport& report);

}  // namespace evflow
