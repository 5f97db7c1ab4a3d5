#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace evflow {

/// Pipeline mechanisms that can be switched off for ablation runs.
enum class Ablation { no_hdd, no_hap, no_eba, no_spatial, no_temporal };

std::string_view to_string(Ablation a) noexcept;
/// Accepts both `no_hap` and `no-hap` spellings.
std::optional<Ablation> parse_ablation(std::string_view name);

struct PipelineConfig {
  int frame_budget = 32;   // T
  int smooth_kernel = 5;   // k, odd
  int top_k = 3;           // K
  int grid_n = 3;          // N
  double tau = 0.7;
  int max_refinements = 2;
  int max_subqueries = 6;
  std::set<Ablation> ablations;

  std::string chat_endpoint;
  std::string embed_endpoint;
  std::string judge_endpoint;  // empty: reuse chat_endpoint
  std::string planner_model;
  std::string vlm_model;
  std::string embed_model;
  std::string judge_model;

  std::int64_t seed = 0;
  double request_timeout = 60.0;  // seconds
  int workers = 4;

  double temperature = 0.0;
  int plan_max_tokens = 1024;
  int arbitration_max_tokens = 256;
  int synthesis_max_tokens = 512;
  bool include_evidence_crops = false;

  int oracle_frames = 16;
  bool oracle_per_subquery = false;

  // Empty: built-in template.
  std::string planner_prompt;
  std::string refinement_prompt;
  std::string arbitration_prompt;
  std::string synthesis_prompt;
  std::string oracle_system_prompt;
  std::string oracle_user_prompt;

  bool has(Ablation a) const { return ablations.contains(a); }
  bool operator==(const PipelineConfig&) const = default;
};

/// Builds a config from a flat key-value object. Absent keys take defaults.
/// Throws ConfigError (Errc::invalid_config) naming the offending key, or
/// Errc::conflict for incompatible ablations.
PipelineConfig validate_config(const nlohmann::json& raw);

nlohmann::json config_to_json(const PipelineConfig& cfg);

/// Canonical key for a config key or one of its short aliases (T, k, K, N, τ).
std::optional<std::string> canonical_key(std::string_view key);

using EnvLookup = std::function<const char*(const char*)>;

/// `EVFLOW_<UPPER_KEY>` variables for every known key, as a raw object.
nlohmann::json env_overrides(const EnvLookup& getenv);

/// Precedence: cli > env > file > defaults.
PipelineConfig load_config(const std::optional<std::string>& file_path, const nlohmann::json& cli_overrides,
                           const EnvLookup& getenv);

}  // namespace evflow
