#pragma once

#include <map>
#include <string>
#include <string_view>

#include "evflow/config.hpp"

namespace evflow {

/// Prompt templates. Placeholders: planner <QUESTION>; refinement <q_text>
/// <q_vis> <error_type>; arbitration <BLACKBOARD> <q_text>; synthesis <VIDEO>
/// <QUESTION> <BLACKBOARD>; oracle user {q_txt} {Context_Note}.
struct PromptSet {
  std::string planner;
  std::string refinement;
  std::string arbitration;
  std::string synthesis;
  std::string oracle_system;
  std::string oracle_user;

  static PromptSet defaults();
  /// Defaults with any template path set in the config read from disk.
  static PromptSet from_config(const PipelineConfig& cfg);
};

inline constexpr std::string_view kJsonListReminder = "Reply with only the JSON list.";
inline constexpr std::string_view kJsonObjectReminder = "Reply with only the JSON object.";
inline constexpr std::string_view kHapContextNote =
    "Note: This image is a zoomed-in crop focusing on specific fine-grained details.";

/// Single-pass substitution: replaced values are never rescanned.
std::string fill_template(std::string_view tmpl, const std::map<std::string, std::string>& values);

/// Oracle user prompt; with an empty note the whole context line is dropped.
std::string render_oracle_user(std::string_view tmpl, const std::string& query, const std::string& context_note);

std::string with_reminder(const std::string& prompt, std::string_view reminder);

}  // namespace evflow
