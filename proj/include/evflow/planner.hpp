#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "evflow/config.hpp"
#include "evflow/gateway.hpp"
#include "evflow/prompts.hpp"
#include "evflow/trace.hpp"
#include "evflow/types.hpp"

namespace evflow {

enum class ErrorType { object_occlusion, temporal_mismatch, low_confidence, contradictory_evidence };

/// Label as it appears in the refinement prompt, e.g. "Object Occlusion".
std::string_view error_label(ErrorType type) noexcept;
/// Accepts labels and enum spellings, ignoring case, spaces and underscores.
std::optional<ErrorType> parse_error_type(std::string_view text);

struct RefinementSignal {
  std::string subquery_id;
  ErrorType error_type = ErrorType::low_confidence;
  std::string note;
};

struct PlanItem {
  std::string q_text;
  std::string q_vis;
};

struct PlanParseResult {
  std::vector<PlanItem> items;
  std::vector<std::string> warnings;  // one per dropped element
};

/// First recoverable JSON list of {q_text, q_vis}. Throws ParseError
/// (Errc::plan_parse) when no array can be recovered.
PlanParseResult parse_plan_json(std::string_view text);

/// The no_hdd passthrough: one sub-query whose text and visual phrase are the question.
ReasoningPlan passthrough_plan(const std::string& question);

/// Splits the question into sub-queries via the planner model. Emits `plan`
/// (and `warning` on repair or truncation). With no_hdd set, no call is made.
ReasoningPlan decompose(const std::string& question, ChatClient& chat, const PipelineConfig& cfg,
                        const PromptSet& prompts, Trace* trace = nullptr);

/// Renders the refinement prompt for a failed sub-query.
std::string refinement_prompt(const PromptSet& prompts, const SubQuery& sq, ErrorType error_type);

/// Regenerates a more granular sub-query (generation + 1, parent = sq.id).
/// Throws Errc::refinement_budget_exhausted when sq is already at the budget.
SubQuery refine_subquery(const SubQuery& sq, const RefinementSignal& signal, ChatClient& chat,
                         const PipelineConfig& cfg, const PromptSet& prompts, Trace* trace = nullptr);

}  // namespace evflow
