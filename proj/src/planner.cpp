#include "evflow/planner.hpp"

#include <algorithm>
#include <cctype>

#include "evflow/error.hpp"
#include "evflow/json_extract.hpp"

namespace evflow {

using nlohmann::json;

std::string_view error_label(ErrorType type) noexcept {
  switch (type) {
    case ErrorType::object_occlusion: return "Object Occlusion";
    case ErrorType::temporal_mismatch: return "Temporal Mismatch";
    case ErrorType::low_confidence: return "Low Confidence";
    case ErrorType::contradictory_evidence: return "Contradictory Evidence";
  }
  return "Low Confidence";
}

std::optional<ErrorType> parse_error_type(std::string_view text) {
  std::string key;
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) key.push_back(static_cast<char>(std::tolower(c)));
  }
  if (key == "objectocclusion" || key == "objectocclusionblur") return ErrorType::object_occlusion;
  if (key == "temporalmismatch") return ErrorType::temporal_mismatch;
  if (key == "lowconfidence") return ErrorType::low_confidence;
  if (key == "contradictoryevidence" || key == "contradiction") return ErrorType::contradictory_evidence;
  return std::nullopt;
}

namespace {

std::optional<std::string> non_empty_string(const json& obj, const char* field) {
  if (!obj.is_object() || !obj.contains(field) || !obj[field].is_string()) return std::nullopt;
  auto s = trim(obj[field].get<std::string>());
  if (s.empty()) return std::nullopt;
  return s;
}

std::optional<PlanItem> parse_refined_item(std::string_view text) {
  auto obj = extract_json_object(text);
  if (!obj) return std::nullopt;
  auto q_text = non_empty_string(*obj, "q_text");
  auto q_vis = non_empty_string(*obj, "q_vis");
  if (!q_text || !q_vis) return std::nullopt;
  return PlanItem{*q_text, *q_vis};
}

std::string root_id(const std::string& id) {
  const auto pos = id.find(".r");
  return pos == std::string::npos ? id : id.substr(0, pos);
}

}  // namespace

PlanParseResult parse_plan_json(std::string_view text) {
  auto arr = extract_json_array(text);
  if (!arr) throw ParseError(Errc::plan_parse, "no JSON list found in planner reply", std::string(text));
  PlanParseResult out;
  for (std::size_t i = 0; i < arr->size(); ++i) {
    const auto& el = (*arr)[i];
    auto q_text = non_empty_string(el, "q_text");
    auto q_vis = non_empty_string(el, "q_vis");
    if (!q_text || !q_vis) {
      out.warnings.push_back("plan element " + std::to_string(i) + " dropped: missing " +
                             (!q_text ? "q_text" : "q_vis"));
      continue;
    }
    out.items.push_back({*q_text, *q_vis});
  }
  return out;
}

ReasoningPlan passthrough_plan(const std::string& question) {
  ReasoningPlan plan;
  plan.original_question = question;
  plan.subqueries.push_back({"sq1", question, question, 0, std::nullopt});
  return plan;
}

ReasoningPlan decompose(const std::string& question, ChatClient& chat, const PipelineConfig& cfg,
                        const PromptSet& prompts, Trace* trace) {
  if (trim(question).empty()) throw Error(Errc::invalid_argument, "question is empty");
  if (cfg.has(Ablation::no_hdd)) {
    auto plan = passthrough_plan(question);
    trace_emit(trace, "plan", {{"source", "passthrough"}, {"subqueries", json::array({plan.subqueries[0].to_json()})}});
    return plan;
  }

  const std::string prompt = fill_template(prompts.planner, {{"<QUESTION>", question}});
  const ChatParams params{cfg.temperature, cfg.plan_max_tokens, "plan"};

  std::vector<ChatMessage> messages{ChatMessage::user_text(prompt)};
  std::string raw = chat.chat(messages, params).text;
  std::optional<PlanParseResult> parsed;
  try {
    parsed = parse_plan_json(raw);
  } catch (const ParseError&) {
    trace_warn(trace, "parse_repair", {{"stage", "plan"}, {"raw_text", raw}});
    messages = {ChatMessage::user_text(with_reminder(prompt, kJsonListReminder))};
    raw = chat.chat(messages, params).text;
    try {
      parsed = parse_plan_json(raw);
    } catch (const ParseError& e) {
      trace_warn(trace, "parse_failed", {{"stage", "plan"}, {"raw_text", raw}});
      throw ParseError(Errc::plan_parse, "planner reply is not a JSON list after one re-prompt", raw);
    }
  }

  for (const auto& w : parsed->warnings) trace_warn(trace, "plan_item_dropped", {{"message", w}});
  if (parsed->items.empty()) {
    trace_emit(trace, "plan", {{"source", "planner"}, {"raw_text", raw}, {"subqueries", json::array()}});
    throw ParseError(Errc::empty_plan, "planner returned an empty plan", raw);
  }

  const std::size_t returned = parsed->items.size();
  const auto cap = static_cast<std::size_t>(cfg.max_subqueries);
  if (returned > cap) parsed->items.resize(cap);

  ReasoningPlan plan;
  plan.original_question = question;
  json listed = json::array();
  for (std::size_t i = 0; i < parsed->items.size(); ++i) {
    SubQuery sq{"sq" + std::to_string(i + 1), parsed->items[i].q_text, parsed->items[i].q_vis, 0, std::nullopt};
    sq.validate();
    listed.push_back(sq.to_json());
    plan.subqueries.push_back(std::move(sq));
  }
  json payload{{"source", "planner"}, {"raw_text", raw}, {"subqueries", listed}};
  if (returned > cap) {
    payload["truncated_from"] = returned;
    trace_emit(trace, "plan", std::move(payload));
    trace_warn(trace, "plan_truncated", {{"returned", returned}, {"kept", cap}});
  } else {
    trace_emit(trace, "plan", std::move(payload));
  }
  return plan;
}

std::string refinement_prompt(const PromptSet& prompts, const SubQuery& sq, ErrorType error_type) {
  return fill_template(prompts.refinement, {{"<q_text>", sq.q_text},
                                            {"<q_vis>", sq.q_vis},
                                            {"<error_type>", std::string(error_label(error_type))}});
}

SubQuery refine_subquery(const SubQuery& sq, const RefinementSignal& signal, ChatClient& chat,
                         const PipelineConfig& cfg, const PromptSet& prompts, Trace* trace) {
  if (sq.generation >= cfg.max_refinements) {
    throw Error(Errc::refinement_budget_exhausted,
                "sub-query " + sq.id + " already used " + std::to_string(sq.generation) + " refinements");
  }
  const std::string prompt = refinement_prompt(prompts, sq, signal.error_type);
  const ChatParams params{cfg.temperature, cfg.plan_max_tokens, "refine"};

  std::vector<ChatMessage> messages{ChatMessage::user_text(prompt)};
  std::string raw = chat.chat(messages, params).text;
  auto item = parse_refined_item(raw);
  if (!item) {
    trace_warn(trace, "parse_repair", {{"stage", "refine"}, {"subquery_id", sq.id}, {"raw_text", raw}});
    messages = {ChatMessage::user_text(with_reminder(prompt, kJsonObjectReminder))};
    raw = chat.chat(messages, params).text;
    item = parse_refined_item(raw);
    if (!item) {
      trace_warn(trace, "parse_failed", {{"stage", "refine"}, {"subquery_id", sq.id}, {"raw_text", raw}});
      throw ParseError(Errc::plan_parse, "refinement reply is not a JSON object after one re-prompt", raw);
    }
  }

  SubQuery refined;
  refined.generation = sq.generation + 1;
  refined.id = root_id(sq.id) + ".r" + std::to_string(refined.generation);
  refined.q_text = item->q_text;
  refined.q_vis = item->q_vis;
  refined.parent_id = sq.id;
  refined.validate();

  trace_emit(trace, "refine", {{"from", sq.to_json()},
                               {"error_type", std::string(error_label(signal.error_type))},
                               {"note", signal.note},
                               {"to", refined.to_json()},
                               {"raw_text", raw}});
  return refined;
}

}  // namespace evflow
