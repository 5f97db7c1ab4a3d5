#include "evflow/blackboard.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "evflow/error.hpp"
#include "evflow/json_extract.hpp"

namespace evflow {

using nlohmann::json;

json ArbitrationResult::to_json() const {
  json j{{"observation", observation}, {"confidence", confidence}, {"conflict", conflict}, {"raw_text", raw_text}};
  if (error_type) j["error_type"] = std::string(error_label(*error_type));
  if (!warnings.empty()) j["warnings"] = warnings;
  return j;
}

namespace {

std::optional<double> as_number(const json& v) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    try {
      std::size_t used = 0;
      const std::string s = trim(v.get<std::string>());
      double d = std::stod(s, &used);
      if (used == s.size()) return d;
    } catch (const std::exception&) {
    }
  }
  return std::nullopt;
}

std::optional<bool> as_bool(const json& v) {
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_number_integer()) {
    const auto i = v.get<long long>();
    if (i == 0 || i == 1) return i == 1;
  }
  if (v.is_string()) {
    std::string s = trim(v.get<std::string>());
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "true" || s == "yes") return true;
    if (s == "false" || s == "no") return false;
  }
  return std::nullopt;
}

}  // namespace

std::optional<ArbitrationResult> parse_arbitration(std::string_view text) {
  auto obj = extract_json_object(text);
  if (!obj || !obj->is_object()) return std::nullopt;
  const json& j = *obj;

  ArbitrationResult r;
  r.raw_text = std::string(text);
  if (!j.contains("observation") || !j["observation"].is_string()) return std::nullopt;
  r.observation = trim(j["observation"].get<std::string>());
  if (!j.contains("confidence")) return std::nullopt;
  auto conf = as_number(j["confidence"]);
  if (!conf || !std::isfinite(*conf)) return std::nullopt;
  if (*conf < 0.0 || *conf > 1.0) {
    r.warnings.push_back("confidence " + json(*conf).dump() + " clamped to [0,1]");
    conf = std::clamp(*conf, 0.0, 1.0);
  }
  r.confidence = *conf;

  if (j.contains("conflict")) {
    auto c = as_bool(j["conflict"]);
    if (!c) {
      r.warnings.push_back("unreadable conflict flag treated as false");
    }
    r.conflict = c.value_or(false);
  } else {
    r.warnings.push_back("missing conflict flag treated as false");
  }
  if (j.contains("error_type") && j["error_type"].is_string()) {
    r.error_type = parse_error_type(j["error_type"].get<std::string>());
  }
  return r;
}

json Fact::to_json() const {
  return {{"observation", observation}, {"subquery_id", subquery_id}, {"frame_index", frame_index},
          {"patch", patch},             {"confidence", confidence},   {"step", step}};
}

Blackboard Blackboard::appended(Fact fact) const {
  Blackboard next = *this;
  fact.step = ++next.step_counter_;
  next.facts_.push_back(std::move(fact));
  return next;
}

std::string Blackboard::render() const {
  if (facts_.empty()) return "None yet.";
  std::string out;
  for (std::size_t i = 0; i < facts_.size(); ++i) {
    if (i) out += '\n';
    out += std::to_string(i + 1) + ". " + facts_[i].observation;
  }
  return out;
}

json Blackboard::to_json() const {
  json facts = json::array();
  for (const auto& f : facts_) facts.push_back(f.to_json());
  return {{"facts", facts}, {"step_counter", step_counter_}};
}

std::string_view Decision::name() const noexcept {
  if (is_accept()) return "accept";
  if (is_refine()) return "refine";
  return "drop";
}

std::string arbitration_prompt(const PromptSet& prompts, const SubQuery& sq, const Blackboard& board) {
  return fill_template(prompts.arbitration, {{"<BLACKBOARD>", board.render()}, {"<q_text>", sq.q_text}});
}

ArbitrationResult arbitrate(const Evidence& evidence, const SubQuery& sq, const Blackboard& board, ChatClient& chat,
                            const PipelineConfig& cfg, const PromptSet& prompts, Trace* trace) {
  const std::string prompt = arbitration_prompt(prompts, sq, board);
  const ChatParams params{cfg.temperature, cfg.arbitration_max_tokens, "arbitration"};

  auto ask = [&](const std::string& text) {
    std::vector<ChatMessage> messages{{Role::user, {TextPart{text}, ImagePart{evidence.crop}}}};
    return chat.chat(messages, params).text;
  };

  std::string raw = ask(prompt);
  auto result = parse_arbitration(raw);
  if (!result) {
    trace_warn(trace, "parse_repair", {{"stage", "arbitration"}, {"subquery_id", sq.id}, {"raw_text", raw}});
    raw = ask(with_reminder(prompt, kJsonObjectReminder));
    result = parse_arbitration(raw);
    if (!result) {
      trace_warn(trace, "parse_failed", {{"stage", "arbitration"}, {"subquery_id", sq.id}, {"raw_text", raw}});
      throw ParseError(Errc::arbitration_parse, "arbitrator reply is not a JSON object after one re-prompt", raw);
    }
  }

  json payload = result->to_json();
  payload["subquery_id"] = sq.id;
  payload["evidence"] = evidence.summary();
  trace_emit(trace, "arbitration", std::move(payload));
  for (const auto& w : result->warnings) {
    trace_warn(trace, "arbitration_repair", {{"subquery_id", sq.id}, {"message", w}});
  }
  return *result;
}

namespace {

Fact fact_from(const ArbitrationResult& result, const Evidence& evidence, const SubQuery& sq) {
  return {result.observation, sq.id, evidence.frame_index, evidence.patch.label(), result.confidence, 0};
}

}  // namespace

std::pair<Blackboard, Decision> apply_arbitration(const Blackboard& board, const ArbitrationResult& result,
                                                  const Evidence& evidence, const SubQuery& sq, double tau,
                                                  int budget_left) {
  if (result.confidence >= tau && !result.conflict) {
    Blackboard next = board.appended(fact_from(result, evidence, sq));
    Fact stored = next.facts().back();
    return {std::move(next), Decision{Accept{std::move(stored)}}};
  }
  if (budget_left > 0) {
    return {board, Decision{Refine{RefinementSignal{sq.id, classify_error(result, evidence), result.observation}}}};
  }
  return {board, Decision{Drop{"budget exhausted"}}};
}

std::pair<Blackboard, Decision> accumulate_unverified(const Blackboard& board, const ArbitrationResult& result,
                                                      const Evidence& evidence, const SubQuery& sq) {
  Blackboard next = board.appended(fact_from(result, evidence, sq));
  Fact stored = next.facts().back();
  return {std::move(next), Decision{Accept{std::move(stored)}}};
}

ErrorType classify_error(const ArbitrationResult& result, const Evidence& evidence) {
  if (result.error_type) return *result.error_type;
  if (result.conflict) return ErrorType::contradictory_evidence;
  if (evidence.scored && evidence.similarity < 0.2) return ErrorType::temporal_mismatch;
  std::string lowered = result.observation;
  std::transform(lowered.begin(), lowered.end(), lowered.begin(), [](unsigned char c) { return std::tolower(c); });
  for (std::string_view marker : {"occlud", "blur", "hidden", "blocked"}) {
    if (lowered.find(marker) != std::string::npos) return ErrorType::object_occlusion;
  }
  return ErrorType::low_confidence;
}

}  // namespace evflow
