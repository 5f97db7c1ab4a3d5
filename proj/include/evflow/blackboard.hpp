#pragma once

#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "evflow/config.hpp"
#include "evflow/gateway.hpp"
#include "evflow/perception.hpp"
#include "evflow/planner.hpp"
#include "evflow/prompts.hpp"
#include "evflow/trace.hpp"

namespace evflow {

/// Output of the arbitrator model for one evidence crop.
struct ArbitrationResult {
  std::string observation;
  double confidence = 0.0;
  bool conflict = false;
  std::string raw_text;
  std::optional<ErrorType> error_type;  // honored when the model supplies one
  std::vector<std::string> warnings;

  nlohmann::json to_json() const;
};

/// Parses {"observation","confidence","conflict"[,"error_type"]} from a reply.
/// Confidence outside [0,1] is clamped with a warning. nullopt when unusable.
std::optional<ArbitrationResult> parse_arbitration(std::string_view text);

struct Fact {
  std::string observation;
  std::string subquery_id;
  int frame_index = 0;
  std::string patch;  // PatchRef::label()
  double confidence = 0.0;
  int step = 0;

  nlohmann::json to_json() const;
  bool operator==(const Fact&) const = default;
};

/// Append-only store of accepted observations.
class Blackboard {
 public:
  const std::vector<Fact>& facts() const noexcept { return facts_; }
  int step_counter() const noexcept { return step_counter_; }
  bool empty() const noexcept { return facts_.empty(); }

  /// Copy with `fact` appended at the next step.
  Blackboard appended(Fact fact) const;

  /// "1. <obs>\n2. <obs>" or "None yet." when empty.
  std::string render() const;
  nlohmann::json to_json() const;

 private:
  std::vector<Fact> facts_;
  int step_counter_ = 0;
};

struct Accept {
  Fact fact;
};
struct Refine {
  RefinementSignal signal;
};
struct Drop {
  std::string reason;
};

struct Decision {
  std::variant<Accept, Refine, Drop> value;

  bool is_accept() const noexcept { return std::holds_alternative<Accept>(value); }
  bool is_refine() const noexcept { return std::holds_alternative<Refine>(value); }
  bool is_drop() const noexcept { return std::holds_alternative<Drop>(value); }
  std::string_view name() const noexcept;
};

std::string arbitration_prompt(const PromptSet& prompts, const SubQuery& sq, const Blackboard& board);

/// Asks the arbitrator to judge the evidence crop. One repair re-prompt on an
/// unparseable reply, then ParseError (Errc::arbitration_parse).
ArbitrationResult arbitrate(const Evidence& evidence, const SubQuery& sq, const Blackboard& board, ChatClient& chat,
                            const PipelineConfig& cfg, const PromptSet& prompts, Trace* trace = nullptr);

/// Accept iff confidence >= tau and no conflict; otherwise refine while budget
/// remains, else drop with the board unchanged.
std::pair<Blackboard, Decision> apply_arbitration(const Blackboard& board, const ArbitrationResult& result,
                                                  const Evidence& evidence, const SubQuery& sq, double tau,
                                                  int budget_left);

/// Unconditional append used when arbitration filtering is ablated.
std::pair<Blackboard, Decision> accumulate_unverified(const Blackboard& board, const ArbitrationResult& result,
                                                      const Evidence& evidence, const SubQuery& sq);

ErrorType classify_error(const ArbitrationResult& result, const Evidence& evidence);

}  // namespace evflow
