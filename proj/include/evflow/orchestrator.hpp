#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "evflow/blackboard.hpp"
#include "evflow/config.hpp"
#include "evflow/gateway.hpp"
#include "evflow/prompts.hpp"
#include "evflow/trace.hpp"
#include "evflow/types.hpp"

namespace evflow {

struct Option {
  std::string letter;
  std::string text;
};

inline constexpr std::string_view kUnparsed = "UNPARSED";

struct SubqueryOutcome {
  std::string root_id;
  std::string final_id;
  std::string status;  // accepted | dropped
  int refinements = 0;
  int arbitrations = 0;

  nlohmann::json to_json() const;
};

struct AnswerRecord {
  std::string question_id;
  std::string predicted{kUnparsed};
  std::string raw_text;
  std::optional<std::string> error;
  std::vector<SubqueryOutcome> subqueries;
  std::size_t chat_calls = 0;
  std::map<std::string, std::size_t> chat_calls_by_purpose;
  std::size_t embed_calls = 0;
  nlohmann::json config;
  Blackboard board;

  nlohmann::json to_json() const;
};

struct Backends {
  ChatClient& chat;
  EmbedClient& embed;
};

/// Plan, gather evidence per sub-query with the refinement loop, then
/// synthesize. Stage failures are caught and reported on the record.
AnswerRecord answer_question(const FrameSequence& frames, const std::string& question,
                             const std::vector<Option>& options, const PipelineConfig& cfg, Backends backends,
                             const PromptSet& prompts, Trace& trace, const std::string& question_id = "q");

/// "question\nA. text\nB. text"
std::string format_question(const std::string& question, const std::vector<Option>& options);

/// Final prompt split around <VIDEO>: text, frames as images, text.
std::vector<ChatMessage> synthesis_messages(const std::string& question, const std::vector<Option>& options,
                                            const Blackboard& board, const FrameSequence& frames,
                                            const PromptSet& prompts, const std::vector<Raster>& extra_images = {});

/// Option letter from a free-form reply; kUnparsed when ambiguous.
std::string parse_answer_letter(std::string_view reply, const std::vector<Option>& options);

/// Returns (letter, raw reply text).
std::pair<std::string, std::string> synthesize_answer(const std::string& question, const std::vector<Option>& options,
                                                      const Blackboard& board, const FrameSequence& frames,
                                                      const PipelineConfig& cfg, ChatClient& chat,
                                                      const PromptSet& prompts, Trace* trace = nullptr,
                                                      const std::vector<Raster>& extra_images = {});

}  // namespace evflow
