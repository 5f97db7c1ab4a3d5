#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "evflow/gateway.hpp"

namespace evflow {

/// One scripted chat reply rule. A rule matches a call when every `contains`
/// substring occurs in the call's text and `position` (0-based call ordinal),
/// when set, equals the call index. With several `replies` they are consumed
/// in order and the rule stops matching once drained; a single reply repeats.
struct ChatRule {
  std::vector<std::string> contains;
  std::optional<std::size_t> position;
  std::vector<std::string> replies;
  std::optional<int> error_status;  // reply with ModelError instead
  std::string error_body;

  static ChatRule reply(std::string substring, std::string text);
  static ChatRule sequence(std::vector<std::string> substrings, std::vector<std::string> texts);
};

/// Deterministic chat backend replaying a rule list. Calls are serialized.
class ScriptedChat : public ChatClient {
 public:
  explicit ScriptedChat(std::vector<ChatRule> rules);

  ChatResponse chat(std::span<const ChatMessage> messages, const ChatParams& params) override;

  std::size_t calls() const;
  /// Text of every call so far, in order.
  std::vector<std::string> transcript() const;
  /// Images attached to each call, in call order.
  std::vector<std::vector<Raster>> images() const;

 private:
  struct RuleState {
    ChatRule rule;
    std::size_t consumed = 0;
  };
  mutable std::mutex mu_;
  std::vector<RuleState> rules_;
  std::vector<std::string> transcript_;
  std::vector<std::vector<Raster>> images_;
};

/// Lookup table behind a scripted embedder.
struct EmbeddingTable {
  std::map<std::string, std::vector<double>> text;
  std::map<std::string, std::vector<double>> images;  // key: Raster::digest()
  std::vector<Rgb> palette;  // non-empty: unmatched images embed as palette histograms
  std::optional<std::vector<double>> default_text;
  std::optional<std::vector<double>> default_image;
  std::function<std::optional<std::vector<double>>(const Raster&)> image_fn;
};

/// Fraction of pixels nearest to each palette colour (ties to the first).
std::vector<double> palette_histogram(const Raster& raster, const std::vector<Rgb>& palette);

class ScriptedEmbedder : public EmbedClient {
 public:
  explicit ScriptedEmbedder(EmbeddingTable table);

  /// Values as stored, before normalization.
  std::vector<double> raw_text(const std::string& text) const;
  std::vector<double> raw_image(const Raster& raster) const;

  EmbeddingVector embed_text(const std::string& text) override;
  EmbeddingVector embed_image(const Raster& raster) override;

 private:
  EmbeddingTable table_;
  DimensionGuard guard_;
};

/// Mock backend file: {"chat":[rules], "judge":[rules], "embeddings":{...}}.
struct BackendScript {
  std::vector<ChatRule> chat;
  std::vector<ChatRule> judge;
  EmbeddingTable embeddings;

  static BackendScript from_json(const nlohmann::json& j);
  static BackendScript load(const std::filesystem::path& path);
};

std::vector<ChatRule> parse_chat_rules(const nlohmann::json& rules);

}  // namespace evflow
