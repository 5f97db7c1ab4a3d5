#pragma once

#include <atomic>
#include <cstddef>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "evflow/raster.hpp"
#include "evflow/types.hpp"

namespace evflow {

enum class Role { system, user, assistant };

std::string_view to_string(Role role) noexcept;

struct TextPart {
  std::string text;
};

struct ImagePart {
  Raster image;
};

using Part = std::variant<TextPart, ImagePart>;

struct ChatMessage {
  Role role = Role::user;
  std::vector<Part> parts;

  /// At least one part; images only in user messages.
  void validate() const;
  /// Concatenated text parts.
  std::string text() const;
  std::size_t image_count() const;

  static ChatMessage system_text(std::string text);
  static ChatMessage user_text(std::string text);
};

struct ChatParams {
  double temperature = 0.0;
  int max_tokens = 512;
  // Accounting tag: plan, refine, arbitration, synthesis, judge.
  std::string purpose;
};

struct Usage {
  int prompt_tokens = 0;
  int completion_tokens = 0;
};

struct ChatResponse {
  std::string text;
  Usage usage;
};

/// Chat-completion capability (planner LLM, arbitrator/synthesizer VLM, judge).
/// Implementations must tolerate concurrent calls.
class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual ChatResponse chat(std::span<const ChatMessage> messages, const ChatParams& params) = 0;
};

/// Dual-encoder capability. Returned vectors are always L2-normalized.
class EmbedClient {
 public:
  virtual ~EmbedClient() = default;
  virtual EmbeddingVector embed_text(const std::string& text) = 0;
  virtual EmbeddingVector embed_image(const Raster& raster) = 0;
};

/// Throws Errc::protocol for an empty list and validates every message.
void check_messages(std::span<const ChatMessage> messages);

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

/// Pins the vector size of the first embedding seen in a session.
class DimensionGuard {
 public:
  void check(std::size_t dims);
  void reset() noexcept { dims_.store(0); }

 private:
  std::atomic<std::size_t> dims_{0};
};

/// Forwards to another chat client and counts calls per purpose.
class CountingChat : public ChatClient {
 public:
  explicit CountingChat(ChatClient& inner) : inner_(inner) {}
  ChatResponse chat(std::span<const ChatMessage> messages, const ChatParams& params) override;

  std::size_t total() const;
  std::size_t count(const std::string& purpose) const;
  std::map<std::string, std::size_t> by_purpose() const;

 private:
  ChatClient& inner_;
  mutable std::mutex mu_;
  std::map<std::string, std::size_t> counts_;
};

/// Sends plan and refine calls to the planner model, everything else to the VLM.
class RoutedChat : public ChatClient {
 public:
  RoutedChat(ChatClient& planner, ChatClient& vlm) : planner_(planner), vlm_(vlm) {}
  ChatResponse chat(std::span<const ChatMessage> messages, const ChatParams& params) override;

 private:
  ChatClient& planner_;
  ChatClient& vlm_;
};

class CountingEmbed : public EmbedClient {
 public:
  explicit CountingEmbed(EmbedClient& inner) : inner_(inner) {}
  EmbeddingVector embed_text(const std::string& text) override;
  EmbeddingVector embed_image(const Raster& raster) override;

  std::size_t text_calls() const noexcept { return text_calls_.load(); }
  std::size_t image_calls() const noexcept { return image_calls_.load(); }
  std::size_t total() const noexcept { return text_calls() + image_calls(); }

 private:
  EmbedClient& inner_;
  std::atomic<std::size_t> text_calls_{0};
  std::atomic<std::size_t> image_calls_{0};
};

}  // namespace evflow
