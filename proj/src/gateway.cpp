#include "evflow/gateway.hpp"

#include <algorithm>
#include <cmath>

#include "evflow/error.hpp"

namespace evflow {

std::string_view to_string(Role role) noexcept {
  switch (role) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
  }
  return "user";
}

void ChatMessage::validate() const {
  if (parts.empty()) throw Error(Errc::protocol, "chat message has no parts");
  if (role != Role::user && image_count() > 0) {
    throw Error(Errc::protocol, "image parts are only allowed in user messages");
  }
}

std::string ChatMessage::text() const {
  std::string out;
  for (const auto& p : parts) {
    if (const auto* t = std::get_if<TextPart>(&p)) out += t->text;
  }
  return out;
}

std::size_t ChatMessage::image_count() const {
  std::size_t n = 0;
  for (const auto& p : parts) n += std::holds_alternative<ImagePart>(p) ? 1 : 0;
  return n;
}

ChatMessage ChatMessage::system_text(std::string text) { return {Role::system, {TextPart{std::move(text)}}}; }

ChatMessage ChatMessage::user_text(std::string text) { return {Role::user, {TextPart{std::move(text)}}}; }

void check_messages(std::span<const ChatMessage> messages) {
  if (messages.empty()) throw Error(Errc::protocol, "no messages");
  for (const auto& m : messages) m.validate();
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dims() != b.dims()) throw DimensionMismatch(a.dims(), b.dims());
  const auto& x = a.values();
  const auto& y = b.values();
  double dot = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) dot += x[i] * y[i];
  if (a.normalized() && b.normalized()) return std::clamp(dot, -1.0, 1.0);
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw Error(Errc::zero_vector, "cosine similarity of a zero vector");
  return std::clamp(dot / (na * nb), -1.0, 1.0);
}

void DimensionGuard::check(std::size_t dims) {
  std::size_t expected = 0;
  if (dims_.compare_exchange_strong(expected, dims)) return;
  if (expected != dims) throw DimensionMismatch(expected, dims);
}

ChatResponse CountingChat::chat(std::span<const ChatMessage> messages, const ChatParams& params) {
  {
    std::lock_guard lock(mu_);
    ++counts_[params.purpose];
  }
  return inner_.chat(messages, params);
}

std::size_t CountingChat::total() const {
  std::lock_guard lock(mu_);
  std::size_t n = 0;
  for (const auto& [_, c] : counts_) n += c;
  return n;
}

std::size_t CountingChat::count(const std::string& purpose) const {
  std::lock_guard lock(mu_);
  auto it = counts_.find(purpose);
  return it == counts_.end() ? 0 : it->second;
}

std::map<std::string, std::size_t> CountingChat::by_purpose() const {
  std::lock_guard lock(mu_);
  return counts_;
}

EmbeddingVector CountingEmbed::embed_text(const std::string& text) {
  ++text_calls_;
  return inner_.embed_text(text);
}

EmbeddingVector CountingEmbed::embed_image(const Raster& raster) {
  ++image_calls_;
  return inner_.embed_image(raster);
}

ChatResponse RoutedChat::chat(std::span<const ChatMessage> messages, const ChatParams& params) {
  const bool planning = params.purpose == "plan" || params.purpose == "refine";
  return (planning ? planner_ : vlm_).chat(messages, params);
}

}  // namespace evflow
