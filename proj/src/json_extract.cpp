#include "evflow/json_extract.hpp"

#include <cctype>
#include <string>
#include <vector>

namespace evflow {

using nlohmann::json;

namespace {

// Contents of ``` fences, in order of appearance.
std::vector<std::string> fenced_blocks(std::string_view text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const auto open = text.find("```", pos);
    if (open == std::string_view::npos) break;
    auto body = text.find('\n', open);
    if (body == std::string_view::npos) break;
    const auto close = text.find("```", body);
    if (close == std::string_view::npos) break;
    out.emplace_back(text.substr(body + 1, close - body - 1));
    pos = close + 3;
  }
  return out;
}

// End of the balanced span opening at `start`, skipping string literals.
std::size_t matching_close(std::string_view text, std::size_t start) {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = start; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '[' || c == '{') {
      ++depth;
    } else if (c == ']' || c == '}') {
      if (--depth == 0) return i;
    }
  }
  return std::string_view::npos;
}

std::string strip_trailing_commas(std::string_view text) {
  std::string out;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      out.push_back(c);
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') in_string = true;
    if (c == ',') {
      std::size_t j = i + 1;
      while (j < text.size() && std::isspace(static_cast<unsigned char>(text[j]))) ++j;
      if (j < text.size() && (text[j] == ']' || text[j] == '}')) continue;
    }
    out.push_back(c);
  }
  return out;
}

std::optional<json> try_parse(std::string_view span) {
  json j = json::parse(span, nullptr, false);
  if (!j.is_discarded()) return j;
  j = json::parse(strip_trailing_commas(span), nullptr, false);
  if (!j.is_discarded()) return j;
  return std::nullopt;
}

std::optional<json> scan(std::string_view text, char open, bool want_array) {
  for (std::size_t i = text.find(open); i != std::string_view::npos; i = text.find(open, i + 1)) {
    const auto close = matching_close(text, i);
    if (close == std::string_view::npos) continue;
    if (auto j = try_parse(text.substr(i, close - i + 1))) {
      if (want_array ? j->is_array() : j->is_object()) return j;
    }
  }
  return std::nullopt;
}

std::optional<json> extract(std::string_view text, char open, bool want_array) {
  for (const auto& block : fenced_blocks(text)) {
    if (auto j = scan(block, open, want_array)) return j;
  }
  return scan(text, open, want_array);
}

}  // namespace

std::optional<json> extract_json_array(std::string_view text) { return extract(text, '[', true); }

std::optional<json> extract_json_object(std::string_view text) { return extract(text, '{', false); }

}  // namespace evflow
