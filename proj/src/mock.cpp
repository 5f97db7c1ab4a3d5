#include "evflow/mock.hpp"

#include <fstream>

#include "evflow/error.hpp"

namespace evflow {

using nlohmann::json;

ChatRule ChatRule::reply(std::string substring, std::string text) {
  ChatRule r;
  r.contains.push_back(std::move(substring));
  r.replies.push_back(std::move(text));
  return r;
}

ChatRule ChatRule::sequence(std::vector<std::string> substrings, std::vector<std::string> texts) {
  ChatRule r;
  r.contains = std::move(substrings);
  r.replies = std::move(texts);
  return r;
}

ScriptedChat::ScriptedChat(std::vector<ChatRule> rules) {
  for (auto& r : rules) rules_.push_back({std::move(r), 0});
}

ChatResponse ScriptedChat::chat(std::span<const ChatMessage> messages, const ChatParams&) {
  check_messages(messages);
  std::string text;
  std::vector<Raster> images;
  for (const auto& m : messages) {
    if (!text.empty()) text += '\n';
    text += m.text();
    for (const auto& p : m.parts) {
      if (const auto* img = std::get_if<ImagePart>(&p)) images.push_back(img->image);
    }
  }

  std::lock_guard lock(mu_);
  const std::size_t call = transcript_.size();
  transcript_.push_back(text);
  images_.push_back(std::move(images));

  for (auto& state : rules_) {
    const auto& rule = state.rule;
    if (rule.position && *rule.position != call) continue;
    bool all = true;
    for (const auto& needle : rule.contains) {
      if (text.find(needle) == std::string::npos) {
        all = false;
        break;
      }
    }
    if (!all) continue;
    if (rule.error_status) throw ModelError(*rule.error_status, rule.error_body);
    if (rule.replies.size() == 1) return {rule.replies.front(), {}};
    if (state.consumed >= rule.replies.size()) continue;
    return {rule.replies[state.consumed++], {}};
  }
  throw Error(Errc::protocol, "scripted chat has no rule for call #" + std::to_string(call) + ": " +
                                  text.substr(0, 160));
}

std::size_t ScriptedChat::calls() const {
  std::lock_guard lock(mu_);
  return transcript_.size();
}

std::vector<std::string> ScriptedChat::transcript() const {
  std::lock_guard lock(mu_);
  return transcript_;
}

std::vector<std::vector<Raster>> ScriptedChat::images() const {
  std::lock_guard lock(mu_);
  return images_;
}

std::vector<double> palette_histogram(const Raster& raster, const std::vector<Rgb>& palette) {
  std::vector<double> counts(palette.size(), 0.0);
  const auto data = raster.data();
  for (std::size_t i = 0; i + 2 < data.size(); i += 3) {
    std::size_t best = 0;
    long best_d = -1;
    for (std::size_t p = 0; p < palette.size(); ++p) {
      const long dr = static_cast<long>(data[i]) - palette[p].r;
      const long dg = static_cast<long>(data[i + 1]) - palette[p].g;
      const long db = static_cast<long>(data[i + 2]) - palette[p].b;
      const long d = dr * dr + dg * dg + db * db;
      if (best_d < 0 || d < best_d) {
        best_d = d;
        best = p;
      }
    }
    counts[best] += 1.0;
  }
  const double total = static_cast<double>(data.size() / 3);
  for (double& c : counts) c /= total;
  return counts;
}

ScriptedEmbedder::ScriptedEmbedder(EmbeddingTable table) : table_(std::move(table)) {}

std::vector<double> ScriptedEmbedder::raw_text(const std::string& text) const {
  if (auto it = table_.text.find(text); it != table_.text.end()) return it->second;
  if (table_.default_text) return *table_.default_text;
  throw Error(Errc::protocol, "scripted embedder has no entry for text '" + text + "'");
}

std::vector<double> ScriptedEmbedder::raw_image(const Raster& raster) const {
  if (!table_.images.empty()) {
    if (auto it = table_.images.find(raster.digest()); it != table_.images.end()) return it->second;
  }
  if (table_.image_fn) {
    if (auto v = table_.image_fn(raster)) return *v;
  }
  if (!table_.palette.empty()) return palette_histogram(raster, table_.palette);
  if (table_.default_image) return *table_.default_image;
  throw Error(Errc::protocol, "scripted embedder has no entry for image " + raster.digest());
}

EmbeddingVector ScriptedEmbedder::embed_text(const std::string& text) {
  if (trim(text).empty()) throw Error(Errc::invalid_argument, "cannot embed empty text");
  auto v = raw_text(text);
  guard_.check(v.size());
  return EmbeddingVector::normalized_from(std::move(v));
}

EmbeddingVector ScriptedEmbedder::embed_image(const Raster& raster) {
  auto v = raw_image(raster);
  guard_.check(v.size());
  return EmbeddingVector::normalized_from(std::move(v));
}

namespace {

std::vector<double> as_vector(const json& j, const std::string& where) {
  if (!j.is_array()) throw Error(Errc::schema, where + " must be an array of numbers");
  std::vector<double> out;
  for (const auto& v : j) {
    if (!v.is_number()) throw Error(Errc::schema, where + " must be an array of numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace

std::vector<ChatRule> parse_chat_rules(const json& rules) {
  std::vector<ChatRule> out;
  if (rules.is_null()) return out;
  if (!rules.is_array()) throw Error(Errc::schema, "chat rules must be an array");
  for (std::size_t i = 0; i < rules.size(); ++i) {
    const auto& r = rules[i];
    const std::string where = "chat rule " + std::to_string(i);
    if (!r.is_object()) throw Error(Errc::schema, where + " must be an object");
    ChatRule rule;
    if (r.contains("contains")) {
      const auto& c = r["contains"];
      if (c.is_string()) {
        rule.contains.push_back(c.get<std::string>());
      } else if (c.is_array()) {
        for (const auto& s : c) rule.contains.push_back(s.get<std::string>());
      } else {
        throw Error(Errc::schema, where + ": contains must be a string or list");
      }
    }
    if (r.contains("position")) rule.position = r["position"].get<std::size_t>();
    if (r.contains("reply")) rule.replies.push_back(r["reply"].get<std::string>());
    if (r.contains("replies")) {
      for (const auto& s : r["replies"]) rule.replies.push_back(s.get<std::string>());
    }
    if (r.contains("error")) {
      rule.error_status = r["error"].value("status", 500);
      rule.error_body = r["error"].value("body", std::string("scripted failure"));
    }
    if (rule.replies.empty() && !rule.error_status) throw Error(Errc::schema, where + " has no reply");
    out.push_back(std::move(rule));
  }
  return out;
}

BackendScript BackendScript::from_json(const json& j) {
  if (!j.is_object()) throw Error(Errc::schema, "mock script must be a JSON object");
  BackendScript s;
  s.chat = parse_chat_rules(j.value("chat", json()));
  s.judge = parse_chat_rules(j.value("judge", json()));
  const json e = j.value("embeddings", json::object());
  if (e.contains("text")) {
    for (const auto& [k, v] : e["text"].items()) s.embeddings.text[k] = as_vector(v, "embeddings.text." + k);
  }
  if (e.contains("images")) {
    for (const auto& [k, v] : e["images"].items()) s.embeddings.images[k] = as_vector(v, "embeddings.images." + k);
  }
  if (e.contains("palette")) {
    for (const auto& c : e["palette"]) {
      if (!c.is_array() || c.size() != 3) throw Error(Errc::schema, "palette entries must be [r,g,b]");
      s.embeddings.palette.push_back(
          {c[0].get<std::uint8_t>(), c[1].get<std::uint8_t>(), c[2].get<std::uint8_t>()});
    }
  }
  if (e.contains("default_text")) s.embeddings.default_text = as_vector(e["default_text"], "default_text");
  if (e.contains("default_image")) s.embeddings.default_image = as_vector(e["default_image"], "default_image");
  return s;
}

BackendScript BackendScript::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open mock script " + path.string());
  const json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(Errc::schema, "mock script " + path.string() + " is not valid JSON");
  return from_json(j);
}

}  // namespace evflow
