#include "evflow/http_client.hpp"

#include <regex>

#include <httplib.h>

#include "evflow/error.hpp"
#include "evflow/image_io.hpp"

namespace evflow {

using nlohmann::json;

Endpoint Endpoint::parse(const std::string& url) {
  static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) {
    throw Error(Errc::transport, "endpoint must look like http://host[:port][/path], got '" + url + "'");
  }
  Endpoint e;
  e.origin = m[1].str();
  e.base_path = m[2].matched ? m[2].str() : "";
  while (!e.base_path.empty() && e.base_path.back() == '/') e.base_path.pop_back();
  return e;
}

std::string Endpoint::route(std::string_view suffix) const { return base_path + std::string(suffix); }

std::string png_data_url(const Raster& raster) {
  return "data:image/png;base64," + base64_encode(encode_png(raster));
}

json build_chat_request(const std::string& model, std::span<const ChatMessage> messages, const ChatParams& params) {
  json msgs = json::array();
  for (const auto& m : messages) {
    json content = json::array();
    for (const auto& p : m.parts) {
      if (const auto* t = std::get_if<TextPart>(&p)) {
        content.push_back({{"type", "text"}, {"text", t->text}});
      } else {
        const auto& img = std::get<ImagePart>(p);
        content.push_back({{"type", "image_url"}, {"image_url", {{"url", png_data_url(img.image)}}}});
      }
    }
    msgs.push_back({{"role", std::string(to_string(m.role))}, {"content", std::move(content)}});
  }
  return {{"model", model}, {"messages", std::move(msgs)}, {"temperature", params.temperature},
          {"max_tokens", params.max_tokens}};
}

json text_input(const std::string& text) { return text; }

json image_input(const Raster& raster) {
  return {{"type", "image_base64"}, {"data", base64_encode(encode_png(raster))}};
}

json build_embed_request(const std::string& model, const json& inputs) {
  return {{"model", model}, {"input", inputs}};
}

ChatResponse parse_chat_response(const std::string& body) {
  const json j = json::parse(body, nullptr, false);
  if (j.is_discarded()) throw Error(Errc::protocol, "chat response is not JSON");
  const json* content = nullptr;
  if (j.contains("choices") && j["choices"].is_array() && !j["choices"].empty()) {
    const auto& choice = j["choices"][0];
    if (choice.contains("message") && choice["message"].is_object() && choice["message"].contains("content")) {
      content = &choice["message"]["content"];
    }
  }
  if (!content) throw Error(Errc::protocol, "chat response lacks choices[0].message.content");
  ChatResponse r;
  if (content->is_string()) {
    r.text = content->get<std::string>();
  } else if (content->is_array()) {
    for (const auto& part : *content) {
      if (part.is_object() && part.value("type", "") == "text" && part.contains("text") && part["text"].is_string()) {
        r.text += part["text"].get<std::string>();
      }
    }
  } else if (!content->is_null()) {
    throw Error(Errc::protocol, "chat response content has an unexpected type");
  }
  if (j.contains("usage") && j["usage"].is_object()) {
    r.usage.prompt_tokens = j["usage"].value("prompt_tokens", 0);
    r.usage.completion_tokens = j["usage"].value("completion_tokens", 0);
  }
  return r;
}

std::vector<std::vector<double>> parse_embed_response(const std::string& body, std::size_t expected) {
  const json j = json::parse(body, nullptr, false);
  if (j.is_discarded()) throw Error(Errc::protocol, "embedding response is not JSON");
  if (!j.contains("data") || !j["data"].is_array()) throw Error(Errc::protocol, "embedding response lacks data[]");
  const auto& data = j["data"];
  if (data.size() != expected) {
    throw Error(Errc::protocol, "embedding response has " + std::to_string(data.size()) + " items, expected " +
                                    std::to_string(expected));
  }
  std::vector<std::vector<double>> out(expected);
  std::vector<bool> filled(expected, false);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& item = data[i];
    if (!item.is_object() || !item.contains("embedding") || !item["embedding"].is_array()) {
      throw Error(Errc::protocol, "data[" + std::to_string(i) + "].embedding missing");
    }
    std::size_t slot = i;
    if (item.contains("index") && item["index"].is_number_unsigned()) slot = item["index"].get<std::size_t>();
    if (slot >= expected || filled[slot]) throw Error(Errc::protocol, "embedding response has a bad index");
    filled[slot] = true;
    for (const auto& v : item["embedding"]) {
      if (!v.is_number()) throw Error(Errc::protocol, "embedding contains a non-number");
      out[slot].push_back(v.get<double>());
    }
  }
  return out;
}

std::string post_json(const Endpoint& endpoint, std::string_view route, const json& body,
                      const HttpOptions& options) {
  const std::string payload = body.dump();
  const std::string path = endpoint.route(route);
  for (int attempt = 0; attempt < 2; ++attempt) {
    // Client instances are not thread-safe; one per request.
    httplib::Client client(endpoint.origin);
    client.set_connection_timeout(options.timeout);
    client.set_read_timeout(options.timeout);
    client.set_write_timeout(options.timeout);
    if (!options.bearer_token.empty()) client.set_bearer_token_auth(options.bearer_token);
    auto res = client.Post(path, payload, "application/json");
    if (!res) {
      const auto err = res.error();
      const bool timeout = err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read;
      if (timeout && attempt == 0) continue;
      throw Error(Errc::transport, "POST " + endpoint.origin + path + " failed: " + httplib::to_string(err));
    }
    if (res->status >= 400) throw ModelError(res->status, res->body);
    return res->body;
  }
  throw Error(Errc::transport, "POST " + endpoint.origin + path + " timed out");
}

HttpChatClient::HttpChatClient(const std::string& endpoint, std::string model, HttpOptions options)
    : endpoint_(Endpoint::parse(endpoint)), model_(std::move(model)), options_(std::move(options)) {}

ChatResponse HttpChatClient::chat(std::span<const ChatMessage> messages, const ChatParams& params) {
  check_messages(messages);
  const auto body = post_json(endpoint_, "/chat/completions", build_chat_request(model_, messages, params), options_);
  return parse_chat_response(body);
}

HttpEmbedClient::HttpEmbedClient(const std::string& endpoint, std::string model, HttpOptions options)
    : endpoint_(Endpoint::parse(endpoint)), model_(std::move(model)), options_(std::move(options)) {}

EmbeddingVector HttpEmbedClient::embed_one(const json& input) {
  const auto body = post_json(endpoint_, "/embeddings", build_embed_request(model_, json::array({input})), options_);
  auto vectors = parse_embed_response(body, 1);
  guard_.check(vectors[0].size());
  return EmbeddingVector::normalized_from(std::move(vectors[0]));
}

EmbeddingVector HttpEmbedClient::embed_text(const std::string& text) {
  if (trim(text).empty()) throw Error(Errc::invalid_argument, "cannot embed empty text");
  return embed_one(text_input(text));
}

EmbeddingVector HttpEmbedClient::embed_image(const Raster& raster) { return embed_one(image_input(raster)); }

}  // namespace evflow
