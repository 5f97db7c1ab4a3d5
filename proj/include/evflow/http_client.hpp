#pragma once

#include <chrono>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "evflow/gateway.hpp"

namespace evflow {

/// Splits "http://host:port/v1" into the origin and the path prefix.
struct Endpoint {
  std::string origin;     // scheme://host[:port]
  std::string base_path;  // no trailing slash, may be empty

  static Endpoint parse(const std::string& url);
  std::string route(std::string_view suffix) const;
};

std::string png_data_url(const Raster& raster);

/// Request body for POST {endpoint}/chat/completions.
nlohmann::json build_chat_request(const std::string& model, std::span<const ChatMessage> messages,
                                  const ChatParams& params);

/// Embedding input item: a plain string or {"type":"image_base64","data":...}.
nlohmann::json text_input(const std::string& text);
nlohmann::json image_input(const Raster& raster);
nlohmann::json build_embed_request(const std::string& model, const nlohmann::json& inputs);

/// Extracts choices[0].message.content; throws Errc::protocol when absent.
ChatResponse parse_chat_response(const std::string& body);
/// Extracts data[i].embedding, ordered by `index` when present.
std::vector<std::vector<double>> parse_embed_response(const std::string& body, std::size_t expected);

struct HttpOptions {
  std::chrono::milliseconds timeout{60000};
  std::string bearer_token;
};

class HttpChatClient : public ChatClient {
 public:
  HttpChatClient(const std::string& endpoint, std::string model, HttpOptions options = {});
  ChatResponse chat(std::span<const ChatMessage> messages, const ChatParams& params) override;

 private:
  Endpoint endpoint_;
  std::string model_;
  HttpOptions options_;
};

class HttpEmbedClient : public EmbedClient {
 public:
  HttpEmbedClient(const std::string& endpoint, std::string model, HttpOptions options = {});
  EmbeddingVector embed_text(const std::string& text) override;
  EmbeddingVector embed_image(const Raster& raster) override;

 private:
  EmbeddingVector embed_one(const nlohmann::json& input);

  Endpoint endpoint_;
  std::string model_;
  HttpOptions options_;
  DimensionGuard guard_;
};

/// POSTs a JSON body; one retry on transport timeout, none on HTTP errors.
std::string post_json(const Endpoint& endpoint, std::string_view route, const nlohmann::json& body,
                      const HttpOptions& options);

}  // namespace evflow
