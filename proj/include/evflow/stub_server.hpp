#pragma once

#include <chrono>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "evflow/gateway.hpp"
#include "evflow/mock.hpp"

namespace httplib {
class Server;
}

namespace evflow {

/// Schema checks for the two wire requests. Empty result means valid.
std::vector<std::string> validate_chat_request(const nlohmann::json& body);
std::vector<std::string> validate_embed_request(const nlohmann::json& body);

/// Decodes a wire chat request back into messages (images from data URLs).
std::vector<ChatMessage> decode_chat_messages(const nlohmann::json& body);

/// Loopback HTTP server speaking the chat and embedding protocols. Every
/// request body is validated and recorded; invalid bodies get HTTP 400.
/// Replies come from the given scripted backends.
class StubServer {
 public:
  struct Recorded {
    std::string path;
    nlohmann::json body;
    std::vector<std::string> errors;
  };

  /// Port 0 picks a free port.
  StubServer(ChatClient& chat, ScriptedEmbedder& embedder, const std::string& host = "127.0.0.1", int port = 0);
  ~StubServer();
  StubServer(const StubServer&) = delete;
  StubServer& operator=(const StubServer&) = delete;

  /// http://<host>:<port>
  std::string base_url() const;
  int port() const noexcept { return port_; }

  /// The next request (either route) is answered with this status and body.
  void fail_next(int status, std::string body);
  /// Every response is delayed; used to exercise client timeouts.
  void set_delay(std::chrono::milliseconds delay);

  std::vector<Recorded> requests() const;

  /// Blocks until the server stops.
  void wait();

 private:
  void install_routes();
  std::optional<std::pair<int, std::string>> take_fault();

  ChatClient& chat_;
  ScriptedEmbedder& embedder_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  std::string host_;
  int port_ = 0;

  mutable std::mutex mu_;
  std::vector<Recorded> recorded_;
  std::optional<std::pair<int, std::string>> fault_;
  std::chrono::milliseconds delay_{0};
};

}  // namespace evflow
