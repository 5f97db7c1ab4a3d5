#include "evflow/stub_server.hpp"

#include <httplib.h>

#include "evflow/error.hpp"
#include "evflow/http_client.hpp"
#include "evflow/image_io.hpp"

namespace evflow {

using nlohmann::json;

namespace {

constexpr std::string_view kDataUrlPrefix = "data:image/png;base64,";

void require(std::vector<std::string>& errors, bool ok, std::string message) {
  if (!ok) errors.push_back(std::move(message));
}

}  // namespace

std::vector<std::string> validate_chat_request(const json& body) {
  std::vector<std::string> errors;
  if (!body.is_object()) return {"body must be an object"};
  require(errors, body.contains("model") && body["model"].is_string(), "model must be a string");
  require(errors, body.contains("temperature") && body["temperature"].is_number(), "temperature must be a number");
  require(errors, body.contains("max_tokens") && body["max_tokens"].is_number_integer(),
          "max_tokens must be an integer");
  if (!body.contains("messages") || !body["messages"].is_array() || body["messages"].empty()) {
    errors.emplace_back("messages must be a non-empty array");
    return errors;
  }
  for (std::size_t i = 0; i < body["messages"].size(); ++i) {
    const auto& m = body["messages"][i];
    const std::string at = "messages[" + std::to_string(i) + "]";
    if (!m.is_object()) {
      errors.push_back(at + " must be an object");
      continue;
    }
    const std::string role = m.contains("role") && m["role"].is_string() ? m["role"].get<std::string>() : "";
    require(errors, role == "system" || role == "user" || role == "assistant", at + ".role is invalid");
    if (!m.contains("content") || !m["content"].is_array() || m["content"].empty()) {
      errors.push_back(at + ".content must be a non-empty array");
      continue;
    }
    for (std::size_t p = 0; p < m["content"].size(); ++p) {
      const auto& part = m["content"][p];
      const std::string pat = at + ".content[" + std::to_string(p) + "]";
      const std::string type = part.is_object() ? part.value("type", "") : "";
      if (type == "text") {
        require(errors, part.contains("text") && part["text"].is_string(), pat + ".text must be a string");
        require(errors, part.size() == 2, pat + " has unexpected fields");
      } else if (type == "image_url") {
        const bool ok = part.contains("image_url") && part["image_url"].is_object() &&
                        part["image_url"].contains("url") && part["image_url"]["url"].is_string() &&
                        part["image_url"]["url"].get<std::string>().starts_with(kDataUrlPrefix);
        require(errors, ok, pat + ".image_url.url must be a PNG base64 data URL");
        require(errors, role == "user", pat + " image outside a user message");
      } else {
        errors.push_back(pat + ".type must be text or image_url");
      }
    }
  }
  return errors;
}

std::vector<std::string> validate_embed_request(const json& body) {
  std::vector<std::string> errors;
  if (!body.is_object()) return {"body must be an object"};
  require(errors, body.contains("model") && body["model"].is_string(), "model must be a string");
  if (!body.contains("input") || !body["input"].is_array() || body["input"].empty()) {
    errors.emplace_back("input must be a non-empty array");
    return errors;
  }
  for (std::size_t i = 0; i < body["input"].size(); ++i) {
    const auto& item = body["input"][i];
    const std::string at = "input[" + std::to_string(i) + "]";
    if (item.is_string()) continue;
    const bool ok = item.is_object() && item.size() == 2 && item.value("type", "") == "image_base64" &&
                    item.contains("data") && item["data"].is_string();
    require(errors, ok, at + " must be a string or {\"type\":\"image_base64\",\"data\":string}");
  }
  return errors;
}

std::vector<ChatMessage> decode_chat_messages(const json& body) {
  std::vector<ChatMessage> out;
  for (const auto& m : body.at("messages")) {
    ChatMessage msg;
    const auto role = m.at("role").get<std::string>();
    msg.role = role == "system" ? Role::system : role == "assistant" ? Role::assistant : Role::user;
    for (const auto& part : m.at("content")) {
      if (part.at("type") == "text") {
        msg.parts.emplace_back(TextPart{part.at("text").get<std::string>()});
      } else {
        const auto url = part.at("image_url").at("url").get<std::string>();
        const auto bytes = base64_decode(std::string_view(url).substr(kDataUrlPrefix.size()));
        msg.parts.emplace_back(ImagePart{decode_image(bytes, "image_url")});
      }
    }
    out.push_back(std::move(msg));
  }
  return out;
}

StubServer::StubServer(ChatClient& chat, ScriptedEmbedder& embedder, const std::string& host, int port)
    : chat_(chat), embedder_(embedder), server_(std::make_unique<httplib::Server>()) {
  install_routes();
  if (port == 0) {
    port_ = server_->bind_to_any_port(host);
  } else if (server_->bind_to_port(host, port)) {
    port_ = port;
  }
  if (port_ <= 0) throw Error(Errc::transport, "stub server could not bind " + host + ":" + std::to_string(port));
  host_ = host;
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

StubServer::~StubServer() {
  server_->stop();
  if (thread_.joinable()) thread_.join();
}

std::string StubServer::base_url() const { return "http://" + host_ + ":" + std::to_string(port_); }

void StubServer::fail_next(int status, std::string body) {
  std::lock_guard lock(mu_);
  fault_ = std::make_pair(status, std::move(body));
}

void StubServer::set_delay(std::chrono::milliseconds delay) {
  std::lock_guard lock(mu_);
  delay_ = delay;
}

std::vector<StubServer::Recorded> StubServer::requests() const {
  std::lock_guard lock(mu_);
  return recorded_;
}

std::optional<std::pair<int, std::string>> StubServer::take_fault() {
  std::lock_guard lock(mu_);
  auto f = std::move(fault_);
  fault_.reset();
  return f;
}

namespace {

json error_body(const std::vector<std::string>& errors) {
  return {{"error", {{"message", "request does not match schema"}, {"details", errors}}}};
}

}  // namespace

void StubServer::install_routes() {
  auto record = [this](const std::string& path, const json& body, const std::vector<std::string>& errors) {
    std::lock_guard lock(mu_);
    recorded_.push_back({path, body, errors});
  };
  auto wait = [this] {
    std::chrono::milliseconds d;
    {
      std::lock_guard lock(mu_);
      d = delay_;
    }
    if (d.count() > 0) std::this_thread::sleep_for(d);
  };

  auto chat_handler = [this, record, wait](const httplib::Request& req, httplib::Response& res) {
    wait();
    const json body = json::parse(req.body, nullptr, false);
    auto errors = body.is_discarded() ? std::vector<std::string>{"body is not JSON"} : validate_chat_request(body);
    record(req.path, body.is_discarded() ? json(req.body) : body, errors);
    if (auto fault = take_fault()) {
      res.status = fault->first;
      res.set_content(fault->second, "text/plain");
      return;
    }
    if (!errors.empty()) {
      res.status = 400;
      res.set_content(error_body(errors).dump(), "application/json");
      return;
    }
    try {
      const auto messages = decode_chat_messages(body);
      ChatParams params{body["temperature"].get<double>(), body["max_tokens"].get<int>(), "stub"};
      const auto reply = chat_.chat(messages, params);
      const json out{{"id", "stub"},
                     {"object", "chat.completion"},
                     {"model", body["model"]},
                     {"choices", json::array({{{"index", 0},
                                                {"message", {{"role", "assistant"}, {"content", reply.text}}},
                                                {"finish_reason", "stop"}}})},
                     {"usage", {{"prompt_tokens", 0}, {"completion_tokens", 0}}}};
      res.set_content(out.dump(), "application/json");
    } catch (const ModelError& e) {
      res.status = e.status();
      res.set_content(e.body(), "text/plain");
    } catch (const std::exception& e) {
      res.status = 500;
      res.set_content(e.what(), "text/plain");
    }
  };

  auto embed_handler = [this, record, wait](const httplib::Request& req, httplib::Response& res) {
    wait();
    const json body = json::parse(req.body, nullptr, false);
    auto errors = body.is_discarded() ? std::vector<std::string>{"body is not JSON"} : validate_embed_request(body);
    record(req.path, body.is_discarded() ? json(req.body) : body, errors);
    if (auto fault = take_fault()) {
      res.status = fault->first;
      res.set_content(fault->second, "text/plain");
      return;
    }
    if (!errors.empty()) {
      res.status = 400;
      res.set_content(error_body(errors).dump(), "application/json");
      return;
    }
    try {
      json data = json::array();
      std::size_t i = 0;
      for (const auto& item : body["input"]) {
        std::vector<double> v;
        if (item.is_string()) {
          v = embedder_.raw_text(item.get<std::string>());
        } else {
          v = embedder_.raw_image(decode_image(base64_decode(item["data"].get<std::string>()), "image_base64"));
        }
        data.push_back({{"object", "embedding"}, {"index", i++}, {"embedding", v}});
      }
      res.set_content(json{{"object", "list"}, {"data", data}, {"model", body["model"]}}.dump(), "application/json");
    } catch (const std::exception& e) {
      res.status = 500;
      res.set_content(e.what(), "text/plain");
    }
  };

  for (const std::string prefix : {"", "/v1"}) {
    server_->Post(prefix + "/chat/completions", chat_handler);
    server_->Post(prefix + "/embeddings", embed_handler);
  }
}

void StubServer::wait() {
  if (thread_.joinable()) thread_.join();
}

}  // namespace evflow
