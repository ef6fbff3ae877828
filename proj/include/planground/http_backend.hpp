#pragma once

#include <chrono>
#include <cstdlib>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "planground/backend.hpp"
#include "planground/errors.hpp"
#include "planground/image.hpp"
#include "planground/util.hpp"

namespace planground {

struct HttpBackendConfig {
  std::string endpoint;            // e.g. http://host:8000
  std::string path = "/v1/chat/completions";
  std::string model;
  std::string credential_env;      // name of the env var holding the API key
  int max_retries = 3;
  int backoff_base_ms = 250;
  int timeout_seconds = 120;
};

// Generic chat-completions client. Images travel as base64 PNG data-URL
// content parts; transient failures (timeout, 429, 5xx) are retried with
// exponential backoff before giving up.
class HttpBackend : public ChatBackend {
 public:
  explicit HttpBackend(HttpBackendConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.endpoint.empty())
      throw Error(Errc::config_error, "http backend requires an endpoint");
    if (cfg_.model.empty())
      throw Error(Errc::config_error, "http backend requires a model name");
  }

  BackendReply chat(const BackendRequest& req) override {
    req.validate();
    const nlohmann::json body = build_body(req);
    const auto started = std::chrono::steady_clock::now();

    std::string last_error;
    for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
      if (attempt > 0) {
        const int delay = cfg_.backoff_base_ms * (1 << (attempt - 1));
        std::this_thread::sleep_for(std::chrono::milliseconds(delay));
      }
      httplib::Client client(cfg_.endpoint);
      client.set_connection_timeout(cfg_.timeout_seconds);
      client.set_read_timeout(cfg_.timeout_seconds);
      httplib::Headers headers;
      if (!cfg_.credential_env.empty()) {
        if (const char* key = std::getenv(cfg_.credential_env.c_str()))
          headers.emplace("Authorization", std::string("Bearer ") + key);
        else
          throw Error(Errc::config_error, "credential env var not set: " + cfg_.credential_env);
      }
      auto res = client.Post(cfg_.path, headers, body.dump(), "application/json");
      if (!res) {
        last_error = "transport failure: " + httplib::to_string(res.error());
        continue;  // timeouts and connection errors are retryable
      }
      if (res->status == 429 || res->status >= 500) {
        last_error = "http status " + std::to_string(res->status);
        continue;
      }
      if (res->status != 200)
        throw Error(Errc::transport_error,
                    "http status " + std::to_string(res->status) + ": " + res->body);
      return parse_reply(res->body, started);
    }
    throw Error(Errc::transport_error,
                "giving up after " + std::to_string(cfg_.max_retries + 1) + " attempts: " + last_error);
  }

  std::string kind() const override { return "http"; }

 private:
  nlohmann::json build_body(const BackendRequest& req) const {
    nlohmann::json body;
    body["model"] = cfg_.model;
    body["temperature"] = req.temperature;
    body["seed"] = req.seed;
    body["messages"] = nlohmann::json::array();
    for (const auto& m : req.messages) {
      nlohmann::json jm;
      jm["role"] = m.role == MessageRole::system ? "system"
                   : m.role == MessageRole::user ? "user"
                                                 : "assistant";
      if (m.images.empty()) {
        jm["content"] = m.text;
      } else {
        nlohmann::json parts = nlohmann::json::array();
        parts.push_back({{"type", "text"}, {"text", m.text}});
        for (const auto& img : m.images) {
          const auto png = encode_png(*img);
          parts.push_back(
              {{"type", "image_url"},
               {"image_url",
                {{"url", "data:image/png;base64," + base64_encode(png.data(), png.size())}}}});
        }
        jm["content"] = parts;
      }
      body["messages"].push_back(jm);
    }
    return body;
  }

  static BackendReply parse_reply(const std::string& body,
                                  std::chrono::steady_clock::time_point started) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::transport_error, std::string("malformed reply body: ") + e.what());
    }
    BackendReply reply;
    try {
      reply.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::transport_error, std::string("reply missing message content: ") + e.what());
    }
    if (reply.text.empty()) throw Error(Errc::transport_error, "empty reply text");
    if (j.contains("usage")) {
      reply.usage.prompt = j["usage"].value("prompt_tokens", std::int64_t{0});
      reply.usage.completion = j["usage"].value("completion_tokens", std::int64_t{0});
    }
    reply.latency_ms = std::chrono::duration<double, std::milli>(
                           std::chrono::steady_clock::now() - started)
                           .count();
    return reply;
  }

  HttpBackendConfig cfg_;
};

}  // namespace planground
