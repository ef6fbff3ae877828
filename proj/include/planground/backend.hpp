#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "planground/errors.hpp"
#include "planground/image.hpp"
#include "planground/util.hpp"

namespace planground {

enum class AgentRole { supervisor, verification, ground_manager, mover, checker, memory };

inline std::string role_name(AgentRole r) {
  switch (r) {
    case AgentRole::supervisor: return "supervisor";
    case AgentRole::verification: return "verification";
    case AgentRole::ground_manager: return "ground_manager";
    case AgentRole::mover: return "mover";
    case AgentRole::checker: return "checker";
    case AgentRole::memory: return "memory";
  }
  return "supervisor";
}

inline AgentRole role_from_name(const std::string& s) {
  if (s == "supervisor") return AgentRole::supervisor;
  if (s == "verification") return AgentRole::verification;
  if (s == "ground_manager") return AgentRole::ground_manager;
  if (s == "mover") return AgentRole::mover;
  if (s == "checker") return AgentRole::checker;
  if (s == "memory") return AgentRole::memory;
  throw Error(Errc::parse_error, "unknown agent role '" + s + "'");
}

enum class MessageRole { system, user, assistant };

struct ChatMessage {
  MessageRole role = MessageRole::user;
  std::string text;
  std::vector<std::shared_ptr<const RasterImage>> images;
};

struct BackendRequest {
  AgentRole agent_role = AgentRole::supervisor;
  std::vector<ChatMessage> messages;  // first message must carry role system
  double temperature = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (messages.empty())
      throw Error(Errc::validation_error, "backend request without messages");
    if (messages.front().role != MessageRole::system)
      throw Error(Errc::validation_error, "first request message must be the system message");
  }
};

struct TokenUsage {
  std::int64_t prompt = 0;
  std::int64_t completion = 0;
};

struct BackendReply {
  std::string text;
  TokenUsage usage;
  double latency_ms = 0.0;
};

// Canonical digest of everything the model would see.
inline std::string request_digest(const BackendRequest& req) {
  Sha256 h;
  h.update(role_name(req.agent_role));
  for (const auto& m : req.messages) {
    h.update("\x1f");
    h.update(m.role == MessageRole::system ? "s" : m.role == MessageRole::user ? "u" : "a");
    h.update(m.text);
    for (const auto& img : m.images) h.update(img->digest());
  }
  const auto d = h.digest();
  return to_hex(d.data(), d.size());
}

// Chat backend contract. Implementations must tolerate concurrent chat()
// calls (one per in-flight grounding target).
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual BackendReply chat(const BackendRequest& req) = 0;
  virtual std::string kind() const = 0;
};

using BackendHandle = std::shared_ptr<ChatBackend>;

}  // namespace planground
