#pragma once

#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "planground/backend.hpp"
#include "planground/errors.hpp"
#include "planground/protocol.hpp"

namespace planground {

enum class AgentScope { task_level, subgoal_level, target_level };

struct AgentSpec {
  AgentRole role = AgentRole::supervisor;
  std::string system_template;
  AgentScope scope = AgentScope::task_level;
  int max_parse_retries = 3;
};

inline AgentSpec default_agent_spec(AgentRole role, int max_parse_retries = 3) {
  AgentSpec spec;
  spec.role = role;
  spec.system_template = system_prompt(role);
  switch (role) {
    case AgentRole::supervisor:
    case AgentRole::verification:
    case AgentRole::memory:
      spec.scope = AgentScope::task_level;
      break;
    case AgentRole::ground_manager:
      spec.scope = AgentScope::subgoal_level;
      break;
    case AgentRole::mover:
    case AgentRole::checker:
      spec.scope = AgentScope::target_level;
      break;
  }
  spec.max_parse_retries = max_parse_retries;
  return spec;
}

// One completed backend exchange, as remembered by an agent instance.
struct Exchange {
  std::string request_text;
  std::vector<std::string> image_refs;  // digests of attached images
  std::string reply_text;
  std::string parsed_kind;
  int retry_count = 0;
  double latency_ms = 0.0;
};

struct AgentTranscript {
  AgentRole role = AgentRole::supervisor;
  std::string instance;  // e.g. "mover[banana]" for target-level agents
  std::vector<Exchange> exchanges;
};

struct AgentCall {
  std::string user_template;
  std::map<std::string, std::string> context;
  std::vector<std::shared_ptr<const RasterImage>> images;
  Expect expect = Expect::approval_or_feedback;
  std::uint64_t seed = 0;
  double temperature = 0.0;
};

// Substitutes {identifier} tokens from the context. Braces that do not wrap
// a plain identifier (JSON examples in output-format instructions) pass
// through literally; identifiers missing from the context are an error.
inline std::string render_template(const std::string& tmpl,
                                   const std::map<std::string, std::string>& context) {
  const auto is_identifier = [](std::string_view s) {
    if (s.empty()) return false;
    for (char c : s)
      if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return false;
    return true;
  };
  std::string out;
  out.reserve(tmpl.size());
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    const auto open = tmpl.find('{', pos);
    if (open == std::string::npos) {
      out.append(tmpl, pos, std::string::npos);
      break;
    }
    out.append(tmpl, pos, open - pos);
    const auto close = tmpl.find('}', open);
    const std::string key =
        close == std::string::npos ? "" : tmpl.substr(open + 1, close - open - 1);
    if (!is_identifier(key)) {
      out.push_back('{');
      pos = open + 1;
      continue;
    }
    const auto it = context.find(key);
    if (it == context.end())
      throw Error(Errc::validation_error, "unresolved placeholder {" + key + "}");
    out += it->second;
    pos = close + 1;
  }
  return out;
}

// Renders the call, replays the agent's own history ahead of it, asks the
// backend, and parses the structured reply. Malformed replies are re-asked
// with a format reminder up to spec.max_parse_retries times.
inline ParsedPayload invoke_agent(const AgentSpec& spec, const AgentCall& call,
                                  ChatBackend& backend, AgentTranscript& transcript) {
  const std::string user_text = render_template(call.user_template, call.context);

  BackendRequest req;
  req.agent_role = spec.role;
  req.temperature = call.temperature;
  req.seed = call.seed;
  req.messages.push_back({MessageRole::system, spec.system_template, {}});
  for (const auto& prior : transcript.exchanges) {
    req.messages.push_back({MessageRole::user, prior.request_text, {}});
    req.messages.push_back({MessageRole::assistant, prior.reply_text, {}});
  }
  req.messages.push_back({MessageRole::user, user_text, call.images});

  Exchange exch;
  exch.request_text = user_text;
  for (const auto& img : call.images) exch.image_refs.push_back(img->digest());

  std::string last_error;
  for (int attempt = 0; attempt <= spec.max_parse_retries; ++attempt) {
    const BackendReply reply = backend.chat(req);
    try {
      ParsedPayload payload = parse_reply(call.expect, reply.text);
      exch.reply_text = reply.text;
      exch.parsed_kind = payload_kind_name(payload.kind);
      exch.retry_count = attempt;
      exch.latency_ms = reply.latency_ms;
      transcript.exchanges.push_back(std::move(exch));
      return payload;
    } catch (const Error& e) {
      if (e.code() != Errc::parse_error) throw;
      last_error = e.what();
      req.messages.push_back({MessageRole::assistant, reply.text, {}});
      req.messages.push_back({MessageRole::user, std::string(format_reminder()), {}});
    }
  }
  throw Error(Errc::parse_exhausted,
              "agent " + role_name(spec.role) + " never produced a parseable reply (" +
                  last_error + ")");
}

// ---------------------------------------------------------------------------
// System memory
// ---------------------------------------------------------------------------

enum class MemoryStage { plan = 0, targets = 1, grounding = 2, actions = 3 };

inline std::string stage_name(MemoryStage s) {
  switch (s) {
    case MemoryStage::plan: return "plan";
    case MemoryStage::targets: return "targets";
    case MemoryStage::grounding: return "grounding";
    case MemoryStage::actions: return "actions";
  }
  return "plan";
}

struct MemoryEntry {
  MemoryStage stage = MemoryStage::plan;
  std::string key;
  std::string value;
  AgentRole source_role = AgentRole::memory;
  bool superseded = false;
};

class SystemMemory {
 public:
  // Appends an entry. A duplicate (stage, key) supersedes the previous value
  // and the supersession is logged. A stage may only be written once every
  // earlier stage holds at least one entry.
  void update(MemoryStage stage, const std::string& key, const std::string& value,
              AgentRole source_role) {
    for (int earlier = 0; earlier < static_cast<int>(stage); ++earlier) {
      if (!stage_has_entries(static_cast<MemoryStage>(earlier)))
        throw Error(Errc::stage_order_violation,
                    "stage '" + stage_name(stage) + "' written before '" +
                        stage_name(static_cast<MemoryStage>(earlier)) + "' completed");
    }
    for (auto& e : entries_) {
      if (!e.superseded && e.stage == stage && e.key == key) {
        e.superseded = true;
        log_.push_back("superseded " + stage_name(stage) + "." + key);
      }
    }
    entries_.push_back({stage, key, value, source_role, false});
  }

  // Flattened "stage.key" -> value map over the requested stages, live
  // entries only, deterministically ordered.
  std::map<std::string, std::string> snapshot(const std::set<MemoryStage>& stages) const {
    std::map<std::string, std::string> out;
    for (const auto& e : entries_) {
      if (e.superseded || !stages.count(e.stage)) continue;
      out[stage_name(e.stage) + "." + e.key] = e.value;
    }
    return out;
  }

  std::map<std::string, std::string> snapshot_all() const {
    return snapshot({MemoryStage::plan, MemoryStage::targets, MemoryStage::grounding,
                     MemoryStage::actions});
  }

  const std::vector<MemoryEntry>& entries() const { return entries_; }
  const std::vector<std::string>& supersession_log() const { return log_; }

  bool stage_has_entries(MemoryStage stage) const {
    for (const auto& e : entries_)
      if (e.stage == stage) return true;
    return false;
  }

 private:
  std::vector<MemoryEntry> entries_;
  std::vector<std::string> log_;
};

inline std::string memory_lines(const std::map<std::string, std::string>& snapshot) {
  std::string out;
  for (const auto& [k, v] : snapshot) {
    out += k;
    out += " = ";
    out += v;
    out += "\n";
  }
  return out;
}

}  // namespace planground
