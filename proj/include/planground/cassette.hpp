#pragma once

#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "planground/backend.hpp"
#include "planground/errors.hpp"

namespace planground {

// Cassette line: {ordinal, agent_role, request_sha256, reply_text}, one JSON
// object per line in request-arrival order.

class RecordingBackend : public ChatBackend {
 public:
  RecordingBackend(std::string cassette_path, BackendHandle inner)
      : inner_(std::move(inner)), out_(cassette_path, std::ios::trunc) {
    if (!out_) throw Error(Errc::io_failure, "cannot open cassette for writing: " + cassette_path);
  }

  BackendReply chat(const BackendRequest& req) override {
    const std::string digest = request_digest(req);
    const BackendReply reply = inner_->chat(req);
    std::lock_guard<std::mutex> lock(mutex_);
    nlohmann::json line;
    line["ordinal"] = ordinal_++;
    line["agent_role"] = role_name(req.agent_role);
    line["request_sha256"] = digest;
    line["reply_text"] = reply.text;
    out_ << line.dump() << "\n";
    out_.flush();
    if (!out_) throw Error(Errc::io_failure, "cassette write failed");
    return reply;
  }

  std::string kind() const override { return "record(" + inner_->kind() + ")"; }

 private:
  BackendHandle inner_;
  std::ofstream out_;
  std::mutex mutex_;
  std::int64_t ordinal_ = 0;
};

// Replays a recorded cassette and never contacts a live backend. Lookup
// prefers an unserved entry for the same role with a matching request
// digest, which keeps concurrent grounding loops on their own exchanges;
// when the digest is absent (edited prompt) the next unserved entry for the
// role is served by ordinal and a warning is logged.
class ReplayBackend : public ChatBackend {
 public:
  explicit ReplayBackend(const std::string& cassette_path, std::ostream* warn_stream = &std::cerr)
      : warn_(warn_stream) {
    std::ifstream in(cassette_path);
    if (!in) throw Error(Errc::io_failure, "cannot open cassette: " + cassette_path);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::io_failure, std::string("bad cassette line: ") + e.what());
      }
      Entry e;
      e.role = role_from_name(j.at("agent_role").get<std::string>());
      e.digest = j.at("request_sha256").get<std::string>();
      e.reply = j.at("reply_text").get<std::string>();
      entries_.push_back(std::move(e));
    }
  }

  BackendReply chat(const BackendRequest& req) override {
    const std::string digest = request_digest(req);
    std::lock_guard<std::mutex> lock(mutex_);
    // digest match first
    for (auto& e : entries_) {
      if (!e.served && e.role == req.agent_role && e.digest == digest) {
        e.served = true;
        return BackendReply{e.reply, {}, 0.0};
      }
    }
    // ordinal fallback with warning
    for (auto& e : entries_) {
      if (!e.served && e.role == req.agent_role) {
        e.served = true;
        if (warn_)
          *warn_ << "replay: digest mismatch for role " << role_name(req.agent_role)
                 << ", serving by ordinal\n";
        return BackendReply{e.reply, {}, 0.0};
      }
    }
    throw Error(Errc::replay_miss,
                "no recorded reply left for role " + role_name(req.agent_role));
  }

  std::string kind() const override { return "replay"; }

 private:
  struct Entry {
    AgentRole role;
    std::string digest;
    std::string reply;
    bool served = false;
  };
  std::vector<Entry> entries_;
  std::mutex mutex_;
  std::ostream* warn_;
};

inline BackendHandle record_replay(const std::string& cassette_path, BackendHandle inner) {
  return std::make_shared<RecordingBackend>(cassette_path, std::move(inner));
}

inline BackendHandle open_replay(const std::string& cassette_path) {
  return std::make_shared<ReplayBackend>(cassette_path);
}

// Test/accounting helper: counts calls per agent role without altering them.
class CountingBackend : public ChatBackend {
 public:
  explicit CountingBackend(BackendHandle inner) : inner_(std::move(inner)) {}

  BackendReply chat(const BackendRequest& req) override {
    {
      std::lock_guard<std::mutex> lock(mutex_);
      ++counts_[role_name(req.agent_role)];
    }
    return inner_->chat(req);
  }

  std::string kind() const override { return inner_->kind(); }

  std::int64_t count(AgentRole role) const {
    std::lock_guard<std::mutex> lock(mutex_);
    const auto it = counts_.find(role_name(role));
    return it == counts_.end() ? 0 : it->second;
  }

  std::int64_t total() const {
    std::lock_guard<std::mutex> lock(mutex_);
    std::int64_t n = 0;
    for (const auto& [_, c] : counts_) n += c;
    return n;
  }

 private:
  BackendHandle inner_;
  mutable std::mutex mutex_;
  std::map<std::string, std::int64_t> counts_;
};

}  // namespace planground
