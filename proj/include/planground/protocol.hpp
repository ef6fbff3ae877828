#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "planground/errors.hpp"
#include "planground/types.hpp"
#include "planground/util.hpp"

namespace planground {

// The structured-output conventions every backend speaks: multi-field agent
// replies live inside one fenced JSON block; the checker and the
// verification agent answer with bare tokens. The scripted oracle produces
// exactly these formats so the parser path is identical for live, replay,
// and oracle runs.

inline constexpr const char* kApprovedToken = "APPROVED";

// Request markers. Prompts embed these instructions; the scripted oracle
// dispatches on them.
inline constexpr const char* kMarkCreatePlan = "Output the high-level plan as a fenced JSON block";
inline constexpr const char* kMarkExtractTargets = "List every object or area the plan must ground";
inline constexpr const char* kMarkCompileActions =
    "Convert the plan and the grounded action points into the executable action sequence";
inline constexpr const char* kMarkDirectPoint = "Reply with the single action point";
inline constexpr const char* kMarkInitBox = "Give an approximate starting point and bounding box";
inline constexpr const char* kMarkInitPoint = "Give an approximate point for the area";
inline constexpr const char* kMarkActionPoint = "Select the point of action";
inline constexpr const char* kMarkMoverRevise = "Propose a revised";
inline constexpr const char* kMarkSelfCheck = "judge your own proposal";
inline constexpr const char* kMarkPivotChoose = "Choose the most promising candidate points";
inline constexpr const char* kMarkPivotBest = "Choose the single best point";

// Labeled context lines shared by prompts and the oracle's request parser.
inline constexpr const char* kFieldTask = "Task:";
inline constexpr const char* kFieldTarget = "Target:";
inline constexpr const char* kFieldMode = "Mode:";
inline constexpr const char* kFieldPurpose = "Purpose:";
inline constexpr const char* kFieldCurrentBox = "Current box:";
inline constexpr const char* kFieldCurrentPoint = "Current point:";
inline constexpr const char* kFieldApprovedBox = "Approved box:";
inline constexpr const char* kFieldApprovedPoint = "Approved point:";
inline constexpr const char* kFieldGoalTarget = "Goal target:";
inline constexpr const char* kFieldFeedback = "Verification feedback:";
inline constexpr const char* kFieldFailureReport = "Failure report:";
inline constexpr const char* kFieldCandidates = "Candidates:";

// ---------------------------------------------------------------------------
// System prompts (one per agent role)
// ---------------------------------------------------------------------------

inline std::string system_prompt(AgentRole role) {
  switch (role) {
    case AgentRole::supervisor:
      return "You are the supervisor agent of a robot work cell, creating and modifying the "
             "robotics plan. You own the overall task-level objectives: you write high-level "
             "plans made of subgoals, revise them when the verification agent raises concerns, "
             "and finally translate the grounded results into the executable action sequence. "
             "Low-level grounding and control details are outside your scope.";
    case AgentRole::verification:
      return "You are the verification agent responsible for checking the feasibility of a "
             "robotics task plan and giving feedback for revision when needed. Your sole "
             "objective is to make sure the plan itself is logical and achievable. Check every "
             "plan for: 1. collision avoidance, 2. physical constraints, 3. missing prerequisite "
             "steps. Reply with the single token APPROVED when the plan passes every check; "
             "otherwise reply with concrete feedback for plan revision.";
    case AgentRole::ground_manager:
      return "You are the manager of the grounding team. With full visibility of the task, plan, "
             "and subgoals, you give approximate guesses of target locations as starting points "
             "and bounding boxes for two workers who refine them using zoomed-in views. Once a "
             "box is finalized you choose an action point based on the task and plan, "
             "considering context like pushing in a direction or picking up an object.";
    case AgentRole::mover:
      return "You adjust bounding box location and dimensions, ensuring bounding boxes are "
             "accurately positioned and sized for precise object manipulation. Your adjustments "
             "must be meaningful and significant before the final version is concluded.";
    case AgentRole::checker:
      return "You verify the accuracy and alignment of bounding boxes for objects of interest, "
             "and you decide when no more adjustments are needed. Criteria: Accept - the box "
             "covers the target object well without much extra space. Revision Needed - the box "
             "covers at least a small part of the target but more precision is needed. Reject - "
             "the box is completely irrelevant and does not even touch the target. Your output "
             "must be exactly one of: Accept / Revision Needed / Reject, and nothing else.";
    case AgentRole::memory:
      return "You maintain the system memory of important task-relevant information produced by "
             "the other agents.";
  }
  return "";
}

// ---------------------------------------------------------------------------
// Fenced-JSON reply helpers
// ---------------------------------------------------------------------------

inline std::optional<std::string> extract_fenced(const std::string& text) {
  const auto open = text.find("```");
  if (open == std::string::npos) return std::nullopt;
  auto start = open + 3;
  // optional language tag
  const auto nl = text.find('\n', start);
  if (nl == std::string::npos) return std::nullopt;
  const std::string tag = trim(text.substr(start, nl - start));
  if (tag == "json" || tag.empty()) start = nl + 1;
  const auto close = text.find("```", start);
  if (close == std::string::npos) return std::nullopt;
  return text.substr(start, close - start);
}

inline std::string fenced_json(const nlohmann::json& j) {
  return "```json\n" + j.dump() + "\n```";
}

inline nlohmann::json parse_fenced_json(const std::string& reply) {
  const auto body = extract_fenced(reply);
  if (!body) throw Error(Errc::parse_error, "reply has no fenced block");
  try {
    return nlohmann::json::parse(*body);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::parse_error, std::string("fenced block is not valid JSON: ") + e.what());
  }
}

inline PixelCoord point_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 2)
    throw Error(Errc::parse_error, "expected [x, y]");
  return {static_cast<int>(std::lround(j.at(0).get<double>())),
          static_cast<int>(std::lround(j.at(1).get<double>()))};
}

inline BoundingBox box_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 4)
    throw Error(Errc::parse_error, "expected [x0, y0, x1, y1]");
  BoundingBox b{{static_cast<int>(std::lround(j.at(0).get<double>())),
                 static_cast<int>(std::lround(j.at(1).get<double>()))},
                {static_cast<int>(std::lround(j.at(2).get<double>())),
                 static_cast<int>(std::lround(j.at(3).get<double>()))}};
  if (!b.valid()) throw Error(Errc::parse_error, "degenerate box " + box_to_string(b));
  return b;
}

// ---------------------------------------------------------------------------
// Request-text field helpers (used by the oracle to read rendered prompts)
// ---------------------------------------------------------------------------

inline std::optional<std::string> find_field(const std::string& text, const std::string& label) {
  std::size_t pos = 0;
  while ((pos = text.find(label, pos)) != std::string::npos) {
    // label must start a line
    if (pos == 0 || text[pos - 1] == '\n') {
      const auto eol = text.find('\n', pos);
      const auto start = pos + label.size();
      return trim(text.substr(start, (eol == std::string::npos ? text.size() : eol) - start));
    }
    pos += label.size();
  }
  return std::nullopt;
}

inline PixelCoord parse_point_text(const std::string& s) {
  int x = 0, y = 0;
  if (std::sscanf(s.c_str(), " [ %d , %d ]", &x, &y) != 2)
    throw Error(Errc::parse_error, "cannot parse point '" + s + "'");
  return {x, y};
}

inline BoundingBox parse_box_text(const std::string& s) {
  int a = 0, b = 0, c = 0, d = 0;
  if (std::sscanf(s.c_str(), " [ %d , %d , %d , %d ]", &a, &b, &c, &d) != 4)
    throw Error(Errc::parse_error, "cannot parse box '" + s + "'");
  return {{a, b}, {c, d}};
}

// ---------------------------------------------------------------------------
// Parsed payloads
// ---------------------------------------------------------------------------

enum class PayloadKind { plan, feedback, approval, bbox, point, verdict, action_list, target_list };

inline std::string payload_kind_name(PayloadKind k) {
  switch (k) {
    case PayloadKind::plan: return "plan";
    case PayloadKind::feedback: return "feedback";
    case PayloadKind::approval: return "approval";
    case PayloadKind::bbox: return "bbox";
    case PayloadKind::point: return "point";
    case PayloadKind::verdict: return "verdict";
    case PayloadKind::action_list: return "action_list";
    case PayloadKind::target_list: return "target_list";
  }
  return "feedback";
}

struct ParsedPayload {
  PayloadKind kind = PayloadKind::feedback;
  nlohmann::json body;

  std::string serialize() const { return body.dump(); }
};

// What a particular agent call expects back.
enum class Expect {
  plan,                  // {"subgoals": [...]}
  approval_or_feedback,  // APPROVED token or free-text feedback
  init_box,              // {"point": [x,y], "box": [x0,y0,x1,y1]}
  point,                 // {"point": [x,y]}
  box,                   // {"box": [...]}; may carry "verdict" in self-check mode
  verdict,               // bare Accept / Revision Needed / Reject
  action_list,           // {"actions": [...]}
  target_list,           // {"targets": [...]}
  pivot_choice,          // {"chosen": [indices]}
  pivot_best,            // {"best": index}
};

// Validates a reply against the expected schema; throws ParseError on any
// deviation so invoke_agent can re-ask with a format reminder.
inline ParsedPayload parse_reply(Expect expect, const std::string& reply) {
  ParsedPayload out;
  switch (expect) {
    case Expect::approval_or_feedback: {
      const std::string t = trim(reply);
      if (t.empty()) throw Error(Errc::parse_error, "empty verification reply");
      if (t == kApprovedToken) {
        out.kind = PayloadKind::approval;
        out.body = nlohmann::json::object();
      } else {
        out.kind = PayloadKind::feedback;
        out.body = nlohmann::json{{"text", t}};
      }
      return out;
    }
    case Expect::verdict: {
      const auto v = verdict_from_text(trim(reply));
      if (!v) throw Error(Errc::parse_error, "not a verdict: '" + trim(reply) + "'");
      out.kind = PayloadKind::verdict;
      out.body = nlohmann::json{{"verdict", verdict_text(*v)}};
      return out;
    }
    default:
      break;
  }

  const nlohmann::json j = parse_fenced_json(reply);
  switch (expect) {
    case Expect::plan:
      subgoals_from_json(j.at("subgoals"));  // schema check
      out.kind = PayloadKind::plan;
      break;
    case Expect::init_box:
      box_from_json(j.at("box"));
      point_from_json(j.at("point"));
      out.kind = PayloadKind::bbox;
      break;
    case Expect::point:
      point_from_json(j.at("point"));
      out.kind = PayloadKind::point;
      break;
    case Expect::box:
      box_from_json(j.at("box"));
      if (j.contains("verdict") && !verdict_from_text(j.at("verdict").get<std::string>()))
        throw Error(Errc::parse_error, "bad self-check verdict");
      out.kind = PayloadKind::bbox;
      break;
    case Expect::action_list:
      if (!j.contains("actions") || !j.at("actions").is_array())
        throw Error(Errc::parse_error, "missing actions array");
      out.kind = PayloadKind::action_list;
      break;
    case Expect::target_list: {
      if (!j.contains("targets") || !j.at("targets").is_array())
        throw Error(Errc::parse_error, "missing targets array");
      for (const auto& t : j.at("targets")) {
        (void)t.at("name").get<std::string>();
        target_mode_from_name(t.at("mode").get<std::string>());
      }
      out.kind = PayloadKind::target_list;
      break;
    }
    case Expect::pivot_choice:
      if (!j.contains("chosen") || !j.at("chosen").is_array() || j.at("chosen").empty())
        throw Error(Errc::parse_error, "missing chosen indices");
      out.kind = PayloadKind::point;
      break;
    case Expect::pivot_best:
      if (!j.contains("best") || !j.at("best").is_number_integer())
        throw Error(Errc::parse_error, "missing best index");
      out.kind = PayloadKind::point;
      break;
    default:
      throw Error(Errc::parse_error, "unexpected reply");
  }
  out.body = j;
  return out;
}

inline const char* format_reminder() {
  return "\n\nReminder: reply in exactly the requested output format.";
}

}  // namespace planground
