#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "planground/errors.hpp"
#include "planground/geometry.hpp"

namespace planground {

// ---------------------------------------------------------------------------
// Planning types
// ---------------------------------------------------------------------------

enum class SubgoalVerb { pick, place, push, rotate, move_gripper, remove_lid, trace_path, shake };

inline std::string verb_name(SubgoalVerb v) {
  switch (v) {
    case SubgoalVerb::pick: return "pick";
    case SubgoalVerb::place: return "place";
    case SubgoalVerb::push: return "push";
    case SubgoalVerb::rotate: return "rotate";
    case SubgoalVerb::move_gripper: return "move_gripper";
    case SubgoalVerb::remove_lid: return "remove_lid";
    case SubgoalVerb::trace_path: return "trace_path";
    case SubgoalVerb::shake: return "shake";
  }
  return "pick";
}

inline SubgoalVerb verb_from_name(const std::string& s) {
  if (s == "pick") return SubgoalVerb::pick;
  if (s == "place") return SubgoalVerb::place;
  if (s == "push") return SubgoalVerb::push;
  if (s == "rotate") return SubgoalVerb::rotate;
  if (s == "move_gripper") return SubgoalVerb::move_gripper;
  if (s == "remove_lid") return SubgoalVerb::remove_lid;
  if (s == "trace_path") return SubgoalVerb::trace_path;
  if (s == "shake") return SubgoalVerb::shake;
  throw Error(Errc::parse_error, "unknown subgoal verb '" + s + "'");
}

struct Subgoal {
  int index = 0;
  SubgoalVerb verb = SubgoalVerb::pick;
  std::string object_ref;               // free-text descriptor
  std::optional<std::string> target_ref;
  std::string notes;

  friend bool operator==(const Subgoal&, const Subgoal&) = default;
};

enum class ApprovalSource { none, verification, ablation };

struct Plan {
  std::vector<Subgoal> subgoals;
  int revision = 0;  // number of supervisor revisions performed
  bool approved = false;
  ApprovalSource approval_source = ApprovalSource::none;
};

inline nlohmann::json subgoals_to_json(const std::vector<Subgoal>& subgoals) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& s : subgoals) {
    nlohmann::json js;
    js["verb"] = verb_name(s.verb);
    js["object"] = s.object_ref;
    if (s.target_ref) js["target"] = *s.target_ref;
    else js["target"] = nullptr;
    js["notes"] = s.notes;
    arr.push_back(js);
  }
  return arr;
}

inline std::vector<Subgoal> subgoals_from_json(const nlohmann::json& arr) {
  if (!arr.is_array()) throw Error(Errc::parse_error, "subgoals: expected array");
  std::vector<Subgoal> out;
  int index = 0;
  for (const auto& js : arr) {
    Subgoal s;
    s.index = index++;
    s.verb = verb_from_name(js.at("verb").get<std::string>());
    s.object_ref = js.at("object").get<std::string>();
    if (js.contains("target") && !js.at("target").is_null())
      s.target_ref = js.at("target").get<std::string>();
    s.notes = js.value("notes", "");
    out.push_back(std::move(s));
  }
  return out;
}

enum class TargetMode { object_box, area_point };

inline std::string target_mode_name(TargetMode m) {
  return m == TargetMode::object_box ? "object_box" : "area_point";
}

inline TargetMode target_mode_from_name(const std::string& s) {
  if (s == "object_box") return TargetMode::object_box;
  if (s == "area_point") return TargetMode::area_point;
  throw Error(Errc::parse_error, "unknown target mode '" + s + "'");
}

struct TargetEntry {
  std::string name;
  TargetMode mode = TargetMode::object_box;
  friend bool operator==(const TargetEntry&, const TargetEntry&) = default;
};

struct TargetList {
  std::vector<TargetEntry> targets;

  const TargetEntry* find(const std::string& name) const {
    for (const auto& t : targets)
      if (t.name == name) return &t;
    return nullptr;
  }
};

// ---------------------------------------------------------------------------
// Grounding types
// ---------------------------------------------------------------------------

enum class VerdictValue { accept, revision_needed, reject };

inline std::string verdict_text(VerdictValue v) {
  switch (v) {
    case VerdictValue::accept: return "Accept";
    case VerdictValue::revision_needed: return "Revision Needed";
    case VerdictValue::reject: return "Reject";
  }
  return "Reject";
}

inline std::optional<VerdictValue> verdict_from_text(const std::string& trimmed) {
  if (trimmed == "Accept") return VerdictValue::accept;
  if (trimmed == "Revision Needed") return VerdictValue::revision_needed;
  if (trimmed == "Reject") return VerdictValue::reject;
  return std::nullopt;
}

enum class ActionPurpose { grasp, place, push_start, trace };

inline std::string purpose_name(ActionPurpose p) {
  switch (p) {
    case ActionPurpose::grasp: return "grasp";
    case ActionPurpose::place: return "place";
    case ActionPurpose::push_start: return "push_start";
    case ActionPurpose::trace: return "trace";
  }
  return "grasp";
}

struct ActionPoint {
  std::string target;
  PixelCoord point;
  ActionPurpose purpose = ActionPurpose::grasp;
};

struct GroundingProposal {
  std::optional<BoundingBox> box;    // object_box mode
  std::optional<PixelCoord> point;   // area_point mode
  VerdictValue verdict = VerdictValue::revision_needed;
};

struct GroundingState {
  std::string target;
  TargetMode mode = TargetMode::object_box;
  BoundingBox current_box;
  PixelCoord current_point;
  int iteration = 0;  // equals history size
  std::vector<GroundingProposal> history;
  bool approved = false;
};

struct PivotConfig {
  int samples_per_iter = 10;
  int iterations = 3;
  int parallel_runs = 3;
  int min_radius = 10;
  std::uint64_t seed = 0;

  void validate() const {
    if (samples_per_iter < 2) throw Error(Errc::config_error, "pivot: samples_per_iter must be >= 2");
    if (iterations < 1) throw Error(Errc::config_error, "pivot: iterations must be >= 1");
    if (parallel_runs < 1) throw Error(Errc::config_error, "pivot: parallel_runs must be >= 1");
  }
};

}  // namespace planground
