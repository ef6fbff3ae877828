#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace planground {

// Failure identities surfaced by the engine. One code per contract-level
// error so tests and callers can match on identity rather than message text.
enum class Errc {
  parse_error,
  validation_error,
  unknown_object,
  empty_intersection,
  out_of_bounds,
  transport_error,
  replay_miss,
  oracle_error,
  io_failure,
  parse_exhausted,
  stage_order_violation,
  plan_not_approved,
  not_approved,
  point_outside_box,
  missing_action_point,
  calibration_error,
  goal_inside_object,
  unknown_binding,
  not_a_circle,
  placement_failure,
  no_path,
  start_or_goal_blocked,
  unreachable,
  unknown_setting,
  unlabeled_fixture,
  config_error,
};

inline std::string_view errc_name(Errc c) {
  switch (c) {
    case Errc::parse_error: return "ParseError";
    case Errc::validation_error: return "ValidationError";
    case Errc::unknown_object: return "UnknownObject";
    case Errc::empty_intersection: return "EmptyIntersection";
    case Errc::out_of_bounds: return "OutOfBounds";
    case Errc::transport_error: return "TransportError";
    case Errc::replay_miss: return "ReplayMiss";
    case Errc::oracle_error: return "OracleError";
    case Errc::io_failure: return "IOFailure";
    case Errc::parse_exhausted: return "ParseExhausted";
    case Errc::stage_order_violation: return "StageOrderViolation";
    case Errc::plan_not_approved: return "PlanNotApproved";
    case Errc::not_approved: return "NotApproved";
    case Errc::point_outside_box: return "PointOutsideBox";
    case Errc::missing_action_point: return "MissingActionPoint";
    case Errc::calibration_error: return "CalibrationError";
    case Errc::goal_inside_object: return "GoalInsideObject";
    case Errc::unknown_binding: return "UnknownBinding";
    case Errc::not_a_circle: return "NotACircle";
    case Errc::placement_failure: return "PlacementFailure";
    case Errc::no_path: return "NoPath";
    case Errc::start_or_goal_blocked: return "StartOrGoalBlocked";
    case Errc::unreachable: return "Unreachable";
    case Errc::unknown_setting: return "UnknownSetting";
    case Errc::unlabeled_fixture: return "UnlabeledFixture";
    case Errc::config_error: return "ConfigError";
  }
  return "UnknownError";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

  Errc code() const { return code_; }

 private:
  Errc code_;
};

}  // namespace planground
