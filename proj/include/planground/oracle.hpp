#pragma once

#include <map>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "planground/actuation.hpp"
#include "planground/backend.hpp"
#include "planground/protocol.hpp"
#include "planground/scene.hpp"
#include "planground/sim.hpp"
#include "planground/types.hpp"
#include "planground/util.hpp"

namespace planground {

enum class PlanQuality { perfect, misses_prerequisites };

// Deterministic scripted backend. It answers every agent-role request from
// scene ground truth, with configurable initial error, contraction toward
// the truth per mover turn, and optional verdict noise, and it replies in
// the exact structured formats the live agents use.
struct OracleConfig {
  Scene scene;
  double init_offset_px = 0.0;   // exact initial center error magnitude
  double init_sigma_px = 0.0;    // >0: offsets drawn as |N(0, sigma)| instead
  double init_size_error = 0.0;  // fractional size error of initial boxes
  double contraction = 1.0;      // fraction of the remaining error removed per mover turn
  double iou_accept = 0.75;      // checker accepts boxes at or above this IoU
  PlanQuality plan_quality = PlanQuality::perfect;
  double verdict_noise = 0.0;    // probability of flipping a verdict to an adjacent class

  // point-mode verdict thresholds
  double point_accept_px = 15.0;
  double point_reject_px = 200.0;

  // fixture knobs
  bool never_approve = false;          // verification withholds APPROVED forever
  int force_wrong_inits = 0;           // first N manager inits per target land on a wrong object
  int scripted_failure_attempts = 0;   // attempts whose grasp points are deliberately spoiled

  void validate() const {
    if (iou_accept <= 0.0 || iou_accept > 1.0)
      throw Error(Errc::config_error, "oracle: iou_accept must be in (0, 1]");
    if (contraction <= 0.0 || contraction > 1.0)
      throw Error(Errc::config_error, "oracle: contraction must be in (0, 1]");
    if (init_offset_px < 0.0) throw Error(Errc::config_error, "oracle: negative init offset");
  }
};

class ScriptedOracle : public ChatBackend {
 public:
  // Self-check degradation: without a dedicated checker the mover judges its
  // own boxes against a much weaker bar and with twice the flip noise.
  static constexpr double kSelfCheckIouFactor = 0.35;
  static constexpr double kSelfCheckPointFactor = 3.0;
  static constexpr double kSelfCheckNoiseFactor = 2.0;
  // A supervisor asked for coordinates directly is coarser than the manager.
  static constexpr double kSupervisorDirectFactor = 1.25;

  explicit ScriptedOracle(OracleConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

  BackendReply chat(const BackendRequest& req) override {
    req.validate();
    const std::string& text = req.messages.back().text;
    std::string reply;
    switch (req.agent_role) {
      case AgentRole::supervisor: reply = answer_supervisor(req, text); break;
      case AgentRole::verification: reply = answer_verification(text); break;
      case AgentRole::ground_manager: reply = answer_manager(req, text); break;
      case AgentRole::mover: reply = answer_mover(req, text); break;
      case AgentRole::checker: reply = answer_checker(req, text); break;
      case AgentRole::memory:
        throw Error(Errc::oracle_error, "memory agent does not consult the backend");
    }
    return BackendReply{reply, {}, 0.0};
  }

  std::string kind() const override { return "oracle"; }

  const OracleConfig& config() const { return cfg_; }

 private:
  // ------------------------------------------------------------------
  // Ground truth resolution
  // ------------------------------------------------------------------

  struct Truth {
    bool is_area = false;
    BoundingBox box;
    PixelCoord point;
  };

  Truth resolve(const std::string& target) const {
    if (const SceneObject* o = cfg_.scene.find(target)) {
      Truth t;
      t.box = object_bbox(cfg_.scene, o->id);
      t.point = round_to_pixel(t.box.center());
      return t;
    }
    const std::string suffix = " opening";
    if (target.size() > suffix.size() &&
        target.compare(target.size() - suffix.size(), suffix.size(), suffix) == 0) {
      const std::string id = target.substr(0, target.size() - suffix.size());
      if (const SceneObject* o = cfg_.scene.find(id)) {
        Truth t;
        t.is_area = true;
        t.box = object_bbox(cfg_.scene, o->id);
        t.point = round_to_pixel(t.box.center());
        return t;
      }
    }
    if (target.find("free") != std::string::npos) {
      Truth t;
      t.is_area = true;
      t.point = free_area_point(cfg_.scene);
      t.box = BoundingBox{{t.point.x - 40, t.point.y - 40}, {t.point.x + 40, t.point.y + 40}};
      return t;
    }
    // descriptor mentioning an id ("the banana")
    for (const auto& o : cfg_.scene.objects) {
      if (target.find(o.id) != std::string::npos) {
        Truth t;
        t.box = object_bbox(cfg_.scene, o.id);
        t.point = round_to_pixel(t.box.center());
        return t;
      }
    }
    throw Error(Errc::oracle_error, "no ground truth for target '" + target + "'");
  }

  static bool is_area_descriptor(const std::string& name) {
    return name.size() > 8 && name.compare(name.size() - 8, 8, " opening") == 0
               ? true
               : name.find("free") != std::string::npos || name.find("area") != std::string::npos;
  }

  // ------------------------------------------------------------------
  // Per-(seed, target) refinement state
  // ------------------------------------------------------------------

  struct TargetState {
    bool inited = false;
    Vec2 center;      // exact (unrounded) current estimate
    Vec2 half;        // current half extents (boxes)
    Vec2 truth_center;
    Vec2 truth_half;
    int init_count = 0;
    Rng rng{1};
    Rng verdict_rng{1};
  };

  TargetState& state_for(std::uint64_t seed, const std::string& target) {
    const auto key = std::make_pair(seed, target);
    auto it = states_.find(key);
    if (it == states_.end()) {
      TargetState st;
      st.rng = Rng(derive_seed(seed, "oracle/" + target));
      st.verdict_rng = Rng(derive_seed(seed, "oracle/verdict/" + target));
      it = states_.emplace(key, std::move(st)).first;
    }
    return it->second;
  }

  // Re-initializations after a Reject land progressively closer: attempt i
  // draws at 1/2^(i-1) of the configured magnitude.
  Vec2 draw_offset(TargetState& st) const {
    const double scale = 1.0 / double(std::uint64_t(1) << std::min(st.init_count - 1, 30));
    if (cfg_.init_sigma_px > 0.0) {
      const double angle = st.rng.uniform(0.0, 2.0 * M_PI);
      const double mag = std::abs(st.rng.normal()) * cfg_.init_sigma_px * scale;
      return {mag * std::cos(angle), mag * std::sin(angle)};
    }
    // Deterministic mode: exact magnitude along a seeded diagonal, which
    // keeps same-size boxes overlapping for offsets up to sqrt(2) times the
    // box dimension (the revision band rather than outright rejection).
    static constexpr double quadrant[4][2] = {{1, 1}, {-1, 1}, {1, -1}, {-1, -1}};
    const auto& q = quadrant[st.rng.next() % 4];
    const double component = cfg_.init_offset_px * scale * M_SQRT1_2;
    return {q[0] * component, q[1] * component};
  }

  // Integer emission that best preserves the exact center-error magnitude:
  // among the four rounding corners of the exact center, pick the one whose
  // distance to the truth is closest to the exact distance.
  PixelCoord emit_center(const TargetState& st) const {
    const double exact_err = (st.center - st.truth_center).norm();
    const std::array<double, 2> xs = {std::floor(st.center.x), std::ceil(st.center.x)};
    const std::array<double, 2> ys = {std::floor(st.center.y), std::ceil(st.center.y)};
    PixelCoord best = round_to_pixel(st.center);
    double best_dev = std::abs((Vec2(best) - st.truth_center).norm() - exact_err);
    for (double x : xs)
      for (double y : ys) {
        const PixelCoord p{static_cast<int>(x), static_cast<int>(y)};
        const double dev = std::abs((Vec2(p) - st.truth_center).norm() - exact_err);
        if (dev < best_dev) {
          best_dev = dev;
          best = p;
        }
      }
    return best;
  }

  // ------------------------------------------------------------------
  // Plans
  // ------------------------------------------------------------------

  std::vector<Subgoal> required_plan(bool omit_prerequisites) const {
    std::vector<Subgoal> plan;
    const auto add = [&](SubgoalVerb verb, const std::string& obj,
                         std::optional<std::string> target, const std::string& notes = "") {
      Subgoal s;
      s.index = static_cast<int>(plan.size());
      s.verb = verb;
      s.object_ref = obj;
      s.target_ref = std::move(target);
      s.notes = notes;
      plan.push_back(std::move(s));
    };

    const GoalSpec& goal = cfg_.scene.goal;
    switch (goal.kind) {
      case GoalKind::place_in_container:
        for (const auto& [obj, cont] : goal.bindings) {
          if (!omit_prerequisites) {
            if (const SceneObject* lid = lid_covering(cfg_.scene, cont))
              add(SubgoalVerb::remove_lid, lid->id, "free table area",
                  "clear access to " + cont);
          }
          add(SubgoalVerb::pick, obj, std::nullopt);
          add(SubgoalVerb::place, obj, cont + " opening");
        }
        break;
      case GoalKind::place_in_region:
        for (const auto& [obj, region] : goal.bindings) {
          add(SubgoalVerb::pick, obj, std::nullopt);
          add(SubgoalVerb::place, obj, region);
        }
        break;
      case GoalKind::push_into_region:
        for (const auto& [obj, region] : goal.bindings) add(SubgoalVerb::push, obj, region);
        break;
      case GoalKind::ordering:
        for (const auto& [obj, slot] : goal.bindings) {
          add(SubgoalVerb::pick, obj, std::nullopt);
          add(SubgoalVerb::place, obj, slot);
        }
        break;
      case GoalKind::trajectory_trace:
        for (const auto& [_, surface] : goal.bindings) {
          add(SubgoalVerb::trace_path, "star", surface);
          break;
        }
        break;
    }
    return plan;
  }

  // ------------------------------------------------------------------
  // Role handlers
  // ------------------------------------------------------------------

  std::string answer_supervisor(const BackendRequest& req, const std::string& text) {
    if (text.find(kMarkCompileActions) != std::string::npos) return compile_reply(text);
    if (text.find(kMarkExtractTargets) != std::string::npos) return extract_reply(text);
    if (text.find(kMarkDirectPoint) != std::string::npos) return direct_point_reply(req, text);
    if (text.find(kMarkCreatePlan) != std::string::npos) {
      const bool revise = text.find(kFieldFeedback) != std::string::npos;
      bool omit = false;
      if (!revise) {
        std::lock_guard<std::mutex> lock(mutex_);
        ++create_calls_[req.seed];
        omit = cfg_.plan_quality == PlanQuality::misses_prerequisites;
      }
      const auto plan = required_plan(omit);
      return fenced_json(nlohmann::json{{"subgoals", subgoals_to_json(plan)}});
    }
    throw Error(Errc::oracle_error, "unrecognized supervisor request");
  }

  std::string answer_verification(const std::string& text) {
    if (cfg_.never_approve) return "The plan needs further review before approval.";
    std::vector<Subgoal> proposed;
    try {
      proposed = subgoals_from_json(parse_fenced_json(text).at("subgoals"));
    } catch (const Error&) {
      return "The plan could not be read; restate it as the requested JSON list of subgoals.";
    }
    const auto required = required_plan(false);
    std::vector<std::string> issues;
    for (const auto& need : required) {
      bool found = false;
      for (const auto& have : proposed)
        if (have.verb == need.verb && have.object_ref == need.object_ref &&
            have.target_ref == need.target_ref)
          found = true;
      if (!found) {
        if (need.verb == SubgoalVerb::remove_lid)
          issues.push_back("Missing prerequisite step: remove '" + need.object_ref +
                           "' before placing anything into the container it covers.");
        else
          issues.push_back("Missing subgoal: " + verb_name(need.verb) + " " + need.object_ref +
                           (need.target_ref ? " -> " + *need.target_ref : ""));
      }
    }
    // ordering constraint: lid removal must precede the dependent place
    for (std::size_t i = 0; i < proposed.size(); ++i) {
      if (proposed[i].verb != SubgoalVerb::place || !proposed[i].target_ref) continue;
      const std::string& target = *proposed[i].target_ref;
      for (const auto& need : required) {
        if (need.verb != SubgoalVerb::remove_lid) continue;
        for (std::size_t j = 0; j < proposed.size(); ++j) {
          if (proposed[j].verb == SubgoalVerb::remove_lid &&
              proposed[j].object_ref == need.object_ref && j > i &&
              target.find(*cfg_.scene.get(need.object_ref).lid_of) != std::string::npos)
            issues.push_back("Prerequisite ordering: remove '" + need.object_ref +
                             "' before the dependent place step.");
        }
      }
    }
    if (issues.empty()) return kApprovedToken;
    std::string out;
    for (const auto& s : issues) out += s + "\n";
    return trim(out);
  }

  std::string extract_reply(const std::string& text) const {
    const auto plan = subgoals_from_json(parse_fenced_json(text).at("subgoals"));
    std::vector<std::string> names;
    const auto add = [&](const std::string& n) {
      if (n.empty()) return;
      for (const auto& existing : names)
        if (existing == n) return;
      names.push_back(n);
    };
    for (const auto& sg : plan) {
      if (sg.verb != SubgoalVerb::trace_path) add(sg.object_ref);
      if (sg.target_ref) add(*sg.target_ref);
    }
    nlohmann::json targets = nlohmann::json::array();
    for (const auto& n : names)
      targets.push_back({{"name", n},
                         {"mode", is_area_descriptor(n) ? "area_point" : "object_box"}});
    return fenced_json(nlohmann::json{{"targets", targets}});
  }

  std::string compile_reply(const std::string& text) const {
    const auto plan = subgoals_from_json(parse_fenced_json(text).at("subgoals"));
    std::map<std::string, PixelCoord> points;
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
      const auto eq = line.rfind(".point = ");
      if (eq == std::string::npos || line.rfind("grounding.", 0) != 0) continue;
      const std::string name = line.substr(10, eq - 10);
      points[name] = parse_point_text(line.substr(eq + 9));
    }
    const auto point_of = [&](const std::string& name) -> PixelCoord {
      const auto it = points.find(name);
      if (it == points.end())
        throw Error(Errc::oracle_error, "compile request lacks grounded point for '" + name + "'");
      return it->second;
    };
    nlohmann::json actions = nlohmann::json::array();
    const auto emit = [&](const std::string& kind, const std::string& target,
                          const PixelCoord& p) {
      actions.push_back({{"kind", kind}, {"target", target}, {"point", {p.x, p.y}}});
    };
    for (const auto& sg : plan) {
      switch (sg.verb) {
        case SubgoalVerb::remove_lid:
          emit("pick", sg.object_ref, point_of(sg.object_ref));
          emit("place", *sg.target_ref, point_of(*sg.target_ref));
          break;
        case SubgoalVerb::pick:
          emit("pick", sg.object_ref, point_of(sg.object_ref));
          break;
        case SubgoalVerb::place:
          emit("place", *sg.target_ref, point_of(*sg.target_ref));
          break;
        case SubgoalVerb::push: {
          const PixelCoord start = point_of(sg.object_ref);
          const PixelCoord end = point_of(*sg.target_ref);
          actions.push_back({{"kind", "push"},
                             {"target", sg.object_ref},
                             {"point", {start.x, start.y}},
                             {"end", {end.x, end.y}}});
          break;
        }
        case SubgoalVerb::rotate: {
          const PixelCoord p = point_of(sg.object_ref);
          actions.push_back({{"kind", "rotate_gripper"},
                             {"target", sg.object_ref},
                             {"point", {p.x, p.y}},
                             {"degrees", 90}});
          break;
        }
        case SubgoalVerb::move_gripper:
          emit("move_to", sg.object_ref, point_of(sg.object_ref));
          break;
        case SubgoalVerb::trace_path: {
          const PixelCoord p = point_of(*sg.target_ref);
          actions.push_back({{"kind", "trace"},
                             {"target", *sg.target_ref},
                             {"point", {p.x, p.y}},
                             {"pattern", sg.object_ref == "spiral" ? "spiral" : "star"}});
          break;
        }
        case SubgoalVerb::shake:
          emit("shake", sg.object_ref, point_of(sg.object_ref));
          break;
      }
    }
    return fenced_json(nlohmann::json{{"actions", actions}});
  }

  std::string direct_point_reply(const BackendRequest& req, const std::string& text) {
    const auto target = find_field(text, kFieldTarget);
    if (!target) throw Error(Errc::oracle_error, "direct point request without target");
    const Truth truth = resolve(*target);
    const auto purpose = find_field(text, kFieldPurpose);
    PixelCoord base = truth.point;
    if (purpose && *purpose == "push_start") {
      const auto goal_name = find_field(text, kFieldGoalTarget);
      if (goal_name)
        base = push_start_point(truth.box, resolve(*goal_name).point, 10.0);
    }
    std::lock_guard<std::mutex> lock(mutex_);
    TargetState& st = state_for(req.seed, *target + "/direct");
    Vec2 offset = draw_offset(st) * kSupervisorDirectFactor;
    const PixelCoord p = clamp_point(round_to_pixel(Vec2(base) + offset));
    return fenced_json(nlohmann::json{{"point", {p.x, p.y}}});
  }

  std::string answer_manager(const BackendRequest& req, const std::string& text) {
    if (text.find(kMarkPivotChoose) != std::string::npos) return pivot_choose_reply(text);
    if (text.find(kMarkPivotBest) != std::string::npos) return pivot_best_reply(text);
    const auto target = find_field(text, kFieldTarget);
    if (!target) throw Error(Errc::oracle_error, "manager request without target");

    if (text.find(kMarkActionPoint) != std::string::npos)
      return action_point_reply(req, text, *target);

    const Truth truth = resolve(*target);
    std::lock_guard<std::mutex> lock(mutex_);
    TargetState& st = state_for(req.seed, *target);
    st.truth_center = Vec2(truth.point);
    st.truth_half = {truth.box.width() / 2.0, truth.box.height() / 2.0};

    if (text.find(kMarkInitPoint) != std::string::npos) {
      st.inited = true;
      ++st.init_count;
      st.center = st.truth_center + draw_offset(st);
      const PixelCoord p = clamp_point(emit_center(st));
      return fenced_json(nlohmann::json{{"point", {p.x, p.y}}});
    }

    if (text.find(kMarkInitBox) != std::string::npos) {
      ++st.init_count;
      st.inited = true;
      if (st.init_count <= cfg_.force_wrong_inits) {
        // deliberately initialize on some other object
        BoundingBox wrong = truth.box;
        bool found = false;
        for (const auto& o : cfg_.scene.objects) {
          const BoundingBox b = object_bbox(cfg_.scene, o.id);
          if (boxes_disjoint(b, truth.box)) {
            wrong = b;
            found = true;
            break;
          }
        }
        if (!found) {
          wrong.min.x += 3 * truth.box.width();
          wrong.max.x += 3 * truth.box.width();
        }
        st.center = wrong.center();
        st.half = {wrong.width() / 2.0, wrong.height() / 2.0};
        const PixelCoord p = round_to_pixel(st.center);
        return fenced_json(
            nlohmann::json{{"point", {p.x, p.y}},
                           {"box", {wrong.min.x, wrong.min.y, wrong.max.x, wrong.max.y}}});
      }
      st.center = st.truth_center + draw_offset(st);
      st.half = st.truth_half * (1.0 + cfg_.init_size_error);
      const PixelCoord p = emit_center(st);
      const BoundingBox box = box_around(Vec2(p), st.half.x, st.half.y);
      return fenced_json(nlohmann::json{
          {"point", {p.x, p.y}}, {"box", {box.min.x, box.min.y, box.max.x, box.max.y}}});
    }
    throw Error(Errc::oracle_error, "unrecognized manager request");
  }

  std::string action_point_reply(const BackendRequest& req, const std::string& text,
                                 const std::string& target) {
    const auto purpose = find_field(text, kFieldPurpose);
    const auto box_text = find_field(text, kFieldApprovedBox);
    const auto point_text = find_field(text, kFieldApprovedPoint);
    PixelCoord point;
    if (box_text) {
      const BoundingBox box = parse_box_text(*box_text);
      point = round_to_pixel(box.center());
      if (purpose && *purpose == "push_start") {
        const auto goal_name = find_field(text, kFieldGoalTarget);
        if (!goal_name) throw Error(Errc::oracle_error, "push point request without goal target");
        point = push_start_point(box, resolve(*goal_name).point, 10.0);
      }
    } else if (point_text) {
      point = parse_point_text(*point_text);
    } else {
      throw Error(Errc::oracle_error, "action point request without approved box or point");
    }
    {
      std::lock_guard<std::mutex> lock(mutex_);
      const int attempt = create_calls_[req.seed];
      if (attempt <= cfg_.scripted_failure_attempts && purpose && *purpose == "grasp") {
        // spoiled attempt: answer well off the object so the pick misses
        point.x = std::min(cfg_.scene.width - 1, point.x + 3 * std::max(40, cfg_.scene.width / 8));
      }
    }
    point = clamp_point(point);
    return fenced_json(nlohmann::json{{"point", {point.x, point.y}}});
  }

  std::string answer_mover(const BackendRequest& req, const std::string& text) {
    const auto target = find_field(text, kFieldTarget);
    if (!target) throw Error(Errc::oracle_error, "mover request without target");
    const bool self_check = text.find(kMarkSelfCheck) != std::string::npos;
    const Truth truth = resolve(*target);

    std::lock_guard<std::mutex> lock(mutex_);
    TargetState& st = state_for(req.seed, *target);
    if (!st.inited) {
      st.truth_center = Vec2(truth.point);
      st.truth_half = {truth.box.width() / 2.0, truth.box.height() / 2.0};
      st.center = st.truth_center;
      st.half = st.truth_half;
      st.inited = true;
    }

    const bool point_mode = find_field(text, kFieldCurrentPoint).has_value();
    st.center = st.center + (st.truth_center - st.center) * cfg_.contraction;
    if (point_mode) {
      const PixelCoord p = clamp_point(round_to_pixel(st.center));
      nlohmann::json j{{"point", {p.x, p.y}}};
      if (self_check) {
        const double err = distance(p, truth.point);
        VerdictValue v = err <= cfg_.point_accept_px * kSelfCheckPointFactor
                             ? VerdictValue::accept
                             : (err > cfg_.point_reject_px ? VerdictValue::reject
                                                           : VerdictValue::revision_needed);
        v = maybe_flip(v, st, cfg_.verdict_noise * kSelfCheckNoiseFactor);
        j["verdict"] = verdict_text(v);
      }
      return fenced_json(j);
    }

    st.half = st.half + (st.truth_half - st.half) * cfg_.contraction;
    const BoundingBox box = box_around(st.center, st.half.x, st.half.y);
    nlohmann::json j{{"box", {box.min.x, box.min.y, box.max.x, box.max.y}}};
    if (self_check) {
      VerdictValue v = box_verdict(box, truth.box, cfg_.iou_accept * kSelfCheckIouFactor);
      v = maybe_flip(v, st, cfg_.verdict_noise * kSelfCheckNoiseFactor);
      j["verdict"] = verdict_text(v);
    }
    return fenced_json(j);
  }

  std::string answer_checker(const BackendRequest& req, const std::string& text) {
    const auto target = find_field(text, kFieldTarget);
    if (!target) throw Error(Errc::oracle_error, "checker request without target");
    const Truth truth = resolve(*target);
    VerdictValue v;
    if (const auto box_text = find_field(text, kFieldCurrentBox)) {
      v = box_verdict(parse_box_text(*box_text), truth.box, cfg_.iou_accept);
    } else if (const auto point_text = find_field(text, kFieldCurrentPoint)) {
      const double err = distance(parse_point_text(*point_text), truth.point);
      v = err <= cfg_.point_accept_px
              ? VerdictValue::accept
              : (err > cfg_.point_reject_px ? VerdictValue::reject : VerdictValue::revision_needed);
    } else {
      throw Error(Errc::oracle_error, "checker request without current box or point");
    }
    std::lock_guard<std::mutex> lock(mutex_);
    TargetState& st = state_for(req.seed, *target);
    v = maybe_flip(v, st, cfg_.verdict_noise);
    return verdict_text(v);
  }

  // ------------------------------------------------------------------
  // PIVOT-style selection
  // ------------------------------------------------------------------

  static std::vector<std::pair<int, PixelCoord>> parse_candidates(const std::string& text) {
    std::vector<std::pair<int, PixelCoord>> out;
    const auto pos = text.find(kFieldCandidates);
    if (pos == std::string::npos)
      throw Error(Errc::oracle_error, "selection request without candidates");
    std::istringstream lines(text.substr(pos));
    std::string line;
    std::getline(lines, line);  // skip header
    while (std::getline(lines, line)) {
      int idx = 0, x = 0, y = 0;
      if (std::sscanf(line.c_str(), " %d : [ %d , %d ]", &idx, &x, &y) == 3)
        out.push_back({idx, {x, y}});
      else if (!trim(line).empty())
        break;
    }
    if (out.empty()) throw Error(Errc::oracle_error, "empty candidate list");
    return out;
  }

  std::string pivot_choose_reply(const std::string& text) const {
    const auto target = find_field(text, kFieldTarget);
    if (!target) throw Error(Errc::oracle_error, "pivot request without target");
    const Truth truth = resolve(*target);
    auto candidates = parse_candidates(text);
    std::stable_sort(candidates.begin(), candidates.end(),
                     [&](const auto& a, const auto& b) {
                       return distance(a.second, truth.point) < distance(b.second, truth.point);
                     });
    nlohmann::json chosen = nlohmann::json::array();
    const std::size_t k = std::min<std::size_t>(3, candidates.size());
    for (std::size_t i = 0; i < k; ++i) chosen.push_back(candidates[i].first);
    return fenced_json(nlohmann::json{{"chosen", chosen}});
  }

  std::string pivot_best_reply(const std::string& text) const {
    const auto target = find_field(text, kFieldTarget);
    if (!target) throw Error(Errc::oracle_error, "pivot request without target");
    const Truth truth = resolve(*target);
    const auto candidates = parse_candidates(text);
    int best = candidates.front().first;
    double best_d = distance(candidates.front().second, truth.point);
    for (const auto& [idx, p] : candidates) {
      const double d = distance(p, truth.point);
      if (d < best_d) {
        best_d = d;
        best = idx;
      }
    }
    return fenced_json(nlohmann::json{{"best", best}});
  }

  // ------------------------------------------------------------------

  static VerdictValue box_verdict(const BoundingBox& box, const BoundingBox& truth, double tau) {
    const double overlap = iou(box, truth);
    if (overlap >= tau) return VerdictValue::accept;
    if (overlap <= 0.0) return VerdictValue::reject;
    return VerdictValue::revision_needed;
  }

  static VerdictValue maybe_flip(VerdictValue v, TargetState& st, double prob) {
    if (prob <= 0.0) return v;
    if (st.verdict_rng.uniform() >= prob) return v;
    switch (v) {
      case VerdictValue::accept: return VerdictValue::revision_needed;
      case VerdictValue::reject: return VerdictValue::revision_needed;
      case VerdictValue::revision_needed:
        return st.verdict_rng.uniform() < 0.5 ? VerdictValue::accept : VerdictValue::reject;
    }
    return v;
  }

  PixelCoord clamp_point(PixelCoord p) const {
    p.x = std::clamp(p.x, 0, cfg_.scene.width - 1);
    p.y = std::clamp(p.y, 0, cfg_.scene.height - 1);
    return p;
  }

  OracleConfig cfg_;
  std::mutex mutex_;
  std::map<std::pair<std::uint64_t, std::string>, TargetState> states_;
  std::map<std::uint64_t, int> create_calls_;
};

inline BackendHandle make_oracle(OracleConfig cfg) {
  return std::make_shared<ScriptedOracle>(std::move(cfg));
}

}  // namespace planground
