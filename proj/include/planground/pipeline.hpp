#pragma once

#include <filesystem>
#include <future>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "planground/actuation.hpp"
#include "planground/agent.hpp"
#include "planground/backend.hpp"
#include "planground/grounder.hpp"
#include "planground/planner.hpp"
#include "planground/scene.hpp"
#include "planground/sim.hpp"

namespace planground {

// One of the Table-12 style agent-enable patterns (0 = complete pipeline).
struct AblationSetting {
  int id = 0;
  bool verification = true;
  bool ground_manager = true;
  bool checker = true;
  bool mover = true;
  bool memory = true;
};

struct PipelineCaps {
  int plan_iters = 5;
  int grounding_iters = 10;
  int parse_retries = 3;
  int fan_out = 4;  // concurrent grounding targets
};

enum class FailureStage { plan, grounding, execution };

inline std::string failure_stage_name(FailureStage s) {
  switch (s) {
    case FailureStage::plan: return "plan";
    case FailureStage::grounding: return "grounding";
    case FailureStage::execution: return "execution";
  }
  return "plan";
}

struct PipelineSetup {
  Scene scene;
  TaskPrompt task;
  AblationSetting setting;
  PipelineCaps caps;
  Calibration calibration;
  std::uint64_t seed = 0;
  std::string artifact_dir;      // empty: keep everything in memory
  std::string failure_report;    // closed-loop replans inject the prior failure
};

struct TargetGrounding {
  TargetEntry entry;
  GroundingState state;
  std::optional<ActionPoint> action_point;
};

struct PipelineOutcome {
  bool success = false;
  std::optional<FailureStage> failure_stage;
  std::string failure_detail;
  Plan plan;
  std::vector<TargetGrounding> grounding;
  std::vector<ActionPrimitive> actions;
  std::vector<SimEvent> events;
  GoalReport goal;
  std::map<std::string, AgentTranscript> transcripts;  // keyed by instance name
  SystemMemory memory;

  std::map<std::string, std::int64_t> call_counts() const {
    std::map<std::string, std::int64_t> counts;
    for (const auto& role :
         {AgentRole::supervisor, AgentRole::verification, AgentRole::ground_manager,
          AgentRole::mover, AgentRole::checker, AgentRole::memory})
      counts[role_name(role)] = 0;
    for (const auto& [_, t] : transcripts)
      counts[role_name(t.role)] += static_cast<std::int64_t>(t.exchanges.size());
    return counts;
  }
};

namespace detail {

struct PurposeInfo {
  ActionPurpose purpose = ActionPurpose::grasp;
  std::optional<std::string> goal_target;
};

// What each target's action point is for, derived from the plan subgoals.
inline std::map<std::string, PurposeInfo> derive_purposes(const Plan& plan,
                                                          const TargetList& targets) {
  std::map<std::string, PurposeInfo> purposes;
  const auto set_if_new = [&](const std::string& name, ActionPurpose p,
                              std::optional<std::string> goal = std::nullopt) {
    if (!purposes.count(name)) purposes[name] = {p, std::move(goal)};
  };
  for (const auto& sg : plan.subgoals) {
    switch (sg.verb) {
      case SubgoalVerb::pick:
      case SubgoalVerb::remove_lid:
      case SubgoalVerb::shake:
        set_if_new(sg.object_ref, ActionPurpose::grasp);
        if (sg.target_ref) set_if_new(*sg.target_ref, ActionPurpose::place);
        break;
      case SubgoalVerb::place:
        set_if_new(sg.object_ref, ActionPurpose::grasp);
        if (sg.target_ref) set_if_new(*sg.target_ref, ActionPurpose::place);
        break;
      case SubgoalVerb::push:
        set_if_new(sg.object_ref, ActionPurpose::push_start, sg.target_ref);
        if (sg.target_ref) set_if_new(*sg.target_ref, ActionPurpose::place);
        break;
      case SubgoalVerb::rotate:
      case SubgoalVerb::move_gripper:
        set_if_new(sg.object_ref, ActionPurpose::grasp);
        break;
      case SubgoalVerb::trace_path:
        if (sg.target_ref) set_if_new(*sg.target_ref, ActionPurpose::trace);
        break;
    }
  }
  for (const auto& t : targets.targets)
    set_if_new(t.name, t.mode == TargetMode::object_box ? ActionPurpose::grasp
                                                        : ActionPurpose::place);
  return purposes;
}

inline ActionPoint supervisor_direct_point(const PipelineSetup& setup,
                                           std::shared_ptr<const RasterImage> env,
                                           const std::string& target, const PurposeInfo& info,
                                           ChatBackend& backend, const AgentSpec& supervisor,
                                           AgentTranscript& log) {
  AgentCall call;
  std::string t =
      "Task: {task}\n"
      "Target: {target}\n"
      "Purpose: {purpose}\n";
  if (info.goal_target) t += std::string(kFieldGoalTarget) + " {goal_target}\n";
  t += "The environment image is attached. Reply with the single action point for this target, "
       "in original image coordinates. Output a fenced JSON block: {\"point\": [x, y]}";
  call.user_template = t;
  call.context["task"] = setup.task.text;
  call.context["target"] = target;
  call.context["purpose"] = purpose_name(info.purpose);
  if (info.goal_target) call.context["goal_target"] = *info.goal_target;
  call.images = {env};
  call.expect = Expect::point;
  call.seed = setup.seed;
  const ParsedPayload payload = invoke_agent(supervisor, call, backend, log);
  PixelCoord p = point_from_json(payload.body.at("point"));
  p.x = std::clamp(p.x, 0, env->width() - 1);
  p.y = std::clamp(p.y, 0, env->height() - 1);
  return ActionPoint{target, p, info.purpose};
}

inline std::string grounded_lines(const std::vector<TargetGrounding>& grounding) {
  std::string out;
  for (const auto& g : grounding) {
    if (g.state.mode == TargetMode::object_box && g.state.approved)
      out += "grounding." + g.entry.name + ".bbox = " + box_to_string(g.state.current_box) + "\n";
    if (g.action_point)
      out += "grounding." + g.entry.name + ".point = " + point_to_string(g.action_point->point) +
             "\n";
  }
  return out;
}

inline std::string failure_report_text(const PipelineOutcome& outcome) {
  std::string report = "stage: " +
                       (outcome.failure_stage ? failure_stage_name(*outcome.failure_stage)
                                              : std::string("execution")) +
                       "\ndetail: " + outcome.failure_detail + "\nevents:\n";
  for (const auto& e : outcome.events)
    report += "  " + e.kind + (e.target.empty() ? "" : " " + e.target) + " " +
              point_to_string(e.pixel) + " -> " + (e.ok ? "ok" : "failed") +
              (e.detail.empty() ? "" : " (" + e.detail + ")") + "\n";
  return report;
}

}  // namespace detail

// One full pass: plan/verify refinement, target extraction, per-target
// grounding (concurrent up to caps.fan_out), action compilation, simulated
// execution, goal check. Never throws for task-level failures; those are
// reported in the outcome.
inline PipelineOutcome run_pipeline(const PipelineSetup& setup, BackendHandle backend) {
  PipelineOutcome outcome;
  const int retries = setup.caps.parse_retries;
  const AgentSpec supervisor = default_agent_spec(AgentRole::supervisor, retries);
  const AgentSpec verification = default_agent_spec(AgentRole::verification, retries);
  const AgentSpec manager = default_agent_spec(AgentRole::ground_manager, retries);
  const AgentSpec mover = default_agent_spec(AgentRole::mover, retries);
  const AgentSpec checker = default_agent_spec(AgentRole::checker, retries);

  auto& transcripts = outcome.transcripts;
  const auto log_for = [&](AgentRole role, const std::string& instance) -> AgentTranscript& {
    auto [it, inserted] = transcripts.emplace(instance, AgentTranscript{role, instance, {}});
    return it->second;
  };

  const RenderOutput rendered = render_scene(setup.scene);
  const auto env = std::make_shared<const RasterImage>(rendered.image);

  if (!setup.artifact_dir.empty()) {
    std::filesystem::create_directories(setup.artifact_dir);
    std::filesystem::create_directories(setup.artifact_dir + "/images");
    write_png(setup.artifact_dir + "/images/environment.png", rendered.image);
  }

  // ---- stage 1: plan ----
  Plan plan;
  try {
    PlanLoopOptions opt;
    opt.max_iters = setup.caps.plan_iters;
    opt.verification_enabled = setup.setting.verification;
    opt.failure_report = setup.failure_report;
    opt.seed = setup.seed;
    plan = plan_loop(setup.task, env, *backend, outcome.memory, supervisor, verification,
                     log_for(AgentRole::supervisor, "supervisor"),
                     log_for(AgentRole::verification, "verification"), opt);
  } catch (const Error& e) {
    outcome.failure_stage = FailureStage::plan;
    outcome.failure_detail = e.what();
    return outcome;
  }
  outcome.plan = plan;

  // ---- stage 2: targets ----
  TargetList targets;
  try {
    targets = extract_targets(plan, *backend, outcome.memory, supervisor,
                              log_for(AgentRole::supervisor, "supervisor"), setup.seed);
  } catch (const Error& e) {
    outcome.failure_stage = FailureStage::plan;
    outcome.failure_detail = e.what();
    return outcome;
  }

  const auto purposes = detail::derive_purposes(plan, targets);

  // ---- stage 3: grounding ----
  CropSink sink;
  if (!setup.artifact_dir.empty()) {
    const std::string dir = setup.artifact_dir;
    sink = [dir](const std::string& target, int iteration, const RasterImage& img) {
      const std::string folder = dir + "/images/" + slugify(target);
      std::filesystem::create_directories(folder);
      write_png(folder + "/" + std::to_string(iteration) + ".png", img);
    };
  }

  try {
    if (!setup.setting.ground_manager) {
      // grounding team removed: the supervisor emits coordinates directly
      for (const auto& t : targets.targets) {
        const auto& info = purposes.at(t.name);
        TargetGrounding g;
        g.entry = t;
        g.state.target = t.name;
        g.state.mode = TargetMode::area_point;
        g.state.approved = true;
        g.action_point = detail::supervisor_direct_point(
            setup, env, t.name, info, *backend, supervisor,
            log_for(AgentRole::supervisor, "supervisor"));
        g.state.current_point = g.action_point->point;
        outcome.grounding.push_back(std::move(g));
      }
    } else {
      GroundingContext ctx;
      ctx.env = env;
      ctx.plan = &plan;
      ctx.manager = manager;
      ctx.mover = mover;
      ctx.checker = checker;
      ctx.caps.max_iters = setup.caps.grounding_iters;
      ctx.wiring.checker_enabled = setup.setting.checker;
      ctx.wiring.mover_enabled = setup.setting.mover;
      ctx.crop_sink = sink;
      ctx.seed = setup.seed;

      // per-target agent instances, created up front so worker threads never
      // touch shared containers
      struct Slot {
        GroundingContext ctx;
        const TargetEntry* entry = nullptr;
        const detail::PurposeInfo* info = nullptr;
        GroundingResult result;
      };
      std::vector<Slot> slots(targets.targets.size());
      for (std::size_t i = 0; i < targets.targets.size(); ++i) {
        const auto& t = targets.targets[i];
        slots[i].ctx = ctx;
        slots[i].ctx.manager_log = &log_for(AgentRole::ground_manager, "manager[" + t.name + "]");
        slots[i].ctx.mover_log = &log_for(AgentRole::mover, "mover[" + t.name + "]");
        slots[i].ctx.checker_log = &log_for(AgentRole::checker, "checker[" + t.name + "]");
        slots[i].entry = &t;
        slots[i].info = &purposes.at(t.name);
      }

      const int fan_out = std::max(1, setup.caps.fan_out);
      std::size_t next = 0;
      while (next < slots.size()) {
        std::vector<std::future<void>> batch;
        const std::size_t end = std::min(slots.size(), next + std::size_t(fan_out));
        for (std::size_t i = next; i < end; ++i) {
          Slot& slot = slots[i];
          batch.push_back(std::async(std::launch::async, [&slot, backend] {
            slot.result = ground_target(slot.entry->name, slot.entry->mode, *backend, slot.ctx,
                                        slot.info->purpose, slot.info->goal_target);
          }));
        }
        for (auto& f : batch) f.get();
        next = end;
      }

      for (auto& slot : slots) {
        TargetGrounding g;
        g.entry = *slot.entry;
        g.state = slot.result.state;
        g.action_point = slot.result.action_point;
        outcome.grounding.push_back(std::move(g));
        if (slot.result.exhausted && !outcome.failure_stage) {
          outcome.failure_stage = FailureStage::grounding;
          outcome.failure_detail =
              "grounding exhausted for target '" + slot.entry->name + "'";
        }
      }
    }
  } catch (const Error& e) {
    outcome.failure_stage = FailureStage::grounding;
    outcome.failure_detail = e.what();
    return outcome;
  }

  if (setup.setting.memory) {
    for (const auto& g : outcome.grounding) {
      if (g.state.mode == TargetMode::object_box && g.state.approved)
        outcome.memory.update(MemoryStage::grounding, g.entry.name + ".bbox",
                              box_to_string(g.state.current_box), AgentRole::ground_manager);
      if (g.action_point)
        outcome.memory.update(MemoryStage::grounding, g.entry.name + ".point",
                              point_to_string(g.action_point->point), AgentRole::ground_manager);
    }
  }
  if (outcome.failure_stage) return outcome;

  // ---- stage 4: actions ----
  std::map<std::string, ActionPoint> points;
  std::map<std::string, BoundingBox> boxes;
  for (const auto& g : outcome.grounding) {
    if (g.action_point) points[g.entry.name] = *g.action_point;
    if (g.state.mode == TargetMode::object_box && g.state.approved)
      boxes[g.entry.name] = g.state.current_box;
  }
  try {
    CompileOptions copt;
    copt.seed = setup.seed;
    outcome.actions = compile_actions(
        plan, points, boxes, setup.setting.memory ? &outcome.memory : nullptr,
        detail::grounded_lines(outcome.grounding), *backend, supervisor,
        log_for(AgentRole::supervisor, "supervisor"), setup.calibration, rendered.depth, copt);
    if (setup.setting.memory)
      outcome.memory.update(MemoryStage::actions, "sequence",
                            primitives_to_json(outcome.actions).dump(), AgentRole::supervisor);
  } catch (const Error& e) {
    outcome.failure_stage = FailureStage::grounding;
    outcome.failure_detail = e.what();
    return outcome;
  }

  // ---- stage 5: execute & check ----
  SimState sim = make_sim(setup.scene);
  execute_actions(sim, outcome.actions);
  outcome.events = sim.events;
  outcome.goal = goal_check(sim, setup.scene.goal);
  outcome.success = outcome.goal.success;
  if (!outcome.success) {
    outcome.failure_stage = FailureStage::execution;
    outcome.failure_detail = outcome.goal.detail;
  }

  if (!setup.artifact_dir.empty())
    write_png(setup.artifact_dir + "/images/final.png", render_scene(sim.scene).image);
  return outcome;
}

// ---------------------------------------------------------------------------
// Artifact serialization
// ---------------------------------------------------------------------------

inline nlohmann::json plan_to_json(const Plan& plan) {
  nlohmann::json j;
  j["subgoals"] = subgoals_to_json(plan.subgoals);
  j["revision"] = plan.revision;
  j["approved"] = plan.approved;
  j["approval_source"] = plan.approval_source == ApprovalSource::verification ? "verification"
                         : plan.approval_source == ApprovalSource::ablation   ? "ablation"
                                                                              : "none";
  return j;
}

inline nlohmann::json grounding_to_json(const std::vector<TargetGrounding>& grounding) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& g : grounding) {
    nlohmann::json e;
    e["mode"] = target_mode_name(g.state.mode);
    e["approved"] = g.state.approved;
    e["iterations"] = g.state.iteration;
    if (g.state.mode == TargetMode::object_box && g.state.current_box.valid())
      e["box"] = {g.state.current_box.min.x, g.state.current_box.min.y, g.state.current_box.max.x,
                  g.state.current_box.max.y};
    else
      e["point"] = {g.state.current_point.x, g.state.current_point.y};
    if (g.action_point) {
      e["action_point"] = {g.action_point->point.x, g.action_point->point.y};
      e["purpose"] = purpose_name(g.action_point->purpose);
    }
    nlohmann::json verdicts = nlohmann::json::array();
    for (const auto& h : g.state.history) verdicts.push_back(verdict_text(h.verdict));
    e["verdicts"] = verdicts;
    j[g.entry.name] = e;
  }
  return j;
}

inline void write_transcripts(const std::string& dir,
                              const std::map<std::string, AgentTranscript>& transcripts,
                              const std::string& run_id) {
  std::filesystem::create_directories(dir);
  for (const auto& [instance, t] : transcripts) {
    std::string body;
    int ordinal = 0;
    for (const auto& e : t.exchanges) {
      nlohmann::json line;
      line["run_id"] = run_id;
      line["agent_role"] = role_name(t.role);
      line["ordinal"] = ordinal++;
      line["request_text"] = e.request_text;
      line["image_refs"] = e.image_refs;
      line["reply_text"] = e.reply_text;
      line["parsed_kind"] = e.parsed_kind;
      body += line.dump() + "\n";
    }
    write_file(dir + "/" + slugify(instance) + ".jsonl", body);
  }
}

inline void write_pipeline_artifacts(const std::string& dir, const PipelineOutcome& outcome,
                                     const std::string& run_id) {
  std::filesystem::create_directories(dir);
  write_file(dir + "/plan.json", plan_to_json(outcome.plan).dump(2) + "\n");
  write_file(dir + "/grounding.json", grounding_to_json(outcome.grounding).dump(2) + "\n");
  write_file(dir + "/actions.json", primitives_to_json(outcome.actions).dump(2) + "\n");
  std::string events;
  for (const auto& e : outcome.events) events += event_to_json(e).dump() + "\n";
  write_file(dir + "/events.jsonl", events);
  write_transcripts(dir + "/transcripts", outcome.transcripts, run_id);
}

}  // namespace planground
