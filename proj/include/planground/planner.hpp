#pragma once

#include <memory>
#include <string>
#include <vector>

#include "planground/agent.hpp"
#include "planground/backend.hpp"
#include "planground/errors.hpp"
#include "planground/image.hpp"
#include "planground/protocol.hpp"
#include "planground/types.hpp"

namespace planground {

struct TaskPrompt {
  std::string text;
  std::vector<std::shared_ptr<const RasterImage>> images;  // optional multimodal parts
};

struct PlanLoopOptions {
  int max_iters = 5;
  bool verification_enabled = true;
  std::string failure_report;  // closed-loop replans inject the previous failure here
  std::uint64_t seed = 0;
};

namespace detail {

inline std::string plan_request_template(bool revise) {
  std::string t = "Task: {task}\n";
  if (revise)
    t += std::string(kFieldFeedback) + "\n{feedback}\n";
  t += "{failure_block}"
       "The environment image is attached.\n"
       "Output the high-level plan as a fenced JSON block: {\"subgoals\": [{\"verb\": ..., "
       "\"object\": ..., \"target\": ... or null, \"notes\": ...}]}. Allowed verbs: pick, place, "
       "push, rotate, move_gripper, remove_lid, trace_path, shake.";
  return t;
}

}  // namespace detail

// Supervisor/verification refinement. Each round is one verification call
// plus one supervisor revision call when feedback was given; the loop stops
// at approval or after max_iters verification rounds.
inline Plan plan_loop(const TaskPrompt& task, std::shared_ptr<const RasterImage> env,
                      ChatBackend& backend, SystemMemory& mem, const AgentSpec& supervisor,
                      const AgentSpec& verification, AgentTranscript& supervisor_log,
                      AgentTranscript& verification_log, const PlanLoopOptions& opt = {}) {
  if (opt.max_iters < 1) throw Error(Errc::config_error, "plan_loop: max_iters must be >= 1");

  std::string failure_block;
  if (!opt.failure_report.empty())
    failure_block = std::string(kFieldFailureReport) + "\n" + opt.failure_report + "\n";

  AgentCall create;
  create.user_template = detail::plan_request_template(false);
  create.context["task"] = task.text;
  create.context["failure_block"] = failure_block;
  create.images = task.images;
  create.images.push_back(env);
  create.expect = Expect::plan;
  create.seed = opt.seed;

  Plan plan;
  plan.subgoals =
      subgoals_from_json(invoke_agent(supervisor, create, backend, supervisor_log).body.at("subgoals"));

  if (!opt.verification_enabled) {
    plan.approved = true;
    plan.approval_source = ApprovalSource::ablation;
    mem.update(MemoryStage::plan, "task", task.text, AgentRole::supervisor);
    mem.update(MemoryStage::plan, "subgoals", subgoals_to_json(plan.subgoals).dump(),
               AgentRole::supervisor);
    return plan;
  }

  std::string last_feedback;
  for (int round = 0; round < opt.max_iters; ++round) {
    AgentCall verify;
    verify.user_template =
        "Task: {task}\n"
        "Current plan:\n{plan_json}\n"
        "The environment image is attached.\n"
        "Check the plan against the environment for collision risks, physical constraints, and "
        "missing prerequisite steps. Reply APPROVED or feedback for plan revision.";
    verify.context["task"] = task.text;
    verify.context["plan_json"] =
        fenced_json(nlohmann::json{{"subgoals", subgoals_to_json(plan.subgoals)}});
    verify.images = {env};
    verify.expect = Expect::approval_or_feedback;
    verify.seed = opt.seed;
    const ParsedPayload verdict = invoke_agent(verification, verify, backend, verification_log);

    if (verdict.kind == PayloadKind::approval) {
      plan.approved = true;
      plan.approval_source = ApprovalSource::verification;
      break;
    }
    last_feedback = verdict.body.at("text").get<std::string>();
    if (round + 1 >= opt.max_iters) break;

    AgentCall revise;
    revise.user_template = detail::plan_request_template(true);
    revise.context["task"] = task.text;
    revise.context["feedback"] = last_feedback;
    revise.context["failure_block"] = failure_block;
    revise.images = {env};
    revise.expect = Expect::plan;
    revise.seed = opt.seed;
    plan.subgoals =
        subgoals_from_json(invoke_agent(supervisor, revise, backend, supervisor_log).body.at("subgoals"));
    ++plan.revision;
  }

  if (!plan.approved)
    throw Error(Errc::plan_not_approved,
                "no approval after " + std::to_string(opt.max_iters) + " rounds; last feedback: " +
                    (last_feedback.empty() ? "(none)" : last_feedback));

  mem.update(MemoryStage::plan, "task", task.text, AgentRole::supervisor);
  mem.update(MemoryStage::plan, "subgoals", subgoals_to_json(plan.subgoals).dump(),
             AgentRole::supervisor);
  if (!last_feedback.empty())
    mem.update(MemoryStage::plan, "verification_feedback", last_feedback, AgentRole::verification);
  return plan;
}

// Supervisor call that turns the verified plan into the grounding work list.
inline TargetList extract_targets(const Plan& plan, ChatBackend& backend, SystemMemory& mem,
                                  const AgentSpec& supervisor, AgentTranscript& supervisor_log,
                                  std::uint64_t seed = 0) {
  if (!plan.approved) throw Error(Errc::not_approved, "cannot extract targets of an unapproved plan");

  AgentCall call;
  call.user_template =
      "Verified plan:\n{plan_json}\n"
      "List every object or area the plan must ground, once each, in first-use order. Container "
      "openings and free/empty areas take mode \"area_point\"; concrete objects take mode "
      "\"object_box\". Output a fenced JSON block: {\"targets\": [{\"name\": ..., \"mode\": "
      "\"object_box\"|\"area_point\"}]}";
  call.context["plan_json"] = fenced_json(nlohmann::json{{"subgoals", subgoals_to_json(plan.subgoals)}});
  call.expect = Expect::target_list;
  call.seed = seed;
  const ParsedPayload payload = invoke_agent(supervisor, call, backend, supervisor_log);

  TargetList list;
  for (const auto& jt : payload.body.at("targets")) {
    TargetEntry e;
    e.name = jt.at("name").get<std::string>();
    e.mode = target_mode_from_name(jt.at("mode").get<std::string>());
    if (list.find(e.name))
      throw Error(Errc::validation_error, "duplicate target '" + e.name + "' in extraction");
    list.targets.push_back(std::move(e));
  }

  // every subgoal reference must be covered exactly once
  for (const auto& sg : plan.subgoals) {
    if (sg.verb != SubgoalVerb::trace_path && !list.find(sg.object_ref))
      throw Error(Errc::validation_error, "extraction misses object '" + sg.object_ref + "'");
    if (sg.target_ref && !list.find(*sg.target_ref))
      throw Error(Errc::validation_error, "extraction misses target '" + *sg.target_ref + "'");
  }
  if (!plan.subgoals.empty() && list.targets.empty())
    throw Error(Errc::validation_error, "approved plan extracted an empty target list");

  nlohmann::json jlist = nlohmann::json::array();
  for (const auto& t : list.targets)
    jlist.push_back({{"name", t.name}, {"mode", target_mode_name(t.mode)}});
  mem.update(MemoryStage::targets, "list", jlist.dump(), AgentRole::supervisor);
  return list;
}

}  // namespace planground
