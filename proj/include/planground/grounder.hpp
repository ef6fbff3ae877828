#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "planground/agent.hpp"
#include "planground/backend.hpp"
#include "planground/errors.hpp"
#include "planground/imaging.hpp"
#include "planground/protocol.hpp"
#include "planground/types.hpp"

namespace planground {

struct GroundingCaps {
  int max_iters = 10;
  int reinit_limit = 2;         // Reject re-initializations tolerated per target
  double crop_margin = 0.5;     // margin fraction for zoomed views
  int tick_spacing = 50;
  int point_window_half = 100;  // area mode uses a fixed 200x200 checker window
};

// Which grounding-team members take part; ablations disable pieces.
struct GroundingWiring {
  bool checker_enabled = true;
  bool mover_enabled = true;
};

struct GroundingResult {
  GroundingState state;
  std::optional<ActionPoint> action_point;
  int manager_calls = 0;
  int mover_calls = 0;
  int checker_calls = 0;
  bool exhausted = false;
};

// Callback for persisting per-iteration annotated crops.
using CropSink = std::function<void(const std::string& target, int iteration, const RasterImage&)>;

struct GroundingContext {
  std::shared_ptr<const RasterImage> env;
  const Plan* plan = nullptr;
  AgentSpec manager;
  AgentSpec mover;
  AgentSpec checker;
  AgentTranscript* manager_log = nullptr;
  AgentTranscript* mover_log = nullptr;
  AgentTranscript* checker_log = nullptr;
  GroundingCaps caps;
  GroundingWiring wiring;
  CropSink crop_sink;
  std::uint64_t seed = 0;
};

// Checker call on a zoomed view; exposed standalone for the verdict harness.
inline VerdictValue checker_verdict(const ZoomFrame& crop, const BoundingBox& box,
                                    const std::string& target, ChatBackend& backend,
                                    const AgentSpec& checker, AgentTranscript& log,
                                    std::uint64_t seed = 0, int tick_spacing = 50) {
  RasterImage view = overlay_zoom_ticks(crop, tick_spacing);
  BoundingBox zb{crop.to_zoom(box.min), crop.to_zoom(box.max)};
  zb = clamp_box(zb, view.width(), view.height());
  draw_rect_outline(view, zb, Color{220, 50, 47}, 2);

  AgentCall call;
  call.user_template =
      "Target: {target}\n"
      "Current box: {box}\n"
      "The zoomed view with the box drawn and original-image tick labels is attached. Decide "
      "whether the box is acceptable for final output. Your output must be exactly one of:\n"
      "Accept\nRevision Needed\nReject";
  call.context["target"] = target;
  call.context["box"] = box_to_string(box);
  call.images = {std::make_shared<RasterImage>(std::move(view))};
  call.expect = Expect::verdict;
  call.seed = seed;
  const ParsedPayload payload = invoke_agent(checker, call, backend, log);
  return *verdict_from_text(payload.body.at("verdict").get<std::string>());
}

namespace detail {

class GroundingSession {
 public:
  GroundingSession(const std::string& target, TargetMode mode, ChatBackend& backend,
                   const GroundingContext& ctx)
      : target_(target), mode_(mode), backend_(backend), ctx_(ctx) {
    result_.state.target = target;
    result_.state.mode = mode;
  }

  GroundingResult run(ActionPurpose purpose, const std::optional<std::string>& goal_target) {
    if (box_mode()) box_ = init_box();
    else point_ = init_point();

    bool approved = !ctx_.wiring.mover_enabled;  // ablation: initial estimate is final
    int reinits = 0;

    for (int iter = 0; ctx_.wiring.mover_enabled && iter < ctx_.caps.max_iters; ++iter) {
      const ZoomFrame frame = current_frame();
      const RasterImage view = annotated_view(frame);
      if (ctx_.crop_sink) ctx_.crop_sink(target_, iter, view);

      VerdictValue verdict;
      if (ctx_.wiring.checker_enabled) {
        verdict = ask_checker(frame, view);
      } else {
        verdict = mover_self_check_round(view);
      }

      result_.state.history.push_back({box_, point_, verdict});
      result_.state.iteration = static_cast<int>(result_.state.history.size());

      if (verdict == VerdictValue::accept) {
        approved = true;
        break;
      }
      if (verdict == VerdictValue::reject) {
        if (++reinits > ctx_.caps.reinit_limit) break;
        if (box_mode()) box_ = init_box();
        else point_ = init_point();
        continue;
      }
      if (ctx_.wiring.checker_enabled) mover_revision_round(frame, view);
    }

    if (box_) result_.state.current_box = *box_;
    if (point_) result_.state.current_point = *point_;
    result_.state.approved = approved;
    result_.exhausted = !approved;
    if (approved) result_.action_point = select_action_point(purpose, goal_target);
    return std::move(result_);
  }

 private:
  bool box_mode() const { return mode_ == TargetMode::object_box; }

  std::string plan_fence() const {
    return fenced_json(nlohmann::json{{"subgoals", subgoals_to_json(ctx_.plan->subgoals)}});
  }

  BoundingBox clamp_env(const BoundingBox& b) const {
    return clamp_box(b, ctx_.env->width(), ctx_.env->height());
  }

  PixelCoord clamp_env(PixelCoord p) const {
    p.x = std::clamp(p.x, 0, ctx_.env->width() - 1);
    p.y = std::clamp(p.y, 0, ctx_.env->height() - 1);
    return p;
  }

  ZoomFrame current_frame() const {
    const int w = ctx_.caps.point_window_half;
    const BoundingBox view_box =
        box_mode() ? *box_
                   : BoundingBox{{point_->x - w, point_->y - w}, {point_->x + w, point_->y + w}};
    return crop_with_margin(*ctx_.env, view_box, box_mode() ? ctx_.caps.crop_margin : 0.0);
  }

  RasterImage annotated_view(const ZoomFrame& frame) const {
    RasterImage img = overlay_zoom_ticks(frame, ctx_.caps.tick_spacing);
    const Color accent{220, 50, 47};
    if (box_) {
      BoundingBox zb{frame.to_zoom(box_->min), frame.to_zoom(box_->max)};
      zb = clamp_box(zb, img.width(), img.height());
      draw_rect_outline(img, zb, accent, 2);
    }
    if (point_) {
      const PixelCoord zp = frame.to_zoom(*point_);
      if (img.in_bounds(zp.x, zp.y)) fill_disk(img, zp, 4, accent);
    }
    return img;
  }

  BoundingBox init_box() {
    AgentCall call;
    call.user_template =
        "Verified plan:\n{plan_json}\n"
        "Target: {target}\n"
        "Mode: object_box\n"
        "The full environment image is attached. Give an approximate starting point and bounding "
        "box for the target, in original image coordinates. Output a fenced JSON block: "
        "{\"point\": [x, y], \"box\": [x0, y0, x1, y1]}";
    call.context["plan_json"] = plan_fence();
    call.context["target"] = target_;
    call.images = {ctx_.env};
    call.expect = Expect::init_box;
    call.seed = ctx_.seed;
    const ParsedPayload payload = invoke_agent(ctx_.manager, call, backend_, *ctx_.manager_log);
    ++result_.manager_calls;
    return clamp_env(box_from_json(payload.body.at("box")));
  }

  PixelCoord init_point() {
    AgentCall call;
    call.user_template =
        "Verified plan:\n{plan_json}\n"
        "Target: {target}\n"
        "Mode: area_point\n"
        "The full environment image is attached. Give an approximate point for the area, in "
        "original image coordinates. Output a fenced JSON block: {\"point\": [x, y]}";
    call.context["plan_json"] = plan_fence();
    call.context["target"] = target_;
    call.images = {ctx_.env};
    call.expect = Expect::point;
    call.seed = ctx_.seed;
    const ParsedPayload payload = invoke_agent(ctx_.manager, call, backend_, *ctx_.manager_log);
    ++result_.manager_calls;
    return clamp_env(point_from_json(payload.body.at("point")));
  }

  VerdictValue ask_checker(const ZoomFrame& frame, const RasterImage& view) {
    if (box_mode()) {
      const VerdictValue v = checker_verdict(frame, *box_, target_, backend_, ctx_.checker,
                                             *ctx_.checker_log, ctx_.seed, ctx_.caps.tick_spacing);
      ++result_.checker_calls;
      return v;
    }
    AgentCall call;
    call.user_template =
        "Target: {target}\n"
        "Current point: {point}\n"
        "The zoomed view with the point drawn and original-image tick labels is attached. Decide "
        "whether the point is acceptable for final output. Your output must be exactly one of:\n"
        "Accept\nRevision Needed\nReject";
    call.context["target"] = target_;
    call.context["point"] = point_to_string(*point_);
    call.images = {std::make_shared<RasterImage>(view)};
    call.expect = Expect::verdict;
    call.seed = ctx_.seed;
    const ParsedPayload payload = invoke_agent(ctx_.checker, call, backend_, *ctx_.checker_log);
    ++result_.checker_calls;
    return *verdict_from_text(payload.body.at("verdict").get<std::string>());
  }

  struct MoverOutcome {
    std::optional<BoundingBox> box;
    std::optional<PixelCoord> point;
    std::optional<VerdictValue> self_verdict;
  };

  MoverOutcome ask_mover(const RasterImage& view, bool self_check) {
    AgentCall call;
    std::string t = "Target: {target}\n";
    if (box_mode()) {
      t += std::string(kFieldCurrentBox) + " {box}\n";
      t += "The zoomed view around the current bounding box is attached. Propose a revised "
           "bounding box in original image coordinates";
    } else {
      t += std::string(kFieldCurrentPoint) + " {point}\n";
      t += "The zoomed view around the current point is attached. Propose a revised point in "
           "original image coordinates";
    }
    if (self_check)
      t += ", and judge your own proposal: add a \"verdict\" field with exactly one of "
           "\"Accept\", \"Revision Needed\", \"Reject\"";
    t += ". Output a fenced JSON block: ";
    t += box_mode() ? "{\"box\": [x0, y0, x1, y1]}" : "{\"point\": [x, y]}";

    call.user_template = t;
    call.context["target"] = target_;
    if (box_mode()) call.context["box"] = box_to_string(*box_);
    else call.context["point"] = point_to_string(*point_);
    call.images = {std::make_shared<RasterImage>(view)};
    call.expect = box_mode() ? Expect::box : Expect::point;
    call.seed = ctx_.seed;
    const ParsedPayload payload = invoke_agent(ctx_.mover, call, backend_, *ctx_.mover_log);
    ++result_.mover_calls;

    MoverOutcome out;
    if (box_mode()) out.box = clamp_env(box_from_json(payload.body.at("box")));
    else out.point = clamp_env(point_from_json(payload.body.at("point")));
    if (payload.body.contains("verdict"))
      out.self_verdict = verdict_from_text(payload.body.at("verdict").get<std::string>());
    return out;
  }

  VerdictValue mover_self_check_round(const RasterImage& view) {
    const auto outcome = ask_mover(view, /*self_check=*/true);
    if (outcome.box) box_ = outcome.box;
    if (outcome.point) point_ = outcome.point;
    return outcome.self_verdict.value_or(VerdictValue::revision_needed);
  }

  // Proposals must differ from their predecessor: one re-ask, then a forced
  // 2 px nudge toward the crop center.
  void mover_revision_round(const ZoomFrame& frame, const RasterImage& view) {
    auto outcome = ask_mover(view, false);
    const bool unchanged =
        (box_mode() && outcome.box == box_) || (!box_mode() && outcome.point == point_);
    if (unchanged) outcome = ask_mover(view, false);

    const Vec2 crop_center = frame.source_box.center();
    if (box_mode()) {
      BoundingBox nb = *outcome.box;
      if (nb == *box_) {
        const Vec2 c = box_->center();
        const int dx = crop_center.x > c.x ? 2 : -2;
        const int dy = crop_center.y > c.y ? 2 : -2;
        nb = clamp_env(BoundingBox{{box_->min.x + dx, box_->min.y + dy},
                                   {box_->max.x + dx, box_->max.y + dy}});
      }
      box_ = nb;
    } else {
      PixelCoord np = *outcome.point;
      if (np == *point_) {
        np.x += crop_center.x > point_->x ? 2 : -2;
        np.y += crop_center.y > point_->y ? 2 : -2;
        np = clamp_env(np);
      }
      point_ = np;
    }
  }

  ActionPoint select_action_point(ActionPurpose purpose,
                                  const std::optional<std::string>& goal_target) {
    AgentCall call;
    std::string t =
        "Verified plan:\n{plan_json}\n"
        "Target: {target}\n"
        "Purpose: {purpose}\n";
    if (goal_target) t += std::string(kFieldGoalTarget) + " {goal_target}\n";
    t += box_ ? std::string(kFieldApprovedBox) + " {box}\n"
              : std::string(kFieldApprovedPoint) + " {point}\n";
    t += "Select the point of action for this target so it aligns with the plan objectives and "
         "the object's properties. Output a fenced JSON block: {\"point\": [x, y]}";
    call.user_template = t;
    call.context["plan_json"] = plan_fence();
    call.context["target"] = target_;
    call.context["purpose"] = purpose_name(purpose);
    if (goal_target) call.context["goal_target"] = *goal_target;
    if (box_) call.context["box"] = box_to_string(*box_);
    else call.context["point"] = point_to_string(*point_);
    call.expect = Expect::point;
    call.seed = ctx_.seed;

    for (int attempt = 0; attempt < 2; ++attempt) {
      const ParsedPayload payload = invoke_agent(ctx_.manager, call, backend_, *ctx_.manager_log);
      ++result_.manager_calls;
      const PixelCoord p = clamp_env(point_from_json(payload.body.at("point")));
      if (purpose == ActionPurpose::grasp && box_ && !box_->contains(p)) {
        if (attempt == 0) {
          call.user_template += "\nThe grasp point must lie strictly inside the approved box.";
          continue;
        }
        throw Error(Errc::point_outside_box, "grasp point " + point_to_string(p) +
                                                 " outside approved box for '" + target_ + "'");
      }
      return ActionPoint{target_, p, purpose};
    }
    throw Error(Errc::point_outside_box, "unreachable");
  }

  std::string target_;
  TargetMode mode_;
  ChatBackend& backend_;
  const GroundingContext& ctx_;
  GroundingResult result_;
  std::optional<BoundingBox> box_;
  std::optional<PixelCoord> point_;
};

}  // namespace detail

// One target's grounding loop: manager initialization from the full image,
// then zoomed checker/mover rounds until acceptance; Reject re-initializes
// (capped), exhaustion returns the best estimate unapproved. All coordinates
// stay in the original image frame.
inline GroundingResult ground_target(const std::string& target, TargetMode mode,
                                     ChatBackend& backend, const GroundingContext& ctx,
                                     ActionPurpose purpose,
                                     const std::optional<std::string>& goal_target = std::nullopt) {
  if (ctx.caps.max_iters < 1) throw Error(Errc::config_error, "ground_target: max_iters must be >= 1");
  return detail::GroundingSession(target, mode, backend, ctx).run(purpose, goal_target);
}

// ---------------------------------------------------------------------------
// PIVOT-style baseline: sample, annotate, select, shrink.
// ---------------------------------------------------------------------------

struct PivotIteration {
  std::vector<PixelCoord> samples;
  std::vector<PixelCoord> chosen;
  PixelCoord mean;
  double radius = 0.0;
};

struct PivotTrace {
  std::vector<std::vector<PivotIteration>> runs;
  std::vector<PixelCoord> winners;
  PixelCoord final_point;
};

inline PixelCoord pivot_ground(const std::string& target, const RasterImage& env,
                               ChatBackend& backend, const PivotConfig& cfg,
                               PivotTrace* trace_out = nullptr) {
  cfg.validate();
  const AgentSpec manager = default_agent_spec(AgentRole::ground_manager);
  PivotTrace trace;

  const auto selection_call = [&](const std::vector<PixelCoord>& candidates,
                                  const RasterImage& img, bool best_only,
                                  AgentTranscript& log) -> std::vector<int> {
    std::string cand_block = std::string(kFieldCandidates) + "\n";
    for (std::size_t i = 0; i < candidates.size(); ++i)
      cand_block += std::to_string(i) + ": " + point_to_string(candidates[i]) + "\n";
    AgentCall call;
    call.user_template = std::string("Target: {target}\n") + "{candidates}" +
                         "The annotated image with the numbered candidate points is attached. " +
                         (best_only ? "Choose the single best point for the target. Output a "
                                      "fenced JSON block: {\"best\": index}"
                                    : "Choose the most promising candidate points for the target. "
                                      "Output a fenced JSON block: {\"chosen\": [indices]}");
    call.context["target"] = target;
    call.context["candidates"] = cand_block;
    call.images = {std::make_shared<RasterImage>(img)};
    call.expect = best_only ? Expect::pivot_best : Expect::pivot_choice;
    call.seed = cfg.seed;
    const ParsedPayload payload = invoke_agent(manager, call, backend, log);
    std::vector<int> out;
    if (best_only) out.push_back(payload.body.at("best").get<int>());
    else
      for (const auto& j : payload.body.at("chosen")) out.push_back(j.get<int>());
    for (int idx : out)
      if (idx < 0 || idx >= static_cast<int>(candidates.size()))
        throw Error(Errc::parse_error, "selection index out of range");
    return out;
  };

  std::vector<PixelCoord> winners;
  for (int run = 0; run < cfg.parallel_runs; ++run) {
    Rng rng(derive_seed(cfg.seed, "pivot/run" + std::to_string(run)));
    AgentTranscript log{AgentRole::ground_manager, "pivot[" + std::to_string(run) + "]", {}};
    Vec2 mean{env.width() / 2.0, env.height() / 2.0};
    double radius = std::max(env.width(), env.height()) / 2.0;
    std::vector<PivotIteration> iters;

    for (int iter = 0; iter < cfg.iterations; ++iter) {
      PivotIteration record;
      std::vector<PixelCoord> samples;
      std::vector<Annotation> marks;
      for (int s = 0; s < cfg.samples_per_iter; ++s) {
        const double angle = rng.uniform(0.0, 2.0 * M_PI);
        const double rad = radius * std::sqrt(rng.uniform());
        PixelCoord p =
            round_to_pixel({mean.x + rad * std::cos(angle), mean.y + rad * std::sin(angle)});
        p.x = std::clamp(p.x, 0, env.width() - 1);
        p.y = std::clamp(p.y, 0, env.height() - 1);
        samples.push_back(p);
        marks.push_back({Annotation::Kind::labeled_point, p, std::to_string(s), Color{38, 96, 215}});
      }
      const RasterImage annotated = draw_annotations(env, marks);
      const std::vector<int> chosen_idx = selection_call(samples, annotated, false, log);

      Vec2 new_mean{0, 0};
      std::vector<PixelCoord> chosen;
      for (int idx : chosen_idx) {
        chosen.push_back(samples[std::size_t(idx)]);
        new_mean = new_mean + Vec2(samples[std::size_t(idx)]);
      }
      new_mean = new_mean * (1.0 / double(chosen.size()));
      double max_dist = 0.0;
      for (const auto& p : chosen) max_dist = std::max(max_dist, (Vec2(p) - new_mean).norm());
      mean = new_mean;
      radius = std::max(2.0 * max_dist, double(cfg.min_radius));

      record.samples = std::move(samples);
      record.chosen = std::move(chosen);
      record.mean = round_to_pixel(mean);
      record.radius = radius;
      iters.push_back(std::move(record));
    }
    winners.push_back(round_to_pixel(mean));
    trace.runs.push_back(std::move(iters));
  }

  PixelCoord final_point = winners.front();
  {
    AgentTranscript log{AgentRole::ground_manager, "pivot[final]", {}};
    std::vector<Annotation> marks;
    for (std::size_t i = 0; i < winners.size(); ++i)
      marks.push_back(
          {Annotation::Kind::labeled_point, winners[i], std::to_string(i), Color{64, 160, 43}});
    const RasterImage annotated = draw_annotations(env, marks);
    const std::vector<int> best = selection_call(winners, annotated, true, log);
    final_point = winners[std::size_t(best.front())];
  }

  trace.winners = std::move(winners);
  trace.final_point = final_point;
  if (trace_out) *trace_out = std::move(trace);
  return final_point;
}

}  // namespace planground
