#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "planground/grounder.hpp"
#include "planground/oracle.hpp"
#include "planground/pipeline.hpp"
#include "planground/sim.hpp"

namespace planground {

// Agent-enable pattern per setting id (0 = complete, 1..8 = ablations).
inline AblationSetting apply_ablation(int id) {
  if (id < 0 || id > 8)
    throw Error(Errc::unknown_setting, "ablation setting " + std::to_string(id));
  AblationSetting s;
  s.id = id;
  switch (id) {
    case 0: break;
    case 1: s.verification = false; break;
    case 2: s.checker = false; break;
    case 3: s.verification = false; s.checker = false; break;
    case 4: s.checker = false; s.mover = false; break;
    case 5: s.verification = false; s.checker = false; s.mover = false; break;
    case 6: s.ground_manager = false; s.checker = false; s.mover = false; break;
    case 7:
      s.verification = false;
      s.ground_manager = false;
      s.checker = false;
      s.mover = false;
      break;
    case 8: s.memory = false; break;
  }
  return s;
}

enum class ProtocolMode { open_loop, closed_loop };

struct ProtocolSpec {
  ProtocolMode mode = ProtocolMode::open_loop;
  int runs = 1;
  int max_replans = 0;  // closed loop only

  void validate() const {
    if (runs < 1) throw Error(Errc::config_error, "protocol: runs must be >= 1");
    if (mode == ProtocolMode::open_loop && max_replans != 0)
      throw Error(Errc::config_error, "protocol: open loop implies max_replans = 0");
    if (max_replans < 0) throw Error(Errc::config_error, "protocol: negative max_replans");
  }
};

struct RunResult {
  std::string task_id;
  std::uint64_t seed = 0;
  int setting = 0;
  bool success = false;
  std::optional<FailureStage> failure_stage;
  int replans_used = 0;
  std::map<std::string, std::int64_t> call_counts;
  double wall_ms = 0.0;
};

using BackendFactory = std::function<BackendHandle(std::uint64_t run_seed)>;

// Runs `proto.runs` seeded pipeline executions. Open loop: one attempt each,
// the goal check decides success. Closed loop: failed attempts feed their
// failure report into a fresh planning context, up to max_replans times.
inline std::vector<RunResult> run_protocol(const std::string& task_id, const Scene& scene,
                                           const TaskPrompt& task, const BackendFactory& factory,
                                           const AblationSetting& setting,
                                           const ProtocolSpec& proto, std::uint64_t base_seed,
                                           const PipelineCaps& caps = {},
                                           const Calibration& calibration = {},
                                           const std::string& artifact_base = "") {
  proto.validate();
  std::vector<RunResult> results;
  for (int run = 0; run < proto.runs; ++run) {
    const std::uint64_t seed = base_seed + std::uint64_t(run);
    const auto started = std::chrono::steady_clock::now();
    BackendHandle backend = factory(seed);

    RunResult rr;
    rr.task_id = task_id;
    rr.seed = seed;
    rr.setting = setting.id;
    for (const auto& role :
         {AgentRole::supervisor, AgentRole::verification, AgentRole::ground_manager,
          AgentRole::mover, AgentRole::checker, AgentRole::memory})
      rr.call_counts[role_name(role)] = 0;

    const int max_attempts = proto.mode == ProtocolMode::closed_loop ? 1 + proto.max_replans : 1;
    std::string failure_report;
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
      PipelineSetup setup;
      setup.scene = scene;
      setup.task = task;
      setup.setting = setting;
      setup.caps = caps;
      setup.calibration = calibration;
      setup.seed = seed;
      setup.failure_report = failure_report;
      if (!artifact_base.empty())
        setup.artifact_dir = artifact_base + "/seed" + std::to_string(seed) + "/attempt" +
                             std::to_string(attempt);
      const PipelineOutcome outcome = run_pipeline(setup, backend);
      for (const auto& [role, n] : outcome.call_counts()) rr.call_counts[role] += n;
      rr.success = outcome.success;
      rr.failure_stage = outcome.failure_stage;
      rr.replans_used = attempt;
      if (!artifact_base.empty())
        write_pipeline_artifacts(setup.artifact_dir, outcome,
                                 task_id + "/" + std::to_string(seed));
      if (outcome.success) break;
      failure_report = detail::failure_report_text(outcome);
    }
    rr.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started)
            .count();
    results.push_back(std::move(rr));
  }
  return results;
}

// ---------------------------------------------------------------------------
// Verdict fixture classes and confusion matrix
// ---------------------------------------------------------------------------

enum class BoxClass { perfect, slightly_off, off_around, wrong_object };

inline std::string box_class_name(BoxClass c) {
  switch (c) {
    case BoxClass::perfect: return "Perfect";
    case BoxClass::slightly_off: return "Slightly Off";
    case BoxClass::off_around: return "Completely Off - Around";
    case BoxClass::wrong_object: return "Completely Off - Wrong Object";
  }
  return "Perfect";
}

inline VerdictValue expected_verdict(BoxClass c) {
  switch (c) {
    case BoxClass::perfect: return VerdictValue::accept;
    case BoxClass::slightly_off: return VerdictValue::revision_needed;
    case BoxClass::off_around:
    case BoxClass::wrong_object: return VerdictValue::reject;
  }
  return VerdictValue::reject;
}

struct BoxFixture {
  Scene scene;
  BoundingBox box;
  std::optional<BoxClass> label;
};

// Randomly generated boxes around the toy-environment target circle:
// Perfect = the true box; Slightly Off = true box shifted by U(0.2r, 0.9r);
// Completely Off - Around = disjoint box with center within 4r;
// Wrong Object = another object's true box.
inline std::vector<BoxFixture> generate_box_fixtures(int per_class, std::uint64_t seed) {
  std::vector<BoxFixture> fixtures;
  Rng rng(derive_seed(seed, "box_fixtures"));
  int scene_index = 0;
  const auto shifted_box = [](const BoundingBox& b, int dx, int dy) {
    return BoundingBox{{b.min.x + dx, b.min.y + dy}, {b.max.x + dx, b.max.y + dy}};
  };

  for (const BoxClass cls : {BoxClass::perfect, BoxClass::slightly_off, BoxClass::off_around,
                             BoxClass::wrong_object}) {
    for (int i = 0; i < per_class; ++i) {
      const Scene scene = gen_toy_env(derive_seed(seed, "fix" + std::to_string(scene_index++)));
      const BoundingBox truth = object_bbox(scene, "target");
      const double r = scene.get("target").size.x;
      BoxFixture f;
      f.scene = scene;
      f.label = cls;
      switch (cls) {
        case BoxClass::perfect:
          f.box = truth;
          break;
        case BoxClass::slightly_off: {
          for (int attempt = 0;; ++attempt) {
            const double d = rng.uniform(0.2 * r, 0.9 * r);
            const double a = rng.uniform(0.0, 2.0 * M_PI);
            const BoundingBox b = shifted_box(truth, int(std::lround(d * std::cos(a))),
                                              int(std::lround(d * std::sin(a))));
            if ((b.min.x >= 0 && b.min.y >= 0 && b.max.x < scene.width && b.max.y < scene.height) ||
                attempt > 200) {
              f.box = b;
              break;
            }
          }
          break;
        }
        case BoxClass::off_around: {
          for (int attempt = 0;; ++attempt) {
            const double d = rng.uniform(2.0 * r + 2.0, 4.0 * r);
            const double a = rng.uniform(0.0, 2.0 * M_PI);
            const BoundingBox b = shifted_box(truth, int(std::lround(d * std::cos(a))),
                                              int(std::lround(d * std::sin(a))));
            const bool in_canvas =
                b.min.x >= 0 && b.min.y >= 0 && b.max.x < scene.width && b.max.y < scene.height;
            if ((boxes_disjoint(b, truth) && in_canvas) || attempt > 500) {
              f.box = b;
              break;
            }
          }
          break;
        }
        case BoxClass::wrong_object:
          f.box = object_bbox(scene, "distractor_" + std::to_string(int(rng.uniform_int(0, 3))));
          break;
      }
      fixtures.push_back(std::move(f));
    }
  }
  return fixtures;
}

struct ConfusionMatrix {
  // rows: Perfect, Slightly Off, Completely Off - Around, Wrong Object
  // cols: Accept, Revision Needed, Reject
  std::array<std::array<int, 3>, 4> counts{};
  double accuracy = 0.0;

  int row_sum(int row) const { return counts[row][0] + counts[row][1] + counts[row][2]; }
};

using SceneBackendFactory = std::function<BackendHandle(const Scene&)>;

// Runs the checker on every fixture and tallies verdicts against the four
// ground-truth classes.
inline ConfusionMatrix confusion_matrix(const std::vector<BoxFixture>& fixtures,
                                        const SceneBackendFactory& factory,
                                        double crop_margin = 0.5) {
  ConfusionMatrix m;
  const AgentSpec checker = default_agent_spec(AgentRole::checker);
  int correct = 0;
  for (const auto& f : fixtures) {
    if (!f.label) throw Error(Errc::unlabeled_fixture, "fixture without a ground-truth class");
    BackendHandle backend = factory(f.scene);
    const RenderOutput rendered = render_scene(f.scene);
    const ZoomFrame crop = crop_with_margin(rendered.image, f.box, crop_margin);
    AgentTranscript log{AgentRole::checker, "checker[harness]", {}};
    const VerdictValue v =
        checker_verdict(crop, f.box, "target", *backend, checker, log, f.scene.seed);
    const int row = static_cast<int>(*f.label);
    const int col = v == VerdictValue::accept ? 0 : v == VerdictValue::revision_needed ? 1 : 2;
    ++m.counts[std::size_t(row)][std::size_t(col)];
    if (v == expected_verdict(*f.label)) ++correct;
  }
  if (!fixtures.empty()) m.accuracy = 100.0 * correct / double(fixtures.size());
  return m;
}

inline std::string confusion_to_csv(const ConfusionMatrix& m) {
  std::string out = "ground_truth,Accept,Revision Needed,Reject\n";
  const std::array<BoxClass, 4> classes = {BoxClass::perfect, BoxClass::slightly_off,
                                           BoxClass::off_around, BoxClass::wrong_object};
  for (int row = 0; row < 4; ++row) {
    out += box_class_name(classes[std::size_t(row)]);
    for (int col = 0; col < 3; ++col)
      out += "," + std::to_string(m.counts[std::size_t(row)][std::size_t(col)]);
    out += "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Deviation tallies (actionable / close-to thresholds)
// ---------------------------------------------------------------------------

struct DeviationTable {
  int actionable = 0;
  int within_3r = 0;  // cumulative: includes actionable
  int within_4r = 0;  // cumulative: includes within_3r
  int far = 0;
  int total = 0;
};

inline DeviationTable deviation_table(const std::vector<std::pair<PixelCoord, SceneObject>>& samples) {
  DeviationTable t;
  for (const auto& [point, target] : samples) {
    ++t.total;
    switch (classify_deviation(point, target)) {
      case DeviationClass::actionable: ++t.actionable; ++t.within_3r; ++t.within_4r; break;
      case DeviationClass::close_within_3r: ++t.within_3r; ++t.within_4r; break;
      case DeviationClass::close_within_4r: ++t.within_4r; break;
      case DeviationClass::far: ++t.far; break;
    }
  }
  return t;
}

// ---------------------------------------------------------------------------
// Result emission
// ---------------------------------------------------------------------------

inline std::string results_to_csv(const std::vector<RunResult>& results) {
  std::string out =
      "task,seed,setting,success,failure_stage,replans_used,calls_supervisor,calls_verification,"
      "calls_ground_manager,calls_mover,calls_checker,calls_memory,wall_ms\n";
  for (const auto& r : results) {
    out += r.task_id + "," + std::to_string(r.seed) + "," + std::to_string(r.setting) + "," +
           (r.success ? "1" : "0") + "," +
           (r.failure_stage ? failure_stage_name(*r.failure_stage) : "") + "," +
           std::to_string(r.replans_used);
    for (const char* role : {"supervisor", "verification", "ground_manager", "mover", "checker",
                             "memory"})
      out += "," + std::to_string(r.call_counts.count(role) ? r.call_counts.at(role) : 0);
    out += "," + std::to_string(r.wall_ms) + "\n";
  }
  return out;
}

// Markdown summary: one row per task, one column per setting, mirroring the
// settings-by-task success-rate table layout.
inline std::string results_summary_markdown(const std::vector<RunResult>& results) {
  std::map<std::string, std::map<int, std::pair<int, int>>> cells;  // task -> setting -> (ok, n)
  std::set<int> settings;
  for (const auto& r : results) {
    auto& cell = cells[r.task_id][r.setting];
    cell.second += 1;
    if (r.success) cell.first += 1;
    settings.insert(r.setting);
  }
  std::string out = "| Task |";
  for (int s : settings) out += s == 0 ? " Complete |" : " " + std::to_string(s) + " |";
  out += "\n|---|";
  for (std::size_t i = 0; i < settings.size(); ++i) out += "---|";
  out += "\n";
  for (const auto& [task, row] : cells) {
    out += "| " + task + " |";
    for (int s : settings) {
      const auto it = row.find(s);
      if (it == row.end()) {
        out += " - |";
      } else {
        const int pct = it->second.second == 0
                            ? 0
                            : int(std::lround(100.0 * it->second.first / it->second.second));
        out += " " + std::to_string(pct) + " |";
      }
    }
    out += "\n";
  }
  return out;
}

}  // namespace planground
