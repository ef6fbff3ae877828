#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "planground/errors.hpp"
#include "planground/eval.hpp"
#include "planground/http_backend.hpp"
#include "planground/oracle.hpp"
#include "planground/pipeline.hpp"
#include "planground/util.hpp"

namespace planground {

// ---------------------------------------------------------------------------
// Minimal TOML-style config reader: [sections], key = value, where value is
// a quoted string, number, boolean, or a flat array of numbers.
// ---------------------------------------------------------------------------

using ConfigValue = std::variant<std::string, double, bool, std::vector<double>>;

class ConfigFile {
 public:
  static ConfigFile parse(const std::string& text) {
    ConfigFile cfg;
    std::string section;
    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
      ++line_no;
      std::string line = strip_comment(raw);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']')
          throw Error(Errc::config_error, "line " + std::to_string(line_no) + ": bad section");
        section = trim(line.substr(1, line.size() - 2));
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw Error(Errc::config_error, "line " + std::to_string(line_no) + ": expected key = value");
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (key.empty() || value.empty())
        throw Error(Errc::config_error, "line " + std::to_string(line_no) + ": empty key or value");
      cfg.values_[section + "." + key] = parse_value(value, line_no);
    }
    return cfg;
  }

  static ConfigFile load(const std::string& path) { return parse(read_file(path)); }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback = "") const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (const auto* s = std::get_if<std::string>(&it->second)) return *s;
    throw Error(Errc::config_error, key + ": expected a string");
  }

  double get_number(const std::string& key, double fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (const auto* d = std::get_if<double>(&it->second)) return *d;
    throw Error(Errc::config_error, key + ": expected a number");
  }

  int get_int(const std::string& key, int fallback) const {
    return static_cast<int>(get_number(key, fallback));
  }

  bool get_bool(const std::string& key, bool fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (const auto* b = std::get_if<bool>(&it->second)) return *b;
    throw Error(Errc::config_error, key + ": expected a boolean");
  }

  std::vector<double> get_array(const std::string& key, std::vector<double> fallback = {}) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (const auto* a = std::get_if<std::vector<double>>(&it->second)) return *a;
    if (const auto* d = std::get_if<double>(&it->second)) return {*d};
    throw Error(Errc::config_error, key + ": expected an array");
  }

 private:
  static std::string strip_comment(const std::string& line) {
    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') in_string = !in_string;
      if (line[i] == '#' && !in_string) return line.substr(0, i);
    }
    return line;
  }

  static ConfigValue parse_value(const std::string& v, int line_no) {
    if (v.front() == '"') {
      if (v.size() < 2 || v.back() != '"')
        throw Error(Errc::config_error, "line " + std::to_string(line_no) + ": unterminated string");
      return v.substr(1, v.size() - 2);
    }
    if (v == "true") return true;
    if (v == "false") return false;
    if (v.front() == '[') {
      if (v.back() != ']')
        throw Error(Errc::config_error, "line " + std::to_string(line_no) + ": unterminated array");
      std::vector<double> out;
      std::string body = v.substr(1, v.size() - 2);
      std::istringstream ss(body);
      std::string item;
      while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        out.push_back(to_number(item, line_no));
      }
      return out;
    }
    return to_number(v, line_no);
  }

  static double to_number(const std::string& s, int line_no) {
    try {
      std::size_t used = 0;
      const double d = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return d;
    } catch (const std::exception&) {
      throw Error(Errc::config_error,
                  "line " + std::to_string(line_no) + ": not a number: '" + s + "'");
    }
  }

  std::map<std::string, ConfigValue> values_;
};

// ---------------------------------------------------------------------------
// Resolved run configuration
// ---------------------------------------------------------------------------

enum class BackendKind { http, oracle, replay };

struct RunConfig {
  std::string scene_path;
  std::string task_text;
  std::uint64_t seed = 1;
  std::string artifact_dir = "out";
  std::string task_id = "task";

  BackendKind backend_kind = BackendKind::oracle;
  HttpBackendConfig http;
  OracleConfig oracle;  // scene filled in after loading
  std::string replay_cassette;

  PipelineCaps caps;
  int ablation_id = 0;
  ProtocolSpec protocol;
  Calibration calibration;

  std::vector<int> eval_settings = {0};
  int eval_seeds = 1;
};

inline RunConfig resolve_run_config(const ConfigFile& cfg) {
  RunConfig rc;
  rc.scene_path = cfg.get_string("task.scene");
  rc.task_text = cfg.get_string("task.prompt", "complete the scene goal");
  rc.seed = static_cast<std::uint64_t>(cfg.get_number("task.seed", 1));
  rc.artifact_dir = cfg.get_string("task.artifact_dir", "out");
  rc.task_id = cfg.get_string("task.task_id", "task");

  const std::string kind = cfg.get_string("backend.kind", "oracle");
  if (kind == "http") rc.backend_kind = BackendKind::http;
  else if (kind == "oracle") rc.backend_kind = BackendKind::oracle;
  else if (kind == "replay") rc.backend_kind = BackendKind::replay;
  else throw Error(Errc::config_error, "unknown backend kind '" + kind + "'");

  rc.http.endpoint = cfg.get_string("backend.endpoint");
  rc.http.model = cfg.get_string("backend.model");
  rc.http.credential_env = cfg.get_string("backend.credential_env");
  rc.http.path = cfg.get_string("backend.path", "/v1/chat/completions");
  rc.replay_cassette = cfg.get_string("backend.cassette");

  rc.oracle.init_offset_px = cfg.get_number("backend.init_offset_px", 0.0);
  rc.oracle.init_sigma_px = cfg.get_number("backend.init_sigma_px", 0.0);
  rc.oracle.init_size_error = cfg.get_number("backend.init_size_error", 0.0);
  rc.oracle.contraction = cfg.get_number("backend.contraction", 0.5);
  rc.oracle.iou_accept = cfg.get_number("backend.iou_accept", 0.75);
  rc.oracle.verdict_noise = cfg.get_number("backend.verdict_noise", 0.0);
  rc.oracle.point_accept_px = cfg.get_number("backend.point_accept_px", 15.0);
  rc.oracle.never_approve = cfg.get_bool("backend.never_approve", false);
  rc.oracle.force_wrong_inits = cfg.get_int("backend.force_wrong_inits", 0);
  rc.oracle.scripted_failure_attempts = cfg.get_int("backend.scripted_failure_attempts", 0);
  const std::string quality = cfg.get_string("backend.plan_quality", "perfect");
  if (quality == "perfect") rc.oracle.plan_quality = PlanQuality::perfect;
  else if (quality == "misses_prerequisites") rc.oracle.plan_quality = PlanQuality::misses_prerequisites;
  else throw Error(Errc::config_error, "unknown plan_quality '" + quality + "'");

  rc.caps.plan_iters = cfg.get_int("caps.plan_iters", 5);
  rc.caps.grounding_iters = cfg.get_int("caps.grounding_iters", 10);
  rc.caps.parse_retries = cfg.get_int("caps.parse_retries", 3);
  rc.caps.fan_out = cfg.get_int("caps.fan_out", 4);

  rc.ablation_id = cfg.get_int("ablation.id", 0);

  const std::string mode = cfg.get_string("protocol.mode", "open_loop");
  if (mode == "open_loop") rc.protocol.mode = ProtocolMode::open_loop;
  else if (mode == "closed_loop") rc.protocol.mode = ProtocolMode::closed_loop;
  else throw Error(Errc::config_error, "unknown protocol mode '" + mode + "'");
  rc.protocol.runs = cfg.get_int("protocol.runs", 1);
  rc.protocol.max_replans = cfg.get_int("protocol.max_replans", 0);

  const auto mat = cfg.get_array("calibration.matrix", {1, 0, 0, 0, 1, 0});
  if (mat.size() != 6) throw Error(Errc::config_error, "calibration.matrix must have 6 entries");
  for (std::size_t i = 0; i < 6; ++i) rc.calibration.matrix[i] = mat[i];
  rc.calibration.z_offset_mm = cfg.get_number("calibration.z_offset_mm", 0.0);
  rc.calibration.validate();

  const auto settings = cfg.get_array("eval.settings", {0});
  rc.eval_settings.clear();
  for (double s : settings) rc.eval_settings.push_back(static_cast<int>(s));
  rc.eval_seeds = cfg.get_int("eval.seeds", 1);

  if (!std::filesystem::exists(rc.scene_path))
    throw Error(Errc::config_error, "scene file does not exist: " + rc.scene_path);
  if (rc.backend_kind == BackendKind::http && rc.http.endpoint.empty())
    throw Error(Errc::config_error, "http backend requires backend.endpoint");
  rc.protocol.validate();
  (void)apply_ablation(rc.ablation_id);  // range check
  return rc;
}

// echo of the effective configuration, written next to the run artifacts
inline nlohmann::json run_config_to_json(const RunConfig& rc) {
  nlohmann::json j;
  j["scene"] = rc.scene_path;
  j["prompt"] = rc.task_text;
  j["seed"] = rc.seed;
  j["task_id"] = rc.task_id;
  j["backend"]["kind"] = rc.backend_kind == BackendKind::http      ? "http"
                         : rc.backend_kind == BackendKind::oracle ? "oracle"
                                                                  : "replay";
  j["backend"]["init_offset_px"] = rc.oracle.init_offset_px;
  j["backend"]["init_sigma_px"] = rc.oracle.init_sigma_px;
  j["backend"]["init_size_error"] = rc.oracle.init_size_error;
  j["backend"]["contraction"] = rc.oracle.contraction;
  j["backend"]["iou_accept"] = rc.oracle.iou_accept;
  j["backend"]["verdict_noise"] = rc.oracle.verdict_noise;
  j["backend"]["point_accept_px"] = rc.oracle.point_accept_px;
  j["backend"]["plan_quality"] =
      rc.oracle.plan_quality == PlanQuality::perfect ? "perfect" : "misses_prerequisites";
  j["backend"]["never_approve"] = rc.oracle.never_approve;
  j["backend"]["force_wrong_inits"] = rc.oracle.force_wrong_inits;
  j["backend"]["scripted_failure_attempts"] = rc.oracle.scripted_failure_attempts;
  j["caps"]["plan_iters"] = rc.caps.plan_iters;
  j["caps"]["grounding_iters"] = rc.caps.grounding_iters;
  j["caps"]["parse_retries"] = rc.caps.parse_retries;
  j["caps"]["fan_out"] = rc.caps.fan_out;
  j["ablation"] = rc.ablation_id;
  j["protocol"]["mode"] = rc.protocol.mode == ProtocolMode::open_loop ? "open_loop" : "closed_loop";
  j["protocol"]["runs"] = rc.protocol.runs;
  j["protocol"]["max_replans"] = rc.protocol.max_replans;
  j["calibration"]["matrix"] = rc.calibration.matrix;
  j["calibration"]["z_offset_mm"] = rc.calibration.z_offset_mm;
  return j;
}

}  // namespace planground
