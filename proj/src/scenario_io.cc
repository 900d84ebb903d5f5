// Copyright 2026 The WVA Simulator Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <initializer_list>
#include <set>

#include "json.hpp"
#include "wva/metrics_io.hpp"
#include "wva/scenario.hpp"
#include "wva/util.hpp"

namespace wva {

using json = nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& message) {
  throw Error(ErrorCode::kParseError, path + ": " + message);
}

// Keys beginning with '_' are annotations and ignored.
void reject_unknown(const json& obj, const std::string& path,
                    std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) fail(path, "expected an object");
  for (const auto& [key, _] : obj.items()) {
    if (!key.empty() && key[0] == '_') continue;
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) fail(path + "." + key, "unknown key");
  }
}

double get_number(const json& obj, const char* key, const std::string& path,
                  double fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (it->is_string() && (it->get<std::string>() == "inf" ||
                          it->get<std::string>() == "infinity")) {
    return kForever;
  }
  if (!it->is_number()) fail(path + "." + key, "expected a number");
  return it->get<double>();
}

std::int64_t get_int(const json& obj, const char* key, const std::string& path,
                     std::int64_t fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_number_integer()) fail(path + "." + key, "expected an integer");
  return it->get<std::int64_t>();
}

std::string get_string(const json& obj, const char* key, const std::string& path,
                       const std::string& fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_string()) fail(path + "." + key, "expected a string");
  return it->get<std::string>();
}

json number_or_inf(double v) {
  if (std::isinf(v)) return "inf";
  return v;
}

SaturationParams parse_params(const json& j, const std::string& path) {
  reject_unknown(j, path,
                 {"tau_kv", "tau_q", "gamma_kv", "gamma_q",
                  "min_nonsaturated_for_scaledown", "min_replicas",
                  "max_replicas"});
  SaturationParams p;
  p.tau_kv = get_number(j, "tau_kv", path, p.tau_kv);
  p.tau_q = static_cast<int>(get_int(j, "tau_q", path, p.tau_q));
  p.gamma_kv = get_number(j, "gamma_kv", path, p.gamma_kv);
  p.gamma_q = get_number(j, "gamma_q", path, p.gamma_q);
  p.min_nonsaturated_for_scaledown = static_cast<int>(get_int(
      j, "min_nonsaturated_for_scaledown", path, p.min_nonsaturated_for_scaledown));
  p.min_replicas = static_cast<int>(get_int(j, "min_replicas", path, p.min_replicas));
  p.max_replicas = static_cast<int>(get_int(j, "max_replicas", path, p.max_replicas));
  return p;
}

json dump_params(const SaturationParams& p) {
  return {{"tau_kv", p.tau_kv},
          {"tau_q", p.tau_q},
          {"gamma_kv", p.gamma_kv},
          {"gamma_q", p.gamma_q},
          {"min_nonsaturated_for_scaledown", p.min_nonsaturated_for_scaledown},
          {"min_replicas", p.min_replicas},
          {"max_replicas", p.max_replicas}};
}

VariantRole parse_role(const std::string& s, const std::string& path) {
  if (s == "unified") return VariantRole::kUnified;
  if (s == "prefill") return VariantRole::kPrefill;
  if (s == "decode") return VariantRole::kDecode;
  fail(path, "unknown role '" + s + "'");
}

VariantSpec parse_variant(const json& j, const std::string& path) {
  reject_unknown(j, path,
                 {"variant_id", "model_id", "hardware_class", "gpus_per_replica",
                  "quantization", "variant_cost", "kv_capacity_tokens",
                  "max_concurrent_sequences", "prefill_rate", "decode_rate",
                  "role", "initial_replicas", "scale_target", "policy"});
  VariantSpec v;
  v.variant_id = get_string(j, "variant_id", path, "");
  v.model_id = get_string(j, "model_id", path, "");
  v.hardware_class = get_string(j, "hardware_class", path, "");
  v.gpus_per_replica =
      static_cast<int>(get_int(j, "gpus_per_replica", path, v.gpus_per_replica));
  v.quantization = get_string(j, "quantization", path, v.quantization);
  v.variant_cost = get_number(j, "variant_cost", path, v.variant_cost);
  v.kv_capacity_tokens =
      get_int(j, "kv_capacity_tokens", path, v.kv_capacity_tokens);
  v.max_concurrent_sequences = static_cast<int>(
      get_int(j, "max_concurrent_sequences", path, v.max_concurrent_sequences));
  v.prefill_rate = get_number(j, "prefill_rate", path, v.prefill_rate);
  v.decode_rate = get_number(j, "decode_rate", path, v.decode_rate);
  v.role = parse_role(get_string(j, "role", path, "unified"), path + ".role");
  if (j.contains("initial_replicas")) {
    v.initial_replicas =
        static_cast<int>(get_int(j, "initial_replicas", path, 0));
  }
  v.scale_target = get_string(j, "scale_target", path, v.variant_id);
  if (j.contains("policy")) {
    v.policy_params = parse_params(j.at("policy"), path + ".policy");
  }
  return v;
}

json dump_variant(const VariantSpec& v) {
  json j = {{"variant_id", v.variant_id},
            {"model_id", v.model_id},
            {"hardware_class", v.hardware_class},
            {"gpus_per_replica", v.gpus_per_replica},
            {"quantization", v.quantization},
            {"variant_cost", v.variant_cost},
            {"kv_capacity_tokens", v.kv_capacity_tokens},
            {"max_concurrent_sequences", v.max_concurrent_sequences},
            {"prefill_rate", v.prefill_rate},
            {"decode_rate", v.decode_rate},
            {"role", std::string(to_string(v.role))},
            {"scale_target", v.scale_target},
            {"policy", dump_params(v.policy_params)}};
  if (v.initial_replicas) j["initial_replicas"] = *v.initial_replicas;
  return j;
}

BoundedNormal parse_dist(const json& j, const std::string& path,
                         BoundedNormal d) {
  reject_unknown(j, path, {"min", "max", "mean", "stdev"});
  d.min = get_int(j, "min", path, d.min);
  d.max = get_int(j, "max", path, d.max);
  d.mean = get_number(j, "mean", path, d.mean);
  d.stdev = get_number(j, "stdev", path, d.stdev);
  return d;
}

json dump_dist(const BoundedNormal& d) {
  return {{"min", d.min}, {"max", d.max}, {"mean", d.mean}, {"stdev", d.stdev}};
}

TrafficProgram parse_traffic(const json& j, const std::string& path) {
  reject_unknown(j, path,
                 {"arrival_process", "phases", "staircase", "input_tokens",
                  "output_tokens", "prefix_groups"});
  TrafficProgram tp;
  if (j.contains("phases") && j.contains("staircase")) {
    fail(path, "give either phases or staircase, not both");
  }
  if (j.contains("phases")) {
    const auto& phases = j.at("phases");
    if (!phases.is_array()) fail(path + ".phases", "expected an array");
    for (std::size_t i = 0; i < phases.size(); ++i) {
      const std::string at = path + ".phases[" + std::to_string(i) + "]";
      reject_unknown(phases[i], at, {"start", "rps"});
      tp.phases.push_back({get_number(phases[i], "start", at, 0.0),
                           get_number(phases[i], "rps", at, 0.0)});
    }
  } else if (j.contains("staircase")) {
    const auto& s = j.at("staircase");
    const std::string at = path + ".staircase";
    reject_unknown(s, at, {"step_length", "steps"});
    double step_length = get_number(s, "step_length", at, 30.0);
    std::vector<std::pair<int, double>> steps;
    if (!s.contains("steps") || !s.at("steps").is_array()) {
      fail(at + ".steps", "expected an array of [step, rps] pairs");
    }
    for (const auto& step : s.at("steps")) {
      if (!step.is_array() || step.size() != 2 || !step[0].is_number_integer() ||
          !step[1].is_number()) {
        fail(at + ".steps", "expected [step, rps] pairs");
      }
      steps.emplace_back(step[0].get<int>(), step[1].get<double>());
    }
    tp = staircase_program(steps, step_length);
  }
  std::string process = get_string(j, "arrival_process", path,
                                   "deterministic_uniform");
  if (process == "deterministic_uniform") {
    tp.arrival_process = ArrivalProcess::kDeterministicUniform;
  } else if (process == "poisson") {
    tp.arrival_process = ArrivalProcess::kPoisson;
  } else {
    fail(path + ".arrival_process", "unknown process '" + process + "'");
  }
  if (j.contains("input_tokens")) {
    tp.input_dist = parse_dist(j.at("input_tokens"), path + ".input_tokens",
                               tp.input_dist);
  }
  if (j.contains("output_tokens")) {
    tp.output_dist = parse_dist(j.at("output_tokens"), path + ".output_tokens",
                                tp.output_dist);
  }
  tp.prefix_groups =
      static_cast<int>(get_int(j, "prefix_groups", path, tp.prefix_groups));
  return tp;
}

json dump_traffic(const TrafficProgram& tp) {
  json phases = json::array();
  for (const auto& p : tp.phases) {
    phases.push_back({{"start", p.start_time}, {"rps", p.rps}});
  }
  return {{"arrival_process", std::string(to_string(tp.arrival_process))},
          {"phases", phases},
          {"input_tokens", dump_dist(tp.input_dist)},
          {"output_tokens", dump_dist(tp.output_dist)},
          {"prefix_groups", tp.prefix_groups}};
}

MetricsConfig parse_metrics(const json& j, const std::string& path) {
  reject_unknown(j, path, {"active", "sources"});
  MetricsConfig m;
  m.active = get_string(j, "active", path, m.active);
  if (j.contains("sources")) {
    m.sources.clear();
    const auto& sources = j.at("sources");
    if (!sources.is_array()) fail(path + ".sources", "expected an array");
    for (std::size_t i = 0; i < sources.size(); ++i) {
      const std::string at = path + ".sources[" + std::to_string(i) + "]";
      reject_unknown(sources[i], at, {"name", "kind", "path"});
      SourceConfig sc;
      sc.kind = parse_source_kind(get_string(sources[i], "kind", at, "sim"));
      sc.path = get_string(sources[i], "path", at, "");
      m.sources.emplace_back(get_string(sources[i], "name", at, ""), sc);
    }
  }
  return m;
}

json dump_metrics(const MetricsConfig& m) {
  json sources = json::array();
  for (const auto& [name, sc] : m.sources) {
    json s = {{"name", name},
              {"kind", sc.kind == SourceKind::kFile ? "file" : "sim"}};
    if (!sc.path.empty()) s["path"] = sc.path;
    sources.push_back(s);
  }
  return {{"active", m.active}, {"sources", sources}};
}

FaultProgram parse_faults(const json& j, const std::string& path) {
  reject_unknown(j, path, {"outages", "target_deletions"});
  FaultProgram f;
  if (j.contains("outages")) {
    const auto& arr = j.at("outages");
    if (!arr.is_array()) fail(path + ".outages", "expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string at = path + ".outages[" + std::to_string(i) + "]";
      reject_unknown(arr[i], at, {"start", "end", "variant"});
      Outage o;
      o.start = get_number(arr[i], "start", at, 0.0);
      o.end = get_number(arr[i], "end", at, 0.0);
      if (arr[i].contains("variant")) o.variant = get_string(arr[i], "variant", at, "");
      f.outages.push_back(o);
    }
  }
  if (j.contains("target_deletions")) {
    const auto& arr = j.at("target_deletions");
    if (!arr.is_array()) fail(path + ".target_deletions", "expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string at = path + ".target_deletions[" + std::to_string(i) + "]";
      reject_unknown(arr[i], at, {"time", "variant_id"});
      f.target_deletions.push_back({get_number(arr[i], "time", at, 0.0),
                                    get_string(arr[i], "variant_id", at, "")});
    }
  }
  return f;
}

json dump_faults(const FaultProgram& f) {
  json outages = json::array();
  for (const auto& o : f.outages) {
    json jo = {{"start", o.start}, {"end", number_or_inf(o.end)}};
    if (o.variant) jo["variant"] = *o.variant;
    outages.push_back(jo);
  }
  json deletions = json::array();
  for (const auto& d : f.target_deletions) {
    deletions.push_back({{"time", d.time}, {"variant_id", d.variant_id}});
  }
  return {{"outages", outages}, {"target_deletions", deletions}};
}

OptimizerMode parse_mode(const std::string& s, const std::string& path) {
  if (s == "constrained") return OptimizerMode::kConstrained;
  if (s == "unconstrained") return OptimizerMode::kUnconstrained;
  fail(path, "unknown optimizer mode '" + s + "'");
}

}  // namespace

SourceKind parse_source_kind(const std::string& kind) {
  if (kind == "sim") return SourceKind::kSim;
  if (kind == "file") return SourceKind::kFile;
  throw Error(ErrorCode::kUnknownSourceKind, "unknown source kind '" + kind + "'");
}

ScenarioConfig parse_scenario(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParseError, std::string("scenario: ") + e.what());
  }
  const std::string root = "scenario";
  reject_unknown(j, root,
                 {"name", "variants", "cluster_gpu_budget", "inventory_file",
                  "optimizer_mode", "traffic", "duration", "control_interval",
                  "scale_from_zero_interval", "provisioning_delay",
                  "drain_grace", "rng_seed", "scheduler_weights",
                  "hard_queue_cap", "baseline", "hpa", "metrics", "faults"});
  ScenarioConfig cfg;
  cfg.name = get_string(j, "name", root, cfg.name);
  if (j.contains("variants")) {
    const auto& arr = j.at("variants");
    if (!arr.is_array()) fail(root + ".variants", "expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      cfg.variants.push_back(
          parse_variant(arr[i], root + ".variants[" + std::to_string(i) + "]"));
    }
  }
  if (j.contains("cluster_gpu_budget")) {
    cfg.cluster_gpu_budget =
        static_cast<int>(get_int(j, "cluster_gpu_budget", root, 0));
  }
  if (j.contains("inventory_file")) {
    cfg.inventory_file = get_string(j, "inventory_file", root, "");
  }
  if (j.contains("optimizer_mode")) {
    cfg.optimizer_mode = parse_mode(get_string(j, "optimizer_mode", root, ""),
                                    root + ".optimizer_mode");
  }
  if (j.contains("traffic")) {
    cfg.traffic_program = parse_traffic(j.at("traffic"), root + ".traffic");
  }
  cfg.duration = get_number(j, "duration", root, cfg.duration);
  cfg.control_interval = get_number(j, "control_interval", root, cfg.control_interval);
  cfg.scale_from_zero_interval =
      get_number(j, "scale_from_zero_interval", root, cfg.scale_from_zero_interval);
  cfg.provisioning_delay =
      get_number(j, "provisioning_delay", root, cfg.provisioning_delay);
  cfg.drain_grace = get_number(j, "drain_grace", root, cfg.drain_grace);
  if (j.contains("rng_seed")) {
    const auto& s = j.at("rng_seed");
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<std::int64_t>() >= 0)) {
      fail(root + ".rng_seed", "expected a nonnegative integer");
    }
    cfg.rng_seed = s.get<std::uint64_t>();
  }
  if (j.contains("scheduler_weights")) {
    const auto& w = j.at("scheduler_weights");
    const std::string at = root + ".scheduler_weights";
    reject_unknown(w, at, {"queue", "kv_cache_utilization", "prefix_cache"});
    cfg.scheduler_weights.queue = get_number(w, "queue", at, 1.0);
    cfg.scheduler_weights.kv_cache_utilization =
        get_number(w, "kv_cache_utilization", at, 1.0);
    cfg.scheduler_weights.prefix_cache = get_number(w, "prefix_cache", at, 0.0);
  }
  cfg.hard_queue_cap =
      static_cast<int>(get_int(j, "hard_queue_cap", root, cfg.hard_queue_cap));
  std::string baseline = get_string(j, "baseline", root, "wva");
  if (baseline == "wva") {
    cfg.baseline = Baseline::kWva;
  } else if (baseline == "hpa") {
    cfg.baseline = Baseline::kHpa;
  } else {
    fail(root + ".baseline", "unknown baseline '" + baseline + "'");
  }
  if (j.contains("hpa")) {
    const auto& h = j.at("hpa");
    const std::string at = root + ".hpa";
    reject_unknown(h, at,
                   {"target_avg_queue", "target_avg_kv", "stabilization_window",
                    "tolerance"});
    auto& p = cfg.hpa_params;
    p.target_avg_queue = get_number(h, "target_avg_queue", at, p.target_avg_queue);
    p.target_avg_kv = get_number(h, "target_avg_kv", at, p.target_avg_kv);
    p.stabilization_window =
        get_number(h, "stabilization_window", at, p.stabilization_window);
    p.tolerance = get_number(h, "tolerance", at, p.tolerance);
  }
  if (j.contains("metrics")) {
    cfg.metrics = parse_metrics(j.at("metrics"), root + ".metrics");
  }
  if (j.contains("faults")) {
    cfg.faults = parse_faults(j.at("faults"), root + ".faults");
  }
  return cfg;
}

std::string serialize_scenario(const ScenarioConfig& cfg) {
  json variants = json::array();
  for (const auto& v : cfg.variants) variants.push_back(dump_variant(v));
  json j = {{"name", cfg.name},
            {"variants", variants},
            {"traffic", dump_traffic(cfg.traffic_program)},
            {"duration", cfg.duration},
            {"control_interval", cfg.control_interval},
            {"scale_from_zero_interval", cfg.scale_from_zero_interval},
            {"provisioning_delay", cfg.provisioning_delay},
            {"drain_grace", number_or_inf(cfg.drain_grace)},
            {"rng_seed", cfg.rng_seed},
            {"scheduler_weights",
             {{"queue", cfg.scheduler_weights.queue},
              {"kv_cache_utilization", cfg.scheduler_weights.kv_cache_utilization},
              {"prefix_cache", cfg.scheduler_weights.prefix_cache}}},
            {"hard_queue_cap", cfg.hard_queue_cap},
            {"baseline", std::string(to_string(cfg.baseline))},
            {"hpa",
             {{"target_avg_queue", cfg.hpa_params.target_avg_queue},
              {"target_avg_kv", cfg.hpa_params.target_avg_kv},
              {"stabilization_window", cfg.hpa_params.stabilization_window},
              {"tolerance", cfg.hpa_params.tolerance}}},
            {"metrics", dump_metrics(cfg.metrics)},
            {"faults", dump_faults(cfg.faults)}};
  if (cfg.cluster_gpu_budget) j["cluster_gpu_budget"] = *cfg.cluster_gpu_budget;
  if (cfg.inventory_file) j["inventory_file"] = *cfg.inventory_file;
  if (cfg.optimizer_mode) {
    j["optimizer_mode"] = std::string(to_string(*cfg.optimizer_mode));
  }
  return j.dump(2) + "\n";
}

ScenarioConfig load_scenario_file(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorCode::kMissingFile, "no such scenario file " + path.string());
  }
  ScenarioConfig cfg = parse_scenario(read_file(path));
  cfg.base_dir = path.parent_path();
  return cfg;
}

}  // namespace wva
