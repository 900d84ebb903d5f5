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
#include <set>
#include <sstream>

#include "wva/domain.hpp"
#include "wva/scenario.hpp"

namespace wva {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidField: return "invalid-field";
    case ErrorCode::kDuplicateVariantId: return "duplicate-variant-id";
    case ErrorCode::kGammaNotBelowTau: return "gamma-not-below-tau";
    case ErrorCode::kUnknownSourceKind: return "unknown-source-kind";
    case ErrorCode::kDuplicateName: return "duplicate-name";
    case ErrorCode::kUnknownSource: return "unknown-source";
    case ErrorCode::kParseError: return "parse-error";
    case ErrorCode::kMissingFile: return "missing-file";
    case ErrorCode::kMalformedInventory: return "malformed-inventory";
    case ErrorCode::kBudgetZero: return "budget-zero";
    case ErrorCode::kInvalidTarget: return "invalid-target";
    case ErrorCode::kMismatchedTraffic: return "mismatched-traffic";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

std::string_view to_string(VariantRole role) {
  switch (role) {
    case VariantRole::kUnified: return "unified";
    case VariantRole::kPrefill: return "prefill";
    case VariantRole::kDecode: return "decode";
  }
  return "unified";
}

std::string_view to_string(Baseline baseline) {
  return baseline == Baseline::kWva ? "wva" : "hpa";
}

std::string_view to_string(ArrivalProcess process) {
  return process == ArrivalProcess::kPoisson ? "poisson"
                                             : "deterministic_uniform";
}

std::string_view to_string(OptimizerMode mode) {
  return mode == OptimizerMode::kConstrained ? "constrained" : "unconstrained";
}

bool FaultProgram::stale_at(Seconds now, const VariantId& id) const {
  for (const auto& outage : outages) {
    if (outage.covers(now, id)) return true;
  }
  return false;
}

bool FaultProgram::target_deleted_at(Seconds now, const VariantId& id) const {
  for (const auto& deletion : target_deletions) {
    if (deletion.variant_id == id && now >= deletion.time) return true;
  }
  return false;
}

OptimizerMode ScenarioConfig::effective_optimizer_mode() const {
  if (optimizer_mode) return *optimizer_mode;
  return cluster_gpu_budget || inventory_file ? OptimizerMode::kConstrained
                                              : OptimizerMode::kUnconstrained;
}

const VariantSpec* ScenarioConfig::find_variant(const VariantId& id) const {
  for (const auto& v : variants) {
    if (v.variant_id == id) return &v;
  }
  return nullptr;
}

bool ScenarioConfig::operator==(const ScenarioConfig& o) const {
  return name == o.name && variants == o.variants &&
         cluster_gpu_budget == o.cluster_gpu_budget &&
         inventory_file == o.inventory_file &&
         optimizer_mode == o.optimizer_mode &&
         traffic_program == o.traffic_program && duration == o.duration &&
         control_interval == o.control_interval &&
         scale_from_zero_interval == o.scale_from_zero_interval &&
         provisioning_delay == o.provisioning_delay &&
         drain_grace == o.drain_grace && rng_seed == o.rng_seed &&
         scheduler_weights == o.scheduler_weights &&
         hard_queue_cap == o.hard_queue_cap && baseline == o.baseline &&
         hpa_params == o.hpa_params && metrics == o.metrics &&
         faults == o.faults;
}

bool ValidationReport::has(ErrorCode code) const {
  for (const auto& issue : issues) {
    if (issue.code == code) return true;
  }
  return false;
}

std::string ValidationReport::to_string() const {
  std::ostringstream out;
  for (const auto& issue : issues) {
    out << wva::to_string(issue.code) << ": " << issue.field << ": "
        << issue.message << "\n";
  }
  return out.str();
}

namespace {

class Checker {
 public:
  explicit Checker(ValidationReport& report) : report_(report) {}

  void require(bool ok, const std::string& field, const std::string& message,
               ErrorCode code = ErrorCode::kInvalidField) {
    if (!ok) report_.issues.push_back({code, field, message});
  }

  void finite_positive(double v, const std::string& field) {
    require(std::isfinite(v) && v > 0, field, "must be a finite value > 0");
  }

  void nonnegative(double v, const std::string& field) {
    require(!std::isnan(v) && v >= 0, field, "must be >= 0");
  }

 private:
  ValidationReport& report_;
};

void check_params(Checker& c, const SaturationParams& p, const std::string& at) {
  c.require(p.tau_kv > 0 && p.tau_kv <= 1, at + ".tau_kv", "must be in (0, 1]");
  c.require(p.tau_q >= 1, at + ".tau_q", "must be >= 1");
  c.require(p.gamma_kv > 0 && p.gamma_kv < 1, at + ".gamma_kv",
            "must be in (0, 1)");
  c.require(std::isfinite(p.gamma_q) && p.gamma_q >= 0, at + ".gamma_q",
            "must be >= 0");
  c.require(p.gamma_kv < p.tau_kv, at + ".gamma_kv", "must be below tau_kv",
            ErrorCode::kGammaNotBelowTau);
  c.require(p.min_nonsaturated_for_scaledown >= 0,
            at + ".min_nonsaturated_for_scaledown", "must be >= 0");
  c.require(p.min_replicas >= 0, at + ".min_replicas", "must be >= 0");
  c.require(p.max_replicas >= 1, at + ".max_replicas", "must be >= 1");
  c.require(p.min_replicas <= p.max_replicas, at + ".min_replicas",
            "must not exceed max_replicas");
}

void check_dist(Checker& c, const BoundedNormal& d, const std::string& at) {
  c.require(d.min >= 1, at + ".min", "must be >= 1");
  c.require(d.min <= d.max, at + ".max", "must be >= min");
  c.require(d.mean >= static_cast<double>(d.min) &&
                d.mean <= static_cast<double>(d.max),
            at + ".mean", "must lie in [min, max]");
  c.require(std::isfinite(d.stdev) && d.stdev > 0, at + ".stdev", "must be > 0");
}

}  // namespace

ValidationReport validate_scenario(const ScenarioConfig& cfg) {
  ValidationReport report;
  Checker c(report);

  c.require(!cfg.variants.empty(), "variants", "at least one variant required");
  std::set<VariantId> seen;
  for (std::size_t i = 0; i < cfg.variants.size(); ++i) {
    const auto& v = cfg.variants[i];
    const std::string at = "variants[" + std::to_string(i) + "]";
    c.require(!v.variant_id.empty(), at + ".variant_id", "must not be empty");
    c.require(!v.model_id.empty(), at + ".model_id", "must not be empty");
    c.require(seen.insert(v.variant_id).second, at + ".variant_id",
              "duplicate variant id '" + v.variant_id + "'",
              ErrorCode::kDuplicateVariantId);
    c.require(v.gpus_per_replica >= 1, at + ".gpus_per_replica", "must be >= 1");
    c.finite_positive(v.variant_cost, at + ".variant_cost");
    c.require(v.kv_capacity_tokens >= 1, at + ".kv_capacity_tokens",
              "must be >= 1");
    c.require(v.max_concurrent_sequences >= 1, at + ".max_concurrent_sequences",
              "must be >= 1");
    c.finite_positive(v.prefill_rate, at + ".prefill_rate");
    c.finite_positive(v.decode_rate, at + ".decode_rate");
    check_params(c, v.policy_params, at + ".policy");
    if (v.initial_replicas) {
      c.require(*v.initial_replicas >= 0 &&
                    *v.initial_replicas <= v.policy_params.max_replicas,
                at + ".initial_replicas", "must lie in [0, max_replicas]");
    }
  }

  if (cfg.cluster_gpu_budget) {
    c.require(*cfg.cluster_gpu_budget >= 1, "cluster_gpu_budget", "must be >= 1");
  }
  if (cfg.inventory_file) {
    c.require(!cfg.inventory_file->empty(), "inventory_file", "must not be empty");
  }

  const auto& tp = cfg.traffic_program;
  c.require(!tp.phases.empty(), "traffic.phases", "at least one phase required");
  for (std::size_t i = 0; i < tp.phases.size(); ++i) {
    const std::string at = "traffic.phases[" + std::to_string(i) + "]";
    c.require(std::isfinite(tp.phases[i].rps) && tp.phases[i].rps >= 0,
              at + ".rps", "must be >= 0");
    if (i == 0) {
      c.require(tp.phases[i].start_time == 0.0, at + ".start",
                "first phase must start at 0");
    } else {
      c.require(tp.phases[i].start_time > tp.phases[i - 1].start_time,
                at + ".start", "phase starts must strictly increase");
    }
  }
  check_dist(c, tp.input_dist, "traffic.input_tokens");
  check_dist(c, tp.output_dist, "traffic.output_tokens");
  c.require(tp.prefix_groups >= 0, "traffic.prefix_groups", "must be >= 0");

  c.finite_positive(cfg.duration, "duration");
  c.finite_positive(cfg.control_interval, "control_interval");
  c.finite_positive(cfg.scale_from_zero_interval, "scale_from_zero_interval");
  c.require(cfg.scale_from_zero_interval <= cfg.control_interval,
            "scale_from_zero_interval", "must not exceed control_interval");
  c.require(std::isfinite(cfg.provisioning_delay) && cfg.provisioning_delay >= 0,
            "provisioning_delay", "must be >= 0");
  c.nonnegative(cfg.drain_grace, "drain_grace");
  c.require(cfg.hard_queue_cap >= 1, "hard_queue_cap", "must be >= 1");
  c.nonnegative(cfg.scheduler_weights.queue, "scheduler_weights.queue");
  c.nonnegative(cfg.scheduler_weights.kv_cache_utilization,
                "scheduler_weights.kv_cache_utilization");
  c.nonnegative(cfg.scheduler_weights.prefix_cache,
                "scheduler_weights.prefix_cache");

  const auto& h = cfg.hpa_params;
  c.finite_positive(h.target_avg_queue, "hpa.target_avg_queue");
  c.require(h.target_avg_kv > 0 && h.target_avg_kv < 1, "hpa.target_avg_kv",
            "must be in (0, 1)");
  c.nonnegative(h.stabilization_window, "hpa.stabilization_window");
  c.require(h.tolerance >= 0 && h.tolerance < 1, "hpa.tolerance",
            "must be in [0, 1)");

  std::set<std::string> names;
  for (std::size_t i = 0; i < cfg.metrics.sources.size(); ++i) {
    const auto& [name, source] = cfg.metrics.sources[i];
    const std::string at = "metrics.sources[" + std::to_string(i) + "]";
    c.require(!name.empty(), at + ".name", "must not be empty");
    c.require(names.insert(name).second, at + ".name",
              "duplicate source name '" + name + "'", ErrorCode::kDuplicateName);
    if (source.kind == SourceKind::kFile) {
      c.require(!source.path.empty(), at + ".path", "file source needs a path");
    }
  }
  c.require(names.count(cfg.metrics.active) == 1, "metrics.active",
            "no source named '" + cfg.metrics.active + "'",
            ErrorCode::kUnknownSource);

  for (std::size_t i = 0; i < cfg.faults.outages.size(); ++i) {
    const auto& o = cfg.faults.outages[i];
    const std::string at = "faults.outages[" + std::to_string(i) + "]";
    c.require(o.start < o.end, at, "start must precede end");
    if (o.variant) {
      c.require(cfg.find_variant(*o.variant) != nullptr, at + ".variant",
                "unknown variant '" + *o.variant + "'");
    }
  }
  for (std::size_t i = 0; i < cfg.faults.target_deletions.size(); ++i) {
    const auto& d = cfg.faults.target_deletions[i];
    const std::string at = "faults.target_deletions[" + std::to_string(i) + "]";
    c.require(cfg.find_variant(d.variant_id) != nullptr, at + ".variant_id",
              "unknown variant '" + d.variant_id + "'");
  }
  return report;
}

const ScenarioConfig& validated(const ScenarioConfig& cfg) {
  auto report = validate_scenario(cfg);
  if (!report.ok()) {
    throw Error(report.issues.front().code, report.to_string());
  }
  return cfg;
}

}  // namespace wva
