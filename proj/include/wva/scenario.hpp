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

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wva/domain.hpp"
#include "wva/workload.hpp"

namespace wva {

struct Outage {
  Seconds start = 0.0;
  Seconds end = 0.0;
  // Empty means every variant is affected.
  std::optional<VariantId> variant;

  bool covers(Seconds now, const VariantId& id) const {
    return now >= start && now < end && (!variant || *variant == id);
  }

  bool operator==(const Outage&) const = default;
};

struct TargetDeletion {
  Seconds time = 0.0;
  VariantId variant_id;

  bool operator==(const TargetDeletion&) const = default;
};

/// Injected metric-pipeline and deployment faults.
struct FaultProgram {
  std::vector<Outage> outages;
  std::vector<TargetDeletion> target_deletions;

  bool stale_at(Seconds now, const VariantId& id) const;
  bool target_deleted_at(Seconds now, const VariantId& id) const;

  bool operator==(const FaultProgram&) const = default;
};

enum class SourceKind { kSim, kFile };

struct SourceConfig {
  SourceKind kind = SourceKind::kSim;
  // File sources only; relative paths resolve against the scenario file.
  std::string path;

  bool operator==(const SourceConfig&) const = default;
};

/// Named metric sources and the one the control plane reads from.
struct MetricsConfig {
  // Ordered so that duplicate names are caught during parsing.
  std::vector<std::pair<std::string, SourceConfig>> sources{
      {"primary", SourceConfig{}}};
  std::string active = "primary";

  bool operator==(const MetricsConfig&) const = default;
};

enum class OptimizerMode { kUnconstrained, kConstrained };

std::string_view to_string(OptimizerMode mode);

struct SchedulerWeights {
  double queue = 1.0;
  double kv_cache_utilization = 1.0;
  double prefix_cache = 0.0;

  bool operator==(const SchedulerWeights&) const = default;
};

/// Everything needed to reproduce one closed-loop experiment.
struct ScenarioConfig {
  std::string name = "scenario";
  std::vector<VariantSpec> variants;
  // Absent (and no inventory) means unconstrained optimization.
  std::optional<int> cluster_gpu_budget;
  // CSV inventory (node_id,gpu_model,count,gpus_usable); relative to the
  // scenario file.
  std::optional<std::string> inventory_file;
  std::optional<OptimizerMode> optimizer_mode;
  TrafficProgram traffic_program;
  Seconds duration = 600.0;
  Seconds control_interval = 30.0;
  Seconds scale_from_zero_interval = 2.0;
  Seconds provisioning_delay = 30.0;
  Seconds drain_grace = kForever;
  std::uint64_t rng_seed = 42;
  SchedulerWeights scheduler_weights;
  int hard_queue_cap = 10;
  Baseline baseline = Baseline::kWva;
  HpaParams hpa_params;
  MetricsConfig metrics;
  FaultProgram faults;
  // Directory the scenario was loaded from; not serialized.
  std::filesystem::path base_dir;

  /// Mode after applying defaults: constrained iff a budget or inventory is
  /// configured, unless overridden.
  OptimizerMode effective_optimizer_mode() const;

  const VariantSpec* find_variant(const VariantId& id) const;

  bool operator==(const ScenarioConfig& other) const;
};

struct ValidationIssue {
  ErrorCode code;
  std::string field;
  std::string message;

  bool operator==(const ValidationIssue&) const = default;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;

  bool ok() const { return issues.empty(); }
  bool has(ErrorCode code) const;
  std::string to_string() const;

  bool operator==(const ValidationReport&) const = default;
};

ValidationReport validate_scenario(const ScenarioConfig& cfg);

/// Returns `cfg` if valid; otherwise throws an Error carrying the first
/// violation's code and the full report as message.
const ScenarioConfig& validated(const ScenarioConfig& cfg);

// Scenario file format (JSON); see docs/scenario-format.md.
ScenarioConfig parse_scenario(const std::string& text);
std::string serialize_scenario(const ScenarioConfig& cfg);
ScenarioConfig load_scenario_file(const std::filesystem::path& path);

}  // namespace wva
