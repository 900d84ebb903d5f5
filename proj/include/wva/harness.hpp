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

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "wva/cluster_sim.hpp"
#include "wva/control_plane.hpp"
#include "wva/scenario.hpp"

namespace wva {

struct PhaseRow {
  Seconds start = 0.0;
  Seconds end = 0.0;
  double rps_target = 0.0;
  std::uint64_t arrived = 0;
  std::uint64_t completed = 0;
  std::uint64_t dropped = 0;
  std::array<std::uint64_t, kDropCauseCount> drop_causes{};
  // rps_target scaled by the fraction of the phase's arrivals that completed.
  double throughput_completed_rps = 0.0;
  double drops_per_s = 0.0;
  std::optional<double> mean_ttft;
  std::optional<double> mean_itl;
  // Ready replicas summed over variants, averaged over the phase's ticks.
  double mean_replicas = 0.0;
  // Some variant's deployment size reached its max_replicas at a tick.
  bool max_replicas_hit = false;

  bool operator==(const PhaseRow&) const = default;
};

struct RunTotals {
  std::uint64_t arrived = 0;
  std::uint64_t completed = 0;
  std::uint64_t dropped = 0;
  std::uint64_t in_flight_at_end = 0;
  std::uint64_t queued_at_end = 0;
  std::array<std::uint64_t, kDropCauseCount> drop_causes{};
  std::uint64_t commands = 0;
  std::optional<double> mean_ttft;
  std::optional<double> mean_itl;

  std::uint64_t drops(DropCause cause) const {
    return drop_causes[static_cast<std::size_t>(cause)];
  }
  bool flow_conserved() const {
    return arrived == completed + dropped + in_flight_at_end + queued_at_end;
  }
  bool operator==(const RunTotals&) const = default;
};

struct RunSummary {
  std::string scenario;
  Baseline baseline = Baseline::kWva;
  OptimizerMode optimizer_mode = OptimizerMode::kUnconstrained;
  std::uint64_t seed = 0;
  std::string config_digest;
  std::string traffic_digest;
  std::string event_log_hash;
  std::vector<PhaseRow> phases;
  RunTotals totals;

  bool operator==(const RunSummary&) const = default;
};

/// One row per variant per control tick, plus a "*" row for the whole
/// gateway.
struct TimeSeriesRow {
  Seconds tick = 0.0;
  std::string variant;
  int replicas_ready = 0;
  double avg_kv = 0.0;
  double avg_q = 0.0;
  double rps_in = 0.0;
  double rps_out = 0.0;
  std::uint64_t drops = 0;
  int replicas_observed = 0;
};

struct RunArtifacts {
  std::vector<TimeSeriesRow> time_series;
  std::vector<MetricSnapshot> snapshots;
  std::vector<DecisionTraceRecord> decisions;
  std::vector<ReconcileRecord> reconciles;
  std::vector<std::string> optimizer_trace;
  std::vector<ActuationCommand> commands;
  std::vector<EventRecord> events;
  std::vector<RequestRecord> requests;
};

struct RunResult {
  RunSummary summary;
  RunArtifacts artifacts;
};

struct RunOptions {
  // Where to write artifacts; nothing is written when absent.
  std::optional<std::filesystem::path> out_dir;
  // Defaults to the SHA-256 of the serialized scenario.
  std::optional<std::string> config_digest;
  bool check_invariants = false;
};

/// Runs the closed loop: arrivals drive the simulator, the control plane
/// ticks at control_interval (and scale_from_zero_interval for WVA).
RunResult run_scenario(const ScenarioConfig& cfg, const RunOptions& options = {});

/// Loads, validates and runs a scenario file; the digest is the file's hash.
RunResult run_scenario_file(const std::filesystem::path& path,
                            const RunOptions& options = {});

std::string sha256_file(const std::filesystem::path& path);
std::string traffic_digest(const ScenarioConfig& cfg);

void write_summary_json(const std::filesystem::path& path,
                        const RunSummary& summary);
RunSummary read_summary_json(const std::filesystem::path& path);
std::string summary_to_json(const RunSummary& summary);

struct ComparisonRow {
  double rps_target = 0.0;
  double throughput_a = 0.0;
  double throughput_b = 0.0;
  double drops_per_s_a = 0.0;
  double drops_per_s_b = 0.0;
  std::optional<double> ttft_a;
  std::optional<double> ttft_b;
  std::optional<double> itl_a;
  std::optional<double> itl_b;
  double replicas_a = 0.0;
  double replicas_b = 0.0;

  double throughput_delta() const { return throughput_a - throughput_b; }
  double drops_delta() const { return drops_per_s_a - drops_per_s_b; }
  /// (a - b) / b; absent when b is zero.
  std::optional<double> throughput_improvement() const;
  std::optional<double> drop_ratio() const;
};

struct ComparisonTable {
  std::string label_a;
  std::string label_b;
  std::vector<ComparisonRow> rows;
  std::uint64_t total_drops_a = 0;
  std::uint64_t total_drops_b = 0;
};

/// Throws mismatched-traffic unless both runs share traffic and seed.
ComparisonTable compare_runs(const RunSummary& a, const RunSummary& b);

void write_comparison_csv(std::ostream& out, const ComparisonTable& table);

struct PlotEmission {
  std::vector<std::filesystem::path> files;
  std::vector<std::string> warnings;
};

/// Plot-ready tables from a run directory: reactivity.csv, cost_tiering.csv
/// and phases.csv.
PlotEmission emit_plot_data(const std::filesystem::path& run_dir,
                            const std::filesystem::path& out_dir);

/// throughput_vs_rps.csv, drops_vs_rps.csv, latency_vs_rps.csv and
/// stepped_summary.csv from a comparison.
PlotEmission emit_comparison_plot_data(const ComparisonTable& table,
                                       const std::filesystem::path& out_dir);

}  // namespace wva
