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

// Model analyzer: saturated-set detection, the headroom trigger, closed-form
// capacity targets and the fragmentation-aware scale-down guard.
//
// A replica r is saturated when U_kv(r) >= tau_kv or U_q(r) >= tau_q. The
// average spare capacity over the non-saturated replicas, tau_m - U_m(r), is
// compared against gamma_m; falling below it on either metric fires the
// trigger. When it fires, the target replica count is the smallest one that
// carries the current load while keeping the average spare at gamma:
//
//   N_kv = ceil(occupied_tokens / (kv_capacity * (tau_kv - gamma_kv)))
//   N_q  = ceil(queued / max(tau_q - gamma_q, 1))
//
// All functions here are pure and may run concurrently for distinct variants.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wva/domain.hpp"

namespace wva {

struct SaturationReport {
  VariantId variant_id;
  std::vector<ReplicaId> saturated;
  std::vector<ReplicaId> nonsaturated;
  // Absent when the non-saturated set is empty.
  std::optional<double> avg_spare_kv;
  std::optional<double> avg_spare_q;
  bool trigger_kv = false;
  bool trigger_q = false;

  bool empty() const { return saturated.empty() && nonsaturated.empty(); }
  /// Every reporting replica is saturated.
  bool degenerate() const { return nonsaturated.empty() && !saturated.empty(); }
  bool triggered() const { return trigger_kv || trigger_q; }
};

enum class Direction { kUp, kHold, kDown };

std::string_view to_string(Direction direction);

struct ScaleRecommendation {
  VariantId variant_id;
  int current = 0;
  int desired = 0;
  Direction direction = Direction::kHold;
  std::string reason;
  // Normalized headroom in [0, 1]; lower means closer to saturation.
  double spare_capacity = 1.0;
  // Closed-form capacity target before the trigger/guard gates.
  int capacity_target = 0;
};

bool is_saturated(const MetricSnapshot& snapshot, const SaturationParams& params);

SaturationReport compute_saturation(std::span<const MetricSnapshot> snapshots,
                                    const SaturationParams& params);

/// Load aggregated over a set of snapshots, in tokens and requests.
struct LoadSummary {
  std::int64_t occupied_tokens = 0;
  std::int64_t queued = 0;
  std::int64_t in_flight = 0;

  bool any() const { return occupied_tokens > 0 || queued > 0 || in_flight > 0; }
};

LoadSummary summarize_load(std::span<const MetricSnapshot> snapshots,
                           std::int64_t kv_capacity_tokens);

/// Closed-form replica count for `load`, before min/max clamping.
int replicas_for_load(const LoadSummary& load, const SaturationParams& params,
                      std::int64_t kv_capacity_tokens);

/// Average spare after the least-loaded non-saturated replica is removed; this
/// is the worst case over every single-replica removal.
struct ScaleDownCheck {
  bool allowed = false;
  std::optional<double> projected_spare_kv;
  std::optional<double> projected_spare_q;
  int nonsaturated = 0;
};

ScaleDownCheck check_scale_down(std::span<const MetricSnapshot> snapshots,
                                const SaturationParams& params);

double normalized_spare(const SaturationReport& report,
                        const SaturationParams& params);

ScaleRecommendation compute_target_replicas(
    const SaturationReport& report, std::span<const MetricSnapshot> snapshots,
    const SaturationParams& params, const VariantSpec& variant,
    int current_replicas);

/// On metric-pipeline failure, returns `last_good` with every count floored at
/// one replica; otherwise returns `fresh` untouched.
TargetState safety_net(const TargetState& last_good, bool metrics_available,
                       const TargetState& fresh);

/// One variant of a model pool as seen by the analyzer.
struct PoolMember {
  const VariantSpec* variant = nullptr;
  // Fresh snapshots only.
  std::vector<MetricSnapshot> snapshots;
  int current = 0;
  // max_replicas after hardware-availability caps.
  int effective_max = 0;
};

struct PoolPlan {
  std::vector<SaturationReport> reports;
  std::vector<ScaleRecommendation> recommendations;
  bool triggered = false;
};

/// Plans a whole model pool: the pool's load is filled onto variants in
/// ascending cost order, each up to its effective maximum; scale-up requires
/// the pool trigger, scale-down requires the guard over the pool's
/// non-saturated replicas and removes at most one replica per call. With a
/// single member this matches compute_target_replicas.
PoolPlan plan_pool(std::span<const PoolMember> members);

}  // namespace wva
