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

// Reconciliation loop wiring the model analyzer and global optimizer into a
// cluster.
//
// Each control tick runs two halves. The decision engine (decide) pulls
// snapshots through the metrics registry, computes a TargetState per model
// pool and writes it to the DecisionCache. The reconciler (reconcile) reads
// the cache, evaluates the TargetResolved and MetricsAvailable gates, and
// publishes an ActuationCommand only where the target differs from the
// observed replica count. The halves share nothing but the cache, so they
// may run on separate threads as long as each tick's decide completes before
// that tick's reconcile.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "wva/domain.hpp"
#include "wva/global_optimizer.hpp"
#include "wva/metrics_io.hpp"
#include "wva/saturation_policy.hpp"
#include "wva/scenario.hpp"

namespace wva {

class Simulator;

/// In-memory store of the latest TargetState per model. Entries are replaced
/// whole under a lock, so readers never see a partial write.
class DecisionCache {
 public:
  void put(TargetState state);
  std::optional<TargetState> get(const ModelId& model_id) const;
  std::vector<ModelId> models() const;

  /// The decision trigger: tells the reconciler new targets are available.
  void signal(Seconds at);
  Seconds last_trigger_at() const;
  std::uint64_t trigger_count() const;

 private:
  mutable std::mutex mu_;
  std::map<ModelId, TargetState> entries_;
  Seconds last_trigger_at_ = -kForever;
  std::uint64_t triggers_ = 0;
};

enum class ConditionType { kTargetResolved, kMetricsAvailable };

struct Condition {
  bool status = false;
  std::string reason;
  Seconds last_transition = 0.0;
};

struct VariantAutoscalingRecord {
  struct Spec {
    ModelId model_id;
    VariantId variant_id;
    double variant_cost = 10.0;
    std::string scale_target;
  };
  struct Status {
    int desired_optimized_alloc = 0;
    std::map<ConditionType, Condition> conditions;
  };

  Spec spec;
  Status status;
  int observed_replicas = 0;

  bool condition(ConditionType type) const;
};

struct ActuationCommand {
  VariantId variant_id;
  int target_replicas = 0;
  bool drain_safe = true;
  Seconds issued_at = 0.0;
  std::string reason;

  bool operator==(const ActuationCommand&) const = default;
};

/// Publishes decisions to whatever orchestrates replicas.
class ActuationStrategy {
 public:
  virtual ~ActuationStrategy() = default;
  virtual void publish(const ActuationCommand& command) = 0;
};

class SimActuator : public ActuationStrategy {
 public:
  explicit SimActuator(Simulator& sim) : sim_(sim) {}
  void publish(const ActuationCommand& command) override;

 private:
  Simulator& sim_;
};

class RecordingActuator : public ActuationStrategy {
 public:
  void publish(const ActuationCommand& command) override {
    published.push_back(command);
  }
  std::vector<ActuationCommand> published;
};

/// A variant is blind when the cluster runs replicas of it but no fresh
/// snapshot arrived.
bool variant_metrics_available(const std::vector<MetricSnapshot>& snapshots,
                               int observed);

/// What a policy sees at one tick.
struct SystemState {
  Seconds now = 0.0;
  // Every snapshot, stale ones included, grouped by variant.
  std::map<VariantId, std::vector<MetricSnapshot>> snapshots;
  std::map<VariantId, int> observed;
};

/// Per tick, per variant record of what the decision engine saw and chose.
struct DecisionTraceRecord {
  Seconds time = 0.0;
  std::string policy;
  ModelId model_id;
  VariantId variant_id;
  int observed = 0;
  int fresh = 0;
  int stale = 0;
  std::string snapshot_digest;
  std::int64_t occupied_tokens = 0;
  std::int64_t queued = 0;
  int saturated = 0;
  int nonsaturated = 0;
  std::optional<double> avg_spare_kv;
  std::optional<double> avg_spare_q;
  bool trigger_kv = false;
  bool trigger_q = false;
  // HPA only.
  std::optional<double> avg_kv;
  std::optional<double> avg_q;
  int capacity_target = 0;
  int recommended = 0;
  Direction direction = Direction::kHold;
  double spare_capacity = 1.0;
  int granted = 0;
  int unmet = 0;
  bool metrics_available = true;
  std::string reason;
};

/// Per reconcile pass, per variant: gates and the emitted command, if any.
struct ReconcileRecord {
  Seconds time = 0.0;
  std::string source;
  VariantId variant_id;
  bool target_resolved = true;
  bool metrics_available = true;
  std::optional<int> cached_desired;
  int observed = 0;
  std::optional<ActuationCommand> command;
};

/// Computes target state independent of how it is applied.
class AutoscalingPolicy {
 public:
  virtual ~AutoscalingPolicy() = default;
  virtual std::vector<TargetState> calculate(const SystemState& state) = 0;
  virtual const std::vector<DecisionTraceRecord>& last_trace() const = 0;
};

/// The saturation-based optimizer: per-pool analysis followed by global
/// arbitration (unconstrained pass-through or greedy-by-saturation).
class SaturationPolicy : public AutoscalingPolicy {
 public:
  SaturationPolicy(std::vector<VariantSpec> variants,
                   std::optional<ClusterBudget> budget);

  std::vector<TargetState> calculate(const SystemState& state) override;
  const std::vector<DecisionTraceRecord>& last_trace() const override {
    return trace_;
  }
  const std::string& last_optimizer_trace() const { return optimizer_trace_; }

 private:
  std::vector<VariantSpec> variants_;
  std::optional<ClusterBudget> budget_;
  std::map<ModelId, std::vector<const VariantSpec*>> pools_;
  // Last desired count decided from usable metrics, per variant.
  std::map<VariantId, int> last_good_;
  std::vector<DecisionTraceRecord> trace_;
  std::string optimizer_trace_;
};

/// Proportional baseline: desired = ceil(current * avg / target) per metric,
/// max over metrics, a tolerance band, and a scale-down stabilization window.
class HpaPolicy : public AutoscalingPolicy {
 public:
  HpaPolicy(std::vector<VariantSpec> variants, HpaParams params);

  std::vector<TargetState> calculate(const SystemState& state) override;
  const std::vector<DecisionTraceRecord>& last_trace() const override {
    return trace_;
  }

  /// The per-variant core, exposed for direct testing.
  int recommend(const VariantId& variant_id, Seconds now, int current,
                double avg_q, double avg_kv);

 private:
  std::vector<VariantSpec> variants_;
  HpaParams params_;
  std::map<VariantId, std::vector<std::pair<Seconds, int>>> history_;
  std::vector<DecisionTraceRecord> trace_;
};

class ControlPlane {
 public:
  /// `registry` must hold cfg.metrics.active. The budget is derived from the
  /// scenario (see derive_budget).
  ControlPlane(const ScenarioConfig& cfg, const Simulator& sim,
               MetricsRegistry& registry, ActuationStrategy& actuator);

  /// Engine half of a WVA tick: ingest, analyze, optimize, cache.
  void decide(Seconds now);
  /// Reconciler half: gates and actuation from cached targets.
  std::vector<ActuationCommand> reconcile(Seconds now);
  std::vector<ActuationCommand> control_tick(Seconds now);

  /// Fast path: a pool with no ready or provisioning replicas that saw new
  /// arrivals gets its cheapest variant scaled to max(1, min_replicas).
  std::vector<ActuationCommand> scale_from_zero_tick(Seconds now);

  /// HPA baseline tick; commands are drain-unsafe.
  std::vector<ActuationCommand> hpa_tick(Seconds now);

  const DecisionCache& cache() const { return cache_; }
  DecisionCache& cache() { return cache_; }
  const std::map<VariantId, VariantAutoscalingRecord>& records() const {
    return records_;
  }
  const std::vector<DecisionTraceRecord>& decision_trace() const {
    return trace_;
  }
  const std::vector<ReconcileRecord>& reconcile_trace() const {
    return reconcile_trace_;
  }
  const std::vector<std::string>& optimizer_trace() const {
    return optimizer_trace_;
  }
  const std::vector<ActuationCommand>& commands() const { return commands_; }
  /// Every snapshot the decision engine consumed, in refresh order.
  const std::vector<MetricSnapshot>& snapshot_log() const { return snapshot_log_; }

 private:
  SystemState observe(Seconds now);
  std::vector<ActuationCommand> reconcile_with(Seconds now, bool drain_safe,
                                               const std::string& source);
  void set_condition(VariantAutoscalingRecord& record, ConditionType type,
                     bool status, const std::string& reason, Seconds now);

  ScenarioConfig cfg_;
  const Simulator& sim_;
  MetricsRegistry& registry_;
  ActuationStrategy& actuator_;
  std::optional<ClusterBudget> budget_;
  std::unique_ptr<AutoscalingPolicy> policy_;
  DecisionCache cache_;
  std::map<VariantId, VariantAutoscalingRecord> records_;
  std::uint64_t arrivals_at_last_fast_tick_ = 0;
  std::vector<DecisionTraceRecord> trace_;
  std::vector<ReconcileRecord> reconcile_trace_;
  std::vector<std::string> optimizer_trace_;
  std::vector<ActuationCommand> commands_;
  std::vector<MetricSnapshot> snapshot_log_;
};

/// Decision trace CSV: decision records joined with the reconcile record of
/// the same tick and variant.
void write_decision_trace_csv(std::ostream& out,
                              const std::vector<DecisionTraceRecord>& decisions,
                              const std::vector<ReconcileRecord>& reconciles);

}  // namespace wva
