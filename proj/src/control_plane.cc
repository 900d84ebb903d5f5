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

#include "wva/control_plane.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>
#include <tuple>

#include "wva/cluster_sim.hpp"
#include "wva/util.hpp"

namespace wva {

void DecisionCache::put(TargetState state) {
  std::lock_guard<std::mutex> lock(mu_);
  ModelId key = state.model_id;
  entries_.insert_or_assign(std::move(key), std::move(state));
}

std::optional<TargetState> DecisionCache::get(const ModelId& model_id) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = entries_.find(model_id);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::vector<ModelId> DecisionCache::models() const {
  std::lock_guard<std::mutex> lock(mu_);
  std::vector<ModelId> out;
  for (const auto& [id, _] : entries_) out.push_back(id);
  return out;
}

void DecisionCache::signal(Seconds at) {
  std::lock_guard<std::mutex> lock(mu_);
  last_trigger_at_ = at;
  ++triggers_;
}

Seconds DecisionCache::last_trigger_at() const {
  std::lock_guard<std::mutex> lock(mu_);
  return last_trigger_at_;
}

std::uint64_t DecisionCache::trigger_count() const {
  std::lock_guard<std::mutex> lock(mu_);
  return triggers_;
}

bool VariantAutoscalingRecord::condition(ConditionType type) const {
  auto it = status.conditions.find(type);
  return it != status.conditions.end() && it->second.status;
}

void SimActuator::publish(const ActuationCommand& command) {
  sim_.apply_replica_target(command.variant_id, command.target_replicas,
                            command.drain_safe);
}

bool variant_metrics_available(const std::vector<MetricSnapshot>& snapshots,
                               int observed) {
  if (observed == 0) return true;
  return std::any_of(snapshots.begin(), snapshots.end(),
                     [](const MetricSnapshot& s) { return !s.stale; });
}

namespace {

std::vector<MetricSnapshot> fresh_only(const std::vector<MetricSnapshot>& snaps) {
  std::vector<MetricSnapshot> out;
  for (const auto& s : snaps) {
    if (!s.stale) out.push_back(s);
  }
  return out;
}

std::string snapshot_digest(const std::vector<MetricSnapshot>& snaps) {
  std::ostringstream out;
  write_snapshots_csv(out, snaps, false);
  return sha256_hex(out.str()).substr(0, 12);
}

const std::vector<MetricSnapshot>& snapshots_of(const SystemState& state,
                                                const VariantId& id) {
  static const std::vector<MetricSnapshot> kNone;
  auto it = state.snapshots.find(id);
  return it == state.snapshots.end() ? kNone : it->second;
}

int observed_of(const SystemState& state, const VariantId& id) {
  auto it = state.observed.find(id);
  return it == state.observed.end() ? 0 : it->second;
}

DecisionTraceRecord base_record(const SystemState& state, const VariantSpec& v,
                                const std::string& policy) {
  const auto& snaps = snapshots_of(state, v.variant_id);
  DecisionTraceRecord r;
  r.time = state.now;
  r.policy = policy;
  r.model_id = v.model_id;
  r.variant_id = v.variant_id;
  r.observed = observed_of(state, v.variant_id);
  for (const auto& s : snaps) (s.stale ? r.stale : r.fresh)++;
  r.snapshot_digest = snapshot_digest(snaps);
  return r;
}

int rank(Direction d) {
  return d == Direction::kUp ? 2 : d == Direction::kDown ? 1 : 0;
}

}  // namespace

SaturationPolicy::SaturationPolicy(std::vector<VariantSpec> variants,
                                   std::optional<ClusterBudget> budget)
    : variants_(std::move(variants)), budget_(std::move(budget)) {
  for (const auto& v : variants_) pools_[v.model_id].push_back(&v);
}

std::vector<TargetState> SaturationPolicy::calculate(const SystemState& state) {
  trace_.clear();
  std::map<VariantId, DecisionTraceRecord> records;
  std::map<VariantId, bool> available;
  std::map<VariantId, ScaleRecommendation> recs;
  std::vector<AllocationRequest> requests;

  for (const auto& [model, members] : pools_) {
    std::vector<PoolMember> pool;
    for (const VariantSpec* v : members) {
      const auto& snaps = snapshots_of(state, v->variant_id);
      int observed = observed_of(state, v->variant_id);
      last_good_.try_emplace(v->variant_id, observed);
      records[v->variant_id] = base_record(state, *v, "wva");
      bool ok = variant_metrics_available(snaps, observed);
      available[v->variant_id] = ok;
      if (ok) {
        pool.push_back(PoolMember{v, fresh_only(snaps), observed,
                                  effective_max_replicas(*v, budget_)});
      }
    }
    PoolPlan plan = plan_pool(pool);
    for (std::size_t i = 0; i < pool.size(); ++i) {
      const VariantSpec& v = *pool[i].variant;
      const auto& report = plan.reports[i];
      const auto& rec = plan.recommendations[i];
      auto& r = records[v.variant_id];
      LoadSummary load = summarize_load(pool[i].snapshots, v.kv_capacity_tokens);
      r.occupied_tokens = load.occupied_tokens;
      r.queued = load.queued;
      r.saturated = static_cast<int>(report.saturated.size());
      r.nonsaturated = static_cast<int>(report.nonsaturated.size());
      r.avg_spare_kv = report.avg_spare_kv;
      r.avg_spare_q = report.avg_spare_q;
      r.trigger_kv = report.trigger_kv;
      r.trigger_q = report.trigger_q;
      r.capacity_target = rec.capacity_target;
      r.recommended = rec.desired;
      r.direction = rec.direction;
      r.spare_capacity = rec.spare_capacity;
      r.reason = rec.reason;
      recs[v.variant_id] = rec;
      requests.push_back(AllocationRequest{v.variant_id, v.model_id,
                                           v.hardware_class, rec.current,
                                           rec.desired, v.gpus_per_replica,
                                           v.variant_cost, rec.spare_capacity});
    }
  }

  // Blind variants keep their last good size, floored at one replica; their
  // GPUs stay charged against the budget.
  for (const auto& [model, members] : pools_) {
    TargetState last;
    last.model_id = model;
    for (const VariantSpec* v : members) {
      if (!available[v->variant_id]) {
        last.per_variant_desired[v->variant_id] = last_good_[v->variant_id];
      }
    }
    if (last.per_variant_desired.empty()) continue;
    TargetState fresh;
    fresh.computed_at = state.now;
    TargetState net = safety_net(last, false, fresh);
    for (const auto& [id, n] : net.per_variant_desired) {
      const VariantSpec* v = nullptr;
      for (const VariantSpec* m : members) {
        if (m->variant_id == id) v = m;
      }
      auto& r = records[id];
      r.capacity_target = n;
      r.recommended = n;
      r.direction = Direction::kHold;
      r.metrics_available = false;
      r.reason = net.reason;
      requests.push_back(AllocationRequest{id, v->model_id, v->hardware_class,
                                           observed_of(state, id), n,
                                           v->gpus_per_replica, v->variant_cost,
                                           1.0});
    }
  }

  AllocationResult allocation =
      budget_ ? optimize_constrained(requests, budget_->total_gpus,
                                     budget_->per_class)
              : optimize_unconstrained(requests);
  optimizer_trace_ = describe_allocation(requests, allocation);

  std::vector<TargetState> out;
  for (const auto& [model, members] : pools_) {
    TargetState target;
    target.model_id = model;
    target.computed_at = state.now;
    target.metrics_available = true;
    int best_rank = -1;
    for (const VariantSpec* v : members) {
      const auto& id = v->variant_id;
      int granted = allocation.granted(id);
      bool ok = available[id];
      target.per_variant_desired[id] = granted;
      target.per_variant_metrics_available[id] = ok;
      target.metrics_available = target.metrics_available && ok;
      auto& r = records[id];
      r.granted = granted;
      auto unmet = allocation.unmet.find(id);
      r.unmet = unmet == allocation.unmet.end() ? 0 : unmet->second;
      if (ok) {
        last_good_[id] = granted;
        const auto& rec = recs[id];
        if (rank(rec.direction) > best_rank) {
          best_rank = rank(rec.direction);
          target.reason = rec.reason;
        }
      }
      trace_.push_back(r);
    }
    if (best_rank < 0) target.reason = "safety-net";
    out.push_back(std::move(target));
  }
  return out;
}

HpaPolicy::HpaPolicy(std::vector<VariantSpec> variants, HpaParams params)
    : variants_(std::move(variants)), params_(params) {}

int HpaPolicy::recommend(const VariantId& variant_id, Seconds now, int current,
                         double avg_q, double avg_kv) {
  const VariantSpec* spec = nullptr;
  for (const auto& v : variants_) {
    if (v.variant_id == variant_id) spec = &v;
  }
  int lo = std::max(1, spec ? spec->policy_params.min_replicas : 1);
  int hi = spec ? spec->policy_params.max_replicas : std::max(current, lo);

  auto per_metric = [&](double avg, double target) {
    double ratio = avg / target;
    if (std::abs(ratio - 1.0) <= params_.tolerance) return current;
    return static_cast<int>(std::ceil(current * ratio - 1e-9));
  };
  int raw = std::max(per_metric(avg_q, params_.target_avg_queue),
                     per_metric(avg_kv, params_.target_avg_kv));
  if (current == 0) raw = lo;
  raw = std::clamp(raw, lo, hi);

  auto& history = history_[variant_id];
  history.emplace_back(now, raw);
  std::erase_if(history, [&](const std::pair<Seconds, int>& h) {
    return h.first < now - params_.stabilization_window;
  });
  if (raw >= current) return raw;
  int stabilized = raw;
  for (const auto& [t, d] : history) stabilized = std::max(stabilized, d);
  return std::min(stabilized, current);
}

std::vector<TargetState> HpaPolicy::calculate(const SystemState& state) {
  trace_.clear();
  std::map<ModelId, TargetState> targets;
  for (const auto& v : variants_) {
    auto& target = targets[v.model_id];
    target.model_id = v.model_id;
    target.computed_at = state.now;
    if (target.per_variant_desired.empty()) {
      target.metrics_available = true;
      target.reason = "hpa";
    }
    const auto& snaps = snapshots_of(state, v.variant_id);
    int observed = observed_of(state, v.variant_id);
    auto r = base_record(state, v, "hpa");
    bool ok = variant_metrics_available(snaps, observed);
    int desired = observed;
    if (ok) {
      auto fresh = fresh_only(snaps);
      double q = 0.0;
      double kv = 0.0;
      for (const auto& s : fresh) {
        q += s.queue_depth;
        kv += s.kv_usage;
      }
      if (!fresh.empty()) {
        q /= static_cast<double>(fresh.size());
        kv /= static_cast<double>(fresh.size());
      }
      r.avg_q = q;
      r.avg_kv = kv;
      desired = recommend(v.variant_id, state.now, observed, q, kv);
      r.reason = desired > observed   ? "hpa-scale-up"
                 : desired < observed ? "hpa-scale-down"
                                      : "hpa-hold";
    } else {
      r.reason = "hpa-metrics-unavailable";
    }
    r.metrics_available = ok;
    r.capacity_target = desired;
    r.recommended = desired;
    r.granted = desired;
    r.direction = desired > observed   ? Direction::kUp
                  : desired < observed ? Direction::kDown
                                       : Direction::kHold;
    target.per_variant_desired[v.variant_id] = desired;
    target.per_variant_metrics_available[v.variant_id] = ok;
    target.metrics_available = target.metrics_available && ok;
    trace_.push_back(std::move(r));
  }
  std::vector<TargetState> out;
  for (auto& [model, t] : targets) out.push_back(std::move(t));
  return out;
}

ControlPlane::ControlPlane(const ScenarioConfig& cfg, const Simulator& sim,
                           MetricsRegistry& registry, ActuationStrategy& actuator)
    : cfg_(cfg), sim_(sim), registry_(registry), actuator_(actuator) {
  if (cfg_.baseline == Baseline::kWva) {
    budget_ = derive_budget(cfg_);
    policy_ = std::make_unique<SaturationPolicy>(cfg_.variants, budget_);
  } else {
    policy_ = std::make_unique<HpaPolicy>(cfg_.variants, cfg_.hpa_params);
  }
  for (const auto& v : cfg_.variants) {
    VariantAutoscalingRecord record;
    record.spec = {v.model_id, v.variant_id, v.variant_cost,
                   v.scale_target.empty() ? v.variant_id : v.scale_target};
    record.status.conditions[ConditionType::kTargetResolved] = {true, "TargetFound", 0.0};
    record.status.conditions[ConditionType::kMetricsAvailable] = {true, "MetricsFound", 0.0};
    records_.emplace(v.variant_id, std::move(record));
  }
}

SystemState ControlPlane::observe(Seconds now) {
  SystemState state;
  state.now = now;
  auto results = registry_.get(cfg_.metrics.active).refresh(RefreshSpec{now, std::nullopt});
  auto it = results.find(kReplicaSnapshotsQuery);
  for (const auto& v : cfg_.variants) {
    state.snapshots[v.variant_id];
    state.observed[v.variant_id] = sim_.observed_replicas(v.variant_id);
  }
  if (it != results.end()) {
    for (const auto& s : it->second.snapshots) {
      snapshot_log_.push_back(s);
      if (state.snapshots.count(s.variant_id) != 0) {
        state.snapshots[s.variant_id].push_back(s);
      }
    }
  }
  return state;
}

void ControlPlane::decide(Seconds now) {
  SystemState state = observe(now);
  auto targets = policy_->calculate(state);
  for (auto& t : targets) cache_.put(std::move(t));
  cache_.signal(now);
  const auto& trace = policy_->last_trace();
  trace_.insert(trace_.end(), trace.begin(), trace.end());
  if (auto* wva = dynamic_cast<SaturationPolicy*>(policy_.get())) {
    optimizer_trace_.push_back(format_double(now) + " " + wva->last_optimizer_trace());
  }
}

std::vector<ActuationCommand> ControlPlane::reconcile(Seconds now) {
  return reconcile_with(now, true, "wva");
}

std::vector<ActuationCommand> ControlPlane::control_tick(Seconds now) {
  decide(now);
  return reconcile(now);
}

std::vector<ActuationCommand> ControlPlane::hpa_tick(Seconds now) {
  decide(now);
  return reconcile_with(now, false, "hpa");
}

void ControlPlane::set_condition(VariantAutoscalingRecord& record,
                                 ConditionType type, bool status,
                                 const std::string& reason, Seconds now) {
  auto& c = record.status.conditions[type];
  if (c.status != status) c.last_transition = now;
  c.status = status;
  c.reason = reason;
}

std::vector<ActuationCommand> ControlPlane::reconcile_with(
    Seconds now, bool drain_safe, const std::string& source) {
  std::vector<ActuationCommand> out;
  for (const auto& v : cfg_.variants) {
    auto& record = records_.at(v.variant_id);
    ReconcileRecord r;
    r.time = now;
    r.source = source;
    r.variant_id = v.variant_id;
    r.observed = sim_.observed_replicas(v.variant_id);
    record.observed_replicas = r.observed;

    r.target_resolved = !cfg_.faults.target_deleted_at(now, v.variant_id);
    set_condition(record, ConditionType::kTargetResolved, r.target_resolved,
                  r.target_resolved ? "TargetFound" : "TargetNotFound", now);

    auto entry = cache_.get(v.model_id);
    if (!entry || entry->per_variant_desired.count(v.variant_id) == 0) {
      r.metrics_available = false;
      reconcile_trace_.push_back(std::move(r));
      continue;
    }
    int desired = entry->per_variant_desired.at(v.variant_id);
    r.cached_desired = desired;
    r.metrics_available = entry->variant_metrics_available(v.variant_id);
    set_condition(record, ConditionType::kMetricsAvailable, r.metrics_available,
                  r.metrics_available ? "MetricsFound" : "MetricsUnavailable", now);
    if (r.target_resolved) record.status.desired_optimized_alloc = desired;

    bool floor = !r.metrics_available && r.observed == 0 && desired >= 1;
    if (r.target_resolved && (r.metrics_available || floor) &&
        desired != r.observed) {
      ActuationCommand cmd{v.variant_id, desired, drain_safe, now,
                           floor ? "safety-net-floor" : entry->reason};
      actuator_.publish(cmd);
      commands_.push_back(cmd);
      out.push_back(cmd);
      r.command = std::move(cmd);
    }
    reconcile_trace_.push_back(std::move(r));
  }
  return out;
}

std::vector<ActuationCommand> ControlPlane::scale_from_zero_tick(Seconds now) {
  std::uint64_t arrivals = sim_.arrivals_seen();
  bool new_arrivals = arrivals > arrivals_at_last_fast_tick_;
  arrivals_at_last_fast_tick_ = arrivals;
  if (!new_arrivals) return {};

  std::map<ModelId, std::vector<const VariantSpec*>> pools;
  for (const auto& v : cfg_.variants) pools[v.model_id].push_back(&v);

  std::vector<ActuationCommand> out;
  for (auto& [model, members] : pools) {
    int total = 0;
    for (const auto* v : members) total += sim_.observed_replicas(v->variant_id);
    if (total > 0) continue;
    std::sort(members.begin(), members.end(),
              [](const VariantSpec* a, const VariantSpec* b) {
                return std::tie(a->variant_cost, a->variant_id) <
                       std::tie(b->variant_cost, b->variant_id);
              });
    const VariantSpec* pick = nullptr;
    for (const auto* v : members) {
      if (cfg_.faults.target_deleted_at(now, v->variant_id)) continue;
      if (effective_max_replicas(*v, budget_) < 1) continue;
      pick = v;
      break;
    }
    if (pick == nullptr) continue;
    int target_replicas = std::max(1, pick->policy_params.min_replicas);

    TargetState target = cache_.get(model).value_or(TargetState{});
    target.model_id = model;
    for (const auto* v : members) target.per_variant_desired.try_emplace(v->variant_id, 0);
    target.per_variant_desired[pick->variant_id] = target_replicas;
    target.per_variant_metrics_available[pick->variant_id] = true;
    target.computed_at = now;
    target.reason = "scale-from-zero";
    cache_.put(target);
    cache_.signal(now);

    DecisionTraceRecord d;
    d.time = now;
    d.policy = "sfz";
    d.model_id = model;
    d.variant_id = pick->variant_id;
    d.capacity_target = target_replicas;
    d.recommended = target_replicas;
    d.granted = target_replicas;
    d.direction = Direction::kUp;
    d.reason = "scale-from-zero";
    trace_.push_back(d);

    ActuationCommand cmd{pick->variant_id, target_replicas, true, now,
                         "scale-from-zero"};
    actuator_.publish(cmd);
    commands_.push_back(cmd);
    out.push_back(cmd);

    ReconcileRecord r;
    r.time = now;
    r.source = "sfz";
    r.variant_id = pick->variant_id;
    r.cached_desired = target_replicas;
    r.command = cmd;
    reconcile_trace_.push_back(std::move(r));
  }
  return out;
}

void write_decision_trace_csv(std::ostream& out,
                              const std::vector<DecisionTraceRecord>& decisions,
                              const std::vector<ReconcileRecord>& reconciles) {
  std::map<std::tuple<Seconds, std::string, VariantId>, const ReconcileRecord*> index;
  for (const auto& r : reconciles) index[{r.time, r.source, r.variant_id}] = &r;

  out << "time,policy,model_id,variant_id,observed,fresh,stale,snapshot_digest,"
         "occupied_tokens,queued,saturated,nonsaturated,avg_spare_kv,avg_spare_q,"
         "trigger_kv,trigger_q,avg_kv,avg_q,capacity_target,recommended,direction,"
         "spare_capacity,granted,unmet,metrics_available,reason,target_resolved,"
         "gate_metrics_available,cached_desired,command_target,drain_safe\n";
  for (const auto& d : decisions) {
    out << format_double(d.time) << ',' << d.policy << ',' << d.model_id << ','
        << d.variant_id << ',' << d.observed << ',' << d.fresh << ',' << d.stale
        << ',' << d.snapshot_digest << ',' << d.occupied_tokens << ',' << d.queued
        << ',' << d.saturated << ',' << d.nonsaturated << ','
        << format_optional(d.avg_spare_kv) << ',' << format_optional(d.avg_spare_q)
        << ',' << d.trigger_kv << ',' << d.trigger_q << ','
        << format_optional(d.avg_kv) << ',' << format_optional(d.avg_q) << ','
        << d.capacity_target << ',' << d.recommended << ','
        << to_string(d.direction) << ',' << format_double(d.spare_capacity) << ','
        << d.granted << ',' << d.unmet << ',' << d.metrics_available << ','
        << d.reason << ',';
    auto it = index.find({d.time, d.policy, d.variant_id});
    if (it == index.end()) {
      out << ",,,,\n";
      continue;
    }
    const ReconcileRecord& r = *it->second;
    out << r.target_resolved << ',' << r.metrics_available << ','
        << (r.cached_desired ? std::to_string(*r.cached_desired) : "") << ','
        << (r.command ? std::to_string(r.command->target_replicas) : "") << ','
        << (r.command ? (r.command->drain_safe ? "1" : "0") : "") << '\n';
  }
}

}  // namespace wva
