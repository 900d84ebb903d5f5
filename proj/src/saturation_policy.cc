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

#include "wva/saturation_policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace wva {

namespace {

constexpr double kCeilSlack = 1e-9;

int ceil_count(double x) {
  if (x <= 0) return 0;
  return static_cast<int>(std::ceil(x - kCeilSlack));
}

double queue_capacity(const SaturationParams& p) {
  return std::max(static_cast<double>(p.tau_q) - p.gamma_q, 1.0);
}

double kv_capacity(const SaturationParams& p, std::int64_t kv_capacity_tokens) {
  return static_cast<double>(kv_capacity_tokens) * (p.tau_kv - p.gamma_kv);
}

}  // namespace

std::string_view to_string(Direction direction) {
  switch (direction) {
    case Direction::kUp: return "up";
    case Direction::kHold: return "hold";
    case Direction::kDown: return "down";
  }
  return "hold";
}

bool is_saturated(const MetricSnapshot& s, const SaturationParams& params) {
  return s.kv_usage >= params.tau_kv || s.queue_depth >= params.tau_q;
}

SaturationReport compute_saturation(std::span<const MetricSnapshot> snapshots,
                                    const SaturationParams& params) {
  SaturationReport report;
  if (!snapshots.empty()) report.variant_id = snapshots.front().variant_id;
  double kv_sum = 0.0;
  double q_sum = 0.0;
  for (const auto& s : snapshots) {
    if (is_saturated(s, params)) {
      report.saturated.push_back(s.replica_id);
    } else {
      report.nonsaturated.push_back(s.replica_id);
      kv_sum += s.kv_usage;
      q_sum += s.queue_depth;
    }
  }
  if (report.empty()) return report;
  if (report.nonsaturated.empty()) {
    report.trigger_kv = true;
    report.trigger_q = true;
    return report;
  }
  double n = static_cast<double>(report.nonsaturated.size());
  report.avg_spare_kv = params.tau_kv - kv_sum / n;
  report.avg_spare_q = static_cast<double>(params.tau_q) - q_sum / n;
  report.trigger_kv = *report.avg_spare_kv < params.gamma_kv;
  report.trigger_q = *report.avg_spare_q < params.gamma_q;
  return report;
}

LoadSummary summarize_load(std::span<const MetricSnapshot> snapshots,
                           std::int64_t kv_capacity_tokens) {
  LoadSummary load;
  for (const auto& s : snapshots) {
    load.occupied_tokens += std::llround(s.kv_usage *
                                         static_cast<double>(kv_capacity_tokens));
    load.queued += s.queue_depth;
    load.in_flight += s.in_flight;
  }
  return load;
}

int replicas_for_load(const LoadSummary& load, const SaturationParams& params,
                      std::int64_t kv_capacity_tokens) {
  int n_kv = ceil_count(static_cast<double>(load.occupied_tokens) /
                        kv_capacity(params, kv_capacity_tokens));
  int n_q = ceil_count(static_cast<double>(load.queued) / queue_capacity(params));
  return std::max({n_kv, n_q, load.any() ? 1 : 0});
}

ScaleDownCheck check_scale_down(std::span<const MetricSnapshot> snapshots,
                                const SaturationParams& params) {
  ScaleDownCheck check;
  std::vector<const MetricSnapshot*> nonsat;
  for (const auto& s : snapshots) {
    if (!is_saturated(s, params)) nonsat.push_back(&s);
  }
  check.nonsaturated = static_cast<int>(nonsat.size());
  if (nonsat.size() < 2) return check;

  double kv_sum = 0.0;
  double q_sum = 0.0;
  double kv_min = std::numeric_limits<double>::infinity();
  double q_min = std::numeric_limits<double>::infinity();
  for (const auto* s : nonsat) {
    kv_sum += s->kv_usage;
    q_sum += s->queue_depth;
    kv_min = std::min(kv_min, s->kv_usage);
    q_min = std::min(q_min, static_cast<double>(s->queue_depth));
  }
  // Removing the replica with the most spare leaves the least average spare.
  double survivors = static_cast<double>(nonsat.size() - 1);
  check.projected_spare_kv = params.tau_kv - (kv_sum - kv_min) / survivors;
  check.projected_spare_q =
      static_cast<double>(params.tau_q) - (q_sum - q_min) / survivors;
  check.allowed = check.nonsaturated > params.min_nonsaturated_for_scaledown &&
                  *check.projected_spare_kv >= params.gamma_kv &&
                  *check.projected_spare_q >= params.gamma_q;
  return check;
}

double normalized_spare(const SaturationReport& report,
                        const SaturationParams& params) {
  if (report.empty()) return 1.0;
  if (report.degenerate()) return 0.0;
  double kv = *report.avg_spare_kv / params.tau_kv;
  double q = *report.avg_spare_q / static_cast<double>(params.tau_q);
  return std::clamp(std::min(kv, q), 0.0, 1.0);
}

ScaleRecommendation compute_target_replicas(
    const SaturationReport& report, std::span<const MetricSnapshot> snapshots,
    const SaturationParams& params, const VariantSpec& variant,
    int current_replicas) {
  ScaleRecommendation rec;
  rec.variant_id = variant.variant_id;
  rec.current = current_replicas;
  rec.spare_capacity = normalized_spare(report, params);

  LoadSummary load = summarize_load(snapshots, variant.kv_capacity_tokens);
  int raw = replicas_for_load(load, params, variant.kv_capacity_tokens);
  rec.capacity_target = std::clamp(std::max(raw, params.min_replicas),
                                   params.min_replicas, params.max_replicas);

  rec.desired = current_replicas;
  rec.direction = Direction::kHold;
  rec.reason = "hold";
  if (current_replicas < params.min_replicas) {
    rec.desired = std::max(params.min_replicas, rec.capacity_target);
    rec.direction = Direction::kUp;
    rec.reason = "bounds-min";
    return rec;
  }
  if (current_replicas > params.max_replicas) {
    rec.desired = params.max_replicas;
    rec.direction = Direction::kDown;
    rec.reason = "bounds-max";
    return rec;
  }
  if (report.triggered()) {
    if (rec.capacity_target > current_replicas) {
      rec.desired = rec.capacity_target;
      rec.direction = Direction::kUp;
      rec.reason = report.degenerate() ? "headroom-breach-all-saturated"
                   : report.trigger_kv ? "headroom-breach-kv"
                                       : "headroom-breach-queue";
    } else {
      rec.reason = "breach-at-capacity";
    }
    return rec;
  }
  if (rec.capacity_target < current_replicas &&
      current_replicas - 1 >= params.min_replicas) {
    ScaleDownCheck check = check_scale_down(snapshots, params);
    if (check.allowed) {
      rec.desired = current_replicas - 1;
      rec.direction = Direction::kDown;
      rec.reason = "scale-down";
    } else {
      rec.reason = "scale-down-guarded";
    }
  }
  return rec;
}

TargetState safety_net(const TargetState& last_good, bool metrics_available,
                       const TargetState& fresh) {
  if (metrics_available) return fresh;
  TargetState out = last_good;
  for (auto& [id, desired] : out.per_variant_desired) {
    desired = std::max(1, desired);
    out.per_variant_metrics_available[id] = false;
  }
  out.metrics_available = false;
  out.reason = "safety-net";
  out.computed_at = fresh.computed_at;
  return out;
}

namespace {

// Pool-wide aggregates with each replica judged against its own variant's
// thresholds. Spare is kept as excess over gamma so that heterogeneous
// parameter sets average meaningfully; with one parameter set the trigger and
// guard reduce to the per-variant rules.
struct PoolView {
  int reporting = 0;
  int nonsaturated = 0;
  double excess_kv_sum = 0.0;
  double excess_q_sum = 0.0;
  double max_excess_kv = -std::numeric_limits<double>::infinity();
  double max_excess_q = -std::numeric_limits<double>::infinity();
};

PoolView view_pool(std::span<const PoolMember> members) {
  PoolView view;
  for (const auto& m : members) {
    const auto& p = m.variant->policy_params;
    for (const auto& s : m.snapshots) {
      ++view.reporting;
      if (is_saturated(s, p)) continue;
      ++view.nonsaturated;
      double ekv = p.tau_kv - s.kv_usage - p.gamma_kv;
      double eq = static_cast<double>(p.tau_q) - s.queue_depth - p.gamma_q;
      view.excess_kv_sum += ekv;
      view.excess_q_sum += eq;
      view.max_excess_kv = std::max(view.max_excess_kv, ekv);
      view.max_excess_q = std::max(view.max_excess_q, eq);
    }
  }
  return view;
}

}  // namespace

PoolPlan plan_pool(std::span<const PoolMember> members) {
  PoolPlan plan;
  std::vector<std::size_t> order(members.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& va = *members[a].variant;
    const auto& vb = *members[b].variant;
    if (va.variant_cost != vb.variant_cost) return va.variant_cost < vb.variant_cost;
    return va.variant_id < vb.variant_id;
  });

  // With one shared parameter set the pool is judged exactly like a single
  // variant over the union of its snapshots.
  bool uniform = true;
  for (const auto& m : members) {
    uniform = uniform &&
              m.variant->policy_params == members.front().variant->policy_params;
  }
  std::vector<MetricSnapshot> all;
  for (const auto& m : members) {
    all.insert(all.end(), m.snapshots.begin(), m.snapshots.end());
  }
  PoolView view = view_pool(members);
  bool kv_breach = false;
  bool q_breach = false;
  if (uniform && !members.empty()) {
    auto pooled = compute_saturation(all, members.front().variant->policy_params);
    kv_breach = pooled.trigger_kv;
    q_breach = pooled.trigger_q;
  } else if (view.reporting > 0) {
    if (view.nonsaturated == 0) {
      kv_breach = q_breach = true;
    } else {
      kv_breach = view.excess_kv_sum / view.nonsaturated < 0;
      q_breach = view.excess_q_sum / view.nonsaturated < 0;
    }
  }
  plan.triggered = kv_breach || q_breach;

  // Reports, spare and pool load measured in replica-capacity units.
  double kv_load_units = 0.0;
  double q_load_units = 0.0;
  bool any_load = false;
  std::optional<double> min_spare;
  std::vector<double> spare(members.size(), 1.0);
  std::vector<int> target(members.size(), 0);
  int min_nonsat = 0;
  int total_current = 0;
  for (std::size_t i = 0; i < members.size(); ++i) {
    const auto& m = members[i];
    const auto& p = m.variant->policy_params;
    auto report = compute_saturation(m.snapshots, p);
    report.variant_id = m.variant->variant_id;
    if (!report.empty()) {
      spare[i] = normalized_spare(report, p);
      min_spare = std::min(min_spare.value_or(1.0), spare[i]);
    }
    plan.reports.push_back(std::move(report));
    LoadSummary load = summarize_load(m.snapshots, m.variant->kv_capacity_tokens);
    any_load = any_load || load.any();
    kv_load_units += static_cast<double>(load.occupied_tokens);
    q_load_units += static_cast<double>(load.queued);
    min_nonsat = std::max(min_nonsat, p.min_nonsaturated_for_scaledown);
    total_current += m.current;
  }
  for (std::size_t i = 0; i < members.size(); ++i) {
    if (plan.reports[i].empty() && min_spare) spare[i] = *min_spare;
  }

  // Minimums first, then cheapest-first fill up to each effective maximum.
  double kv_left = kv_load_units;
  double q_left = q_load_units;
  for (std::size_t i : order) {
    const auto& m = members[i];
    const auto& p = m.variant->policy_params;
    target[i] = std::min(p.min_replicas, m.effective_max);
    kv_left -= target[i] * kv_capacity(p, m.variant->kv_capacity_tokens);
    q_left -= target[i] * queue_capacity(p);
  }
  for (std::size_t i : order) {
    const auto& m = members[i];
    const auto& p = m.variant->policy_params;
    double kv_cap = kv_capacity(p, m.variant->kv_capacity_tokens);
    double q_cap = queue_capacity(p);
    int need = std::max(ceil_count(kv_left / kv_cap), ceil_count(q_left / q_cap));
    int extra = std::clamp(need, 0, std::max(0, m.effective_max - target[i]));
    target[i] += extra;
    kv_left -= extra * kv_cap;
    q_left -= extra * q_cap;
  }
  int total_target = 0;
  for (int t : target) total_target += t;
  if (any_load && total_target == 0) {
    for (std::size_t i : order) {
      if (members[i].effective_max > 0) {
        target[i] = 1;
        total_target = 1;
        break;
      }
    }
  }

  for (std::size_t i = 0; i < members.size(); ++i) {
    ScaleRecommendation rec;
    rec.variant_id = members[i].variant->variant_id;
    rec.current = members[i].current;
    rec.desired = members[i].current;
    rec.spare_capacity = spare[i];
    rec.capacity_target = target[i];
    rec.reason = "hold";
    plan.recommendations.push_back(std::move(rec));
  }

  bool bounded = false;
  for (std::size_t i = 0; i < members.size(); ++i) {
    const auto& m = members[i];
    auto& rec = plan.recommendations[i];
    int lo = std::min(m.variant->policy_params.min_replicas, m.effective_max);
    if (m.current < lo) {
      rec.desired = std::max(lo, target[i]);
      rec.direction = Direction::kUp;
      rec.reason = "bounds-min";
      bounded = true;
    } else if (m.current > m.effective_max) {
      rec.desired = m.effective_max;
      rec.direction = Direction::kDown;
      rec.reason = "bounds-max";
      bounded = true;
    }
  }
  if (bounded) return plan;

  if (plan.triggered) {
    std::string reason = view.nonsaturated == 0 ? "headroom-breach-all-saturated"
                         : kv_breach            ? "headroom-breach-kv"
                                                : "headroom-breach-queue";
    for (std::size_t i = 0; i < members.size(); ++i) {
      auto& rec = plan.recommendations[i];
      if (target[i] > members[i].current) {
        rec.desired = target[i];
        rec.direction = Direction::kUp;
        rec.reason = reason;
      } else {
        rec.reason = "breach-at-capacity";
      }
    }
    return plan;
  }

  if (total_target >= total_current) return plan;
  bool guard_ok = false;
  if (uniform) {
    guard_ok =
        check_scale_down(all, members.front().variant->policy_params).allowed;
  } else if (view.nonsaturated >= 2 && view.nonsaturated > min_nonsat) {
    double survivors = view.nonsaturated - 1;
    guard_ok = (view.excess_kv_sum - view.max_excess_kv) / survivors >= 0 &&
               (view.excess_q_sum - view.max_excess_q) / survivors >= 0;
  }
  // One replica per pool per tick, from the most expensive surplus variant.
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const auto& m = members[*it];
    auto& rec = plan.recommendations[*it];
    if (m.current > target[*it] &&
        m.current - 1 >= m.variant->policy_params.min_replicas) {
      if (guard_ok) {
        rec.desired = m.current - 1;
        rec.direction = Direction::kDown;
        rec.reason = "scale-down";
      } else {
        rec.reason = "scale-down-guarded";
      }
      break;
    }
  }
  return plan;
}

}  // namespace wva
