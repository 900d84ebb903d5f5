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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "test_support.hpp"
#include "wva/saturation_policy.hpp"

namespace wva {
namespace {

using testing::make_variant;
using testing::snap;

SaturationParams default_params() {
  SaturationParams p;
  p.tau_kv = 0.8;
  p.tau_q = 5;
  p.gamma_kv = 0.3;
  p.gamma_q = 2.0;
  p.min_replicas = 0;
  p.max_replicas = 10;
  return p;
}

ScaleRecommendation recommend(const std::vector<MetricSnapshot>& snaps,
                              const SaturationParams& p, int current) {
  VariantSpec v = make_variant("a");
  v.policy_params = p;
  return compute_target_replicas(compute_saturation(snaps, p), snaps, p, v, current);
}

// Average spare over `rows` for one metric, computed from scratch.
double avg_spare(const std::vector<MetricSnapshot>& rows, double tau, bool kv) {
  double sum = 0;
  for (const auto& s : rows) sum += tau - (kv ? s.kv_usage : s.queue_depth);
  return sum / static_cast<double>(rows.size());
}

TEST(ComputeSaturation, MembershipByDirectComparison) {
  auto r = compute_saturation(std::vector{snap(1, 0.85, 0), snap(2, 0.4, 0)}, default_params());
  ASSERT_EQ(r.saturated.size(), 1u);
  EXPECT_EQ(r.saturated[0], ReplicaId{1});
  ASSERT_EQ(r.nonsaturated.size(), 1u);
  EXPECT_EQ(r.nonsaturated[0], ReplicaId{2});
}

TEST(ComputeSaturation, ThresholdIsInclusive) {
  EXPECT_TRUE(is_saturated(snap(1, 0.1, 5), default_params()));
  EXPECT_TRUE(is_saturated(snap(1, 0.8, 0), default_params()));
  EXPECT_FALSE(is_saturated(snap(1, 0.79, 4), default_params()));
}

TEST(ComputeSaturation, LowAverageSpareFiresKvTrigger) {
  auto r = compute_saturation(std::vector{snap(1, 0.55, 0), snap(2, 0.55, 0)}, default_params());
  ASSERT_TRUE(r.avg_spare_kv.has_value());
  EXPECT_NEAR(*r.avg_spare_kv, 0.25, 1e-12);
  EXPECT_TRUE(r.trigger_kv);
  EXPECT_FALSE(r.trigger_q);
}

TEST(ComputeSaturation, AllSaturatedIsDegenerateAndTriggers) {
  auto r = compute_saturation(std::vector{snap(1, 0.9, 0), snap(2, 0.1, 6)}, default_params());
  EXPECT_TRUE(r.degenerate());
  EXPECT_FALSE(r.avg_spare_kv.has_value());
  EXPECT_TRUE(r.triggered());
  EXPECT_EQ(normalized_spare(r, default_params()), 0.0);
}

TEST(ComputeSaturation, PartitionsEveryReplica) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> kv(0, 1);
  std::uniform_int_distribution<int> q(0, 8);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<MetricSnapshot> snaps;
    for (std::uint32_t i = 0; i < 6; ++i) snaps.push_back(snap(i, kv(rng), q(rng)));
    auto r = compute_saturation(snaps, default_params());
    std::vector<ReplicaId> all = r.saturated;
    all.insert(all.end(), r.nonsaturated.begin(), r.nonsaturated.end());
    std::sort(all.begin(), all.end());
    ASSERT_EQ(all.size(), 6u);
    ASSERT_TRUE(std::adjacent_find(all.begin(), all.end()) == all.end());
    ASSERT_EQ(r.avg_spare_kv.has_value(), !r.nonsaturated.empty());
  }
}

TEST(ComputeSaturation, MembershipIsMonotoneInUtilization) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> kv(0, 1);
  std::uniform_int_distribution<int> q(0, 8);
  std::uniform_real_distribution<double> bump(0, 0.3);
  for (int trial = 0; trial < 10000; ++trial) {
    MetricSnapshot s = snap(0, kv(rng), q(rng));
    MetricSnapshot raised = s;
    raised.kv_usage = std::min(1.0, s.kv_usage + bump(rng));
    raised.queue_depth += trial % 3;
    if (is_saturated(s, default_params())) {
      ASSERT_TRUE(is_saturated(raised, default_params()));
    }
  }
}

TEST(ComputeTargetReplicas, ClosedFormFromMeanRequestLoad) {
  LoadSummary load;
  load.occupied_tokens = 15360;
  EXPECT_EQ(replicas_for_load(load, default_params(), 16384), 2);
  auto rec = recommend({snap(1, 15360.0 / 16384.0, 0)}, default_params(), 1);
  EXPECT_EQ(rec.capacity_target, 2);
  EXPECT_EQ(rec.direction, Direction::kUp);
  EXPECT_EQ(rec.desired, 2);
}

TEST(ComputeTargetReplicas, QueueClosedForm) {
  LoadSummary load;
  load.queued = 7;
  EXPECT_EQ(replicas_for_load(load, default_params(), 16384), 3);
}

TEST(ComputeTargetReplicas, IdleSingleReplicaHolds) {
  auto rec = recommend({snap(1, 0.0, 0)}, default_params(), 1);
  EXPECT_EQ(rec.capacity_target, 0);
  EXPECT_EQ(rec.direction, Direction::kHold);
  EXPECT_EQ(rec.desired, 1);
}

TEST(ComputeTargetReplicas, GuardedScaleDownWithThreeSpareReplicas) {
  // One replica saturated by queue, three idle-ish with kv spare 0.45.
  std::vector<MetricSnapshot> snaps{snap(1, 0.0, 5), snap(2, 0.35, 0),
                                    snap(3, 0.35, 0), snap(4, 0.35, 0)};
  auto rec = recommend(snaps, default_params(), 4);
  EXPECT_EQ(rec.direction, Direction::kDown);
  EXPECT_EQ(rec.desired, 3);
  auto check = check_scale_down(snaps, default_params());
  EXPECT_TRUE(check.allowed);
  EXPECT_EQ(check.nonsaturated, 3);
  EXPECT_NEAR(*check.projected_spare_kv, 0.45, 1e-12);
}

TEST(ComputeTargetReplicas, TwoNonsaturatedBlocksScaleDown) {
  std::vector<MetricSnapshot> snaps{snap(1, 0.0, 5), snap(2, 0.1, 0), snap(3, 0.1, 0)};
  auto rec = recommend(snaps, default_params(), 3);
  EXPECT_EQ(rec.direction, Direction::kHold);
  EXPECT_EQ(rec.reason, "scale-down-guarded");
}

TEST(ComputeTargetReplicas, BoundsAreEnforced) {
  SaturationParams p = default_params();
  p.min_replicas = 2;
  auto up = recommend({snap(1, 0.0, 0)}, p, 1);
  EXPECT_EQ(up.direction, Direction::kUp);
  EXPECT_EQ(up.desired, 2);
  p.min_replicas = 0;
  p.max_replicas = 3;
  auto down = recommend({snap(1, 0.0, 0)}, p, 5);
  EXPECT_EQ(down.direction, Direction::kDown);
  EXPECT_EQ(down.desired, 3);
}

// Every emitted scale-down is re-checked by brute force: each single-replica
// removal among the non-saturated set must keep the survivors' average spare
// at or above gamma for both metrics.
TEST(ScaleDownGuard, RandomizedBruteForceRecheck) {
  std::mt19937_64 rng(20260101);
  std::uniform_int_distribution<int> count(1, 8);
  std::uniform_real_distribution<double> kv(0, 1);
  std::uniform_real_distribution<double> low_kv(0, 0.4);
  std::uniform_int_distribution<int> q(0, 7);
  std::uniform_int_distribution<int> low_q(0, 2);
  std::uniform_int_distribution<int> extra(0, 3);
  const SaturationParams p = default_params();
  int downs = 0;
  const int cases = 20000;
  for (int trial = 0; trial < cases; ++trial) {
    int n = count(rng);
    std::vector<MetricSnapshot> snaps;
    bool lightly_loaded = trial % 2 == 0;
    for (int i = 0; i < n; ++i) {
      snaps.push_back(snap(static_cast<std::uint32_t>(i),
                           lightly_loaded ? low_kv(rng) : kv(rng),
                           lightly_loaded ? low_q(rng) : q(rng)));
    }
    int current = n + extra(rng);
    auto rec = recommend(snaps, p, current);
    if (rec.direction != Direction::kDown || rec.reason != "scale-down") continue;
    ++downs;
    std::vector<MetricSnapshot> nonsat;
    for (const auto& s : snaps) {
      if (!(s.kv_usage >= p.tau_kv || s.queue_depth >= p.tau_q)) nonsat.push_back(s);
    }
    ASSERT_GT(static_cast<int>(nonsat.size()), p.min_nonsaturated_for_scaledown);
    for (std::size_t drop = 0; drop < nonsat.size(); ++drop) {
      std::vector<MetricSnapshot> survivors;
      for (std::size_t j = 0; j < nonsat.size(); ++j) {
        if (j != drop) survivors.push_back(nonsat[j]);
      }
      ASSERT_GE(avg_spare(survivors, p.tau_kv, true), p.gamma_kv - 1e-12);
      ASSERT_GE(avg_spare(survivors, p.tau_q, false), p.gamma_q - 1e-12);
    }
    ASSERT_EQ(rec.desired, current - 1);
  }
  EXPECT_GT(downs, 1000);
}

TEST(ComputeTargetReplicas, NeverScalesUpWithoutBreach) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> kv(0, 0.79);
  std::uniform_int_distribution<int> q(0, 4);
  const SaturationParams p = default_params();
  for (int trial = 0; trial < 10000; ++trial) {
    std::vector<MetricSnapshot> snaps;
    for (std::uint32_t i = 0; i < static_cast<std::uint32_t>(1 + trial % 6); ++i) snaps.push_back(snap(i, kv(rng), q(rng)));
    auto report = compute_saturation(snaps, p);
    if (report.triggered()) continue;
    auto rec = recommend(snaps, p, static_cast<int>(snaps.size()));
    ASSERT_NE(rec.direction, Direction::kUp);
  }
}

TEST(ComputeTargetReplicas, MonotoneInLoad) {
  const SaturationParams p = default_params();
  VariantSpec v = make_variant("a");
  v.policy_params = p;
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> kv(0, 0.75);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<MetricSnapshot> snaps;
    for (std::uint32_t i = 0; i < 3; ++i) snaps.push_back(snap(i, kv(rng), 0));
    // Held report: only the load changes between the two evaluations.
    auto report = compute_saturation(std::vector{snap(0, 0.9, 0)}, p);
    int previous = 0;
    int previous_target = 0;
    for (int step = 0; step < 10; ++step) {
      auto rec = compute_target_replicas(report, snaps, p, v, 3);
      ASSERT_GE(rec.desired, previous);
      ASSERT_GE(rec.capacity_target, previous_target);
      previous = rec.desired;
      previous_target = rec.capacity_target;
      for (auto& s : snaps) {
        s.kv_usage = std::min(1.0, s.kv_usage + 0.05);
        s.queue_depth += 1;
      }
    }
  }
}

TEST(SafetyNet, HoldsLastGood) {
  TargetState last;
  last.per_variant_desired = {{"a100", 3}};
  TargetState fresh;
  fresh.per_variant_desired = {{"a100", 7}};
  auto out = safety_net(last, false, fresh);
  EXPECT_EQ(out.per_variant_desired.at("a100"), 3);
  EXPECT_EQ(out.reason, "safety-net");
  EXPECT_FALSE(out.metrics_available);
}

TEST(SafetyNet, FloorsAtOneReplica) {
  TargetState last;
  last.per_variant_desired = {{"a100", 0}};
  EXPECT_EQ(safety_net(last, false, TargetState{}).per_variant_desired.at("a100"), 1);
}

TEST(SafetyNet, PassesFreshThroughWhenAvailable) {
  TargetState last;
  last.per_variant_desired = {{"a100", 3}};
  TargetState fresh;
  fresh.per_variant_desired = {{"a100", 5}};
  fresh.reason = "x";
  EXPECT_EQ(safety_net(last, true, fresh), fresh);
}

TEST(PlanPool, SingleMemberMatchesPerVariantRule) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> kv(0, 1);
  std::uniform_int_distribution<int> q(0, 7);
  VariantSpec v = make_variant("a");
  v.policy_params = default_params();
  for (int trial = 0; trial < 5000; ++trial) {
    std::vector<MetricSnapshot> snaps;
    int n = 1 + trial % 6;
    for (int i = 0; i < n; ++i) {
      snaps.push_back(snap(static_cast<std::uint32_t>(i), kv(rng) * (trial % 2 ? 1 : 0.5), q(rng) % (trial % 3 + 1)));
    }
    PoolMember m{&v, snaps, n, v.policy_params.max_replicas};
    auto plan = plan_pool(std::span<const PoolMember>(&m, 1));
    auto rec = recommend(snaps, v.policy_params, n);
    ASSERT_EQ(plan.recommendations.size(), 1u);
    ASSERT_EQ(plan.recommendations[0].desired, rec.desired) << trial;
    ASSERT_EQ(plan.recommendations[0].direction, rec.direction) << trial;
    ASSERT_NEAR(plan.recommendations[0].spare_capacity, rec.spare_capacity, 1e-12);
  }
}

TEST(PlanPool, FillsCheapestVariantFirst) {
  VariantSpec a = make_variant("a100", 1.0, "A100");
  VariantSpec h = make_variant("h100", 2.5, "H100");
  a.policy_params = h.policy_params = default_params();
  a.policy_params.max_replicas = h.policy_params.max_replicas = 3;
  std::vector<MetricSnapshot> as{snap(0, 0.95, 0, "a100"), snap(1, 0.95, 0, "a100")};
  std::vector<PoolMember> members{{&h, {}, 0, 3}, {&a, as, 2, 3}};
  auto plan = plan_pool(members);
  EXPECT_TRUE(plan.triggered);
  // 1.9 caches of load at 0.5 per replica needs 4: three A100 then one H100.
  EXPECT_EQ(plan.recommendations[1].desired, 3);
  EXPECT_EQ(plan.recommendations[0].desired, 1);

  std::vector<PoolMember> ample{{&h, {}, 0, 10}, {&a, as, 2, 10}};
  a.policy_params.max_replicas = h.policy_params.max_replicas = 10;
  auto plan2 = plan_pool(ample);
  EXPECT_EQ(plan2.recommendations[1].desired, 4);
  EXPECT_EQ(plan2.recommendations[0].desired, 0);
}

TEST(PlanPool, ScaleDownRemovesOneReplicaFromCostliestSurplus) {
  VariantSpec a = make_variant("a100", 1.0, "A100");
  VariantSpec h = make_variant("h100", 2.5, "H100");
  a.policy_params = h.policy_params = default_params();
  std::vector<MetricSnapshot> as{snap(0, 0.1, 0, "a100"), snap(1, 0.1, 0, "a100")};
  std::vector<MetricSnapshot> hs{snap(2, 0.1, 0, "h100"), snap(3, 0.1, 0, "h100")};
  std::vector<PoolMember> members{{&a, as, 2, 10}, {&h, hs, 2, 10}};
  auto plan = plan_pool(members);
  EXPECT_EQ(plan.recommendations[0].direction, Direction::kHold);
  EXPECT_EQ(plan.recommendations[1].direction, Direction::kDown);
  EXPECT_EQ(plan.recommendations[1].desired, 1);
}

}  // namespace
}  // namespace wva
