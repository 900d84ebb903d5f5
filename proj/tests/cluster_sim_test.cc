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
#include <random>
#include <unordered_map>
#include <variant>

#include "test_support.hpp"
#include "wva/cluster_sim.hpp"
#include "wva/workload.hpp"

namespace wva {
namespace {

using testing::make_variant;
using testing::request;

SimOptions checked_options() {
  SimOptions o;
  o.check_invariants = true;
  return o;
}

std::int64_t peak_occupied(const Simulator& sim, Seconds until, Seconds step) {
  std::int64_t peak = 0;
  auto& s = const_cast<Simulator&>(sim);
  for (Seconds t = s.now(); t <= until; t += step) {
    s.advance(t);
    for (const auto& [id, r] : s.replicas()) peak = std::max(peak, r.occupied_tokens);
  }
  return peak;
}

TEST(ScheduleRequest, PrefersLowerKvUsage) {
  std::vector<VariantSpec> variants{make_variant("a")};
  ReplicaState r0, r1;
  r0.replica_id = ReplicaId{0};
  r0.occupied_tokens = static_cast<std::int64_t>(0.9 * 16384);
  r1.replica_id = ReplicaId{1};
  r1.occupied_tokens = static_cast<std::int64_t>(0.1 * 16384);
  std::vector<const ReplicaState*> ready{&r0, &r1};
  auto result = schedule_request(request(0, 0, 100, 10), ready, variants,
                                 SchedulerWeights{1, 1, 0}, 10, {});
  ASSERT_TRUE(std::holds_alternative<ReplicaId>(result));
  EXPECT_EQ(std::get<ReplicaId>(result), ReplicaId{1});
}

TEST(ScheduleRequest, EmptyReadySetRejects) {
  std::vector<VariantSpec> variants{make_variant("a")};
  auto result = schedule_request(request(0, 0, 100, 10), {}, variants,
                                 SchedulerWeights{}, 10, {});
  ASSERT_TRUE(std::holds_alternative<Rejection>(result));
  EXPECT_EQ(std::get<Rejection>(result).cause, DropCause::kNoReadyReplica);
}

TEST(ScheduleRequest, FullQueuesReject) {
  std::vector<VariantSpec> variants{make_variant("a")};
  std::vector<ReplicaState> rs(3);
  std::vector<const ReplicaState*> ready;
  for (std::uint32_t i = 0; i < 3; ++i) {
    rs[i].replica_id = ReplicaId{i};
    rs[i].queue.assign(10, 0);
    ready.push_back(&rs[i]);
  }
  auto result = schedule_request(request(0, 0, 100, 10), ready, variants,
                                 SchedulerWeights{}, 10, {});
  ASSERT_TRUE(std::holds_alternative<Rejection>(result));
  EXPECT_EQ(std::get<Rejection>(result).cause, DropCause::kQueueFull);
}

TEST(ScheduleRequest, NoFreeKvRejects) {
  std::vector<VariantSpec> variants{make_variant("a")};
  ReplicaState r;
  r.occupied_tokens = 16000;
  std::vector<const ReplicaState*> ready{&r};
  auto result = schedule_request(request(0, 0, 1000, 10), ready, variants,
                                 SchedulerWeights{}, 10, {});
  ASSERT_TRUE(std::holds_alternative<Rejection>(result));
  EXPECT_EQ(std::get<Rejection>(result).cause, DropCause::kKvFull);
}

TEST(ScheduleRequest, PrefixAffinityEarnsWeight) {
  std::vector<VariantSpec> variants{make_variant("a")};
  ReplicaState r0, r1;
  r0.replica_id = ReplicaId{0};
  r1.replica_id = ReplicaId{1};
  r1.occupied_tokens = 1000;
  std::vector<const ReplicaState*> ready{&r0, &r1};
  RequestSpec req = request(0, 0, 100, 10);
  req.prefix_key = "p";
  std::unordered_map<std::string, ReplicaId> last{{"p", ReplicaId{1}}};
  auto result = schedule_request(req, ready, variants, SchedulerWeights{1, 1, 3}, 10, last);
  EXPECT_EQ(std::get<ReplicaId>(result), ReplicaId{1});
}

TEST(ScheduleRequest, MonotoneInKvUsageWithEqualQueues) {
  std::vector<VariantSpec> variants{make_variant("a")};
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::int64_t> occ(0, 16000);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<ReplicaState> rs(4);
    std::vector<const ReplicaState*> ready;
    for (std::uint32_t i = 0; i < rs.size(); ++i) {
      rs[i].replica_id = ReplicaId{i};
      rs[i].occupied_tokens = occ(rng);
      rs[i].queue.assign(trial % 5, 0);
      ready.push_back(&rs[i]);
    }
    auto result = schedule_request(request(0, 0, 1, 1), ready, variants,
                                   SchedulerWeights{1, 1, 0}, 10, {});
    ASSERT_TRUE(std::holds_alternative<ReplicaId>(result));
    std::int64_t min_occ = 16384;
    for (const auto& r : rs) min_occ = std::min(min_occ, r.occupied_tokens);
    EXPECT_EQ(rs[std::get<ReplicaId>(result).value].occupied_tokens, min_occ);
  }
}

TEST(Simulator, SingleRequestTimingArithmetic) {
  Simulator sim({make_variant("a")}, checked_options());
  sim.bootstrap_ready("a", 1);
  sim.submit({request(0, 0, 4096, 1024)});
  EXPECT_EQ(peak_occupied(sim, 1.0, 0.25), 5120);
  sim.advance(10);
  const auto& rec = sim.requests()[0];
  ASSERT_TRUE(rec.ttft().has_value());
  EXPECT_DOUBLE_EQ(*rec.ttft(), 0.5);
  EXPECT_DOUBLE_EQ(*rec.completion_time, 1.5);
  EXPECT_DOUBLE_EQ(*rec.itl(), 1.0 / 1023.0);
  EXPECT_EQ(sim.replicas().begin()->second.occupied_tokens, 0);
}

TEST(Simulator, ThreeMeanRequestsPeakAtExactRatio) {
  VariantSpec v = make_variant("a");
  Simulator sim({v}, checked_options());
  sim.bootstrap_ready("a", 1);
  sim.submit({request(0, 0, 4096, 1024), request(1, 0, 4096, 1024),
              request(2, 0, 4096, 1024)});
  sim.advance(0.1);
  auto snaps = sim.snapshot_metrics();
  ASSERT_EQ(snaps.size(), 1u);
  EXPECT_EQ(sim.replicas().begin()->second.occupied_tokens, 15360);
  EXPECT_EQ(snaps[0].kv_usage, 15360.0 / 16384.0);
  EXPECT_EQ(snaps[0].kv_usage, 0.9375);
}

TEST(Simulator, FourthRequestNeverOverfillsCache) {
  Simulator sim({make_variant("a")}, checked_options());
  sim.bootstrap_ready("a", 1);
  std::vector<RequestSpec> reqs;
  for (std::uint64_t i = 0; i < 4; ++i) reqs.push_back(request(i, 0.01 * i, 4096, 1024));
  sim.submit(reqs);
  for (Seconds t = 0; t < 5; t += 0.005) {
    sim.advance(t);
    for (const auto& [id, r] : sim.replicas()) ASSERT_LE(r.occupied_tokens, 16384);
  }
  EXPECT_EQ(sim.counters().completed + sim.counters().dropped, 4u);
  EXPECT_TRUE(sim.requests()[3].status == RequestStatus::kDropped ||
              sim.requests()[3].status == RequestStatus::kCompleted);
}

TEST(Simulator, QueuedRequestWaitsForKv) {
  Simulator sim({make_variant("a")}, checked_options());
  sim.bootstrap_ready("a", 1);
  // 12000 occupied leaves 4384 free: the second request fits its prompt but
  // not its whole footprint, so it queues until the first completes.
  sim.submit({request(0, 0, 8000, 4000), request(1, 0.1, 4000, 1000)});
  sim.advance(0.2);
  const auto& r = sim.replicas().begin()->second;
  EXPECT_EQ(r.queue.size(), 1u);
  EXPECT_EQ(r.in_flight.size(), 1u);
  sim.advance(100);
  EXPECT_EQ(sim.counters().completed, 2u);
  EXPECT_GT(*sim.requests()[1].ttft(), 4.0);
}

TEST(Simulator, ProvisioningDelayDefinesReadyTime) {
  SimOptions o = checked_options();
  o.provisioning_delay = 30;
  Simulator sim({make_variant("a")}, o);
  auto transitions = sim.apply_replica_target("a", 1, true);
  ASSERT_EQ(transitions.size(), 1u);
  EXPECT_EQ(transitions[0].kind, TransitionKind::kCreated);
  EXPECT_EQ(sim.observed_replicas("a"), 1);
  EXPECT_EQ(sim.ready_replicas("a"), 0);
  EXPECT_TRUE(sim.snapshot_metrics().empty());
  sim.advance(29.999);
  EXPECT_EQ(sim.ready_replicas("a"), 0);
  sim.advance(30);
  EXPECT_EQ(sim.ready_replicas("a"), 1);
  EXPECT_DOUBLE_EQ(sim.replicas().begin()->second.ready_at, 30);
}

TEST(Simulator, DrainSafeScaleDownLosesNothing) {
  Simulator sim({make_variant("a")}, checked_options());
  sim.bootstrap_ready("a", 2);
  sim.submit({request(0, 0, 1000, 1000), request(1, 0.001, 1000, 1000),
              request(2, 0.002, 1000, 1000)});
  sim.advance(0.1);
  auto transitions = sim.apply_replica_target("a", 1, true);
  ASSERT_EQ(transitions.size(), 1u);
  EXPECT_EQ(transitions[0].kind, TransitionKind::kDraining);
  sim.advance(100);
  EXPECT_EQ(sim.counters().drops(DropCause::kTerminated), 0u);
  EXPECT_EQ(sim.counters().completed, 3u);
  EXPECT_EQ(sim.observed_replicas("a"), 1);
}

TEST(Simulator, DrainVictimIsEmptiestReplica) {
  Simulator sim({make_variant("a")}, checked_options());
  sim.bootstrap_ready("a", 3);
  // Replicas 0 and 1 get one request each; replica 2 stays idle.
  sim.submit({request(0, 0, 1000, 1000), request(1, 0, 1000, 1000)});
  sim.advance(0.01);
  auto transitions = sim.apply_replica_target("a", 2, true);
  ASSERT_FALSE(transitions.empty());
  const auto& victim = sim.replicas().at(transitions[0].replica_id);
  EXPECT_EQ(victim.replica_id, ReplicaId{2});
  EXPECT_EQ(victim.phase, ReplicaPhase::kTerminated);
  for (const auto& [id, r] : sim.replicas()) {
    if (id != victim.replica_id) {
      EXPECT_EQ(r.phase, ReplicaPhase::kReady);
    }
  }
}

TEST(Simulator, UnsafeScaleDownKillsInFlight) {
  Simulator sim({make_variant("a")}, checked_options());
  sim.bootstrap_ready("a", 1);
  sim.submit({request(0, 0, 1000, 2000), request(1, 0, 1000, 2000)});
  sim.advance(0.5);
  ASSERT_EQ(sim.replicas().begin()->second.in_flight.size(), 2u);
  sim.apply_replica_target("a", 0, false);
  EXPECT_EQ(sim.counters().drops(DropCause::kTerminated), 2u);
  sim.advance(10);
  EXPECT_EQ(sim.counters().completed, 0u);
}

TEST(Simulator, FiniteDrainGraceForcesTermination) {
  SimOptions o = checked_options();
  o.drain_grace = 0.5;
  Simulator sim({make_variant("a")}, o);
  sim.bootstrap_ready("a", 1);
  sim.submit({request(0, 0, 1000, 4000)});
  sim.advance(0.1);
  sim.apply_replica_target("a", 0, true);
  EXPECT_EQ(sim.replicas().begin()->second.phase, ReplicaPhase::kDraining);
  sim.advance(1.0);
  EXPECT_EQ(sim.counters().drops(DropCause::kTerminated), 1u);
}

TEST(Simulator, DrainingReplicaStillReports) {
  Simulator sim({make_variant("a")}, checked_options());
  sim.bootstrap_ready("a", 1);
  sim.submit({request(0, 0, 8192, 1024)});
  sim.advance(0.01);
  sim.apply_replica_target("a", 0, true);
  auto snaps = sim.snapshot_metrics();
  ASSERT_EQ(snaps.size(), 1u);
  EXPECT_EQ(snaps[0].kv_usage, (8192.0 + 1024.0) / 16384.0);
}

TEST(Simulator, TargetAboveMaxIsInvalid) {
  Simulator sim({make_variant("a")}, checked_options());
  try {
    sim.apply_replica_target("a", 11, true);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidTarget);
  }
}

TEST(Simulator, NoReadyReplicaDrops) {
  Simulator sim({make_variant("a")}, checked_options());
  sim.submit({request(0, 1, 100, 100)});
  sim.advance(2);
  EXPECT_EQ(sim.counters().drops(DropCause::kNoReadyReplica), 1u);
}

TEST(Simulator, OversizeRequestIsDroppedAsKvFull) {
  Simulator sim({make_variant("a")}, checked_options());
  sim.bootstrap_ready("a", 1);
  sim.submit({request(0, 0, 8192, 9000)});
  sim.advance(1);
  EXPECT_EQ(sim.counters().drops(DropCause::kKvFull), 1u);
}

// Random load with random scale actions; invariants are checked after every
// event and flow conservation after every advance.
TEST(Simulator, RandomizedInvariantsAndConservation) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    SimOptions o = checked_options();
    o.provisioning_delay = 5;
    o.drain_grace = seed % 2 ? kForever : 3.0;
    o.hard_queue_cap = 4;
    VariantSpec a = make_variant("a");
    VariantSpec b = make_variant("b", 2.0, "H100");
    b.kv_capacity_tokens = 32768;
    b.max_concurrent_sequences = 3;
    Simulator sim({a, b}, o);
    sim.bootstrap_ready("a", 1);
    TrafficProgram p;
    p.arrival_process = ArrivalProcess::kPoisson;
    p.phases = {{0, 4}};
    p.input_dist = {10, 4096, 2048, 1024};
    p.output_dist = {10, 1024, 512, 256};
    sim.submit(generate_arrivals(p, 120, seed));
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> target(0, 4);
    std::bernoulli_distribution safe(0.5);
    bool all_safe_infinite = std::isinf(o.drain_grace);
    for (Seconds t = 0; t <= 200; t += 2.5) {
      sim.advance(t);
      const auto& c = sim.counters();
      ASSERT_EQ(c.arrived, c.completed + c.dropped + sim.in_flight_total() +
                               sim.queued_total());
      if (t < 120) {
        bool s = safe(rng);
        all_safe_infinite = all_safe_infinite && s;
        sim.apply_replica_target(t < 60 ? "a" : "b", target(rng), s);
      }
    }
    if (all_safe_infinite) {
      EXPECT_EQ(sim.counters().drops(DropCause::kTerminated), 0u);
    }
  }
}

TEST(Simulator, DrainSafeWithInfiniteGraceNeverTerminatesRequests) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    SimOptions o = checked_options();
    o.provisioning_delay = 5;
    Simulator sim({make_variant("a")}, o);
    sim.bootstrap_ready("a", 3);
    TrafficProgram p;
    p.phases = {{0, 3}};
    sim.submit(generate_arrivals(p, 100, seed));
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> target(0, 5);
    for (Seconds t = 0; t <= 150; t += 5) {
      sim.advance(t);
      if (t < 100) sim.apply_replica_target("a", target(rng), true);
    }
    EXPECT_EQ(sim.counters().drops(DropCause::kTerminated), 0u);
  }
}

TEST(Simulator, EventLogHashIsDeterministic) {
  auto run = [] {
    Simulator sim({make_variant("a")}, SimOptions{});
    sim.bootstrap_ready("a", 2);
    TrafficProgram p;
    p.arrival_process = ArrivalProcess::kPoisson;
    p.phases = {{0, 3}};
    sim.submit(generate_arrivals(p, 60, 9));
    sim.advance(30);
    sim.apply_replica_target("a", 1, true);
    sim.advance(90);
    return sim.event_log_hash();
  };
  EXPECT_EQ(run(), run());
  EXPECT_EQ(run().size(), 64u);
}

}  // namespace
}  // namespace wva
