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
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "wva/domain.hpp"
#include "wva/scenario.hpp"

namespace wva {

enum class ReplicaPhase { kProvisioning, kReady, kDraining, kTerminated };
enum class RequestStage { kPrefill, kDecode };
enum class DropCause { kNoReadyReplica, kQueueFull, kKvFull, kTerminated };

std::string_view to_string(ReplicaPhase phase);
std::string_view to_string(DropCause cause);

inline constexpr std::size_t kDropCauseCount = 4;

struct ActiveRequest {
  std::size_t request_index = 0;
  RequestStage stage = RequestStage::kPrefill;
  // KV reserved for the whole request (prompt plus every output token) at
  // admission, released atomically at completion.
  std::int64_t tokens_reserved = 0;
  Seconds started_at = 0.0;
  std::optional<Seconds> first_token_at;
};

struct ReplicaState {
  ReplicaId replica_id;
  std::size_t variant_index = 0;
  VariantId variant_id;
  ReplicaPhase phase = ReplicaPhase::kProvisioning;
  Seconds created_at = 0.0;
  Seconds ready_at = 0.0;
  std::optional<Seconds> terminated_at;
  std::int64_t occupied_tokens = 0;
  std::deque<std::size_t> queue;
  std::vector<ActiveRequest> in_flight;

  bool serving() const {
    return phase == ReplicaPhase::kReady || phase == ReplicaPhase::kDraining;
  }
};

enum class RequestStatus { kPending, kQueued, kActive, kCompleted, kDropped };

/// Lifecycle of one request through the simulated gateway and engine.
struct RequestRecord {
  RequestSpec spec;
  RequestStatus status = RequestStatus::kPending;
  std::optional<ReplicaId> replica;
  std::optional<Seconds> admitted_at;
  std::optional<Seconds> first_token_at;
  std::optional<Seconds> completion_time;
  std::optional<DropCause> drop_cause;
  std::optional<Seconds> dropped_at;

  std::optional<Seconds> ttft() const;
  /// (completion - first token) / (output_tokens - 1); absent for a single
  /// output token.
  std::optional<Seconds> itl() const;
};

struct FlowCounters {
  std::uint64_t arrived = 0;
  std::uint64_t completed = 0;
  std::uint64_t dropped = 0;
  std::array<std::uint64_t, kDropCauseCount> drop_causes{};

  std::uint64_t drops(DropCause cause) const {
    return drop_causes[static_cast<std::size_t>(cause)];
  }
};

/// Counts of what one advance() call processed.
struct AdvanceDelta {
  FlowCounters flow;
  std::uint64_t events = 0;
};

struct Rejection {
  DropCause cause;
};

using ScheduleResult = std::variant<ReplicaId, Rejection>;

/// The endpoint picker. Scores ready replicas and routes `req` to the best
/// one, or rejects it. Ties go to the lowest replica id.
///
/// `last_prefix_replica` maps a prefix key to the replica that served the most
/// recent request carrying it; a replica matching the request's key earns the
/// prefix-cache weight.
ScheduleResult schedule_request(
    const RequestSpec& req, std::span<const ReplicaState* const> ready_replicas,
    std::span<const VariantSpec> variants, const SchedulerWeights& weights,
    int hard_queue_cap,
    const std::unordered_map<std::string, ReplicaId>& last_prefix_replica);

enum class TransitionKind { kCreated, kDraining, kTerminated };

struct LifecycleTransition {
  ReplicaId replica_id;
  TransitionKind kind;
  Seconds at = 0.0;
};

/// One line of the event log.
struct EventRecord {
  Seconds time = 0.0;
  std::string kind;
  std::optional<ReplicaId> replica;
  std::optional<std::uint64_t> request_id;
  std::string payload;
};

struct SimOptions {
  Seconds provisioning_delay = 30.0;
  Seconds drain_grace = kForever;
  SchedulerWeights weights;
  int hard_queue_cap = 10;
  // Checks every capacity and conservation invariant after each event.
  // Cheap enough to leave on in tests.
  bool check_invariants = false;
  bool record_events = true;
};

/// Discrete-event simulation of replicas serving requests.
///
/// Single-threaded; time only moves forward through advance(). Simultaneous
/// events run completions first, then engine-internal transitions, then
/// arrivals; the control plane acts after advance() returns, so it observes
/// the state after every event at the tick's timestamp.
class Simulator {
 public:
  Simulator(std::vector<VariantSpec> variants, SimOptions options);

  /// Creates `count` replicas of `variant_id` already in the ready phase.
  void bootstrap_ready(const VariantId& variant_id, int count);

  /// Queues future arrivals. Requests must arrive at or after now().
  void submit(std::vector<RequestSpec> requests);

  AdvanceDelta advance(Seconds to_time);

  std::vector<LifecycleTransition> apply_replica_target(
      const VariantId& variant_id, int desired, bool drain_safe);

  /// One snapshot per ready or draining replica, ordered by replica id.
  /// Provisioning replicas have no server yet and report nothing.
  std::vector<MetricSnapshot> snapshot_metrics() const;

  Seconds now() const { return now_; }
  std::span<const VariantSpec> variants() const { return variants_; }
  const VariantSpec& variant(const VariantId& id) const;

  /// Replicas counted towards a deployment's size: ready plus provisioning.
  int observed_replicas(const VariantId& variant_id) const;
  int ready_replicas(const VariantId& variant_id) const;
  int provisioning_replicas(const VariantId& variant_id) const;

  const std::map<ReplicaId, ReplicaState>& replicas() const {
    return replicas_;
  }
  const std::vector<RequestRecord>& requests() const { return requests_; }
  const FlowCounters& counters() const { return counters_; }
  /// Per variant: requests routed to it, completed on it and dropped from it.
  /// Gateway rejections are not attributed to any variant.
  const std::map<VariantId, FlowCounters>& variant_counters() const {
    return variant_counters_;
  }
  std::uint64_t in_flight_total() const;
  std::uint64_t queued_total() const;
  /// Arrivals seen by the gateway so far, including rejected ones.
  std::uint64_t arrivals_seen() const { return counters_.arrived; }

  const std::vector<EventRecord>& event_log() const { return event_log_; }
  /// One line per event: time, kind, replica, request, payload.
  std::string render_event_log() const;
  /// SHA-256 over the rendered event log.
  std::string event_log_hash() const;

  /// Throws std::logic_error when any capacity or conservation invariant is
  /// violated.
  void check_invariants() const;

 private:
  enum class EventKind : int {
    kCompletion = 0,
    kPrefillDone = 1,
    kReplicaReady = 2,
    kDrainDeadline = 3,
    kArrival = 4,
  };

  struct Event {
    Seconds time;
    EventKind kind;
    std::uint64_t seq;
    std::size_t request_index;
    ReplicaId replica;
  };

  struct EventLater {
    bool operator()(const Event& a, const Event& b) const;
  };

  void push(Seconds time, EventKind kind, std::size_t request_index,
            ReplicaId replica);
  void handle(const Event& event);
  void on_arrival(std::size_t request_index);
  void on_prefill_done(ReplicaState& replica, std::size_t request_index);
  void on_completion(ReplicaState& replica, std::size_t request_index);
  void try_admit(ReplicaState& replica);
  void maybe_finish_drain(ReplicaState& replica);
  void terminate(ReplicaState& replica, DropCause cause);
  void drop(std::size_t request_index, DropCause cause);
  ReplicaState& create_replica(std::size_t variant_index, bool ready);
  std::size_t variant_index(const VariantId& id) const;
  void log(std::string kind, std::optional<ReplicaId> replica,
           std::optional<std::uint64_t> request_id, std::string payload);

  std::vector<VariantSpec> variants_;
  SimOptions options_;
  Seconds now_ = 0.0;
  std::uint64_t next_seq_ = 0;
  std::uint32_t next_replica_ = 0;
  std::priority_queue<Event, std::vector<Event>, EventLater> events_;
  std::map<ReplicaId, ReplicaState> replicas_;
  std::vector<RequestRecord> requests_;
  std::unordered_map<std::string, ReplicaId> last_prefix_replica_;
  FlowCounters counters_;
  std::map<VariantId, FlowCounters> variant_counters_;
  std::vector<EventRecord> event_log_;
};

}  // namespace wva
