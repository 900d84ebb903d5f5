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

#include "wva/cluster_sim.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "wva/util.hpp"

namespace wva {

std::string_view to_string(ReplicaPhase phase) {
  switch (phase) {
    case ReplicaPhase::kProvisioning: return "provisioning";
    case ReplicaPhase::kReady: return "ready";
    case ReplicaPhase::kDraining: return "draining";
    case ReplicaPhase::kTerminated: return "terminated";
  }
  return "unknown";
}

std::string_view to_string(DropCause cause) {
  switch (cause) {
    case DropCause::kNoReadyReplica: return "no_ready_replica";
    case DropCause::kQueueFull: return "queue_full";
    case DropCause::kKvFull: return "kv_full";
    case DropCause::kTerminated: return "terminated";
  }
  return "unknown";
}

std::optional<Seconds> RequestRecord::ttft() const {
  if (!first_token_at) return std::nullopt;
  return *first_token_at - spec.arrival_time;
}

std::optional<Seconds> RequestRecord::itl() const {
  if (!first_token_at || !completion_time || spec.output_tokens <= 1) {
    return std::nullopt;
  }
  return (*completion_time - *first_token_at) /
         static_cast<double>(spec.output_tokens - 1);
}

ScheduleResult schedule_request(
    const RequestSpec& req, std::span<const ReplicaState* const> ready_replicas,
    std::span<const VariantSpec> variants, const SchedulerWeights& weights,
    int hard_queue_cap,
    const std::unordered_map<std::string, ReplicaId>& last_prefix_replica) {
  if (ready_replicas.empty()) return Rejection{DropCause::kNoReadyReplica};

  bool all_full = true;
  for (const ReplicaState* r : ready_replicas) {
    const auto& v = variants[r->variant_index];
    if (v.kv_capacity_tokens - r->occupied_tokens >= req.input_tokens) {
      all_full = false;
      break;
    }
  }
  if (all_full) return Rejection{DropCause::kKvFull};

  std::optional<ReplicaId> affine;
  if (req.prefix_key) {
    auto it = last_prefix_replica.find(*req.prefix_key);
    if (it != last_prefix_replica.end()) affine = it->second;
  }

  const ReplicaState* best = nullptr;
  double best_score = 0.0;
  for (const ReplicaState* r : ready_replicas) {
    const auto& v = variants[r->variant_index];
    double queue_term =
        1.0 - std::min(static_cast<double>(r->queue.size()) / hard_queue_cap, 1.0);
    double kv = static_cast<double>(r->occupied_tokens) /
                static_cast<double>(v.kv_capacity_tokens);
    double affinity = affine && *affine == r->replica_id ? 1.0 : 0.0;
    double score = weights.queue * queue_term +
                   weights.kv_cache_utilization * (1.0 - kv) +
                   weights.prefix_cache * affinity;
    if (best == nullptr || score > best_score ||
        (score == best_score && r->replica_id < best->replica_id)) {
      best = r;
      best_score = score;
    }
  }
  if (static_cast<int>(best->queue.size()) >= hard_queue_cap) {
    return Rejection{DropCause::kQueueFull};
  }
  return best->replica_id;
}

bool Simulator::EventLater::operator()(const Event& a, const Event& b) const {
  if (a.time != b.time) return a.time > b.time;
  if (a.kind != b.kind) return a.kind > b.kind;
  return a.seq > b.seq;
}

Simulator::Simulator(std::vector<VariantSpec> variants, SimOptions options)
    : variants_(std::move(variants)), options_(options) {
  for (const auto& v : variants_) variant_counters_[v.variant_id];
}

const VariantSpec& Simulator::variant(const VariantId& id) const {
  return variants_[variant_index(id)];
}

std::size_t Simulator::variant_index(const VariantId& id) const {
  for (std::size_t i = 0; i < variants_.size(); ++i) {
    if (variants_[i].variant_id == id) return i;
  }
  throw Error(ErrorCode::kInvalidTarget, "unknown variant '" + id + "'");
}

void Simulator::bootstrap_ready(const VariantId& variant_id, int count) {
  std::size_t vi = variant_index(variant_id);
  for (int i = 0; i < count; ++i) create_replica(vi, true);
}

void Simulator::submit(std::vector<RequestSpec> requests) {
  for (auto& spec : requests) {
    if (spec.arrival_time < now_) {
      throw std::invalid_argument("request arrives before current time");
    }
    std::size_t index = requests_.size();
    Seconds at = spec.arrival_time;
    RequestRecord record;
    record.spec = std::move(spec);
    requests_.push_back(std::move(record));
    push(at, EventKind::kArrival, index, ReplicaId{});
  }
}

void Simulator::push(Seconds time, EventKind kind, std::size_t request_index,
                     ReplicaId replica) {
  events_.push(Event{time, kind, next_seq_++, request_index, replica});
}

AdvanceDelta Simulator::advance(Seconds to_time) {
  if (to_time < now_) throw std::invalid_argument("time cannot move backwards");
  FlowCounters before = counters_;
  AdvanceDelta delta;
  while (!events_.empty() && events_.top().time <= to_time) {
    Event event = events_.top();
    events_.pop();
    now_ = event.time;
    handle(event);
    ++delta.events;
    if (options_.check_invariants) check_invariants();
  }
  now_ = to_time;
  delta.flow.arrived = counters_.arrived - before.arrived;
  delta.flow.completed = counters_.completed - before.completed;
  delta.flow.dropped = counters_.dropped - before.dropped;
  for (std::size_t i = 0; i < kDropCauseCount; ++i) {
    delta.flow.drop_causes[i] = counters_.drop_causes[i] - before.drop_causes[i];
  }
  return delta;
}

void Simulator::handle(const Event& event) {
  switch (event.kind) {
    case EventKind::kArrival:
      on_arrival(event.request_index);
      return;
    case EventKind::kPrefillDone:
    case EventKind::kCompletion: {
      auto it = replicas_.find(event.replica);
      const auto& record = requests_[event.request_index];
      // Requests dropped by a forced termination leave stale events behind.
      if (it == replicas_.end() || record.status != RequestStatus::kActive ||
          record.replica != event.replica) {
        return;
      }
      if (event.kind == EventKind::kPrefillDone) {
        on_prefill_done(it->second, event.request_index);
      } else {
        on_completion(it->second, event.request_index);
      }
      return;
    }
    case EventKind::kReplicaReady: {
      auto& replica = replicas_.at(event.replica);
      if (replica.phase != ReplicaPhase::kProvisioning) return;
      replica.phase = ReplicaPhase::kReady;
      log("replica_ready", replica.replica_id, std::nullopt, replica.variant_id);
      try_admit(replica);
      return;
    }
    case EventKind::kDrainDeadline: {
      auto& replica = replicas_.at(event.replica);
      if (replica.phase != ReplicaPhase::kDraining) return;
      log("drain_deadline", replica.replica_id, std::nullopt, replica.variant_id);
      terminate(replica, DropCause::kTerminated);
      return;
    }
  }
}

void Simulator::on_arrival(std::size_t request_index) {
  auto& record = requests_[request_index];
  ++counters_.arrived;

  std::vector<const ReplicaState*> ready;
  for (const auto& [id, r] : replicas_) {
    if (r.phase == ReplicaPhase::kReady) ready.push_back(&r);
  }
  ScheduleResult result =
      schedule_request(record.spec, ready, variants_, options_.weights,
                       options_.hard_queue_cap, last_prefix_replica_);
  if (const auto* rejection = std::get_if<Rejection>(&result)) {
    log("reject", std::nullopt, record.spec.request_id,
        std::string(to_string(rejection->cause)));
    drop(request_index, rejection->cause);
    return;
  }
  auto& replica = replicas_.at(std::get<ReplicaId>(result));
  const auto& v = variants_[replica.variant_index];
  ++variant_counters_[replica.variant_id].arrived;
  record.replica = replica.replica_id;
  if (record.spec.footprint() > v.kv_capacity_tokens) {
    // Larger than the whole cache: it could never be admitted.
    log("reject", replica.replica_id, record.spec.request_id, "oversize");
    drop(request_index, DropCause::kKvFull);
    return;
  }
  record.status = RequestStatus::kQueued;
  replica.queue.push_back(request_index);
  if (record.spec.prefix_key) {
    last_prefix_replica_[*record.spec.prefix_key] = replica.replica_id;
  }
  log("route", replica.replica_id, record.spec.request_id,
      "queue=" + std::to_string(replica.queue.size()));
  try_admit(replica);
}

void Simulator::try_admit(ReplicaState& replica) {
  if (!replica.serving()) return;
  const auto& v = variants_[replica.variant_index];
  while (!replica.queue.empty()) {
    std::size_t index = replica.queue.front();
    auto& record = requests_[index];
    std::int64_t footprint = record.spec.footprint();
    if (static_cast<int>(replica.in_flight.size()) >= v.max_concurrent_sequences ||
        replica.occupied_tokens + footprint > v.kv_capacity_tokens) {
      break;
    }
    replica.queue.pop_front();
    replica.occupied_tokens += footprint;
    replica.in_flight.push_back(
        ActiveRequest{index, RequestStage::kPrefill, footprint, now_, std::nullopt});
    record.status = RequestStatus::kActive;
    record.admitted_at = now_;
    log("admit", replica.replica_id, record.spec.request_id,
        "occupied=" + std::to_string(replica.occupied_tokens));
    push(now_ + static_cast<double>(record.spec.input_tokens) / v.prefill_rate,
         EventKind::kPrefillDone, index, replica.replica_id);
  }
}

void Simulator::on_prefill_done(ReplicaState& replica, std::size_t request_index) {
  auto& record = requests_[request_index];
  const auto& v = variants_[replica.variant_index];
  for (auto& active : replica.in_flight) {
    if (active.request_index == request_index) {
      active.stage = RequestStage::kDecode;
      active.first_token_at = now_;
      break;
    }
  }
  record.first_token_at = now_;
  log("first_token", replica.replica_id, record.spec.request_id, "");
  push(now_ + static_cast<double>(record.spec.output_tokens) / v.decode_rate,
       EventKind::kCompletion, request_index, replica.replica_id);
}

void Simulator::on_completion(ReplicaState& replica, std::size_t request_index) {
  auto& record = requests_[request_index];
  auto it = std::find_if(
      replica.in_flight.begin(), replica.in_flight.end(),
      [&](const ActiveRequest& a) { return a.request_index == request_index; });
  replica.occupied_tokens -= it->tokens_reserved;
  replica.in_flight.erase(it);
  record.status = RequestStatus::kCompleted;
  record.completion_time = now_;
  ++counters_.completed;
  ++variant_counters_[replica.variant_id].completed;
  log("complete", replica.replica_id, record.spec.request_id,
      "occupied=" + std::to_string(replica.occupied_tokens));
  try_admit(replica);
  maybe_finish_drain(replica);
}

void Simulator::maybe_finish_drain(ReplicaState& replica) {
  if (replica.phase == ReplicaPhase::kDraining && replica.in_flight.empty() &&
      replica.queue.empty()) {
    terminate(replica, DropCause::kTerminated);
  }
}

void Simulator::terminate(ReplicaState& replica, DropCause cause) {
  for (const auto& active : replica.in_flight) {
    replica.occupied_tokens -= active.tokens_reserved;
    drop(active.request_index, cause);
  }
  replica.in_flight.clear();
  for (std::size_t index : replica.queue) drop(index, cause);
  replica.queue.clear();
  replica.phase = ReplicaPhase::kTerminated;
  replica.terminated_at = now_;
  log("replica_terminated", replica.replica_id, std::nullopt, replica.variant_id);
}

void Simulator::drop(std::size_t request_index, DropCause cause) {
  auto& record = requests_[request_index];
  record.status = RequestStatus::kDropped;
  record.drop_cause = cause;
  record.dropped_at = now_;
  ++counters_.dropped;
  ++counters_.drop_causes[static_cast<std::size_t>(cause)];
  if (record.replica) {
    auto& vc = variant_counters_[replicas_.at(*record.replica).variant_id];
    ++vc.dropped;
    ++vc.drop_causes[static_cast<std::size_t>(cause)];
  }
  log("drop", record.replica, record.spec.request_id,
      std::string(to_string(cause)));
}

ReplicaState& Simulator::create_replica(std::size_t variant_index, bool ready) {
  ReplicaState replica;
  replica.replica_id = ReplicaId{next_replica_++};
  replica.variant_index = variant_index;
  replica.variant_id = variants_[variant_index].variant_id;
  replica.created_at = now_;
  if (ready || options_.provisioning_delay <= 0) {
    replica.phase = ReplicaPhase::kReady;
    replica.ready_at = now_;
  } else {
    replica.phase = ReplicaPhase::kProvisioning;
    replica.ready_at = now_ + options_.provisioning_delay;
    push(replica.ready_at, EventKind::kReplicaReady, 0, replica.replica_id);
  }
  auto [it, _] = replicas_.emplace(replica.replica_id, std::move(replica));
  log("replica_created", it->second.replica_id, std::nullopt,
      it->second.variant_id + " " + std::string(to_string(it->second.phase)));
  return it->second;
}

std::vector<LifecycleTransition> Simulator::apply_replica_target(
    const VariantId& variant_id, int desired, bool drain_safe) {
  std::size_t vi = variant_index(variant_id);
  const auto& v = variants_[vi];
  if (desired < 0 || desired > v.policy_params.max_replicas) {
    throw Error(ErrorCode::kInvalidTarget,
                "target " + std::to_string(desired) + " outside [0, " +
                    std::to_string(v.policy_params.max_replicas) + "] for " +
                    variant_id);
  }
  std::vector<LifecycleTransition> transitions;
  int current = observed_replicas(variant_id);
  log("target", std::nullopt, std::nullopt,
      variant_id + " " + std::to_string(current) + "->" +
          std::to_string(desired) + (drain_safe ? " safe" : " unsafe"));

  for (int i = current; i < desired; ++i) {
    auto& r = create_replica(vi, false);
    transitions.push_back({r.replica_id, TransitionKind::kCreated, now_});
  }
  if (desired >= current) return transitions;

  std::vector<ReplicaState*> candidates;
  for (auto& [id, r] : replicas_) {
    if (r.variant_index == vi && (r.phase == ReplicaPhase::kReady ||
                                  r.phase == ReplicaPhase::kProvisioning)) {
      candidates.push_back(&r);
    }
  }
  if (drain_safe) {
    std::sort(candidates.begin(), candidates.end(),
              [](const ReplicaState* a, const ReplicaState* b) {
                if (a->in_flight.size() != b->in_flight.size()) {
                  return a->in_flight.size() < b->in_flight.size();
                }
                if (a->occupied_tokens != b->occupied_tokens) {
                  return a->occupied_tokens < b->occupied_tokens;
                }
                return a->replica_id > b->replica_id;
              });
  } else {
    std::sort(candidates.begin(), candidates.end(),
              [](const ReplicaState* a, const ReplicaState* b) {
                bool ap = a->phase == ReplicaPhase::kProvisioning;
                bool bp = b->phase == ReplicaPhase::kProvisioning;
                if (ap != bp) return ap;
                return a->replica_id > b->replica_id;
              });
  }
  int remove = current - desired;
  for (int i = 0; i < remove; ++i) {
    ReplicaState& r = *candidates[static_cast<std::size_t>(i)];
    if (!drain_safe || r.phase == ReplicaPhase::kProvisioning) {
      terminate(r, DropCause::kTerminated);
      transitions.push_back({r.replica_id, TransitionKind::kTerminated, now_});
      continue;
    }
    r.phase = ReplicaPhase::kDraining;
    log("replica_draining", r.replica_id, std::nullopt, r.variant_id);
    transitions.push_back({r.replica_id, TransitionKind::kDraining, now_});
    if (r.in_flight.empty() && r.queue.empty()) {
      terminate(r, DropCause::kTerminated);
      transitions.push_back({r.replica_id, TransitionKind::kTerminated, now_});
    } else if (std::isfinite(options_.drain_grace)) {
      push(now_ + options_.drain_grace, EventKind::kDrainDeadline, 0, r.replica_id);
    }
  }
  return transitions;
}

std::vector<MetricSnapshot> Simulator::snapshot_metrics() const {
  std::vector<MetricSnapshot> out;
  for (const auto& [id, r] : replicas_) {
    if (r.phase != ReplicaPhase::kReady && r.phase != ReplicaPhase::kDraining) continue;
    const auto& v = variants_[r.variant_index];
    MetricSnapshot s;
    s.replica_id = id;
    s.variant_id = r.variant_id;
    s.tick_time = now_;
    s.kv_usage = static_cast<double>(r.occupied_tokens) /
                 static_cast<double>(v.kv_capacity_tokens);
    s.queue_depth = static_cast<int>(r.queue.size());
    s.in_flight = static_cast<int>(r.in_flight.size());
    out.push_back(std::move(s));
  }
  return out;
}

int Simulator::observed_replicas(const VariantId& variant_id) const {
  return ready_replicas(variant_id) + provisioning_replicas(variant_id);
}

int Simulator::ready_replicas(const VariantId& variant_id) const {
  int n = 0;
  for (const auto& [id, r] : replicas_) {
    n += r.variant_id == variant_id && r.phase == ReplicaPhase::kReady;
  }
  return n;
}

int Simulator::provisioning_replicas(const VariantId& variant_id) const {
  int n = 0;
  for (const auto& [id, r] : replicas_) {
    n += r.variant_id == variant_id && r.phase == ReplicaPhase::kProvisioning;
  }
  return n;
}

std::uint64_t Simulator::in_flight_total() const {
  std::uint64_t n = 0;
  for (const auto& [id, r] : replicas_) n += r.in_flight.size();
  return n;
}

std::uint64_t Simulator::queued_total() const {
  std::uint64_t n = 0;
  for (const auto& [id, r] : replicas_) n += r.queue.size();
  return n;
}

void Simulator::log(std::string kind, std::optional<ReplicaId> replica,
                    std::optional<std::uint64_t> request_id, std::string payload) {
  if (!options_.record_events) return;
  event_log_.push_back(
      EventRecord{now_, std::move(kind), replica, request_id, std::move(payload)});
}

std::string Simulator::render_event_log() const {
  std::ostringstream out;
  for (const auto& e : event_log_) {
    out << format_double(e.time) << ' ' << e.kind << ' '
        << (e.replica ? std::to_string(e.replica->value) : "-") << ' '
        << (e.request_id ? std::to_string(*e.request_id) : "-") << ' '
        << e.payload << '\n';
  }
  return out.str();
}

std::string Simulator::event_log_hash() const {
  return sha256_hex(render_event_log());
}

void Simulator::check_invariants() const {
  auto fail = [](const std::string& what) { throw std::logic_error(what); };
  for (const auto& [id, r] : replicas_) {
    const auto& v = variants_[r.variant_index];
    std::int64_t reserved = 0;
    for (const auto& a : r.in_flight) {
      reserved += a.tokens_reserved;
      if (a.stage == RequestStage::kDecode && !a.first_token_at) {
        fail("decode without first token");
      }
    }
    std::string where = "replica " + std::to_string(id.value) + ": ";
    if (reserved != r.occupied_tokens) fail(where + "occupancy != reservations");
    if (r.occupied_tokens < 0 || r.occupied_tokens > v.kv_capacity_tokens) {
      fail(where + "occupancy out of range");
    }
    if (static_cast<int>(r.in_flight.size()) > v.max_concurrent_sequences) {
      fail(where + "too many sequences");
    }
    if (r.phase == ReplicaPhase::kTerminated &&
        (!r.in_flight.empty() || !r.queue.empty())) {
      fail(where + "terminated replica holds requests");
    }
    if (r.phase == ReplicaPhase::kProvisioning &&
        (!r.in_flight.empty() || !r.queue.empty())) {
      fail(where + "provisioning replica holds requests");
    }
  }
  if (counters_.arrived != counters_.completed + counters_.dropped +
                               in_flight_total() + queued_total()) {
    fail("flow conservation violated");
  }
}

}  // namespace wva
