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

#include <compare>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace wva {

using VariantId = std::string;
using ModelId = std::string;
using Seconds = double;

inline constexpr Seconds kForever = std::numeric_limits<double>::infinity();

/// Identifies one simulated inference server replica. Ids are allocated
/// monotonically by the simulator and never reused within a run.
struct ReplicaId {
  std::uint32_t value = 0;

  auto operator<=>(const ReplicaId&) const = default;
};

enum class ErrorCode {
  kInvalidField,
  kDuplicateVariantId,
  kGammaNotBelowTau,
  kUnknownSourceKind,
  kDuplicateName,
  kUnknownSource,
  kParseError,
  kMissingFile,
  kMalformedInventory,
  kBudgetZero,
  kInvalidTarget,
  kMismatchedTraffic,
  kIo,
};

std::string_view to_string(ErrorCode code);

/// Error raised across the library. `code()` identifies the failure class so
/// callers (and the CLI) can react without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

enum class VariantRole { kUnified, kPrefill, kDecode };
enum class Baseline { kWva, kHpa };
enum class ArrivalProcess { kDeterministicUniform, kPoisson };

std::string_view to_string(VariantRole role);
std::string_view to_string(Baseline baseline);
std::string_view to_string(ArrivalProcess process);

/// Per-variant saturation thresholds and replica bounds.
struct SaturationParams {
  double tau_kv = 0.8;
  int tau_q = 5;
  double gamma_kv = 0.3;
  double gamma_q = 2.0;
  int min_nonsaturated_for_scaledown = 2;
  int min_replicas = 0;
  int max_replicas = 10;

  bool operator==(const SaturationParams&) const = default;
};

/// A deployable configuration of a model: hardware class times GPUs per
/// replica, plus the performance profile the simulator runs it with.
struct VariantSpec {
  VariantId variant_id;
  ModelId model_id;
  std::string hardware_class;
  int gpus_per_replica = 1;
  // Carried for completeness; has no effect on simulation or policy.
  std::string quantization = "fp16";
  double variant_cost = 10.0;
  std::int64_t kv_capacity_tokens = 16384;
  int max_concurrent_sequences = 256;
  double prefill_rate = 8192.0;
  double decode_rate = 1024.0;
  VariantRole role = VariantRole::kUnified;
  // Replicas that exist (ready) at t=0. Absent means min_replicas.
  std::optional<int> initial_replicas;
  // Name of the deployment this variant actuates.
  std::string scale_target;
  SaturationParams policy_params;

  int initial_replica_count() const {
    return initial_replicas.value_or(policy_params.min_replicas);
  }

  bool operator==(const VariantSpec&) const = default;
};

struct RequestSpec {
  std::uint64_t request_id = 0;
  Seconds arrival_time = 0.0;
  std::int64_t input_tokens = 1;
  std::int64_t output_tokens = 1;
  std::optional<std::string> prefix_key;

  std::int64_t footprint() const { return input_tokens + output_tokens; }

  bool operator==(const RequestSpec&) const = default;
};

/// Per-replica observation at a control tick.
struct MetricSnapshot {
  ReplicaId replica_id;
  VariantId variant_id;
  Seconds tick_time = 0.0;
  double kv_usage = 0.0;
  int queue_depth = 0;
  int in_flight = 0;
  bool stale = false;

  bool operator==(const MetricSnapshot&) const = default;
};

/// An optimization decision for one model pool; the decision cache entry.
struct TargetState {
  ModelId model_id;
  std::map<VariantId, int> per_variant_desired;
  // Pool-level flag: true only when every variant had usable metrics.
  bool metrics_available = true;
  // Per-variant availability so that a scoped outage gates only the affected
  // variant.
  std::map<VariantId, bool> per_variant_metrics_available;
  Seconds computed_at = 0.0;
  std::string reason;

  bool variant_metrics_available(const VariantId& id) const {
    auto it = per_variant_metrics_available.find(id);
    return it == per_variant_metrics_available.end() ? metrics_available
                                                     : it->second;
  }

  bool operator==(const TargetState&) const = default;
};

struct HpaParams {
  double target_avg_queue = 3.0;
  double target_avg_kv = 0.5;
  Seconds stabilization_window = 300.0;
  double tolerance = 0.1;

  bool operator==(const HpaParams&) const = default;
};

}  // namespace wva
