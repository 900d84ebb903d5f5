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

#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "wva/domain.hpp"
#include "wva/scenario.hpp"

namespace wva {

class Simulator;

inline constexpr const char* kReplicaSnapshotsQuery = "replica_snapshots";

struct RefreshSpec {
  Seconds now = 0.0;
  // Restrict results to one variant.
  std::optional<VariantId> variant;
};

struct MetricResult {
  std::vector<MetricSnapshot> snapshots;
  Seconds refreshed_at = 0.0;
};

struct CachedValue {
  std::shared_ptr<const MetricResult> value;
  Seconds fetched_at = 0.0;
};

/// A pluggable metric backend. One refresher and any number of readers may
/// use a source concurrently; published values are immutable.
class MetricsSource {
 public:
  virtual ~MetricsSource() = default;

  /// Fetches fresh values and publishes them to the cache.
  std::map<std::string, MetricResult> refresh(const RefreshSpec& spec);

  /// Latest published value. The only supported param is "variant", which
  /// filters the snapshot set.
  std::optional<CachedValue> get(
      const std::string& query_name,
      const std::map<std::string, std::string>& params = {}) const;

 protected:
  virtual std::map<std::string, MetricResult> fetch(const RefreshSpec& spec) = 0;

 private:
  mutable std::mutex mu_;
  std::map<std::string, CachedValue> cache_;
};

/// Snapshots from the live simulator, stale-flagged inside outage windows.
std::vector<MetricSnapshot> sim_source_refresh(const Simulator& sim,
                                               const FaultProgram& faults,
                                               Seconds now);

class SimSource : public MetricsSource {
 public:
  SimSource(const Simulator* sim, FaultProgram faults)
      : sim_(sim), faults_(std::move(faults)) {}

  void bind(const Simulator* sim) { sim_ = sim; }

 protected:
  std::map<std::string, MetricResult> fetch(const RefreshSpec& spec) override;

 private:
  const Simulator* sim_;
  FaultProgram faults_;
};

/// Time-indexed snapshot table in the snapshot CSV schema:
///   tick_time,replica_id,variant_id,kv_usage,queue_depth,in_flight,stale
class SnapshotTable {
 public:
  static SnapshotTable parse(std::istream& in, const std::string& origin);
  static SnapshotTable load(const std::filesystem::path& path);

  /// Rows of the latest tick at or before `now`; replicas absent from that
  /// tick are gone. Empty if no tick qualifies.
  std::vector<MetricSnapshot> at(Seconds now) const;
  bool empty() const { return rows_.empty(); }
  std::vector<Seconds> ticks() const;

 private:
  std::map<Seconds, std::vector<MetricSnapshot>> rows_;
};

std::vector<MetricSnapshot> file_source_refresh(const std::filesystem::path& path,
                                                Seconds now);

/// Replays a snapshot file. The file is opened at the first refresh. Rows
/// older than `max_age` relative to the refresh time come back stale.
class FileSource : public MetricsSource {
 public:
  explicit FileSource(std::filesystem::path path, Seconds max_age = kForever)
      : path_(std::move(path)), max_age_(max_age) {}

 protected:
  std::map<std::string, MetricResult> fetch(const RefreshSpec& spec) override;

 private:
  std::filesystem::path path_;
  Seconds max_age_;
  std::optional<SnapshotTable> table_;
};

class MetricsRegistry {
 public:
  void add(const std::string& name, std::unique_ptr<MetricsSource> source);
  MetricsSource& get(const std::string& name) const;
  bool contains(const std::string& name) const;
  std::size_t size() const { return sources_.size(); }
  std::vector<std::string> names() const;

 private:
  std::map<std::string, std::unique_ptr<MetricsSource>> sources_;
};

struct RegistryContext {
  const Simulator* sim = nullptr;
  FaultProgram faults;
  std::filesystem::path base_dir;
  Seconds max_age = kForever;
};

/// Instantiates every configured source. File sources open lazily.
MetricsRegistry registry_build(const MetricsConfig& cfg,
                               const RegistryContext& context);

/// Unknown kinds are rejected with unknown-source-kind.
SourceKind parse_source_kind(const std::string& kind);

void write_snapshots_csv(std::ostream& out,
                         const std::vector<MetricSnapshot>& snapshots,
                         bool header);

// -- capacity discovery -------------------------------------------------------

struct GpuModelInfo {
  int count = 0;
  int gpus_usable = 0;

  bool operator==(const GpuModelInfo&) const = default;
};

/// node id -> GPU model -> info.
struct CapacityInventory {
  std::map<std::string, std::map<std::string, GpuModelInfo>> nodes;

  int total_usable() const;
  std::map<std::string, int> usable_per_model() const;
  bool operator==(const CapacityInventory&) const = default;
};

class CapacityDiscovery {
 public:
  virtual ~CapacityDiscovery() = default;
  virtual CapacityInventory discover() const = 0;
};

/// Reads `node_id,gpu_model,count,gpus_usable` rows.
class StaticInventoryDiscovery : public CapacityDiscovery {
 public:
  explicit StaticInventoryDiscovery(std::filesystem::path path)
      : path_(std::move(path)) {}
  CapacityInventory discover() const override;

 private:
  std::filesystem::path path_;
};

CapacityInventory parse_inventory(std::istream& in, const std::string& origin);

/// Budget the optimizer enforces in constrained mode.
struct ClusterBudget {
  int total_gpus = 0;
  // Per hardware class; absent when only a total is known.
  std::optional<std::map<std::string, int>> per_class;
};

/// Inventory from the scenario: the inventory file when configured, else a
/// single pseudo-node holding cluster_gpu_budget GPUs of no specific class.
CapacityInventory discover_capacity(const ScenarioConfig& cfg);

/// Budget for the effective optimizer mode; nullopt when unconstrained.
/// Throws budget-zero when constrained mode has no usable GPUs.
std::optional<ClusterBudget> derive_budget(const ScenarioConfig& cfg);

/// max_replicas after hardware availability: a class with G usable GPUs
/// admits at most G / gpus_per_replica replicas.
int effective_max_replicas(const VariantSpec& variant,
                           const std::optional<ClusterBudget>& budget);

}  // namespace wva
