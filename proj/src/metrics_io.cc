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

#include "wva/metrics_io.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>

#include "wva/cluster_sim.hpp"
#include "wva/util.hpp"

namespace wva {

namespace {

constexpr const char* kSnapshotHeader =
    "tick_time,replica_id,variant_id,kv_usage,queue_depth,in_flight,stale";
constexpr const char* kInventoryHeader = "node_id,gpu_model,count,gpus_usable";

void keep_variant(std::vector<MetricSnapshot>& snaps,
                  const std::optional<VariantId>& variant) {
  if (!variant) return;
  std::erase_if(snaps, [&](const MetricSnapshot& s) {
    return s.variant_id != *variant;
  });
}

}  // namespace

std::map<std::string, MetricResult> MetricsSource::refresh(const RefreshSpec& spec) {
  auto results = fetch(spec);
  std::lock_guard<std::mutex> lock(mu_);
  for (const auto& [name, result] : results) {
    cache_[name] = CachedValue{std::make_shared<const MetricResult>(result), spec.now};
  }
  return results;
}

std::optional<CachedValue> MetricsSource::get(
    const std::string& query_name,
    const std::map<std::string, std::string>& params) const {
  CachedValue value;
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = cache_.find(query_name);
    if (it == cache_.end()) return std::nullopt;
    value = it->second;
  }
  auto variant = params.find("variant");
  if (variant == params.end()) return value;
  auto filtered = std::make_shared<MetricResult>(*value.value);
  keep_variant(filtered->snapshots, variant->second);
  value.value = std::move(filtered);
  return value;
}

std::vector<MetricSnapshot> sim_source_refresh(const Simulator& sim,
                                               const FaultProgram& faults,
                                               Seconds now) {
  auto snaps = sim.snapshot_metrics();
  for (auto& s : snaps) {
    s.tick_time = now;
    s.stale = faults.stale_at(now, s.variant_id);
  }
  return snaps;
}

std::map<std::string, MetricResult> SimSource::fetch(const RefreshSpec& spec) {
  if (sim_ == nullptr) {
    throw Error(ErrorCode::kUnknownSource, "sim source is not bound to a simulator");
  }
  MetricResult result{sim_source_refresh(*sim_, faults_, spec.now), spec.now};
  keep_variant(result.snapshots, spec.variant);
  return {{kReplicaSnapshotsQuery, std::move(result)}};
}

SnapshotTable SnapshotTable::parse(std::istream& in, const std::string& origin) {
  SnapshotTable table;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto where = [&] { return origin + ":" + std::to_string(line_no) + ": "; };
    if (!header_seen) {
      if (trim(line) != kSnapshotHeader) {
        throw Error(ErrorCode::kParseError,
                    where() + "expected header '" + kSnapshotHeader + "'");
      }
      header_seen = true;
      continue;
    }
    auto f = split_csv(line);
    if (f.size() != 7) {
      throw Error(ErrorCode::kParseError,
                  where() + "expected 7 fields, got " + std::to_string(f.size()));
    }
    auto tick = parse_double(f[0]);
    auto replica = parse_int(f[1]);
    auto kv = parse_double(f[3]);
    auto queue = parse_int(f[4]);
    auto in_flight = parse_int(f[5]);
    auto stale = parse_bool(f[6]);
    if (!tick || !replica || *replica < 0 || f[2].empty() || !kv || *kv < 0 ||
        *kv > 1 || !queue || *queue < 0 || !in_flight || *in_flight < 0 ||
        !stale) {
      throw Error(ErrorCode::kParseError, where() + "malformed row '" + line + "'");
    }
    MetricSnapshot s;
    s.tick_time = *tick;
    s.replica_id = ReplicaId{static_cast<std::uint32_t>(*replica)};
    s.variant_id = f[2];
    s.kv_usage = *kv;
    s.queue_depth = static_cast<int>(*queue);
    s.in_flight = static_cast<int>(*in_flight);
    s.stale = *stale;
    table.rows_[s.tick_time].push_back(std::move(s));
  }
  return table;
}

SnapshotTable SnapshotTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kMissingFile, "cannot open " + path.string());
  return parse(in, path.string());
}

std::vector<MetricSnapshot> SnapshotTable::at(Seconds now) const {
  auto it = rows_.upper_bound(now);
  if (it == rows_.begin()) return {};
  return std::prev(it)->second;
}

std::vector<Seconds> SnapshotTable::ticks() const {
  std::vector<Seconds> out;
  for (const auto& [t, _] : rows_) out.push_back(t);
  return out;
}

std::vector<MetricSnapshot> file_source_refresh(const std::filesystem::path& path,
                                                Seconds now) {
  return SnapshotTable::load(path).at(now);
}

std::map<std::string, MetricResult> FileSource::fetch(const RefreshSpec& spec) {
  if (!table_) table_ = SnapshotTable::load(path_);
  MetricResult result{table_->at(spec.now), spec.now};
  for (auto& s : result.snapshots) {
    if (spec.now - s.tick_time > max_age_) s.stale = true;
  }
  keep_variant(result.snapshots, spec.variant);
  return {{kReplicaSnapshotsQuery, std::move(result)}};
}

void MetricsRegistry::add(const std::string& name,
                          std::unique_ptr<MetricsSource> source) {
  if (sources_.count(name) != 0) {
    throw Error(ErrorCode::kDuplicateName, "duplicate metrics source '" + name + "'");
  }
  sources_.emplace(name, std::move(source));
}

MetricsSource& MetricsRegistry::get(const std::string& name) const {
  auto it = sources_.find(name);
  if (it == sources_.end()) {
    throw Error(ErrorCode::kUnknownSource, "no metrics source '" + name + "'");
  }
  return *it->second;
}

bool MetricsRegistry::contains(const std::string& name) const {
  return sources_.count(name) != 0;
}

std::vector<std::string> MetricsRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : sources_) out.push_back(name);
  return out;
}

MetricsRegistry registry_build(const MetricsConfig& cfg,
                               const RegistryContext& context) {
  MetricsRegistry registry;
  for (const auto& [name, source] : cfg.sources) {
    switch (source.kind) {
      case SourceKind::kSim:
        registry.add(name, std::make_unique<SimSource>(context.sim, context.faults));
        break;
      case SourceKind::kFile: {
        std::filesystem::path path(source.path);
        if (path.is_relative()) path = context.base_dir / path;
        registry.add(name, std::make_unique<FileSource>(path, context.max_age));
        break;
      }
    }
  }
  return registry;
}

void write_snapshots_csv(std::ostream& out,
                         const std::vector<MetricSnapshot>& snapshots,
                         bool header) {
  if (header) out << kSnapshotHeader << '\n';
  for (const auto& s : snapshots) {
    out << format_double(s.tick_time) << ',' << s.replica_id.value << ','
        << s.variant_id << ',' << format_double(s.kv_usage) << ','
        << s.queue_depth << ',' << s.in_flight << ',' << (s.stale ? 1 : 0) << '\n';
  }
}

int CapacityInventory::total_usable() const {
  int total = 0;
  for (const auto& [node, models] : nodes) {
    for (const auto& [model, info] : models) total += info.gpus_usable;
  }
  return total;
}

std::map<std::string, int> CapacityInventory::usable_per_model() const {
  std::map<std::string, int> out;
  for (const auto& [node, models] : nodes) {
    for (const auto& [model, info] : models) out[model] += info.gpus_usable;
  }
  return out;
}

CapacityInventory parse_inventory(std::istream& in, const std::string& origin) {
  CapacityInventory inventory;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto where = [&] { return origin + ":" + std::to_string(line_no) + ": "; };
    if (!header_seen) {
      if (trim(line) != kInventoryHeader) {
        throw Error(ErrorCode::kMalformedInventory,
                    where() + "expected header '" + kInventoryHeader + "'");
      }
      header_seen = true;
      continue;
    }
    auto f = split_csv(line);
    if (f.size() != 4 || f[0].empty() || f[1].empty()) {
      throw Error(ErrorCode::kMalformedInventory, where() + "malformed row '" + line + "'");
    }
    auto count = parse_int(f[2]);
    auto usable = parse_int(f[3]);
    if (!count || !usable || *count < 0 || *usable < 0 || *usable > *count) {
      throw Error(ErrorCode::kMalformedInventory,
                  where() + "counts must satisfy 0 <= gpus_usable <= count");
    }
    auto& models = inventory.nodes[f[0]];
    if (models.count(f[1]) != 0) {
      throw Error(ErrorCode::kMalformedInventory,
                  where() + "duplicate entry for " + f[0] + "/" + f[1]);
    }
    models[f[1]] = GpuModelInfo{static_cast<int>(*count), static_cast<int>(*usable)};
  }
  return inventory;
}

CapacityInventory StaticInventoryDiscovery::discover() const {
  std::ifstream in(path_);
  if (!in) throw Error(ErrorCode::kMissingFile, "cannot open " + path_.string());
  return parse_inventory(in, path_.string());
}

CapacityInventory discover_capacity(const ScenarioConfig& cfg) {
  if (cfg.inventory_file) {
    std::filesystem::path path(*cfg.inventory_file);
    if (path.is_relative()) path = cfg.base_dir / path;
    return StaticInventoryDiscovery(path).discover();
  }
  CapacityInventory inventory;
  if (cfg.cluster_gpu_budget) {
    inventory.nodes["cluster"]["*"] =
        GpuModelInfo{*cfg.cluster_gpu_budget, *cfg.cluster_gpu_budget};
  }
  return inventory;
}

std::optional<ClusterBudget> derive_budget(const ScenarioConfig& cfg) {
  if (cfg.effective_optimizer_mode() == OptimizerMode::kUnconstrained) {
    return std::nullopt;
  }
  CapacityInventory inventory = discover_capacity(cfg);
  ClusterBudget budget;
  budget.total_gpus = inventory.total_usable();
  if (cfg.inventory_file) {
    budget.per_class = inventory.usable_per_model();
    if (cfg.cluster_gpu_budget) {
      budget.total_gpus = std::min(budget.total_gpus, *cfg.cluster_gpu_budget);
    }
  }
  if (budget.total_gpus <= 0) {
    throw Error(ErrorCode::kBudgetZero,
                "constrained mode requested but no usable GPUs were discovered");
  }
  return budget;
}

int effective_max_replicas(const VariantSpec& variant,
                           const std::optional<ClusterBudget>& budget) {
  int cap = variant.policy_params.max_replicas;
  if (!budget) return cap;
  cap = std::min(cap, budget->total_gpus / variant.gpus_per_replica);
  if (budget->per_class) {
    auto it = budget->per_class->find(variant.hardware_class);
    int usable = it == budget->per_class->end() ? 0 : it->second;
    cap = std::min(cap, usable / variant.gpus_per_replica);
  }
  return std::max(cap, 0);
}

}  // namespace wva
