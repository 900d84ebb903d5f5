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

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wva/domain.hpp"

namespace wva {

struct AllocationRequest {
  VariantId variant_id;
  ModelId model_id;
  std::string hardware_class;
  int current_replicas = 0;
  int desired_replicas = 0;
  int gpus_per_replica = 1;
  double variant_cost = 10.0;
  double spare_capacity = 1.0;
};

struct AllocationResult {
  std::map<VariantId, int> per_variant_granted;
  int gpus_used = 0;
  std::optional<int> gpus_budget;
  std::map<VariantId, int> unmet;
  // Retained replicas alone exceeded the budget; base grants were truncated.
  bool infeasible_base = false;
  // Scan order used by the constrained solver.
  std::vector<VariantId> priority_order;

  int granted(const VariantId& id) const {
    auto it = per_variant_granted.find(id);
    return it == per_variant_granted.end() ? 0 : it->second;
  }
};

/// Solver priority: ascending spare capacity, then ascending cost, then id.
bool higher_priority(const AllocationRequest& a, const AllocationRequest& b);

AllocationResult optimize_unconstrained(
    std::span<const AllocationRequest> requests);

/// Greedy-by-saturation allocation under a finite GPU budget.
///
/// Retained replicas, min(current, desired), are charged first; scale-downs
/// are granted in full. Scale-up replicas are then granted in priority order
/// while they fit, skipping any that do not. `class_budgets`, when given,
/// additionally caps GPUs per hardware class; classes missing from the map
/// have no GPUs.
AllocationResult optimize_constrained(
    std::span<const AllocationRequest> requests, int budget_gpus,
    const std::optional<std::map<std::string, int>>& class_budgets =
        std::nullopt);

/// One line describing a solver invocation for the decision trace.
std::string describe_allocation(std::span<const AllocationRequest> requests,
                                const AllocationResult& result);

}  // namespace wva
