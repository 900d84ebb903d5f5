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

#include "wva/global_optimizer.hpp"

#include <algorithm>
#include <sstream>

#include "wva/util.hpp"

namespace wva {

bool higher_priority(const AllocationRequest& a, const AllocationRequest& b) {
  if (a.spare_capacity != b.spare_capacity) {
    return a.spare_capacity < b.spare_capacity;
  }
  if (a.variant_cost != b.variant_cost) return a.variant_cost < b.variant_cost;
  return a.variant_id < b.variant_id;
}

namespace {

std::vector<const AllocationRequest*> priority_sorted(
    std::span<const AllocationRequest> requests) {
  std::vector<const AllocationRequest*> order;
  for (const auto& r : requests) order.push_back(&r);
  std::sort(order.begin(), order.end(),
            [](const AllocationRequest* a, const AllocationRequest* b) {
              return higher_priority(*a, *b);
            });
  return order;
}

}  // namespace

AllocationResult optimize_unconstrained(
    std::span<const AllocationRequest> requests) {
  AllocationResult result;
  for (const auto* r : priority_sorted(requests)) {
    result.priority_order.push_back(r->variant_id);
    result.per_variant_granted[r->variant_id] = r->desired_replicas;
    result.gpus_used += r->desired_replicas * r->gpus_per_replica;
  }
  return result;
}

AllocationResult optimize_constrained(
    std::span<const AllocationRequest> requests, int budget_gpus,
    const std::optional<std::map<std::string, int>>& class_budgets) {
  AllocationResult result;
  result.gpus_budget = budget_gpus;
  auto order = priority_sorted(requests);
  int residual = budget_gpus;
  std::map<std::string, int> class_residual;
  if (class_budgets) class_residual = *class_budgets;

  auto fitting = [&](const AllocationRequest& r, int wanted) {
    int n = residual / r.gpus_per_replica;
    if (class_budgets) {
      auto it = class_residual.find(r.hardware_class);
      int available = it == class_residual.end() ? 0 : it->second;
      n = std::min(n, available / r.gpus_per_replica);
    }
    return std::clamp(n, 0, wanted);
  };
  auto charge = [&](const AllocationRequest& r, int replicas) {
    int gpus = replicas * r.gpus_per_replica;
    residual -= gpus;
    if (class_budgets) class_residual[r.hardware_class] -= gpus;
    result.gpus_used += gpus;
  };

  for (const auto* r : order) {
    result.priority_order.push_back(r->variant_id);
    int base = std::max(0, std::min(r->current_replicas, r->desired_replicas));
    int granted = fitting(*r, base);
    if (granted < base) result.infeasible_base = true;
    charge(*r, granted);
    result.per_variant_granted[r->variant_id] = granted;
  }
  for (const auto* r : order) {
    int base = std::max(0, std::min(r->current_replicas, r->desired_replicas));
    int growth = std::max(0, r->desired_replicas - base);
    int& granted = result.per_variant_granted[r->variant_id];
    if (granted == base && growth > 0) {
      int extra = fitting(*r, growth);
      charge(*r, extra);
      granted += extra;
    }
    int unmet = std::max(0, r->desired_replicas) - granted;
    if (unmet > 0) result.unmet[r->variant_id] = unmet;
  }
  return result;
}

std::string describe_allocation(std::span<const AllocationRequest> requests,
                                const AllocationResult& result) {
  std::ostringstream out;
  out << "mode=" << (result.gpus_budget ? "constrained" : "unconstrained");
  if (result.gpus_budget) out << " budget=" << *result.gpus_budget;
  out << " used=" << result.gpus_used;
  if (result.gpus_budget) out << " residual=" << *result.gpus_budget - result.gpus_used;
  out << " order=";
  for (std::size_t i = 0; i < result.priority_order.size(); ++i) {
    out << (i ? ">" : "") << result.priority_order[i];
  }
  for (const auto& r : requests) {
    out << " " << r.variant_id << "[cur=" << r.current_replicas
        << " want=" << r.desired_replicas
        << " spare=" << format_fixed(r.spare_capacity, 4)
        << " cost=" << format_double(r.variant_cost)
        << " got=" << result.granted(r.variant_id) << "]";
  }
  if (result.infeasible_base) out << " infeasible-base";
  return out.str();
}

}  // namespace wva
