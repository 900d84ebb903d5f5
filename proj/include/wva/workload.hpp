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

#include <cstdint>
#include <iosfwd>
#include <random>
#include <vector>

#include "wva/domain.hpp"

namespace wva {

/// Normal(mean, stdev) clamped into [min, max] and rounded to an integer.
struct BoundedNormal {
  std::int64_t min = 1;
  std::int64_t max = 1;
  double mean = 1.0;
  double stdev = 1.0;

  bool operator==(const BoundedNormal&) const = default;
};

struct TrafficPhase {
  Seconds start_time = 0.0;
  double rps = 0.0;

  bool operator==(const TrafficPhase&) const = default;
};

struct TrafficProgram {
  std::vector<TrafficPhase> phases;
  ArrivalProcess arrival_process = ArrivalProcess::kDeterministicUniform;
  BoundedNormal input_dist{10, 8192, 4096.0, 2048.0};
  BoundedNormal output_dist{10, 2048, 1024.0, 512.0};
  // Number of distinct prefix keys drawn uniformly per request; 0 disables
  // prefix keys entirely.
  int prefix_groups = 0;

  /// End of phase `i`; the last phase runs until `duration`.
  Seconds phase_end(std::size_t i, Seconds duration) const;

  bool operator==(const TrafficProgram&) const = default;
};

using Rng = std::mt19937_64;

/// Independent random streams derived from one scenario seed. Arrival timing
/// and token lengths draw from separate streams so that either can be
/// re-simulated on its own.
enum class RngStream : std::uint64_t {
  kArrivals = 1,
  kInputLengths = 2,
  kOutputLengths = 3,
  kPrefixKeys = 4,
  kScheduler = 5,
};

Rng make_stream(std::uint64_t seed, RngStream stream);

std::int64_t sample_length(const BoundedNormal& dist, Rng& rng);

/// Open-loop arrivals for [0, duration). Requests are ordered by arrival time
/// and numbered sequentially from 0.
std::vector<RequestSpec> generate_arrivals(const TrafficProgram& program,
                                           Seconds duration,
                                           std::uint64_t seed);

/// Staircase program with rate changes aligned to control ticks: step k
/// begins at k * step_length.
TrafficProgram staircase_program(const std::vector<std::pair<int, double>>& steps,
                                 Seconds step_length);

/// CSV columns: request_id,arrival_time,input_tokens,output_tokens.
void write_arrivals_csv(std::ostream& out,
                        const std::vector<RequestSpec>& requests);

}  // namespace wva
