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

#include "wva/workload.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "wva/util.hpp"

namespace wva {

Seconds TrafficProgram::phase_end(std::size_t i, Seconds duration) const {
  if (i + 1 < phases.size()) return std::min(phases[i + 1].start_time, duration);
  return duration;
}

Rng make_stream(std::uint64_t seed, RngStream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return Rng(seq);
}

std::int64_t sample_length(const BoundedNormal& dist, Rng& rng) {
  std::normal_distribution<double> normal(dist.mean, dist.stdev);
  double raw = normal(rng);
  double clamped = std::clamp(raw, static_cast<double>(dist.min),
                              static_cast<double>(dist.max));
  return std::max<std::int64_t>(1, std::llround(clamped));
}

std::vector<RequestSpec> generate_arrivals(const TrafficProgram& program,
                                           Seconds duration,
                                           std::uint64_t seed) {
  Rng arrivals = make_stream(seed, RngStream::kArrivals);
  Rng inputs = make_stream(seed, RngStream::kInputLengths);
  Rng outputs = make_stream(seed, RngStream::kOutputLengths);
  Rng prefixes = make_stream(seed, RngStream::kPrefixKeys);

  std::vector<RequestSpec> out;
  for (std::size_t i = 0; i < program.phases.size(); ++i) {
    const auto& phase = program.phases[i];
    Seconds start = phase.start_time;
    Seconds end = program.phase_end(i, duration);
    if (phase.rps <= 0 || start >= end) continue;

    std::vector<Seconds> times;
    if (program.arrival_process == ArrivalProcess::kDeterministicUniform) {
      for (std::uint64_t k = 0;; ++k) {
        Seconds t = start + static_cast<double>(k) / phase.rps;
        if (t >= end) break;
        times.push_back(t);
      }
    } else {
      std::exponential_distribution<double> gap(phase.rps);
      Seconds t = start;
      while (true) {
        t += gap(arrivals);
        if (t >= end) break;
        times.push_back(t);
      }
    }

    for (Seconds t : times) {
      RequestSpec req;
      req.request_id = out.size();
      req.arrival_time = t;
      req.input_tokens = sample_length(program.input_dist, inputs);
      req.output_tokens = sample_length(program.output_dist, outputs);
      if (program.prefix_groups > 0) {
        std::uniform_int_distribution<int> group(0, program.prefix_groups - 1);
        req.prefix_key = "p" + std::to_string(group(prefixes));
      }
      out.push_back(std::move(req));
    }
  }
  return out;
}

TrafficProgram staircase_program(const std::vector<std::pair<int, double>>& steps,
                                 Seconds step_length) {
  TrafficProgram program;
  for (const auto& [step, rps] : steps) {
    program.phases.push_back({static_cast<double>(step) * step_length, rps});
  }
  return program;
}

void write_arrivals_csv(std::ostream& out,
                        const std::vector<RequestSpec>& requests) {
  out << "request_id,arrival_time,input_tokens,output_tokens\n";
  for (const auto& r : requests) {
    out << r.request_id << ',' << format_double(r.arrival_time) << ','
        << r.input_tokens << ',' << r.output_tokens << '\n';
  }
}

}  // namespace wva
