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

#include "wva/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

#include "wva/metrics_io.hpp"
#include "wva/util.hpp"
#include "wva/workload.hpp"

namespace wva {

namespace {

using json = nlohmann::json;

constexpr const char* kTimeSeriesHeader =
    "tick,variant,replicas_ready,avg_kv,avg_q,rps_in,rps_out,drops,"
    "replicas_observed";

struct MeanAccumulator {
  double sum = 0.0;
  std::uint64_t n = 0;

  void add(std::optional<double> x) {
    if (!x) return;
    sum += *x;
    ++n;
  }
  std::optional<double> mean() const {
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
  }
};

std::vector<Seconds> multiples(Seconds interval, Seconds duration) {
  std::vector<Seconds> out;
  for (std::uint64_t k = 1;; ++k) {
    Seconds t = static_cast<double>(k) * interval;
    if (t > duration) break;
    out.push_back(t);
  }
  return out;
}

void append_series(const Simulator& sim, Seconds tick, Seconds interval,
                   FlowCounters& last_gateway,
                   std::map<VariantId, FlowCounters>& last_variant,
                   std::vector<TimeSeriesRow>& rows) {
  auto snaps = sim.snapshot_metrics();
  auto averages = [&](const std::optional<VariantId>& variant) {
    double kv = 0.0;
    double q = 0.0;
    int n = 0;
    for (const auto& s : snaps) {
      if (variant && s.variant_id != *variant) continue;
      kv += s.kv_usage;
      q += s.queue_depth;
      ++n;
    }
    if (n == 0) return std::pair{0.0, 0.0};
    return std::pair{kv / n, q / n};
  };

  int ready_total = 0;
  int observed_total = 0;
  for (const auto& v : sim.variants()) {
    const auto& now = sim.variant_counters().at(v.variant_id);
    auto& last = last_variant[v.variant_id];
    TimeSeriesRow row;
    row.tick = tick;
    row.variant = v.variant_id;
    row.replicas_ready = sim.ready_replicas(v.variant_id);
    row.replicas_observed = sim.observed_replicas(v.variant_id);
    std::tie(row.avg_kv, row.avg_q) = averages(v.variant_id);
    row.rps_in = static_cast<double>(now.arrived - last.arrived) / interval;
    row.rps_out = static_cast<double>(now.completed - last.completed) / interval;
    row.drops = now.dropped - last.dropped;
    last = now;
    ready_total += row.replicas_ready;
    observed_total += row.replicas_observed;
    rows.push_back(row);
  }
  const auto& now = sim.counters();
  TimeSeriesRow row;
  row.tick = tick;
  row.variant = "*";
  row.replicas_ready = ready_total;
  row.replicas_observed = observed_total;
  std::tie(row.avg_kv, row.avg_q) = averages(std::nullopt);
  row.rps_in = static_cast<double>(now.arrived - last_gateway.arrived) / interval;
  row.rps_out =
      static_cast<double>(now.completed - last_gateway.completed) / interval;
  row.drops = now.dropped - last_gateway.dropped;
  last_gateway = now;
  rows.push_back(row);
}

std::vector<PhaseRow> phase_rows(const ScenarioConfig& cfg,
                                 const std::vector<RequestRecord>& requests,
                                 const std::vector<TimeSeriesRow>& series) {
  const auto& program = cfg.traffic_program;
  std::vector<PhaseRow> rows;
  for (std::size_t i = 0; i < program.phases.size(); ++i) {
    PhaseRow row;
    row.start = program.phases[i].start_time;
    row.end = std::min(program.phase_end(i, cfg.duration), cfg.duration);
    row.rps_target = program.phases[i].rps;
    rows.push_back(row);
  }
  auto phase_of = [&](Seconds t) -> PhaseRow* {
    for (auto& row : rows) {
      if (t >= row.start && t < row.end) return &row;
    }
    return nullptr;
  };

  std::map<const PhaseRow*, std::pair<MeanAccumulator, MeanAccumulator>> latency;
  for (const auto& r : requests) {
    PhaseRow* row = phase_of(r.spec.arrival_time);
    if (row == nullptr) continue;
    ++row->arrived;
    if (r.status == RequestStatus::kCompleted) {
      ++row->completed;
      latency[row].first.add(r.ttft());
      latency[row].second.add(r.itl());
    } else if (r.status == RequestStatus::kDropped) {
      ++row->dropped;
      ++row->drop_causes[static_cast<std::size_t>(*r.drop_cause)];
    }
  }

  std::map<const PhaseRow*, std::pair<double, int>> replicas;
  for (const auto& s : series) {
    PhaseRow* row = phase_of(s.tick);
    if (row == nullptr) continue;
    if (s.variant == "*") {
      replicas[row].first += s.replicas_ready;
      ++replicas[row].second;
      continue;
    }
    const VariantSpec* v = cfg.find_variant(s.variant);
    if (v != nullptr && s.replicas_observed >= v->policy_params.max_replicas) {
      row->max_replicas_hit = true;
    }
  }

  for (auto& row : rows) {
    double length = row.end - row.start;
    if (row.arrived > 0) {
      row.throughput_completed_rps = row.rps_target *
                                     static_cast<double>(row.completed) /
                                     static_cast<double>(row.arrived);
    }
    row.drops_per_s = length > 0 ? static_cast<double>(row.dropped) / length : 0.0;
    row.mean_ttft = latency[&row].first.mean();
    row.mean_itl = latency[&row].second.mean();
    auto [sum, n] = replicas[&row];
    row.mean_replicas = n > 0 ? sum / n : 0.0;
  }
  return rows;
}

std::string render_series_csv(const std::vector<TimeSeriesRow>& rows) {
  std::ostringstream out;
  out << kTimeSeriesHeader << '\n';
  for (const auto& r : rows) {
    out << format_double(r.tick) << ',' << r.variant << ',' << r.replicas_ready
        << ',' << format_double(r.avg_kv) << ',' << format_double(r.avg_q) << ','
        << format_double(r.rps_in) << ',' << format_double(r.rps_out) << ','
        << r.drops << ',' << r.replicas_observed << '\n';
  }
  return out.str();
}

std::string render_requests_csv(const std::vector<RequestRecord>& requests) {
  std::ostringstream out;
  out << "request_id,arrival_time,input_tokens,output_tokens,status,replica_id,"
         "admitted_at,first_token_at,completion_time,drop_cause,dropped_at\n";
  auto opt = [](const std::optional<Seconds>& x) {
    return x ? format_double(*x) : std::string();
  };
  for (const auto& r : requests) {
    std::string status = r.status == RequestStatus::kCompleted ? "completed"
                         : r.status == RequestStatus::kDropped ? "dropped"
                         : r.status == RequestStatus::kActive  ? "active"
                         : r.status == RequestStatus::kQueued  ? "queued"
                                                               : "pending";
    out << r.spec.request_id << ',' << format_double(r.spec.arrival_time) << ','
        << r.spec.input_tokens << ',' << r.spec.output_tokens << ',' << status
        << ',' << (r.replica ? std::to_string(r.replica->value) : "") << ','
        << opt(r.admitted_at) << ',' << opt(r.first_token_at) << ','
        << opt(r.completion_time) << ','
        << (r.drop_cause ? std::string(to_string(*r.drop_cause)) : "") << ','
        << opt(r.dropped_at) << '\n';
  }
  return out.str();
}

std::string render_commands_csv(const std::vector<ActuationCommand>& commands) {
  std::ostringstream out;
  out << "issued_at,variant_id,target_replicas,drain_safe,reason\n";
  for (const auto& c : commands) {
    out << format_double(c.issued_at) << ',' << c.variant_id << ','
        << c.target_replicas << ',' << (c.drain_safe ? 1 : 0) << ',' << c.reason
        << '\n';
  }
  return out.str();
}

std::string render_optimizer_csv(const std::vector<std::string>& lines) {
  std::ostringstream out;
  out << "time,allocation\n";
  for (const auto& line : lines) {
    auto space = line.find(' ');
    out << line.substr(0, space) << ",\"" << line.substr(space + 1) << "\"\n";
  }
  return out.str();
}

json optional_json(const std::optional<double>& x) {
  return x ? json(*x) : json(nullptr);
}

std::optional<double> json_optional(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

json causes_json(const std::array<std::uint64_t, kDropCauseCount>& causes) {
  json out = json::object();
  for (std::size_t i = 0; i < kDropCauseCount; ++i) {
    out[std::string(to_string(static_cast<DropCause>(i)))] = causes[i];
  }
  return out;
}

std::array<std::uint64_t, kDropCauseCount> causes_from(const json& j) {
  std::array<std::uint64_t, kDropCauseCount> out{};
  for (std::size_t i = 0; i < kDropCauseCount; ++i) {
    out[i] = j.at(std::string(to_string(static_cast<DropCause>(i))))
                 .get<std::uint64_t>();
  }
  return out;
}

json summary_json(const RunSummary& s) {
  json phases = json::array();
  for (const auto& p : s.phases) {
    phases.push_back({{"start", p.start},
                      {"end", p.end},
                      {"rps_target", p.rps_target},
                      {"arrived", p.arrived},
                      {"completed", p.completed},
                      {"dropped", p.dropped},
                      {"drop_causes", causes_json(p.drop_causes)},
                      {"throughput_completed_rps", p.throughput_completed_rps},
                      {"drops_per_s", p.drops_per_s},
                      {"mean_ttft", optional_json(p.mean_ttft)},
                      {"mean_itl", optional_json(p.mean_itl)},
                      {"mean_replicas", p.mean_replicas},
                      {"max_replicas_hit", p.max_replicas_hit}});
  }
  const auto& t = s.totals;
  return {{"scenario", s.scenario},
          {"baseline", std::string(to_string(s.baseline))},
          {"optimizer_mode", std::string(to_string(s.optimizer_mode))},
          {"seed", s.seed},
          {"config_digest", s.config_digest},
          {"traffic_digest", s.traffic_digest},
          {"event_log_hash", s.event_log_hash},
          {"phases", phases},
          {"totals",
           {{"arrived", t.arrived},
            {"completed", t.completed},
            {"dropped", t.dropped},
            {"in_flight_at_end", t.in_flight_at_end},
            {"queued_at_end", t.queued_at_end},
            {"drop_causes", causes_json(t.drop_causes)},
            {"commands", t.commands},
            {"mean_ttft", optional_json(t.mean_ttft)},
            {"mean_itl", optional_json(t.mean_itl)}}}};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  write_file(path, text);
}

}  // namespace

std::string sha256_file(const std::filesystem::path& path) {
  return sha256_hex(read_file(path));
}

std::string traffic_digest(const ScenarioConfig& cfg) {
  json full = json::parse(serialize_scenario(cfg));
  json traffic = {{"traffic", full.at("traffic")},
                  {"duration", full.at("duration")}};
  return sha256_hex(traffic.dump());
}

RunResult run_scenario(const ScenarioConfig& config, const RunOptions& options) {
  const ScenarioConfig& cfg = validated(config);

  SimOptions sim_options;
  sim_options.provisioning_delay = cfg.provisioning_delay;
  sim_options.drain_grace = cfg.drain_grace;
  sim_options.weights = cfg.scheduler_weights;
  sim_options.hard_queue_cap = cfg.hard_queue_cap;
  sim_options.check_invariants = options.check_invariants;
  Simulator sim(cfg.variants, sim_options);
  for (const auto& v : cfg.variants) {
    sim.bootstrap_ready(v.variant_id, v.initial_replica_count());
  }
  sim.submit(generate_arrivals(cfg.traffic_program, cfg.duration, cfg.rng_seed));

  RegistryContext context;
  context.sim = &sim;
  context.faults = cfg.faults;
  context.base_dir = cfg.base_dir;
  context.max_age = cfg.control_interval / 2;
  MetricsRegistry registry = registry_build(cfg.metrics, context);
  SimActuator actuator(sim);
  ControlPlane control(cfg, sim, registry, actuator);

  bool wva = cfg.baseline == Baseline::kWva;
  std::set<Seconds> control_ticks;
  std::set<Seconds> fast_ticks;
  for (Seconds t : multiples(cfg.control_interval, cfg.duration)) {
    control_ticks.insert(t);
  }
  if (wva) {
    for (Seconds t : multiples(cfg.scale_from_zero_interval, cfg.duration)) {
      fast_ticks.insert(t);
    }
  }
  std::set<Seconds> ticks = control_ticks;
  ticks.insert(fast_ticks.begin(), fast_ticks.end());

  RunArtifacts artifacts;
  FlowCounters last_gateway;
  std::map<VariantId, FlowCounters> last_variant;
  for (Seconds t : ticks) {
    sim.advance(t);
    if (fast_ticks.count(t) != 0) control.scale_from_zero_tick(t);
    if (control_ticks.count(t) != 0) {
      if (wva) {
        control.control_tick(t);
      } else {
        control.hpa_tick(t);
      }
      append_series(sim, t, cfg.control_interval, last_gateway, last_variant,
                    artifacts.time_series);
    }
  }
  sim.advance(cfg.duration);

  RunSummary summary;
  summary.scenario = cfg.name;
  summary.baseline = cfg.baseline;
  summary.optimizer_mode = cfg.effective_optimizer_mode();
  summary.seed = cfg.rng_seed;
  summary.config_digest =
      options.config_digest.value_or(sha256_hex(serialize_scenario(cfg)));
  summary.traffic_digest = traffic_digest(cfg);
  summary.event_log_hash = sim.event_log_hash();
  summary.phases = phase_rows(cfg, sim.requests(), artifacts.time_series);

  RunTotals& totals = summary.totals;
  const auto& counters = sim.counters();
  totals.arrived = counters.arrived;
  totals.completed = counters.completed;
  totals.dropped = counters.dropped;
  totals.drop_causes = counters.drop_causes;
  totals.in_flight_at_end = sim.in_flight_total();
  totals.queued_at_end = sim.queued_total();
  totals.commands = control.commands().size();
  MeanAccumulator ttft;
  MeanAccumulator itl;
  for (const auto& r : sim.requests()) {
    if (r.status != RequestStatus::kCompleted) continue;
    ttft.add(r.ttft());
    itl.add(r.itl());
  }
  totals.mean_ttft = ttft.mean();
  totals.mean_itl = itl.mean();

  artifacts.snapshots = control.snapshot_log();
  artifacts.decisions = control.decision_trace();
  artifacts.reconciles = control.reconcile_trace();
  artifacts.optimizer_trace = control.optimizer_trace();
  artifacts.commands = control.commands();
  artifacts.events = sim.event_log();
  artifacts.requests = sim.requests();

  if (options.out_dir) {
    const auto& dir = *options.out_dir;
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::kIo, "cannot create " + dir.string());
    write_text(dir / "timeseries.csv", render_series_csv(artifacts.time_series));
    std::ostringstream trace;
    write_decision_trace_csv(trace, artifacts.decisions, artifacts.reconciles);
    write_text(dir / "decision_trace.csv", trace.str());
    write_text(dir / "optimizer_trace.csv",
               render_optimizer_csv(artifacts.optimizer_trace));
    write_text(dir / "commands.csv", render_commands_csv(artifacts.commands));
    write_text(dir / "events.log", sim.render_event_log());
    std::ostringstream snaps;
    write_snapshots_csv(snaps, artifacts.snapshots, true);
    write_text(dir / "snapshots.csv", snaps.str());
    write_text(dir / "requests.csv", render_requests_csv(artifacts.requests));
    write_text(dir / "scenario.json", serialize_scenario(cfg));
    write_summary_json(dir / "summary.json", summary);
  }
  return RunResult{std::move(summary), std::move(artifacts)};
}

RunResult run_scenario_file(const std::filesystem::path& path,
                            const RunOptions& options) {
  ScenarioConfig cfg = load_scenario_file(path);
  RunOptions with_digest = options;
  if (!with_digest.config_digest) with_digest.config_digest = sha256_file(path);
  return run_scenario(cfg, with_digest);
}

std::string summary_to_json(const RunSummary& summary) {
  return summary_json(summary).dump(2) + "\n";
}

void write_summary_json(const std::filesystem::path& path,
                        const RunSummary& summary) {
  write_text(path, summary_to_json(summary));
}

RunSummary read_summary_json(const std::filesystem::path& path) {
  std::string text = read_file(path);
  try {
    json j = json::parse(text);
    RunSummary s;
    s.scenario = j.at("scenario").get<std::string>();
    s.baseline = j.at("baseline").get<std::string>() == "hpa" ? Baseline::kHpa
                                                              : Baseline::kWva;
    s.optimizer_mode = j.at("optimizer_mode").get<std::string>() == "constrained"
                           ? OptimizerMode::kConstrained
                           : OptimizerMode::kUnconstrained;
    s.seed = j.at("seed").get<std::uint64_t>();
    s.config_digest = j.at("config_digest").get<std::string>();
    s.traffic_digest = j.at("traffic_digest").get<std::string>();
    s.event_log_hash = j.at("event_log_hash").get<std::string>();
    for (const auto& p : j.at("phases")) {
      PhaseRow row;
      row.start = p.at("start").get<double>();
      row.end = p.at("end").get<double>();
      row.rps_target = p.at("rps_target").get<double>();
      row.arrived = p.at("arrived").get<std::uint64_t>();
      row.completed = p.at("completed").get<std::uint64_t>();
      row.dropped = p.at("dropped").get<std::uint64_t>();
      row.drop_causes = causes_from(p.at("drop_causes"));
      row.throughput_completed_rps = p.at("throughput_completed_rps").get<double>();
      row.drops_per_s = p.at("drops_per_s").get<double>();
      row.mean_ttft = json_optional(p.at("mean_ttft"));
      row.mean_itl = json_optional(p.at("mean_itl"));
      row.mean_replicas = p.at("mean_replicas").get<double>();
      row.max_replicas_hit = p.at("max_replicas_hit").get<bool>();
      s.phases.push_back(row);
    }
    const auto& t = j.at("totals");
    s.totals.arrived = t.at("arrived").get<std::uint64_t>();
    s.totals.completed = t.at("completed").get<std::uint64_t>();
    s.totals.dropped = t.at("dropped").get<std::uint64_t>();
    s.totals.in_flight_at_end = t.at("in_flight_at_end").get<std::uint64_t>();
    s.totals.queued_at_end = t.at("queued_at_end").get<std::uint64_t>();
    s.totals.drop_causes = causes_from(t.at("drop_causes"));
    s.totals.commands = t.at("commands").get<std::uint64_t>();
    s.totals.mean_ttft = json_optional(t.at("mean_ttft"));
    s.totals.mean_itl = json_optional(t.at("mean_itl"));
    return s;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, path.string() + ": " + e.what());
  }
}

std::optional<double> ComparisonRow::throughput_improvement() const {
  if (throughput_b == 0.0) return std::nullopt;
  return (throughput_a - throughput_b) / throughput_b;
}

std::optional<double> ComparisonRow::drop_ratio() const {
  if (drops_per_s_b == 0.0) return std::nullopt;
  return drops_per_s_a / drops_per_s_b;
}

ComparisonTable compare_runs(const RunSummary& a, const RunSummary& b) {
  if (a.traffic_digest != b.traffic_digest || a.seed != b.seed ||
      a.phases.size() != b.phases.size()) {
    throw Error(ErrorCode::kMismatchedTraffic,
                "runs differ in traffic program or seed");
  }
  ComparisonTable table;
  table.label_a = std::string(to_string(a.baseline));
  table.label_b = std::string(to_string(b.baseline));
  for (std::size_t i = 0; i < a.phases.size(); ++i) {
    const auto& pa = a.phases[i];
    const auto& pb = b.phases[i];
    ComparisonRow row;
    row.rps_target = pa.rps_target;
    row.throughput_a = pa.throughput_completed_rps;
    row.throughput_b = pb.throughput_completed_rps;
    row.drops_per_s_a = pa.drops_per_s;
    row.drops_per_s_b = pb.drops_per_s;
    row.ttft_a = pa.mean_ttft;
    row.ttft_b = pb.mean_ttft;
    row.itl_a = pa.mean_itl;
    row.itl_b = pb.mean_itl;
    row.replicas_a = pa.mean_replicas;
    row.replicas_b = pb.mean_replicas;
    table.rows.push_back(row);
  }
  table.total_drops_a = a.totals.dropped;
  table.total_drops_b = b.totals.dropped;
  return table;
}

void write_comparison_csv(std::ostream& out, const ComparisonTable& table) {
  const auto& a = table.label_a;
  const auto& b = table.label_b;
  out << "rps_target,throughput_" << a << ",throughput_" << b
      << ",throughput_delta,throughput_improvement,drops_per_s_" << a
      << ",drops_per_s_" << b << ",drops_delta,drop_ratio,ttft_" << a << ",ttft_"
      << b << ",itl_" << a << ",itl_" << b << ",replicas_" << a << ",replicas_"
      << b << '\n';
  for (const auto& r : table.rows) {
    out << format_double(r.rps_target) << ',' << format_double(r.throughput_a)
        << ',' << format_double(r.throughput_b) << ','
        << format_double(r.throughput_delta()) << ','
        << format_optional(r.throughput_improvement()) << ','
        << format_double(r.drops_per_s_a) << ',' << format_double(r.drops_per_s_b)
        << ',' << format_double(r.drops_delta()) << ','
        << format_optional(r.drop_ratio()) << ',' << format_optional(r.ttft_a)
        << ',' << format_optional(r.ttft_b) << ',' << format_optional(r.itl_a)
        << ',' << format_optional(r.itl_b) << ',' << format_double(r.replicas_a)
        << ',' << format_double(r.replicas_b) << '\n';
  }
}

PlotEmission emit_plot_data(const std::filesystem::path& run_dir,
                            const std::filesystem::path& out_dir) {
  PlotEmission emission;
  if (!std::filesystem::is_directory(run_dir)) {
    throw Error(ErrorCode::kIo, "no run directory " + run_dir.string());
  }
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + out_dir.string());

  auto emit = [&](const std::string& name, const std::string& text) {
    write_text(out_dir / name, text);
    emission.files.push_back(out_dir / name);
  };

  std::set<Seconds> scale_up_ticks;
  auto trace_path = run_dir / "decision_trace.csv";
  bool have_trace = std::filesystem::exists(trace_path);
  if (have_trace) {
    std::istringstream in(read_file(trace_path));
    std::string line;
    std::getline(in, line);
    auto header = split_csv(line);
    auto column = [&](const std::string& name) {
      return static_cast<std::size_t>(
          std::find(header.begin(), header.end(), name) - header.begin());
    };
    std::size_t time_col = column("time");
    std::size_t dir_col = column("direction");
    std::size_t cmd_col = column("command_target");
    while (std::getline(in, line)) {
      auto f = split_csv(line);
      if (f.size() <= std::max({time_col, dir_col, cmd_col})) continue;
      if (f[dir_col] == "up" && !f[cmd_col].empty()) {
        if (auto t = parse_double(f[time_col])) scale_up_ticks.insert(*t);
      }
    }
  } else {
    emission.warnings.push_back(
        "decision_trace.csv missing; reactivity scale_up column left empty");
  }

  auto series_path = run_dir / "timeseries.csv";
  if (std::filesystem::exists(series_path)) {
    std::istringstream in(read_file(series_path));
    std::string line;
    std::getline(in, line);
    std::ostringstream reactivity;
    reactivity << "tick,replicas_ready,replicas_observed,rps_in,avg_kv,scale_up\n";
    std::vector<std::string> variants;
    std::map<Seconds, std::map<std::string, std::string>> tiering;
    while (std::getline(in, line)) {
      auto f = split_csv(line);
      if (f.size() < 9) continue;
      auto tick = parse_double(f[0]);
      if (!tick) continue;
      if (f[1] == "*") {
        reactivity << f[0] << ',' << f[2] << ',' << f[8] << ',' << f[5] << ','
                   << f[3] << ','
                   << (have_trace ? (scale_up_ticks.count(*tick) ? "1" : "0") : "")
                   << '\n';
        continue;
      }
      if (std::find(variants.begin(), variants.end(), f[1]) == variants.end()) {
        variants.push_back(f[1]);
      }
      tiering[*tick][f[1]] = f[2];
    }
    emit("reactivity.csv", reactivity.str());
    std::ostringstream cost;
    cost << "tick";
    for (const auto& v : variants) cost << ',' << v;
    cost << '\n';
    for (const auto& [tick, per_variant] : tiering) {
      cost << format_double(tick);
      for (const auto& v : variants) {
        auto it = per_variant.find(v);
        cost << ',' << (it == per_variant.end() ? "" : it->second);
      }
      cost << '\n';
    }
    emit("cost_tiering.csv", cost.str());
  } else {
    emission.warnings.push_back(
        "timeseries.csv missing; reactivity and cost tiering skipped");
  }

  auto summary_path = run_dir / "summary.json";
  if (std::filesystem::exists(summary_path)) {
    RunSummary summary = read_summary_json(summary_path);
    std::ostringstream phases;
    phases << "start,end,rps_target,throughput_completed_rps,drops_per_s,"
              "mean_ttft,mean_itl,mean_replicas,max_replicas_hit\n";
    for (const auto& p : summary.phases) {
      phases << format_double(p.start) << ',' << format_double(p.end) << ','
             << format_double(p.rps_target) << ','
             << format_double(p.throughput_completed_rps) << ','
             << format_double(p.drops_per_s) << ',' << format_optional(p.mean_ttft)
             << ',' << format_optional(p.mean_itl) << ','
             << format_double(p.mean_replicas) << ','
             << (p.max_replicas_hit ? 1 : 0) << '\n';
    }
    emit("phases.csv", phases.str());
  } else {
    emission.warnings.push_back("summary.json missing; phases skipped");
  }
  return emission;
}

PlotEmission emit_comparison_plot_data(const ComparisonTable& table,
                                       const std::filesystem::path& out_dir) {
  PlotEmission emission;
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + out_dir.string());
  auto emit = [&](const std::string& name, const std::string& text) {
    write_text(out_dir / name, text);
    emission.files.push_back(out_dir / name);
  };
  const auto& a = table.label_a;
  const auto& b = table.label_b;

  std::ostringstream throughput;
  std::ostringstream drops;
  std::ostringstream latency;
  throughput << "rps_target," << a << ',' << b << '\n';
  drops << "rps_target," << a << ',' << b << '\n';
  latency << "rps_target,ttft_" << a << ",ttft_" << b << ",itl_" << a << ",itl_"
          << b << '\n';
  for (const auto& r : table.rows) {
    std::string rps = format_double(r.rps_target);
    throughput << rps << ',' << format_double(r.throughput_a) << ','
               << format_double(r.throughput_b) << '\n';
    drops << rps << ',' << format_double(r.drops_per_s_a) << ','
          << format_double(r.drops_per_s_b) << '\n';
    latency << rps << ',' << format_optional(r.ttft_a) << ','
            << format_optional(r.ttft_b) << ',' << format_optional(r.itl_a) << ','
            << format_optional(r.itl_b) << '\n';
  }
  emit("throughput_vs_rps.csv", throughput.str());
  emit("drops_vs_rps.csv", drops.str());
  emit("latency_vs_rps.csv", latency.str());
  std::ostringstream summary;
  write_comparison_csv(summary, table);
  emit("stepped_summary.csv", summary.str());
  return emission;
}

}  // namespace wva
