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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "wva/harness.hpp"
#include "wva/scenario.hpp"
#include "wva/util.hpp"
#include "wva/workload.hpp"

namespace {

constexpr int kExitError = 1;
constexpr int kExitInvalid = 2;

std::optional<wva::OptimizerMode> parse_mode(const std::string& text) {
  if (text == "constrained") return wva::OptimizerMode::kConstrained;
  if (text == "unconstrained") return wva::OptimizerMode::kUnconstrained;
  return std::nullopt;
}

void print_summary(const wva::RunSummary& s, const std::filesystem::path& out) {
  std::cout << "scenario " << s.scenario << " baseline "
            << wva::to_string(s.baseline) << " seed " << s.seed << "\n";
  std::cout << "  arrived " << s.totals.arrived << " completed "
            << s.totals.completed << " dropped " << s.totals.dropped
            << " commands " << s.totals.commands << "\n";
  for (const auto& p : s.phases) {
    std::cout << "  phase [" << wva::format_double(p.start) << ", "
              << wva::format_double(p.end) << ") rps "
              << wva::format_double(p.rps_target) << " throughput "
              << wva::format_fixed(p.throughput_completed_rps, 3) << " drops/s "
              << wva::format_fixed(p.drops_per_s, 3) << " replicas "
              << wva::format_fixed(p.mean_replicas, 2)
              << (p.max_replicas_hit ? " (max hit)" : "") << "\n";
  }
  std::cout << "  event log " << s.event_log_hash << "\n";
  std::cout << "  artifacts " << out.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Closed-loop simulator for saturation-based LLM inference autoscaling"};
  app.require_subcommand(1);

  std::string scenario_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::string baseline;
  std::string mode;
  bool check_invariants = false;
  auto* run = app.add_subcommand("run", "Run one scenario");
  run->add_option("scenario", scenario_path, "Scenario JSON file")->required();
  run->add_option("--out", out_dir, "Artifact directory");
  run->add_option("--seed", seed, "Override the scenario seed");
  run->add_option("--baseline", baseline, "wva or hpa")
      ->check(CLI::IsMember({"wva", "hpa"}));
  run->add_option("--optimizer-mode", mode, "constrained or unconstrained")
      ->check(CLI::IsMember({"constrained", "unconstrained"}));
  run->add_flag("--check-invariants", check_invariants,
                "Verify simulator invariants after every event");

  std::string dir_a;
  std::string dir_b;
  std::string compare_out;
  auto* compare = app.add_subcommand("compare", "Compare two run directories");
  compare->add_option("dir_a", dir_a, "First run directory")->required();
  compare->add_option("dir_b", dir_b, "Second run directory")->required();
  compare->add_option("--out", compare_out, "Directory for comparison tables");

  std::string plot_run;
  std::string plot_out;
  auto* plot = app.add_subcommand("plot", "Emit plot-ready tables for a run");
  plot->add_option("run_dir", plot_run, "Run directory")->required();
  plot->add_option("--out", plot_out, "Output directory (default run_dir/plots)");

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "Validate a scenario file");
  validate->add_option("scenario", validate_path, "Scenario JSON file")->required();

  std::string arrivals_path;
  std::string arrivals_out;
  auto* arrivals = app.add_subcommand("arrivals", "Write the request stream as CSV");
  arrivals->add_option("scenario", arrivals_path, "Scenario JSON file")->required();
  arrivals->add_option("--out", arrivals_out, "CSV path (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      wva::ScenarioConfig cfg = wva::load_scenario_file(scenario_path);
      if (seed) cfg.rng_seed = *seed;
      if (!baseline.empty()) {
        cfg.baseline = baseline == "hpa" ? wva::Baseline::kHpa : wva::Baseline::kWva;
      }
      if (const char* env = std::getenv("WVA_OPTIMIZER_MODE");
          env != nullptr && mode.empty()) {
        if (!parse_mode(env)) {
          std::cerr << "WVA_OPTIMIZER_MODE must be constrained or unconstrained\n";
          return kExitInvalid;
        }
        mode = env;
      }
      if (!mode.empty()) cfg.optimizer_mode = parse_mode(mode);
      auto report = wva::validate_scenario(cfg);
      if (!report.ok()) {
        std::cerr << report.to_string();
        return kExitInvalid;
      }
      std::filesystem::path out =
          out_dir.empty() ? std::filesystem::path("runs") /
                                (cfg.name + "-" +
                                 std::string(wva::to_string(cfg.baseline)))
                          : std::filesystem::path(out_dir);
      wva::RunOptions options;
      options.out_dir = out;
      options.config_digest = wva::sha256_file(scenario_path);
      options.check_invariants = check_invariants;
      auto result = wva::run_scenario(cfg, options);
      print_summary(result.summary, out);
      return 0;
    }
    if (*compare) {
      auto a = wva::read_summary_json(std::filesystem::path(dir_a) / "summary.json");
      auto b = wva::read_summary_json(std::filesystem::path(dir_b) / "summary.json");
      auto table = wva::compare_runs(a, b);
      wva::write_comparison_csv(std::cout, table);
      std::cout << "total_drops_" << table.label_a << "," << table.total_drops_a
                << "\ntotal_drops_" << table.label_b << "," << table.total_drops_b
                << "\n";
      if (!compare_out.empty()) {
        auto emitted = wva::emit_comparison_plot_data(table, compare_out);
        for (const auto& f : emitted.files) std::cerr << "wrote " << f.string() << "\n";
      }
      return 0;
    }
    if (*plot) {
      std::filesystem::path out =
          plot_out.empty() ? std::filesystem::path(plot_run) / "plots"
                           : std::filesystem::path(plot_out);
      auto emitted = wva::emit_plot_data(plot_run, out);
      for (const auto& w : emitted.warnings) std::cerr << "warning: " << w << "\n";
      for (const auto& f : emitted.files) std::cout << f.string() << "\n";
      return 0;
    }
    if (*validate) {
      auto cfg = wva::load_scenario_file(validate_path);
      auto report = wva::validate_scenario(cfg);
      if (!report.ok()) {
        std::cerr << report.to_string();
        return kExitInvalid;
      }
      std::cout << "ok\n";
      return 0;
    }
    if (*arrivals) {
      auto cfg = wva::load_scenario_file(arrivals_path);
      auto requests = wva::generate_arrivals(cfg.traffic_program, cfg.duration,
                                             cfg.rng_seed);
      if (arrivals_out.empty()) {
        wva::write_arrivals_csv(std::cout, requests);
      } else {
        std::ofstream file(arrivals_out);
        wva::write_arrivals_csv(file, requests);
      }
      return 0;
    }
  } catch (const wva::Error& e) {
    std::cerr << "error [" << wva::to_string(e.code()) << "]: " << e.what() << "\n";
    bool invalid = e.code() == wva::ErrorCode::kInvalidField ||
                   e.code() == wva::ErrorCode::kDuplicateVariantId ||
                   e.code() == wva::ErrorCode::kGammaNotBelowTau ||
                   e.code() == wva::ErrorCode::kParseError ||
                   e.code() == wva::ErrorCode::kUnknownSourceKind;
    return invalid ? kExitInvalid : kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
