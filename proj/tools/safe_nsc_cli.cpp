/*
 Copyright 2026 The safe-nsc Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "safe_nsc/batch.hpp"
#include "safe_nsc/errors.hpp"
#include "safe_nsc/scenario.hpp"

namespace {

using safe_nsc::ErrorCode;

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::ParseError:
    case ErrorCode::ValidationError:
    case ErrorCode::UnknownFamily:
      return 2;
    case ErrorCode::InfeasibleSafeSet:
      return 3;
    case ErrorCode::InvariantViolation:
      return 4;
    default:
      return 1;
  }
}

struct RunArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> horizon;
  std::optional<double> eta;
  std::optional<double> kappa;
  std::optional<double> gamma;
  std::optional<std::string> dist;
  std::string out;
};

void print_summary(const safe_nsc::ScenarioResult& result) {
  for (const auto& run : result.runs) {
    const auto& s = run.summary;
    std::printf("%-10s loss %.6g  max|x| %.4g  max|u| %.4g  violations %d  eta %.4g  %.2fs", s.controller.c_str(),
                s.cumulative_loss, s.max_state_norm, s.max_input_norm, s.violations, s.eta, s.wall_clock_s);
    if (s.regret) {
      std::printf("  regret %.6g  bound %.6g  C_T %.4g  S_T %.4g", *s.regret, *s.bound, *s.path_length,
                  s.set_variation);
    }
    std::printf("\n");
  }
}

int run_command(const RunArgs& args) {
  safe_nsc::ScenarioConfig cfg = safe_nsc::load_config(args.config);
  if (args.seed) cfg.seed = *args.seed;
  if (args.horizon) cfg.horizon = *args.horizon;
  if (args.eta) {
    cfg.eta = *args.eta;
    cfg.protocol_step = 0;
  }
  if (args.kappa) cfg.kappa = *args.kappa;
  if (args.gamma) cfg.gamma = *args.gamma;
  if (args.dist) {
    const safe_nsc::NoiseFamily family = safe_nsc::parse_family(*args.dist);
    if (family != cfg.family) cfg.noise_params.reset();
    cfg.family = family;
  }
  if (!args.out.empty()) cfg.output_dir = args.out;
  cfg.validate();
  const safe_nsc::ScenarioResult result = safe_nsc::run_scenario(cfg);
  if (!cfg.output_dir.empty()) safe_nsc::write_outputs(cfg.output_dir, result);
  print_summary(result);
  for (const auto& run : result.runs) {
    if (run.summary.violations != 0) return 4;
  }
  return 0;
}

int batch_command(const std::string& grid_path, const std::string& out) {
  const safe_nsc::BatchGrid grid = safe_nsc::load_grid(grid_path);
  const safe_nsc::BatchResult result = safe_nsc::run_batch(grid, out);
  for (const auto& e : result.entries) {
    if (!e.result) {
      std::printf("%-40s FAILED  %s\n", e.label.c_str(), e.error.c_str());
      continue;
    }
    for (const auto& run : e.result->runs) {
      std::printf("%-40s %-10s loss %.6g  violations %d\n", e.label.c_str(), run.summary.controller.c_str(),
                  run.summary.cumulative_loss, run.summary.violations);
    }
  }
  for (const auto& row : result.table) {
    if (row.reference_flag) {
      std::printf("note: %s Safe-OGD loss differs from the published %.2f by more than 10x\n",
                  std::string(safe_nsc::family_name(row.family)).c_str(), *row.paper_reference);
    }
  }
  std::printf("%zu runs, %d failed\n", result.entries.size(), result.failures());
  return result.failures() == 0 ? 0 : 1;
}

int verify_command(const std::string& trace) {
  const safe_nsc::VerifyReport rep = safe_nsc::verify_trace(trace);
  std::printf("steps %d  constraint violations %d  noise violations %d  dynamics defect %.3g  bound %s\n", rep.steps,
              rep.safety_violations, rep.noise_violations, rep.max_dynamics_defect,
              rep.bound_checked ? (rep.bound_dominates ? "dominates" : "exceeded") : "not recorded");
  for (const std::string& p : rep.problems) std::printf("problem: %s\n", p.c_str());
  return rep.ok() ? 0 : 4;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Safe-OGD control simulator"};
  app.require_subcommand(1);

  RunArgs run;
  CLI::App* run_cmd = app.add_subcommand("run", "Run one scenario");
  run_cmd->add_option("--config", run.config, "Scenario file")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--seed", run.seed, "Noise seed");
  run_cmd->add_option("--horizon", run.horizon, "Horizon T");
  run_cmd->add_option("--eta", run.eta, "Safe-OGD step size");
  run_cmd->add_option("--kappa", run.kappa, "Gain norm cap");
  run_cmd->add_option("--gamma", run.gamma, "Contraction margin");
  run_cmd->add_option("--dist", run.dist, "Noise family");
  run_cmd->add_option("--out", run.out, "Output directory");

  std::string grid;
  std::string batch_out;
  CLI::App* batch_cmd = app.add_subcommand("batch", "Run a grid of scenarios");
  batch_cmd->add_option("--grid", grid, "Grid file")->required()->check(CLI::ExistingFile);
  batch_cmd->add_option("--out", batch_out, "Output directory")->required();

  std::string trace;
  CLI::App* verify_cmd = app.add_subcommand("verify", "Re-check a written trace");
  verify_cmd->add_option("--trace", trace, "Trace CSV")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  try {
    if (*run_cmd) return run_command(run);
    if (*batch_cmd) return batch_command(grid, batch_out);
    return verify_command(trace);
  } catch (const safe_nsc::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
