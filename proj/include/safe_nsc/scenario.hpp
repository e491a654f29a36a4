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
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "safe_nsc/baselines.hpp"
#include "safe_nsc/regret.hpp"

namespace safe_nsc {

enum class ScenarioKind { Quadrotor, Synthetic2d, Custom };
enum class WeightSchedule { Constant, Sinusoidal, Step };
enum class ControllerKind { SafeOgd, FixedGain, Dac };
enum class ComparatorMode { None, Dynamic, Fixed };
enum class MetricKind { Identity, Lqr };

std::string_view to_string(ScenarioKind kind);
std::string_view to_string(WeightSchedule schedule);
std::string_view to_string(ControllerKind kind);
std::string_view to_string(ComparatorMode mode);
std::string_view to_string(MetricKind kind);

/// Everything a run depends on. Serialises to and from the scenario file
/// format; the summary of every run embeds the full config.
struct ScenarioConfig {
  ScenarioKind scenario = ScenarioKind::Custom;
  int horizon = 0;
  std::uint64_t seed = 0;

  NoiseFamily family = NoiseFamily::Gaussian;
  std::optional<NoiseParams> noise_params;  // family defaults when unset
  double noise_bound = 0.1;

  // Custom plants; presets fill these in build_scenario.
  Matrix a;
  Matrix b;
  std::uint64_t system_seed = 0;  // synthetic2d sampling
  Vector state_lo;                // empty: no state constraints
  Vector state_hi;
  Vector input_lo;
  Vector input_hi;

  WeightSchedule schedule = WeightSchedule::Constant;
  Matrix q;  // base weights, scaled by the schedule
  Matrix r;

  double kappa = 5.0;
  double gamma = 0.02;
  std::optional<double> eta;
  double eta_scale = 1.0;  // multiplies the default step size when eta is unset
  /// 1 or 2 selects eta_1 or eta_2 of protocol_step_sizes for Safe-OGD and
  /// dac.eta or 8 dac.eta for DAC; 0 leaves both as configured.
  int protocol_step = 0;
  MetricKind metric = MetricKind::Identity;
  InitPolicy init = InitPolicy::ProjectZero;
  bool time_invariant_set = false;
  ProjectionConfig projection;

  std::vector<ControllerKind> controllers{ControllerKind::SafeOgd};
  DacConfig dac;
  ComparatorMode comparator = ComparatorMode::Dynamic;
  ComparatorConfig comparator_cfg;

  std::optional<Vector> initial_state;
  std::string output_dir;

  void validate() const;
};

/// Bit-frozen presets.
ScenarioConfig quadrotor_preset();
ScenarioConfig synthetic2d_preset();
ScenarioConfig preset(ScenarioKind kind);

/// Scenario files are JSON objects. A "scenario" key selects a preset whose
/// values the remaining keys override. Unknown keys raise ValidationError;
/// malformed text raises ParseError with the line number.
ScenarioConfig parse_config(const std::string& text);
ScenarioConfig load_config(const std::filesystem::path& path);
ScenarioConfig config_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const ScenarioConfig& cfg);

/// Per-step weights (q_t, r_t) of the schedule, 0-based t.
std::pair<double, double> schedule_weights(WeightSchedule schedule, int t, int horizon);

/// synthetic2d plant: entries drawn from the noise family, A rescaled to
/// spectral radius 0.9, redrawn until (A, B) is controllable and the gain
/// set has an interior point.
struct SampledSystem {
  Matrix a;
  Matrix b;
  double raw_spectral_radius = 0.0;
  int attempts = 0;
};
SampledSystem sample_synthetic_system(const ScenarioConfig& cfg);

/// Fully built problem of a config.
struct ScenarioInstance {
  ScenarioConfig config;
  LtvSystem sys;
  SafetySpec safety;
  LossSpec loss;
  NoiseModel noise;
  ControllerConfig controller;
  BoundConstants consts;
  nlohmann::json provenance;
};
ScenarioInstance build_scenario(const ScenarioConfig& cfg);

/// Step sizes of the two-step-size protocol: eta_1 = D_f / G_f sqrt(7 / 2T)
/// and eta_2 = 8 eta_1.
std::pair<double, double> protocol_step_sizes(const BoundConstants& consts, int horizon);

struct RunSummary {
  std::string controller;
  double cumulative_loss = 0.0;
  std::optional<double> regret;
  std::optional<double> bound;
  std::optional<double> path_length;
  double set_variation = 0.0;
  double max_state_norm = 0.0;
  double max_input_norm = 0.0;
  double max_grad_norm = 0.0;
  int violations = 0;
  double wall_clock_s = 0.0;
  double eta = 0.0;
  nlohmann::json provenance;
};

struct ControllerRun {
  RunTrace trace;
  std::optional<RegretReport> regret;
  RunSummary summary;
};

struct ScenarioResult {
  ScenarioConfig config;
  BoundConstants consts;
  std::vector<ControllerRun> runs;
};

/// Runs every configured controller on the same noise sequence.
ScenarioResult run_scenario(const ScenarioConfig& cfg);

nlohmann::json summary_to_json(const RunSummary& s, const BoundConstants& consts,
                               const std::optional<RegretReport>& report);

/// Columns t, x0.., u0.., w0.., loss, zeta, min_slack; 17 significant digits.
void write_trace_csv(const std::filesystem::path& path, const RunTrace& trace);

struct TraceRow {
  int t = 0;
  Vector x;
  Vector u;
  Vector w;
  double loss = 0.0;
  double zeta = 0.0;
  double min_slack = 0.0;
};
std::vector<TraceRow> read_trace_csv(const std::filesystem::path& path);

/// Long format (t, series, value): state_norm, input_norm, loss,
/// cumulative_loss and, with a report, cumulative_regret and regret_bound.
void export_plot_data(const std::filesystem::path& path, const ControllerRun& run);

/// Writes <controller>_trace.csv, <controller>_summary.json and
/// <controller>_plot.csv per controller into `dir`.
void write_outputs(const std::filesystem::path& dir, const ScenarioResult& result);

struct VerifyReport {
  int steps = 0;
  int safety_violations = 0;
  int noise_violations = 0;
  double max_dynamics_defect = 0.0;
  bool bound_checked = false;
  bool bound_dominates = true;
  std::vector<std::string> problems;
  bool ok() const { return problems.empty(); }
};

/// Re-checks a written trace against its summary (same stem, _summary.json):
/// the realized dynamics, the constraints, the noise bound and, when the
/// summary carries them, regret against the bound at every prefix.
VerifyReport verify_trace(const std::filesystem::path& trace_csv);

}  // namespace safe_nsc
