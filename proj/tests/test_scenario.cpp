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
#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "safe_nsc/batch.hpp"
#include "safe_nsc/errors.hpp"
#include "safe_nsc/linalg.hpp"
#include "safe_nsc/scenario.hpp"

namespace safe_nsc {
namespace {

namespace fs = std::filesystem;

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("safe_nsc_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no exception";
  return ErrorCode::InvariantViolation;
}

TEST(Presets, Quadrotor) {
  const ScenarioConfig q = quadrotor_preset();
  EXPECT_EQ(q.horizon, 500);
  EXPECT_EQ(q.noise_bound, 0.1);
  EXPECT_EQ(q.a.rows(), 6);
  EXPECT_EQ(q.b.cols(), 3);
  EXPECT_EQ(q.input_hi(0), std::numbers::pi);
  EXPECT_EQ(q.input_hi(2), 20.0);
  EXPECT_EQ(q.state_hi, Vector::Ones(6));
  EXPECT_NO_THROW(q.validate());
}

TEST(Presets, Synthetic2d) {
  const ScenarioConfig s = synthetic2d_preset();
  EXPECT_EQ(s.horizon, 1000);
  EXPECT_EQ(s.input_hi(0), 3.0);
  EXPECT_EQ(s.state_lo.size(), 0);
  EXPECT_NO_THROW(s.validate());
}

TEST(ParseConfig, PresetWithOverrides) {
  const ScenarioConfig c = parse_config(R"({"scenario": "quadrotor", "horizon": 20, "noise": {"family": "weibull"},
                                          "controller": {"kappa": 4}})");
  EXPECT_EQ(c.horizon, 20);
  EXPECT_EQ(c.family, NoiseFamily::Weibull);
  EXPECT_EQ(c.kappa, 4.0);
  EXPECT_EQ(c.gamma, quadrotor_preset().gamma);
}

TEST(ParseConfig, Errors) {
  EXPECT_EQ(code_of([] {
              parse_config(R"({"scenario": "custom", "system": {"A": [[1]], "B": [[1]]},
                               "safety": {"input_lo": [-1], "input_hi": [1]}, "loss": {"Q": [[1]], "R": [[1]]}})");
            }),
            ErrorCode::ValidationError);
  try {
    parse_config(R"({"scenario": "quadrotor", "controller": {"kapa": 4}})");
    FAIL() << "expected ValidationError";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ValidationError);
    EXPECT_NE(std::string(e.what()).find("controller.kapa"), std::string::npos) << e.what();
  }
  try {
    parse_config("{\n  \"scenario\": \"quadrotor\",\n  \"horizon\": ,\n}");
    FAIL() << "expected ParseError";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ParseError);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
  EXPECT_EQ(code_of([] { parse_config(R"({"scenario": "quadrotor", "noise": {"family": "cauchy"}})"); }),
            ErrorCode::ValidationError);
  EXPECT_EQ(code_of([] { parse_config(R"({"scenario": "quadrotor", "horizon": -3})"); }),
            ErrorCode::ValidationError);
  EXPECT_EQ(code_of([] { load_config("/nonexistent/safe_nsc.json"); }), ErrorCode::IoError);
}

TEST(ConfigJson, RoundTrip) {
  for (ScenarioConfig c : {quadrotor_preset(), synthetic2d_preset()}) {
    c.noise_params = NoiseParams{2.0, 0.5};
    c.family = NoiseFamily::Gamma;
    c.eta = 0.03;
    const nlohmann::json doc = config_to_json(c);
    EXPECT_EQ(config_to_json(config_from_json(doc)), doc);
  }
}

TEST(ScheduleWeights, Shapes) {
  EXPECT_EQ(schedule_weights(WeightSchedule::Constant, 7, 100), std::make_pair(1.0, 1.0));
  const auto [q0, r0] = schedule_weights(WeightSchedule::Sinusoidal, 0, 1000);
  EXPECT_DOUBLE_EQ(q0, std::sin(1.0 / (10.0 * std::numbers::pi)));
  EXPECT_DOUBLE_EQ(r0, std::sin(1.0 / (20.0 * std::numbers::pi)));
  for (int t = 0; t < 1000; ++t) {
    const auto [q, r] = schedule_weights(WeightSchedule::Sinusoidal, t, 1000);
    EXPECT_GE(q, 0.0);
    EXPECT_GE(r, 0.0);
  }
  const double low = std::log(2.0) / 2.0;
  EXPECT_EQ(schedule_weights(WeightSchedule::Step, 0, 1000), std::make_pair(low, 1.0));
  EXPECT_EQ(schedule_weights(WeightSchedule::Step, 300, 1000), std::make_pair(1.0, 1.0));
  EXPECT_EQ(schedule_weights(WeightSchedule::Step, 500, 1000), std::make_pair(low, low));
  EXPECT_EQ(schedule_weights(WeightSchedule::Step, 700, 1000), std::make_pair(1.0, low));
  EXPECT_EQ(schedule_weights(WeightSchedule::Step, 999, 1000), std::make_pair(low, 1.0));
}

TEST(SyntheticSystem, DeterministicStableAndControllable) {
  ScenarioConfig c = synthetic2d_preset();
  c.family = NoiseFamily::Exponential;
  const SampledSystem a = sample_synthetic_system(c);
  const SampledSystem b = sample_synthetic_system(c);
  EXPECT_EQ(a.a, b.a);
  EXPECT_EQ(a.b, b.b);
  EXPECT_NEAR(spectral_radius(a.a), 0.9, 1e-12);
  Matrix ctrb(2, 2);
  ctrb << a.b, a.a * a.b;
  EXPECT_GT(std::abs(ctrb.determinant()), 1e-9);
  c.system_seed = 2;
  EXPECT_NE(sample_synthetic_system(c).a, a.a);
}

TEST(ProtocolStepSizes, Formula) {
  BoundConstants consts;
  consts.domain_diameter = 6.0;
  consts.gradient_bound = 4.0;
  const auto [eta1, eta2] = protocol_step_sizes(consts, 1000);
  EXPECT_DOUBLE_EQ(eta1, 1.5 * std::sqrt(7.0 / 2000.0));
  EXPECT_DOUBLE_EQ(eta2, 8.0 * eta1);
}

ScenarioConfig short_quadrotor(int horizon) {
  ScenarioConfig c = quadrotor_preset();
  c.horizon = horizon;
  return c;
}

TEST(Outputs, TraceCsvRoundTripsExactly) {
  const ScenarioResult r = run_scenario(short_quadrotor(40));
  const fs::path dir = fresh_dir("csv");
  write_outputs(dir, r);
  const RunTrace& trace = r.runs.at(0).trace;
  const std::vector<TraceRow> rows = read_trace_csv(dir / "safe_ogd_trace.csv");
  ASSERT_EQ(static_cast<int>(rows.size()), trace.horizon());
  for (int t = 0; t < trace.horizon(); ++t) {
    EXPECT_EQ(rows[t].t, t);
    EXPECT_EQ(rows[t].x, trace.steps[t].x);
    EXPECT_EQ(rows[t].u, trace.steps[t].u);
    EXPECT_EQ(rows[t].w, trace.steps[t].w);
    EXPECT_EQ(rows[t].loss, trace.steps[t].loss);
    EXPECT_EQ(rows[t].zeta, trace.steps[t].zeta);
  }
  const nlohmann::json summary = nlohmann::json::parse(slurp(dir / "safe_ogd_summary.json"));
  EXPECT_EQ(summary.at("violations"), 0);
  EXPECT_LE(summary.at("regret").get<double>(), summary.at("bound").get<double>());
  EXPECT_EQ(summary.at("provenance").at("seed"), 1);
  EXPECT_TRUE(summary.at("provenance").contains("code_version"));
}

TEST(Outputs, ReplayIsBitForBit) {
  const fs::path a = fresh_dir("replay_a");
  const fs::path b = fresh_dir("replay_b");
  write_outputs(a, run_scenario(short_quadrotor(30)));
  write_outputs(b, run_scenario(short_quadrotor(30)));
  EXPECT_EQ(slurp(a / "safe_ogd_trace.csv"), slurp(b / "safe_ogd_trace.csv"));
  EXPECT_EQ(slurp(a / "safe_ogd_plot.csv"), slurp(b / "safe_ogd_plot.csv"));
}

TEST(Outputs, PlotSeries) {
  const ScenarioResult r = run_scenario(short_quadrotor(25));
  const fs::path dir = fresh_dir("plot");
  export_plot_data(dir / "plot.csv", r.runs.at(0));
  std::ifstream in(dir / "plot.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "t,series,value");
  std::map<std::string, std::vector<double>> series;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string t, name, value;
    std::getline(ss, t, ',');
    std::getline(ss, name, ',');
    std::getline(ss, value, ',');
    series[name].push_back(std::stod(value));
  }
  for (const char* name : {"state_norm", "input_norm", "loss", "cumulative_loss", "cumulative_regret", "regret_bound"}) {
    EXPECT_EQ(series[name].size(), 25u) << name;
  }
  const auto& cum = series["cumulative_loss"];
  for (std::size_t i = 1; i < cum.size(); ++i) EXPECT_GE(cum[i], cum[i - 1]);
  for (std::size_t i = 0; i < cum.size(); ++i) EXPECT_GE(series["regret_bound"][i], series["cumulative_regret"][i]);
}

TEST(VerifyTrace, AcceptsAWrittenRunAndCatchesTampering) {
  const fs::path dir = fresh_dir("verify");
  write_outputs(dir, run_scenario(short_quadrotor(30)));
  const VerifyReport ok = verify_trace(dir / "safe_ogd_trace.csv");
  EXPECT_TRUE(ok.ok());
  EXPECT_EQ(ok.steps, 30);
  EXPECT_TRUE(ok.bound_checked);
  EXPECT_LT(ok.max_dynamics_defect, 1e-12);

  std::string text = slurp(dir / "safe_ogd_trace.csv");
  const std::size_t row = text.find("\n5,");
  ASSERT_NE(row, std::string::npos);
  const std::size_t cell = text.find(',', row + 1) + 1;
  const std::size_t end = text.find(',', cell);
  text.replace(cell, end - cell, "0.5");
  std::ofstream(dir / "safe_ogd_trace.csv", std::ios::binary) << text;
  const VerifyReport bad = verify_trace(dir / "safe_ogd_trace.csv");
  EXPECT_FALSE(bad.ok());
  EXPECT_GT(bad.max_dynamics_defect, 1e-3);
}

TEST(Batch, EmptyGridWritesNothing) {
  BatchGrid grid;
  grid.base = short_quadrotor(10);
  const fs::path dir = fresh_dir("batch_empty");
  const BatchResult r = run_batch(grid, dir / "out");
  EXPECT_TRUE(r.entries.empty());
  EXPECT_TRUE(r.table.empty());
  EXPECT_FALSE(fs::exists(dir / "out" / "aggregate.csv"));
}

TEST(Batch, GridRunsAndAggregates) {
  BatchGrid grid;
  grid.base = synthetic2d_preset();
  grid.base.horizon = 60;
  grid.base.controllers = {ControllerKind::SafeOgd, ControllerKind::Dac};
  grid.base.comparator = ComparatorMode::None;
  grid.families = {NoiseFamily::Gaussian, NoiseFamily::Beta};
  grid.seeds = {1, 2};
  grid.threads = 2;
  const fs::path dir = fresh_dir("batch");
  const BatchResult r = run_batch(grid, dir);
  ASSERT_EQ(r.entries.size(), 4u);
  EXPECT_EQ(r.failures(), 0);
  ASSERT_EQ(r.table.size(), 2u);
  for (const AggregateRow& row : r.table) {
    ASSERT_EQ(row.controllers.size(), 2u);
    EXPECT_EQ(row.controllers.at("safe_ogd").runs, 2);
    EXPECT_EQ(row.controllers.at("dac").runs, 2);
    EXPECT_EQ(row.controllers.at("safe_ogd").violations, 0);
    EXPECT_FALSE(row.paper_reference.has_value());
  }
  EXPECT_TRUE(fs::exists(dir / "aggregate.csv"));
  EXPECT_TRUE(fs::exists(dir / run_label(r.entries[0].config) / "safe_ogd_trace.csv"));
  EXPECT_EQ(run_label(r.entries[0].config), "gaussian_sinusoidal_configured_seed1");
}

TEST(Batch, GridFileValidation) {
  EXPECT_EQ(code_of([] { parse_grid(R"({"families": ["gaussian"]})"); }), ErrorCode::ValidationError);
  EXPECT_EQ(code_of([] { parse_grid(R"({"base": {"scenario": "quadrotor"}, "base_config": "x.json"})"); }),
            ErrorCode::ValidationError);
  const BatchGrid g = parse_grid(R"({"base": {"scenario": "quadrotor", "horizon": 5},
                                     "families": ["uniform", "gamma"], "seeds": [3, 4, 5]})");
  EXPECT_EQ(expand_grid(g).size(), 6u);
  EXPECT_EQ(expand_grid(g).front().horizon, 5);
}

TEST(Batch, ReferenceLosses) {
  EXPECT_EQ(quadrotor_reference_loss(NoiseFamily::Gaussian), 44.05);
  EXPECT_EQ(quadrotor_reference_loss(NoiseFamily::Uniform), 151.49);
  EXPECT_EQ(quadrotor_reference_loss(NoiseFamily::Gamma), 159.21);
  EXPECT_EQ(quadrotor_reference_loss(NoiseFamily::Beta), 186.98);
  EXPECT_EQ(quadrotor_reference_loss(NoiseFamily::Exponential), 126.69);
  EXPECT_EQ(quadrotor_reference_loss(NoiseFamily::Weibull), 195.71);
}

}  // namespace
}  // namespace safe_nsc
