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

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "safe_nsc/errors.hpp"
#include "safe_nsc/scenario.hpp"

namespace safe_nsc {

/// Cartesian product of noise families, seeds, step sizes and weight
/// schedules over a base scenario. Empty axes other than families and seeds
/// fall back to the base value.
struct BatchGrid {
  ScenarioConfig base;
  std::vector<NoiseFamily> families;
  std::vector<std::uint64_t> seeds;
  std::vector<int> step_sizes;  // protocol_step values
  std::vector<WeightSchedule> schedules;
  int threads = 0;  // 0: hardware concurrency
};

/// Grid files are JSON: {"base": <scenario object> | "base_config": path,
/// "families": [...], "seeds": [...], "step_sizes": [...], "schedules": [...],
/// "threads": n}. Relative base_config paths resolve against `dir`.
BatchGrid parse_grid(const std::string& text, const std::filesystem::path& dir = {});
BatchGrid load_grid(const std::filesystem::path& path);

struct BatchEntry {
  std::string label;
  ScenarioConfig config;
  std::optional<ScenarioResult> result;
  std::optional<ErrorCode> error_code;
  std::string error;
};

struct ControllerStats {
  int runs = 0;
  double mean_loss = 0.0;
  double std_loss = 0.0;
  int violations = 0;
};

/// One row per (family, schedule, step size); one stats column per controller.
struct AggregateRow {
  NoiseFamily family = NoiseFamily::Gaussian;
  WeightSchedule schedule = WeightSchedule::Constant;
  int step_size = 0;
  std::map<std::string, ControllerStats> controllers;
  int failures = 0;
  std::optional<double> paper_reference;  // Safe-OGD cumulative loss reported for the quadrotor
  bool reference_flag = false;            // mean differs from the reference by more than 10x
};

struct BatchResult {
  std::vector<BatchEntry> entries;
  std::vector<AggregateRow> table;
  int failures() const;
};

/// Published Safe-OGD cumulative loss of the quadrotor benchmark per family.
std::optional<double> quadrotor_reference_loss(NoiseFamily family);

std::vector<ScenarioConfig> expand_grid(const BatchGrid& grid);
std::string run_label(const ScenarioConfig& cfg);

/// Runs the grid on a worker pool. Failed runs are recorded and the rest
/// continue. With a nonempty `out`, each run writes into out/<label>/ and the
/// aggregate table goes to out/aggregate.csv.
BatchResult run_batch(const BatchGrid& grid, const std::filesystem::path& out = {});

std::vector<AggregateRow> aggregate(const std::vector<BatchEntry>& entries);
void write_aggregate_csv(const std::filesystem::path& path, const std::vector<AggregateRow>& rows);

}  // namespace safe_nsc
