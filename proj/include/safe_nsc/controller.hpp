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

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "safe_nsc/core_model.hpp"
#include "safe_nsc/noise_lab.hpp"
#include "safe_nsc/oco_core.hpp"
#include "safe_nsc/projection.hpp"
#include "safe_nsc/safe_set.hpp"

namespace safe_nsc {

enum class InitPolicy { ProjectZero, Witness };

struct ControllerConfig {
  double kappa = 10.0;
  double gamma = 0.01;
  /// Defaults to step_size_default(D_f, G_f, T).
  std::optional<double> eta;
  ProjectionConfig projection;
  InitPolicy init = InitPolicy::ProjectZero;
  /// Norm of the contraction constraint; identity when unset.
  std::optional<ContractionMetric> metric;
  /// When set, this single set replaces the per-step state-dependent sets.
  std::optional<GainSet> fixed_set;

  void validate() const;
};

/// Safe gain sets K_t as a function of (t, x_t).
class GainSetProvider {
 public:
  GainSetProvider(const LtvSystem& sys, const SafetySpec& safety, const BoundConstants& consts,
                  ContractionMetric metric, std::optional<GainSet> fixed);
  GainSet at(int t, const Vector& x) const;
  bool time_invariant() const { return fixed_.has_value(); }

 private:
  const LtvSystem* sys_;
  const SafetySpec* safety_;
  BoundConstants consts_;
  ContractionMetric metric_;
  std::optional<GainSet> fixed_;
};

/// Adapts a GainSet to the generic OCO domain interface.
class GainSetDomain final : public ConvexDomain {
 public:
  GainSetDomain(const GainSet& set, const ProjectionConfig& cfg) : set_(&set), cfg_(cfg) {}
  Matrix project(const Matrix& point) const override;
  bool contains(const Matrix& point, double tol) const override;

 private:
  const GainSet* set_;
  ProjectionConfig cfg_;
};

struct StepRecord {
  Vector x;
  Vector u;
  Vector w;
  Matrix gain;
  double loss = 0.0;
  double zeta = 0.0;
  double min_slack = 0.0;
  int violations = 0;
  double grad_norm = 0.0;
  double wall_clock_s = 0.0;
};

struct RunTrace {
  std::string controller;
  std::vector<StepRecord> steps;
  std::vector<GainSet> sets;  // K_t per step, kept for hindsight comparators
  Vector final_state;
  double eta = 0.0;
  double cumulative_loss = 0.0;
  double max_state_norm = 0.0;
  double max_input_norm = 0.0;
  double max_grad_norm = 0.0;
  double set_variation = 0.0;
  int violations = 0;
  bool zero_in_initial_set = false;
  double wall_clock_s = 0.0;

  int horizon() const { return static_cast<int>(steps.size()); }
};

GainMatrix init_gain(const GainSet& set, InitPolicy policy, const ProjectionConfig& cfg);

/// Mutable part of the Safe-OGD loop.
struct SafeOgdState {
  GainMatrix gain;
  GainSet current_set;
  double eta = 0.0;
};

struct ControlStepResult {
  Vector u;
  Vector x_next;
  Vector w;
  GainMatrix next_gain;
  GainSet next_set;
  double zeta = 0.0;
  double loss = 0.0;
  double grad_norm = 0.0;
  SafetyReport safety;
};

/// Acts with u_t = -K_t x_t, observes x_{t+1}, recovers w_t, takes the
/// gradient step and projects onto K_{t+1}. Advances `state`.
ControlStepResult control_step(SafeOgdState& state, const GainSetProvider& sets, const LtvSystem& sys,
                               const SafetySpec& safety, const LossSpec& loss, const ProjectionConfig& proj, int t,
                               const Vector& x, const Vector& w);

/// Full horizon from x_0 (zero when not given).
RunTrace run_safe_ogd(const LtvSystem& sys, const SafetySpec& safety, const LossSpec& loss, const NoiseModel& noise,
                      const ControllerConfig& cfg, const std::optional<Vector>& x0 = std::nullopt);

/// Constants the run uses, including the metric condition number.
BoundConstants controller_constants(const LtvSystem& sys, const LossSpec& loss, const ControllerConfig& cfg);
double controller_eta(const LtvSystem& sys, const LossSpec& loss, const ControllerConfig& cfg);

/// Checks the horizon of inputs against each other; safety needs T + 1 records.
void check_run_inputs(const LtvSystem& sys, const SafetySpec& safety, const LossSpec& loss, const NoiseModel& noise);

}  // namespace safe_nsc
