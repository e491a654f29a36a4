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

#include <deque>
#include <vector>

#include "safe_nsc/controller.hpp"

namespace safe_nsc {

/// Last `capacity` disturbances, newest first; reads past the end are zero.
class NoiseBuffer {
 public:
  NoiseBuffer(int capacity, int dim);
  void push(const Vector& w);
  /// w_{t-i} for i >= 1 (i = 1 is the newest entry).
  const Vector& recent(int i) const;
  int size() const { return static_cast<int>(items_.size()); }
  int capacity() const { return capacity_; }

 private:
  int capacity_;
  std::deque<Vector> items_;
  Vector zero_;
};

struct DacConfig {
  int memory = 10;
  double eta = 1e-3;
  /// Fraction of each input margin reserved for the memory term.
  double margin_fraction = 0.5;

  void validate() const;
};

struct DacState {
  GainMatrix gain;
  std::vector<Matrix> weights;  // M^[1..m]
  double eta = 0.0;
  double weight_cap = 0.0;

  int memory() const { return static_cast<int>(weights.size()); }
};

/// u = -K x + sum_i M^[i] w_{t-i}.
Vector dac_action(const DacState& state, const Vector& x, const NoiseBuffer& buffer);

/// Truncated counterfactual loss at step t: the last `memory` steps are
/// replayed from a zero state under the current weights, using the stored
/// disturbances w_{t-memory+1..t}. `history` holds w_{t-2m+1..t}, oldest first.
double dac_truncated_loss(const DacState& state, const LtvSystem& sys, const LossSpec& loss, int t,
                          const std::vector<Vector>& history);
/// Adjoint gradient of dac_truncated_loss, one matrix per weight.
std::vector<Matrix> dac_truncated_gradient(const DacState& state, const LtvSystem& sys, const LossSpec& loss, int t,
                                           const std::vector<Vector>& history);

/// Gradient step on each weight followed by a spectral clip at the cap.
void dac_update(DacState& state, const std::vector<Matrix>& grads);

/// Per-weight spectral cap so the memory term uses at most `fraction` of
/// each input margin: fraction * min_j l_j / ||L_j|| / (m W).
double dac_weight_cap(const SafetyRecord& record, double noise_bound, int memory, double fraction);

/// State bound for a closed loop with gain K and memory term of total norm
/// at most m * cap * W per step.
double dac_state_bound(const BoundConstants& consts, int memory, double cap);

/// Time-invariant gain set used by both baselines, built from the step-0
/// safety record with state bound `state_bound`.
GainSet baseline_gain_set(const LtvSystem& sys, const SafetySpec& safety, const ControllerConfig& cfg,
                          double state_bound, double input_scale = 1.0);

/// Set of the DAC's fixed gain: input margins scaled by 1 - margin_fraction
/// and state bound dac_state_bound at the weight cap.
GainSet dac_gain_set(const LtvSystem& sys, const SafetySpec& safety, const LossSpec& loss, const ControllerConfig& cfg,
                     const DacConfig& dac);
/// Simulates u_t = -K x_t; K must belong to `set`.
RunTrace fixed_gain_run(const LtvSystem& sys, const SafetySpec& safety, const LossSpec& loss, const NoiseModel& noise,
                        const GainMatrix& k, const GainSet& set, const std::optional<Vector>& x0 = std::nullopt);

/// Fixed gain equal to the probe witness of the D-tightened time-invariant set.
RunTrace fixed_gain_run(const LtvSystem& sys, const SafetySpec& safety, const LossSpec& loss, const NoiseModel& noise,
                        const ControllerConfig& cfg, const std::optional<Vector>& x0 = std::nullopt);

/// Disturbance-action controller with K the probe witness of the set
/// tightened by (1 - margin_fraction).
RunTrace dac_run(const LtvSystem& sys, const SafetySpec& safety, const LossSpec& loss, const NoiseModel& noise,
                 const ControllerConfig& cfg, const DacConfig& dac, const std::optional<Vector>& x0 = std::nullopt);

}  // namespace safe_nsc
