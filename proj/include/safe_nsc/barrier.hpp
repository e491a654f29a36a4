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

#include "safe_nsc/safe_set.hpp"

namespace safe_nsc {

struct BarrierConfig {
  /// Stops once the duality-gap bound nu / t falls below this value.
  double gap_tol = 1e-13;
  double growth = 10.0;
  double initial_weight = 1.0;
  int max_newton = 2000;
  /// Slack a phase-one point must keep from every constraint.
  double interior_margin = 1e-10;
};

/// Convex quadratic 0.5 k'Pk + q'k in vec(K) coordinates (column-major).
struct QuadraticObjective {
  Matrix hessian;
  Vector linear;

  /// 0.5 ||K - target||_F^2 up to a constant.
  static QuadraticObjective distance_to(const Matrix& target);
};

struct BarrierResult {
  Matrix point;
  double gap_bound = 0.0;  // nu / t at exit
  int newton_steps = 0;
  bool converged = false;
  bool feasible = false;
  /// Increments p_i = grad(phi_i) / t in gain space, one per constraint in
  /// the order halfspaces, norm bounds, spectral cap, contraction.
  std::vector<Matrix> increments;
  /// Multiplier of the contraction block in the image space.
  Matrix contraction_multiplier;
};

/// Log-barrier path following over the constraints of `set`: linear
/// halfspaces, second-order cones for the row-norm bounds and log-det
/// barriers for the two spectral-norm constraints. A phase-one problem on
/// the uniformly relaxed set supplies the interior start.
BarrierResult minimise_over_gain_set(const GainSet& set, const QuadraticObjective& obj,
                                     const BarrierConfig& cfg = {});

/// Phase one only: a point whose slack in every normalised constraint is at
/// least `cfg.interior_margin`, or feasible = false when none exists.
BarrierResult interior_point(const GainSet& set, const BarrierConfig& cfg = {});

}  // namespace safe_nsc
