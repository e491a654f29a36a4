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

// Shared builders for the test binaries.

#include <random>

#include "safe_nsc/core_model.hpp"
#include "safe_nsc/safe_set.hpp"

namespace safe_nsc::testing {

/// Quadrotor hover model with the benchmark's constraint boxes.
Matrix quadrotor_a();
Matrix quadrotor_b();
Vector quadrotor_input_limit();

/// Scalar system A = B = Q = R = 1 used by the worked examples.
LtvSystem scalar_system(int horizon, double noise_bound);

/// Interval [0.5, 1.5] of the scalar worked example: kappa 3, gamma 0.5,
/// W 0.1, |x| <= 1, |u| <= 2, state 0.5.
GainSet scalar_interval_set();

/// Random small gain set with a nonempty interior: halfspaces and row-norm
/// bounds that keep K0 strictly feasible, a spectral cap and, when asked,
/// a contraction block.
GainSet random_gain_set(std::mt19937_64& rng, int input_dim, int state_dim, bool contraction);

Matrix random_matrix(std::mt19937_64& rng, int rows, int cols, double scale = 1.0);

}  // namespace safe_nsc::testing
