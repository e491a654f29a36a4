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

// Slow reference projection used only by the tests: an augmented quadratic
// penalty on the squared distance of every constraint image to its set,
// minimised by accelerated gradient steps. It shares no code with the
// projection solvers beyond the set description.

#include "safe_nsc/safe_set.hpp"

namespace safe_nsc::testing {

struct OracleResult {
  Matrix point;
  double max_violation = 0.0;
  int outer_iterations = 0;
};

OracleResult penalty_oracle(const GainSet& set, const Matrix& target, double tol = 1e-10);

}  // namespace safe_nsc::testing
