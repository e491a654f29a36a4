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
#include "support/fixtures.hpp"

#include <numbers>

namespace safe_nsc::testing {

Matrix quadrotor_a() {
  Matrix a = Matrix::Identity(6, 6);
  for (int i = 0; i < 3; ++i) a(i, i + 3) = 0.1;
  return a;
}

Matrix quadrotor_b() {
  Matrix b = Matrix::Zero(6, 3);
  b(0, 0) = -0.0491;
  b(1, 1) = 0.0491;
  b(2, 2) = 1.0 / 200.0;
  b(3, 0) = -0.981;
  b(4, 1) = 0.981;
  b(5, 2) = 0.1;
  return b;
}

Vector quadrotor_input_limit() {
  Vector v(3);
  v << std::numbers::pi, std::numbers::pi, 20.0;
  return v;
}

LtvSystem scalar_system(int horizon, double noise_bound) {
  return LtvSystem::time_invariant(Matrix::Ones(1, 1), Matrix::Ones(1, 1), horizon, noise_bound);
}

GainSet scalar_interval_set() {
  const LtvSystem sys = scalar_system(1, 0.1);
  const SafetySpec safety = SafetySpec::boxes(2, -Vector::Ones(1), Vector::Ones(1), -2.0 * Vector::Ones(1),
                                              2.0 * Vector::Ones(1));
  const BoundConstants consts = BoundConstants::compute(0.1, 3.0, 0.5, 4.0, 1.0, 1, 1);
  return build_gain_set(sys, safety, consts, 0, Vector::Constant(1, 0.5), ContractionMetric::identity(1));
}

Matrix random_matrix(std::mt19937_64& rng, int rows, int cols, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

GainSet random_gain_set(std::mt19937_64& rng, int input_dim, int state_dim, bool contraction) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  GainSet set;
  set.input_dim = input_dim;
  set.state_dim = state_dim;
  const Matrix k0 = random_matrix(rng, input_dim, state_dim, 0.3);
  const int halfspaces = 1 + static_cast<int>(unit(rng) * 4);
  for (int i = 0; i < halfspaces; ++i) {
    Halfspace h;
    h.normal = random_matrix(rng, input_dim, state_dim);
    h.rhs = frob_inner(h.normal, k0) + 0.05 + 0.5 * unit(rng);
    set.halfspaces.push_back(h);
  }
  if (unit(rng) < 0.5) {
    RowNormBound r;
    r.direction = random_matrix(rng, input_dim, 1);
    r.radius = (k0.transpose() * r.direction).norm() + 0.1 + 0.5 * unit(rng);
    set.norm_bounds.push_back(r);
  }
  set.spectral_cap = op_norm(k0) + 0.1 + unit(rng);
  if (contraction) {
    const Matrix a = random_matrix(rng, state_dim, state_dim, 0.6);
    const Matrix b = random_matrix(rng, state_dim, input_dim);
    const double radius = op_norm(a - b * k0) + 0.05 + 0.3 * unit(rng);
    set.contraction =
        AffineSpectralBound::contraction(a, b, ContractionMetric::identity(state_dim), radius);
  }
  return set;
}

}  // namespace safe_nsc::testing
