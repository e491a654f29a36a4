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

#include <Eigen/Dense>

namespace safe_nsc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Largest singular value (operator 2-norm).
double op_norm(const Matrix& m);

/// Sum of singular values.
double nuclear_norm(const Matrix& m);

/// Frobenius inner product <a, b>_F.
inline double frob_inner(const Matrix& a, const Matrix& b) { return (a.array() * b.array()).sum(); }

/// Clips singular values of m at radius. Returns m itself (bitwise) when
/// ||m||_op <= radius already.
Matrix clip_singular_values(const Matrix& m, double radius);

/// Symmetric positive semidefinite square root and its inverse.
struct SymmetricRoot {
  Matrix root;
  Matrix inverse_root;
  double condition = 1.0;
};
SymmetricRoot symmetric_root(const Matrix& spd);

/// Spectral radius of a square matrix.
double spectral_radius(const Matrix& m);

bool all_finite(const Matrix& m);

}  // namespace safe_nsc
