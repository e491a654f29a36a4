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

#include <optional>
#include <string>
#include <vector>

#include "safe_nsc/core_model.hpp"

namespace safe_nsc {

/// <normal, K>_F <= rhs.
struct Halfspace {
  enum class Source { StateRow, InputRow, Custom };
  Matrix normal;
  double rhs = 0.0;
  Source source = Source::Custom;
  int row = -1;
};

/// ||direction' K||_2 <= radius: the robust counterpart of
/// direction' K x <= radius * D' over the ball ||x|| <= D'.
struct RowNormBound {
  Vector direction;
  double radius = 0.0;
};

/// Norm in which the closed loop is required to contract:
/// ||x||_T = ||transform x||. Identity gives the plain operator norm.
struct ContractionMetric {
  Matrix transform;
  Matrix inverse;
  double condition = 1.0;

  static ContractionMetric identity(int state_dim);
  /// transform = P^{1/2} with P the stabilizing solution of the discrete
  /// algebraic Riccati equation for (A, B, Q, R).
  static ContractionMetric from_lqr(const Matrix& a, const Matrix& b, const Matrix& q, const Matrix& r);
};

/// ||offset - left K right||_op <= radius, with eigen-factorisations of
/// left'left and right right' cached for the least-squares recoupling.
struct AffineSpectralBound {
  Matrix offset;
  Matrix left;
  Matrix right;
  double radius = 0.0;

  Matrix left_basis;
  Vector left_eigs;
  Matrix right_basis;
  Vector right_eigs;

  /// ||T (A - B K) T^{-1}|| <= 1 - gamma.
  static AffineSpectralBound contraction(const Matrix& a, const Matrix& b, const ContractionMetric& metric,
                                         double radius);
  Matrix image(const Matrix& k) const { return offset - left * k * right; }
  /// Adjoint of K -> left K right.
  Matrix adjoint(const Matrix& y) const { return left.transpose() * y * right.transpose(); }
};

/// Feasible gains at one step: halfspaces, row-norm bounds, ||K|| <= cap and
/// an optional affine spectral (contraction) bound.
struct GainSet {
  int input_dim = 0;
  int state_dim = 0;
  std::vector<Halfspace> halfspaces;
  std::vector<RowNormBound> norm_bounds;
  double spectral_cap = 0.0;
  std::optional<AffineSpectralBound> contraction;
};

struct MembershipResult {
  bool member = false;
  double max_violation = 0.0;
  std::string worst;
};

/// Adds a halfspace; zero normals are dropped when rhs >= 0 and raise
/// InfeasibleSafeSet otherwise.
void add_halfspace(GainSet& set, Halfspace h);

/// Safe gain set at step t from the current state x:
///   state rows  -(B_t' l_i) x' . K <= l_{x,t+1,i} - l_i' A_t x - W ||l_i||
///   input rows  -(m_j) x' . K     <= l_{u,t,j}
/// plus ||K|| <= kappa and ||T(A_t - B_t K)T^{-1}|| <= 1 - gamma.
GainSet build_gain_set(const LtvSystem& sys, const SafetySpec& safety, const BoundConstants& consts, int t,
                       const Vector& x, const ContractionMetric& metric);

/// Step-invariant set for input-only constraints, robust over ||x|| <= state_bound.
GainSet build_time_invariant_set(const Matrix& a, const Matrix& b, const SafetyRecord& record, double state_bound,
                                 double kappa, double gamma, const ContractionMetric& metric);

MembershipResult membership(const GainSet& set, const Matrix& k, double tol);

struct SafetyReport {
  Vector state_slack;
  Vector input_slack;
  double min_slack = 0.0;
  int violations = 0;
};

/// Row slacks of L_{x,t+1} x_next <= l_{x,t+1} and L_{u,t} u <= l_{u,t}.
SafetyReport verify_realized_safety(const SafetySpec& safety, int t, const Vector& x_next, const Vector& u,
                                    double tol = 0.0);

struct TighteningReport {
  Vector slack;
  bool feasible = false;
  std::optional<Matrix> witness;
};

}  // namespace safe_nsc
