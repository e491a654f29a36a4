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

enum class ProjectionMethod {
  /// Log-barrier path following (barrier.hpp).
  InteriorPoint,
  /// Dykstra over the constraint blocks with an inner splitting for the
  /// contraction block.
  Dykstra,
};

struct ProjectionConfig {
  ProjectionMethod method = ProjectionMethod::InteriorPoint;
  int max_iters = 5000;
  double kkt_tol = 1e-8;
  double feasibility_slack = 1e-9;

  void validate() const;
};

struct ProjectionResult {
  Matrix point;
  int iterations = 0;
  double kkt_residual = 0.0;
  double distance = 0.0;
};

/// K' - max(0, (<G,K'> - b) / ||G||^2) G. Throws ZeroNormal when G = 0.
Matrix project_halfspace(const Matrix& k, const Matrix& normal, double rhs);

/// Clips singular values at radius; returns k unchanged when already inside.
Matrix project_spectral_ball(const Matrix& k, double radius);

/// Projection onto {K : ||a' K|| <= c}.
Matrix project_row_norm(const Matrix& k, const RowNormBound& bound);

/// Inner solver state for the affine spectral block. Kept across calls so
/// repeated projections warm-start.
struct AffineSplitState {
  Matrix aux;        // Z, the spectral-ball copy of offset - left K right
  Matrix dual;       // scaled multiplier U
  double rho = 1.0;
  bool initialised = false;
};

struct AffineProjection {
  Matrix point;
  Matrix multiplier;  // Lambda with point = target + left' Lambda right'
  int iterations = 0;
  bool converged = false;
};

/// Frobenius projection onto {K : ||offset - left K right|| <= radius} by
/// alternating a spectral-ball step on Z = offset - left K right with a
/// closed-form least-squares recoupling of K, penalty rho raised tenfold
/// whenever the coupling residual stalls.
AffineProjection project_affine_spectral(const AffineSpectralBound& bound, const Matrix& target,
                                         AffineSplitState& state, double tol, int max_iters = 20000);

/// ||(I - left left^+) offset||, a lower bound on ||offset - left K right||
/// over all K.
double affine_spectral_floor(const AffineSpectralBound& bound);

/// Projection onto the intersection by cfg.method. Throws InfeasibleSafeSet when
/// the set is empty, ProjectionDidNotConverge when iterations run out on a
/// nonempty set.
ProjectionResult project_gain_set(const GainSet& set, const Matrix& target, const ProjectionConfig& cfg = {});

struct ProbeResult {
  bool feasible = false;
  Matrix witness;
};

/// Runs the same scheme from 0 on a slightly shrunk copy of the set; a
/// success yields a strictly feasible witness.
ProbeResult feasibility_probe(const GainSet& set, const ProjectionConfig& cfg = {});

/// Per-row tightened slack of the state constraints plus a probe verdict.
TighteningReport tightening_report(const LtvSystem& sys, const SafetySpec& safety, int t, const Vector& x,
                                   const GainSet& set, const ProjectionConfig& cfg = {});

}  // namespace safe_nsc
