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
#include <vector>

#include "safe_nsc/linalg.hpp"

namespace safe_nsc {

/// Slack for the noise-ball check in step_dynamics.
inline constexpr double kNoiseTolerance = 1e-12;
/// Eigenvalue floor for the PSD check of loss weights.
inline constexpr double kPsdTolerance = 1e-10;

/// Feedback gain K with u = -K x, shape d_u x d_x.
using GainMatrix = Matrix;

/// x_{t+1} = A_t x_t + B_t u_t + w_t for t = 0..T-1, with ||A_t|| <= kappa_A,
/// ||B_t|| <= kappa_B and ||w_t|| <= W.
class LtvSystem {
 public:
  /// Caps default to max_t ||A_t|| and max_t ||B_t|| when not given.
  LtvSystem(std::vector<Matrix> a_mats, std::vector<Matrix> b_mats, double noise_bound,
            std::optional<double> kappa_a = std::nullopt, std::optional<double> kappa_b = std::nullopt);

  /// Repeats (a, b) over the horizon.
  static LtvSystem time_invariant(const Matrix& a, const Matrix& b, int horizon, double noise_bound);

  int horizon() const { return static_cast<int>(a_mats_.size()); }
  int state_dim() const { return static_cast<int>(a_mats_.front().rows()); }
  int input_dim() const { return static_cast<int>(b_mats_.front().cols()); }
  const Matrix& a(int t) const;
  const Matrix& b(int t) const;
  double kappa_a() const { return kappa_a_; }
  double kappa_b() const { return kappa_b_; }
  double noise_bound() const { return noise_bound_; }
  bool is_time_invariant() const { return time_invariant_; }

 private:
  std::vector<Matrix> a_mats_;
  std::vector<Matrix> b_mats_;
  double kappa_a_ = 0.0;
  double kappa_b_ = 0.0;
  double noise_bound_ = 0.0;
  bool time_invariant_ = false;
};

/// One step of polytopic constraints: L_x x <= l_x on the state, L_u u <= l_u on the input.
struct SafetyRecord {
  Matrix state_rows;
  Vector state_rhs;
  Matrix input_rows;
  Vector input_rhs;
};

/// Per-step constraint records. Index t holds the constraints on x_t and u_t;
/// closed-loop runs need horizon + 1 records because K_t constrains x_{t+1}.
class SafetySpec {
 public:
  explicit SafetySpec(std::vector<SafetyRecord> records);

  /// Box constraints lo <= x <= hi, lo_u <= u <= hi_u repeated for `steps` records.
  static SafetySpec boxes(int steps, const Vector& state_lo, const Vector& state_hi, const Vector& input_lo,
                          const Vector& input_hi);
  /// Input-only box; the state polytope is empty (zero rows).
  static SafetySpec input_box(int steps, int state_dim, const Vector& input_lo, const Vector& input_hi);

  int steps() const { return static_cast<int>(records_.size()); }
  const SafetyRecord& at(int t) const;
  int state_dim() const { return static_cast<int>(records_.front().state_rows.cols()); }
  int input_dim() const { return static_cast<int>(records_.front().input_rows.cols()); }

 private:
  std::vector<SafetyRecord> records_;
};

/// Quadratic stage cost c_t(x, u) = x'Q_t x + u'R_t u.
class LossSpec {
 public:
  LossSpec(std::vector<Matrix> q_weights, std::vector<Matrix> r_weights);
  static LossSpec constant(const Matrix& q, const Matrix& r, int horizon);

  int horizon() const { return static_cast<int>(q_.size()); }
  const Matrix& q(int t) const;
  const Matrix& r(int t) const;
  /// beta = 2 max_t max(||Q_t||, ||R_t||).
  double beta() const { return beta_; }
  /// G = 2 beta.
  double grad_scale() const { return grad_scale_; }

 private:
  std::vector<Matrix> q_;
  std::vector<Matrix> r_;
  double beta_ = 0.0;
  double grad_scale_ = 0.0;
};

/// Constants entering the regret bound. `metric_condition` is the condition
/// number of the norm the contraction constraint is measured in (1 for the
/// plain operator norm); it multiplies the state bound.
struct BoundConstants {
  double noise_bound = 0.0;
  double kappa = 0.0;
  double gamma = 0.0;
  double grad_scale = 0.0;
  double kappa_b = 0.0;
  int state_dim = 0;
  int input_dim = 0;
  double metric_condition = 1.0;

  double state_bound = 0.0;     // D
  double domain_diameter = 0.0; // D_f
  double gradient_bound = 0.0;  // G_f

  static BoundConstants compute(double noise_bound, double kappa, double gamma, double grad_scale, double kappa_b,
                                int state_dim, int input_dim, double metric_condition = 1.0);
  static BoundConstants compute(const LtvSystem& sys, const LossSpec& loss, double kappa, double gamma,
                                double metric_condition = 1.0);

  /// Recomputes the derived fields and compares them exactly.
  bool consistent() const;
};

Vector step_dynamics(const LtvSystem& sys, int t, const Vector& x, const Vector& u, const Vector& w);
Vector recover_noise(const LtvSystem& sys, int t, const Vector& x_next, const Vector& x, const Vector& u);
double stage_loss(const LossSpec& loss, int t, const Vector& x_next, const Vector& u);

/// f_t(K) = c_t((A_t - B_t K) x + w, -K x).
double loss_in_gain(const LossSpec& loss, const LtvSystem& sys, int t, const Vector& x, const Vector& w,
                    const GainMatrix& k);

/// Closed-form gradient of loss_in_gain with respect to K.
Matrix loss_gradient(const LossSpec& loss, const LtvSystem& sys, int t, const Vector& x, const Vector& w,
                     const GainMatrix& k);

void check_gain(const LtvSystem& sys, const GainMatrix& k);

}  // namespace safe_nsc
