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
#include "safe_nsc/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "safe_nsc/errors.hpp"

namespace safe_nsc {

namespace {

std::string dims(const Matrix& m) { return std::to_string(m.rows()) + "x" + std::to_string(m.cols()); }

void check_step(int t, int horizon, const char* what) {
  require(t >= 0 && t < horizon, ErrorCode::DimensionMismatch,
          std::string(what) + ": step " + std::to_string(t) + " outside [0, " + std::to_string(horizon) + ")");
}

bool is_psd(const Matrix& m) {
  if (m.size() == 0) return true;
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff())) return false;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff() >= -kPsdTolerance;
}

}  // namespace

LtvSystem::LtvSystem(std::vector<Matrix> a_mats, std::vector<Matrix> b_mats, double noise_bound,
                     std::optional<double> kappa_a, std::optional<double> kappa_b)
    : a_mats_(std::move(a_mats)), b_mats_(std::move(b_mats)), noise_bound_(noise_bound) {
  require(!a_mats_.empty(), ErrorCode::InvalidParams, "horizon must be positive");
  require(a_mats_.size() == b_mats_.size(), ErrorCode::DimensionMismatch, "A and B sequences differ in length");
  require(std::isfinite(noise_bound) && noise_bound >= 0.0, ErrorCode::InvalidParams,
          "noise bound must be finite and nonnegative");
  const auto dx = a_mats_.front().rows();
  const auto du = b_mats_.front().cols();
  require(dx > 0 && du > 0, ErrorCode::DimensionMismatch, "empty system matrices");
  double max_a = 0.0;
  double max_b = 0.0;
  for (std::size_t t = 0; t < a_mats_.size(); ++t) {
    const Matrix& a = a_mats_[t];
    const Matrix& b = b_mats_[t];
    require(a.rows() == dx && a.cols() == dx, ErrorCode::DimensionMismatch,
            "A_" + std::to_string(t) + " has shape " + dims(a));
    require(b.rows() == dx && b.cols() == du, ErrorCode::DimensionMismatch,
            "B_" + std::to_string(t) + " has shape " + dims(b));
    require(a.allFinite() && b.allFinite(), ErrorCode::InvalidParams, "non-finite system matrix");
    max_a = std::max(max_a, op_norm(a));
    max_b = std::max(max_b, op_norm(b));
  }
  kappa_a_ = kappa_a.value_or(max_a);
  kappa_b_ = kappa_b.value_or(max_b);
  require(max_a <= kappa_a_, ErrorCode::InvalidParams, "||A_t|| exceeds kappa_A");
  require(max_b <= kappa_b_, ErrorCode::InvalidParams, "||B_t|| exceeds kappa_B");

  time_invariant_ = std::all_of(a_mats_.begin(), a_mats_.end(), [&](const Matrix& a) { return a == a_mats_.front(); }) &&
                    std::all_of(b_mats_.begin(), b_mats_.end(), [&](const Matrix& b) { return b == b_mats_.front(); });
}

LtvSystem LtvSystem::time_invariant(const Matrix& a, const Matrix& b, int horizon, double noise_bound) {
  require(horizon > 0, ErrorCode::InvalidParams, "horizon must be positive");
  return LtvSystem(std::vector<Matrix>(horizon, a), std::vector<Matrix>(horizon, b), noise_bound);
}

const Matrix& LtvSystem::a(int t) const {
  check_step(t, horizon(), "LtvSystem::a");
  return a_mats_[t];
}

const Matrix& LtvSystem::b(int t) const {
  check_step(t, horizon(), "LtvSystem::b");
  return b_mats_[t];
}

SafetySpec::SafetySpec(std::vector<SafetyRecord> records) : records_(std::move(records)) {
  require(!records_.empty(), ErrorCode::InvalidParams, "safety spec needs at least one record");
  const auto dx = records_.front().state_rows.cols();
  const auto du = records_.front().input_rows.cols();
  for (std::size_t t = 0; t < records_.size(); ++t) {
    const auto& r = records_[t];
    const std::string tag = "safety record " + std::to_string(t);
    require(r.state_rows.cols() == dx && r.input_rows.cols() == du, ErrorCode::DimensionMismatch,
            tag + ": inconsistent column counts");
    require(r.state_rows.rows() == r.state_rhs.size(), ErrorCode::DimensionMismatch,
            tag + ": state rows and rhs differ in length");
    require(r.input_rows.rows() == r.input_rhs.size(), ErrorCode::DimensionMismatch,
            tag + ": input rows and rhs differ in length");
    for (Eigen::Index i = 0; i < r.state_rows.rows(); ++i) {
      require(r.state_rows.row(i).norm() > 0.0, ErrorCode::InvalidParams, tag + ": zero state row");
    }
  }
}

namespace {

void append_box(Matrix& rows, Vector& rhs, const Vector& lo, const Vector& hi) {
  const auto n = lo.size();
  rows = Matrix::Zero(2 * n, n);
  rhs = Vector::Zero(2 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    rows(i, i) = 1.0;
    rhs(i) = hi(i);
    rows(n + i, i) = -1.0;
    rhs(n + i) = -lo(i);
  }
}

}  // namespace

SafetySpec SafetySpec::boxes(int steps, const Vector& state_lo, const Vector& state_hi, const Vector& input_lo,
                             const Vector& input_hi) {
  require(state_lo.size() == state_hi.size() && input_lo.size() == input_hi.size(), ErrorCode::DimensionMismatch,
          "box bounds differ in length");
  SafetyRecord rec;
  append_box(rec.state_rows, rec.state_rhs, state_lo, state_hi);
  append_box(rec.input_rows, rec.input_rhs, input_lo, input_hi);
  return SafetySpec(std::vector<SafetyRecord>(steps, rec));
}

SafetySpec SafetySpec::input_box(int steps, int state_dim, const Vector& input_lo, const Vector& input_hi) {
  require(input_lo.size() == input_hi.size(), ErrorCode::DimensionMismatch, "box bounds differ in length");
  SafetyRecord rec;
  rec.state_rows = Matrix::Zero(0, state_dim);
  rec.state_rhs = Vector::Zero(0);
  append_box(rec.input_rows, rec.input_rhs, input_lo, input_hi);
  return SafetySpec(std::vector<SafetyRecord>(steps, rec));
}

const SafetyRecord& SafetySpec::at(int t) const {
  check_step(t, steps(), "SafetySpec::at");
  return records_[t];
}

LossSpec::LossSpec(std::vector<Matrix> q_weights, std::vector<Matrix> r_weights)
    : q_(std::move(q_weights)), r_(std::move(r_weights)) {
  require(!q_.empty(), ErrorCode::InvalidParams, "loss needs at least one step");
  require(q_.size() == r_.size(), ErrorCode::DimensionMismatch, "Q and R sequences differ in length");
  double max_norm = 0.0;
  for (std::size_t t = 0; t < q_.size(); ++t) {
    require(q_[t].rows() == q_[t].cols() && q_[t].rows() == q_.front().rows(), ErrorCode::DimensionMismatch,
            "Q_" + std::to_string(t) + " has shape " + dims(q_[t]));
    require(r_[t].rows() == r_[t].cols() && r_[t].rows() == r_.front().rows(), ErrorCode::DimensionMismatch,
            "R_" + std::to_string(t) + " has shape " + dims(r_[t]));
    require(is_psd(q_[t]), ErrorCode::InvalidParams, "Q_" + std::to_string(t) + " is not symmetric PSD");
    require(is_psd(r_[t]), ErrorCode::InvalidParams, "R_" + std::to_string(t) + " is not symmetric PSD");
    max_norm = std::max({max_norm, op_norm(q_[t]), op_norm(r_[t])});
  }
  beta_ = 2.0 * max_norm;
  grad_scale_ = 2.0 * beta_;
}

LossSpec LossSpec::constant(const Matrix& q, const Matrix& r, int horizon) {
  require(horizon > 0, ErrorCode::InvalidParams, "horizon must be positive");
  return LossSpec(std::vector<Matrix>(horizon, q), std::vector<Matrix>(horizon, r));
}

const Matrix& LossSpec::q(int t) const {
  check_step(t, horizon(), "LossSpec::q");
  return q_[t];
}

const Matrix& LossSpec::r(int t) const {
  check_step(t, horizon(), "LossSpec::r");
  return r_[t];
}

BoundConstants BoundConstants::compute(double noise_bound, double kappa, double gamma, double grad_scale,
                                       double kappa_b, int state_dim, int input_dim, double metric_condition) {
  require(kappa > 0.0, ErrorCode::InvalidParams, "kappa must be positive");
  require(gamma > 0.0 && gamma < 1.0, ErrorCode::InvalidParams, "gamma must lie in (0, 1)");
  require(metric_condition >= 1.0, ErrorCode::InvalidParams, "metric condition number must be >= 1");
  BoundConstants c;
  c.noise_bound = noise_bound;
  c.kappa = kappa;
  c.gamma = gamma;
  c.grad_scale = grad_scale;
  c.kappa_b = kappa_b;
  c.state_dim = state_dim;
  c.input_dim = input_dim;
  c.metric_condition = metric_condition;
  c.state_bound = metric_condition * std::max(noise_bound / gamma, noise_bound * kappa / gamma);
  const int d = std::min(state_dim, input_dim);
  c.domain_diameter = 2.0 * kappa * std::sqrt(static_cast<double>(d));
  c.gradient_bound = grad_scale * c.state_bound * state_dim * input_dim * (kappa_b + 1.0);
  return c;
}

BoundConstants BoundConstants::compute(const LtvSystem& sys, const LossSpec& loss, double kappa, double gamma,
                                       double metric_condition) {
  return compute(sys.noise_bound(), kappa, gamma, loss.grad_scale(), sys.kappa_b(), sys.state_dim(),
                 sys.input_dim(), metric_condition);
}

bool BoundConstants::consistent() const {
  const BoundConstants again =
      compute(noise_bound, kappa, gamma, grad_scale, kappa_b, state_dim, input_dim, metric_condition);
  return again.state_bound == state_bound && again.domain_diameter == domain_diameter &&
         again.gradient_bound == gradient_bound;
}

Vector step_dynamics(const LtvSystem& sys, int t, const Vector& x, const Vector& u, const Vector& w) {
  require(x.size() == sys.state_dim() && w.size() == sys.state_dim() && u.size() == sys.input_dim(),
          ErrorCode::DimensionMismatch, "step_dynamics: vector sizes do not match the system");
  const double wn = w.norm();
  require(wn <= sys.noise_bound() + kNoiseTolerance, ErrorCode::NoiseBoundViolated,
          "||w_" + std::to_string(t) + "|| = " + std::to_string(wn) + " exceeds W = " +
              std::to_string(sys.noise_bound()));
  return sys.a(t) * x + sys.b(t) * u + w;
}

Vector recover_noise(const LtvSystem& sys, int t, const Vector& x_next, const Vector& x, const Vector& u) {
  require(x.size() == sys.state_dim() && x_next.size() == sys.state_dim() && u.size() == sys.input_dim(),
          ErrorCode::DimensionMismatch, "recover_noise: vector sizes do not match the system");
  return x_next - sys.a(t) * x - sys.b(t) * u;
}

double stage_loss(const LossSpec& loss, int t, const Vector& x_next, const Vector& u) {
  const Matrix& q = loss.q(t);
  const Matrix& r = loss.r(t);
  require(x_next.size() == q.rows() && u.size() == r.rows(), ErrorCode::DimensionMismatch,
          "stage_loss: vector sizes do not match Q/R");
  return x_next.dot(q * x_next) + u.dot(r * u);
}

void check_gain(const LtvSystem& sys, const GainMatrix& k) {
  require(k.rows() == sys.input_dim() && k.cols() == sys.state_dim(), ErrorCode::DimensionMismatch,
          "gain has shape " + dims(k) + ", expected " + std::to_string(sys.input_dim()) + "x" +
              std::to_string(sys.state_dim()));
  require(k.allFinite(), ErrorCode::InvalidParams, "gain has non-finite entries");
}

double loss_in_gain(const LossSpec& loss, const LtvSystem& sys, int t, const Vector& x, const Vector& w,
                    const GainMatrix& k) {
  check_gain(sys, k);
  require(x.size() == sys.state_dim() && w.size() == sys.state_dim(), ErrorCode::DimensionMismatch,
          "loss_in_gain: vector sizes do not match the system");
  const Vector u = -k * x;
  const Vector x_next = sys.a(t) * x + sys.b(t) * u + w;
  return stage_loss(loss, t, x_next, u);
}

Matrix loss_gradient(const LossSpec& loss, const LtvSystem& sys, int t, const Vector& x, const Vector& w,
                     const GainMatrix& k) {
  check_gain(sys, k);
  require(x.size() == sys.state_dim() && w.size() == sys.state_dim(), ErrorCode::DimensionMismatch,
          "loss_gradient: vector sizes do not match the system");
  const Matrix& b = sys.b(t);
  const Vector kx = k * x;
  const Vector x_next = sys.a(t) * x - b * kx + w;
  const Vector dual = -2.0 * b.transpose() * (loss.q(t) * x_next) + 2.0 * (loss.r(t) * kx);
  return dual * x.transpose();
}

}  // namespace safe_nsc
