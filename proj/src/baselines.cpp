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
#include "safe_nsc/baselines.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>

#include "safe_nsc/errors.hpp"

namespace safe_nsc {

NoiseBuffer::NoiseBuffer(int capacity, int dim) : capacity_(capacity), zero_(Vector::Zero(dim)) {
  require(capacity >= 0, ErrorCode::InvalidParams, "noise buffer capacity must be nonnegative");
}

void NoiseBuffer::push(const Vector& w) {
  require(w.size() == zero_.size(), ErrorCode::DimensionMismatch, "noise buffer: wrong disturbance size");
  if (capacity_ == 0) return;
  items_.push_front(w);
  if (size() > capacity_) items_.pop_back();
}

const Vector& NoiseBuffer::recent(int i) const {
  require(i >= 1 && i <= capacity_, ErrorCode::InvalidParams, "noise buffer index out of range");
  return i <= size() ? items_[i - 1] : zero_;
}

void DacConfig::validate() const {
  require(memory >= 1, ErrorCode::InvalidParams, "DAC memory must be at least 1");
  require(eta >= 0.0 && std::isfinite(eta), ErrorCode::InvalidParams, "DAC step size must be nonnegative");
  require(margin_fraction > 0.0 && margin_fraction < 1.0, ErrorCode::InvalidParams,
          "DAC margin fraction must lie in (0, 1)");
}

Vector dac_action(const DacState& state, const Vector& x, const NoiseBuffer& buffer) {
  require(x.size() == state.gain.cols(), ErrorCode::DimensionMismatch, "dac_action: state size");
  require(buffer.capacity() == state.memory(), ErrorCode::DimensionMismatch, "dac_action: buffer length != memory");
  Vector u = -state.gain * x;
  for (int i = 1; i <= state.memory(); ++i) {
    const Matrix& m = state.weights[i - 1];
    if (m.isZero(0.0)) continue;
    u.noalias() += m * buffer.recent(i);
  }
  return u;
}

namespace {

struct Rollout {
  int first = 0;               // first replayed step
  std::vector<Vector> states;  // y_first .. y_{t+1}
  std::vector<Vector> inputs;  // v_first .. v_t
};

// Window access: history holds w_{t-2m+1} .. w_t.
struct Window {
  const std::vector<Vector>& history;
  int t;
  int memory;
  Vector zero;

  const Vector& at(int s) const {
    const int idx = s - (t - 2 * memory + 1);
    if (s < 0 || idx < 0) return zero;
    return history[idx];
  }
};

void check_history(const DacState& state, const LtvSystem& sys, int t, const std::vector<Vector>& history) {
  require(static_cast<int>(history.size()) == 2 * state.memory(), ErrorCode::DimensionMismatch,
          "DAC history must hold 2 * memory disturbances");
  require(t >= 0 && t < sys.horizon(), ErrorCode::InvalidParams, "DAC step out of range");
  for (const auto& w : history) {
    require(w.size() == sys.state_dim(), ErrorCode::DimensionMismatch, "DAC history: wrong disturbance size");
  }
}

Rollout replay(const DacState& state, const LtvSystem& sys, int t, const Window& win) {
  Rollout r;
  r.first = std::max(0, t - state.memory() + 1);
  Vector y = Vector::Zero(sys.state_dim());
  for (int s = r.first; s <= t; ++s) {
    Vector v = -state.gain * y;
    for (int j = 1; j <= state.memory(); ++j) v.noalias() += state.weights[j - 1] * win.at(s - j);
    r.states.push_back(y);
    r.inputs.push_back(v);
    y = sys.a(s) * y + sys.b(s) * v + win.at(s);
  }
  r.states.push_back(y);
  return r;
}

}  // namespace

double dac_truncated_loss(const DacState& state, const LtvSystem& sys, const LossSpec& loss, int t,
                          const std::vector<Vector>& history) {
  check_history(state, sys, t, history);
  const Window win{history, t, state.memory(), Vector::Zero(sys.state_dim())};
  const Rollout r = replay(state, sys, t, win);
  return stage_loss(loss, t, r.states.back(), r.inputs.back());
}

std::vector<Matrix> dac_truncated_gradient(const DacState& state, const LtvSystem& sys, const LossSpec& loss, int t,
                                           const std::vector<Vector>& history) {
  check_history(state, sys, t, history);
  const Window win{history, t, state.memory(), Vector::Zero(sys.state_dim())};
  const Rollout r = replay(state, sys, t, win);
  std::vector<Matrix> grads(state.memory(), Matrix::Zero(state.gain.rows(), state.gain.cols()));

  const int n = t - r.first + 1;
  Vector p = 2.0 * loss.q(t) * r.states.back();  // dL/dy_{s+1}
  const Vector rv = 2.0 * loss.r(t) * r.inputs.back();
  for (int k = n - 1; k >= 0; --k) {
    const int s = r.first + k;
    const Matrix closed = sys.a(s) - sys.b(s) * state.gain;
    Vector g = sys.b(s).transpose() * p;  // dL/d(memory term at s)
    Vector p_prev = closed.transpose() * p;
    if (k == n - 1) {
      g += rv;
      p_prev.noalias() -= state.gain.transpose() * rv;
    }
    for (int j = 1; j <= state.memory(); ++j) grads[j - 1].noalias() += g * win.at(s - j).transpose();
    p = std::move(p_prev);
  }
  return grads;
}

void dac_update(DacState& state, const std::vector<Matrix>& grads) {
  require(static_cast<int>(grads.size()) == state.memory(), ErrorCode::DimensionMismatch,
          "dac_update: one gradient per weight required");
  for (int i = 0; i < state.memory(); ++i) {
    require(grads[i].rows() == state.weights[i].rows() && grads[i].cols() == state.weights[i].cols(),
            ErrorCode::DimensionMismatch, "dac_update: gradient shape");
    if (grads[i].isZero(0.0)) continue;
    state.weights[i] = clip_singular_values(state.weights[i] - state.eta * grads[i], state.weight_cap);
  }
}

double dac_weight_cap(const SafetyRecord& record, double noise_bound, int memory, double fraction) {
  require(memory >= 1 && fraction > 0.0, ErrorCode::InvalidParams, "dac_weight_cap: bad memory or fraction");
  if (noise_bound == 0.0) return 0.0;
  double margin = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < record.input_rows.rows(); ++j) {
    const double n = record.input_rows.row(j).norm();
    if (n > 0.0) margin = std::min(margin, record.input_rhs(j) / n);
  }
  require(margin >= 0.0, ErrorCode::InfeasibleSafeSet, "input constraints exclude u = 0");
  if (!std::isfinite(margin)) margin = 1.0;
  return fraction * margin / (memory * noise_bound);
}

double dac_state_bound(const BoundConstants& consts, int memory, double cap) {
  return consts.state_bound * (1.0 + consts.kappa_b * memory * cap);
}

GainSet baseline_gain_set(const LtvSystem& sys, const SafetySpec& safety, const ControllerConfig& cfg,
                          double state_bound, double input_scale) {
  require(sys.is_time_invariant(), ErrorCode::InvalidParams, "baselines need a time-invariant system");
  SafetyRecord record = safety.at(0);
  record.input_rhs *= input_scale;
  const ContractionMetric metric = cfg.metric.value_or(ContractionMetric::identity(sys.state_dim()));
  return build_time_invariant_set(sys.a(0), sys.b(0), record, state_bound, cfg.kappa, cfg.gamma, metric);
}

GainSet dac_gain_set(const LtvSystem& sys, const SafetySpec& safety, const LossSpec& loss, const ControllerConfig& cfg,
                     const DacConfig& dac) {
  const BoundConstants consts = controller_constants(sys, loss, cfg);
  const double cap = dac_weight_cap(safety.at(0), sys.noise_bound(), dac.memory, dac.margin_fraction);
  return baseline_gain_set(sys, safety, cfg, dac_state_bound(consts, dac.memory, cap), 1.0 - dac.margin_fraction);
}

namespace {

using Clock = std::chrono::steady_clock;

// Shared loop for policies that do not change the gain set.
template <typename Policy, typename Observe>
RunTrace simulate(const std::string& name, const LtvSystem& sys, const SafetySpec& safety, const LossSpec& loss,
                  const NoiseModel& noise, const GainMatrix& k, const GainSet& set, const std::optional<Vector>& x0,
                  Policy&& policy, Observe&& observe) {
  check_run_inputs(sys, safety, loss, noise);
  check_gain(sys, k);
  const MembershipResult inside = membership(set, k, 1e-9);
  require(inside.member, ErrorCode::InvariantViolation, "baseline gain is outside its set (" + inside.worst + ")");
  const auto run_start = Clock::now();

  RunTrace trace;
  trace.controller = name;
  Vector x = x0.value_or(Vector::Zero(sys.state_dim()));
  require(x.size() == sys.state_dim(), ErrorCode::DimensionMismatch, "initial state has the wrong size");
  trace.zero_in_initial_set = membership(set, Matrix::Zero(k.rows(), k.cols()), 0.0).member;
  trace.steps.reserve(sys.horizon());
  for (int t = 0; t < sys.horizon(); ++t) {
    const auto step_start = Clock::now();
    try {
      StepRecord rec;
      rec.x = x;
      rec.gain = k;
      rec.u = policy(t, x);
      const Vector x_next = step_dynamics(sys, t, x, rec.u, noise.sample(t));
      rec.w = recover_noise(sys, t, x_next, x, rec.u);
      rec.loss = stage_loss(loss, t, x_next, rec.u);
      const SafetyReport safe = verify_realized_safety(safety, t, x_next, rec.u);
      rec.min_slack = safe.min_slack;
      rec.violations = safe.violations;
      rec.grad_norm = loss_gradient(loss, sys, t, x, rec.w, k).norm();
      observe(t, rec.w);
      rec.wall_clock_s = std::chrono::duration<double>(Clock::now() - step_start).count();

      trace.cumulative_loss += rec.loss;
      trace.max_state_norm = std::max({trace.max_state_norm, x.norm(), x_next.norm()});
      trace.max_input_norm = std::max(trace.max_input_norm, rec.u.norm());
      trace.max_grad_norm = std::max(trace.max_grad_norm, rec.grad_norm);
      trace.violations += rec.violations;
      trace.steps.push_back(std::move(rec));
      x = x_next;
    } catch (const Error& e) {
      throw Error(e.code(), "step " + std::to_string(t) + ": " + e.what());
    }
  }
  trace.final_state = x;
  trace.wall_clock_s = std::chrono::duration<double>(Clock::now() - run_start).count();
  return trace;
}

}  // namespace

RunTrace fixed_gain_run(const LtvSystem& sys, const SafetySpec& safety, const LossSpec& loss, const NoiseModel& noise,
                        const GainMatrix& k, const GainSet& set, const std::optional<Vector>& x0) {
  return simulate(
      "fixed_gain", sys, safety, loss, noise, k, set, x0, [&](int, const Vector& x) -> Vector { return -k * x; },
      [](int, const Vector&) {});
}

RunTrace fixed_gain_run(const LtvSystem& sys, const SafetySpec& safety, const LossSpec& loss, const NoiseModel& noise,
                        const ControllerConfig& cfg, const std::optional<Vector>& x0) {
  cfg.validate();
  const BoundConstants consts = controller_constants(sys, loss, cfg);
  const GainSet set = baseline_gain_set(sys, safety, cfg, consts.state_bound);
  const ProbeResult probe = feasibility_probe(set, cfg.projection);
  require(probe.feasible, ErrorCode::InfeasibleSafeSet, "time-invariant gain set is empty");
  return fixed_gain_run(sys, safety, loss, noise, probe.witness, set, x0);
}

RunTrace dac_run(const LtvSystem& sys, const SafetySpec& safety, const LossSpec& loss, const NoiseModel& noise,
                 const ControllerConfig& cfg, const DacConfig& dac, const std::optional<Vector>& x0) {
  cfg.validate();
  dac.validate();
  DacState state;
  state.eta = dac.eta;
  state.weight_cap = dac_weight_cap(safety.at(0), sys.noise_bound(), dac.memory, dac.margin_fraction);
  const GainSet set = dac_gain_set(sys, safety, loss, cfg, dac);
  const ProbeResult probe = feasibility_probe(set, cfg.projection);
  require(probe.feasible, ErrorCode::InfeasibleSafeSet, "DAC gain set is empty");
  state.gain = probe.witness;
  state.weights.assign(dac.memory, Matrix::Zero(sys.input_dim(), sys.state_dim()));

  NoiseBuffer buffer(dac.memory, sys.state_dim());
  std::deque<Vector> window(2 * dac.memory, Vector::Zero(sys.state_dim()));
  RunTrace trace = simulate(
      "dac", sys, safety, loss, noise, state.gain, set, x0,
      [&](int, const Vector& x) { return dac_action(state, x, buffer); },
      [&](int t, const Vector& w) {
        buffer.push(w);
        window.pop_front();
        window.push_back(w);
        if (state.eta == 0.0) return;
        const std::vector<Vector> history(window.begin(), window.end());
        dac_update(state, dac_truncated_gradient(state, sys, loss, t, history));
      });
  trace.eta = dac.eta;
  return trace;
}

}  // namespace safe_nsc
