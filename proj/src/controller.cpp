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
#include "safe_nsc/controller.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "safe_nsc/errors.hpp"

namespace safe_nsc {

void ControllerConfig::validate() const {
  require(kappa > 0.0, ErrorCode::InvalidParams, "kappa must be positive");
  require(gamma > 0.0 && gamma < 1.0, ErrorCode::InvalidParams, "gamma must lie in (0, 1)");
  if (eta) require(*eta > 0.0, ErrorCode::InvalidParams, "eta must be positive");
  projection.validate();
}

GainSetProvider::GainSetProvider(const LtvSystem& sys, const SafetySpec& safety, const BoundConstants& consts,
                                 ContractionMetric metric, std::optional<GainSet> fixed)
    : sys_(&sys), safety_(&safety), consts_(consts), metric_(std::move(metric)), fixed_(std::move(fixed)) {}

GainSet GainSetProvider::at(int t, const Vector& x) const {
  if (fixed_) return *fixed_;
  return build_gain_set(*sys_, *safety_, consts_, t, x, metric_);
}

Matrix GainSetDomain::project(const Matrix& point) const { return project_gain_set(*set_, point, cfg_).point; }

bool GainSetDomain::contains(const Matrix& point, double tol) const { return membership(*set_, point, tol).member; }

GainMatrix init_gain(const GainSet& set, InitPolicy policy, const ProjectionConfig& cfg) {
  const Matrix zero = Matrix::Zero(set.input_dim, set.state_dim);
  switch (policy) {
    case InitPolicy::ProjectZero: return project_gain_set(set, zero, cfg).point;
    case InitPolicy::Witness: {
      const ProbeResult probe = feasibility_probe(set, cfg);
      require(probe.feasible, ErrorCode::InfeasibleSafeSet, "initial gain set is empty");
      return probe.witness;
    }
  }
  throw Error(ErrorCode::InvalidParams, "unknown init policy");
}

ControlStepResult control_step(SafeOgdState& state, const GainSetProvider& sets, const LtvSystem& sys,
                               const SafetySpec& safety, const LossSpec& loss, const ProjectionConfig& proj, int t,
                               const Vector& x, const Vector& w) {
  ControlStepResult out;
  out.u = -state.gain * x;
  out.x_next = step_dynamics(sys, t, x, out.u, w);
  out.w = recover_noise(sys, t, out.x_next, x, out.u);
  require(out.w.norm() <= sys.noise_bound() + kNoiseTolerance, ErrorCode::NoiseBoundViolated,
          "recovered noise exceeds W");
  out.loss = stage_loss(loss, t, out.x_next, out.u);
  out.safety = verify_realized_safety(safety, t, out.x_next, out.u);

  const Matrix grad = loss_gradient(loss, sys, t, x, out.w, state.gain);
  out.grad_norm = grad.norm();
  // The final step has no successor constraints; it reuses K_t, so zeta = 0.
  const bool last = t + 1 >= sys.horizon();
  out.next_set = last ? state.current_set : sets.at(t + 1, out.x_next);

  OgdState ogd;
  ogd.decision = state.gain;
  ogd.eta = state.eta;
  const GainSetDomain next(out.next_set, proj);
  const GainSetDomain current(state.current_set, proj);
  const OgdStepResult step = ogd_step(ogd, grad, next, current);
  out.next_gain = step.decision;
  out.zeta = step.zeta;

  state.gain = out.next_gain;
  state.current_set = out.next_set;
  return out;
}

BoundConstants controller_constants(const LtvSystem& sys, const LossSpec& loss, const ControllerConfig& cfg) {
  const double cond = cfg.metric ? cfg.metric->condition : 1.0;
  return BoundConstants::compute(sys, loss, cfg.kappa, cfg.gamma, cond);
}

double controller_eta(const LtvSystem& sys, const LossSpec& loss, const ControllerConfig& cfg) {
  if (cfg.eta) return *cfg.eta;
  const BoundConstants c = controller_constants(sys, loss, cfg);
  return step_size_default(c.domain_diameter, c.gradient_bound, sys.horizon());
}

void check_run_inputs(const LtvSystem& sys, const SafetySpec& safety, const LossSpec& loss, const NoiseModel& noise) {
  require(safety.steps() >= sys.horizon() + 1, ErrorCode::InvalidParams,
          "safety spec needs horizon + 1 = " + std::to_string(sys.horizon() + 1) + " records, got " +
              std::to_string(safety.steps()));
  require(loss.horizon() >= sys.horizon(), ErrorCode::InvalidParams, "loss horizon shorter than the system");
  require(noise.dim() == sys.state_dim(), ErrorCode::DimensionMismatch, "noise dimension does not match the state");
  require(noise.bound() <= sys.noise_bound(), ErrorCode::InvalidParams, "noise model bound exceeds the system's W");
  require(safety.state_dim() == sys.state_dim() && safety.input_dim() == sys.input_dim(),
          ErrorCode::DimensionMismatch, "safety spec does not match the system");
}

RunTrace run_safe_ogd(const LtvSystem& sys, const SafetySpec& safety, const LossSpec& loss, const NoiseModel& noise,
                      const ControllerConfig& cfg, const std::optional<Vector>& x0) {
  cfg.validate();
  check_run_inputs(sys, safety, loss, noise);
  using Clock = std::chrono::steady_clock;
  const auto run_start = Clock::now();

  const BoundConstants consts = controller_constants(sys, loss, cfg);
  const ContractionMetric metric = cfg.metric.value_or(ContractionMetric::identity(sys.state_dim()));
  const GainSetProvider sets(sys, safety, consts, metric, cfg.fixed_set);

  Vector x = x0.value_or(Vector::Zero(sys.state_dim()));
  require(x.size() == sys.state_dim(), ErrorCode::DimensionMismatch, "initial state has the wrong size");
  const SafetyRecord& first = safety.at(0);
  if (first.state_rows.rows() > 0) {
    require(((first.state_rhs - first.state_rows * x).array() >= 0.0).all(), ErrorCode::ValidationError,
            "initial state violates the step-0 state constraints");
  }

  RunTrace trace;
  trace.controller = "safe_ogd";
  trace.eta = controller_eta(sys, loss, cfg);

  SafeOgdState state;
  state.eta = trace.eta;
  state.current_set = sets.at(0, x);
  trace.zero_in_initial_set =
      membership(state.current_set, Matrix::Zero(sys.input_dim(), sys.state_dim()), 0.0).member;
  state.gain = init_gain(state.current_set, cfg.init, cfg.projection);

  trace.steps.reserve(sys.horizon());
  trace.sets.reserve(sys.horizon());
  for (int t = 0; t < sys.horizon(); ++t) {
    const auto step_start = Clock::now();
    try {
      const MembershipResult inside = membership(state.current_set, state.gain, cfg.projection.feasibility_slack);
      require(inside.member, ErrorCode::InvariantViolation,
              "K_t left its safe set (" + inside.worst + " by " + std::to_string(inside.max_violation) + ")");
      StepRecord rec;
      rec.x = x;
      rec.gain = state.gain;
      trace.sets.push_back(state.current_set);
      const ControlStepResult r = control_step(state, sets, sys, safety, loss, cfg.projection, t, x, noise.sample(t));
      rec.u = r.u;
      rec.w = r.w;
      rec.loss = r.loss;
      rec.zeta = r.zeta;
      rec.min_slack = r.safety.min_slack;
      rec.violations = r.safety.violations;
      rec.grad_norm = r.grad_norm;
      rec.wall_clock_s = std::chrono::duration<double>(Clock::now() - step_start).count();

      trace.cumulative_loss += r.loss;
      trace.max_state_norm = std::max({trace.max_state_norm, x.norm(), r.x_next.norm()});
      trace.max_input_norm = std::max(trace.max_input_norm, r.u.norm());
      trace.max_grad_norm = std::max(trace.max_grad_norm, r.grad_norm);
      trace.set_variation += r.zeta;
      trace.violations += r.safety.violations;
      trace.steps.push_back(std::move(rec));
      x = r.x_next;
    } catch (const Error& e) {
      throw Error(e.code(), "step " + std::to_string(t) + ": " + e.what());
    }
  }
  trace.final_state = x;
  trace.wall_clock_s = std::chrono::duration<double>(Clock::now() - run_start).count();
  return trace;
}

}  // namespace safe_nsc
