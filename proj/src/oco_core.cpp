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
#include "safe_nsc/oco_core.hpp"

#include <cmath>
#include <string>

#include "safe_nsc/errors.hpp"

namespace safe_nsc {

BoxDomain::BoxDomain(Matrix lo, Matrix hi) : lo_(std::move(lo)), hi_(std::move(hi)) {
  require(lo_.rows() == hi_.rows() && lo_.cols() == hi_.cols(), ErrorCode::DimensionMismatch, "box bounds differ");
  require((lo_.array() <= hi_.array()).all(), ErrorCode::InvalidParams, "box has lo > hi");
}

BoxDomain BoxDomain::interval(double lo, double hi) {
  return BoxDomain(Matrix::Constant(1, 1, lo), Matrix::Constant(1, 1, hi));
}

Matrix BoxDomain::project(const Matrix& point) const { return point.cwiseMax(lo_).cwiseMin(hi_); }

bool BoxDomain::contains(const Matrix& point, double tol) const {
  return ((point - lo_).array() >= -tol).all() && ((hi_ - point).array() >= -tol).all();
}

BallDomain::BallDomain(Matrix center, double radius) : center_(std::move(center)), radius_(radius) {
  require(radius >= 0.0, ErrorCode::InvalidParams, "ball radius must be nonnegative");
}

Matrix BallDomain::project(const Matrix& point) const {
  const Matrix d = point - center_;
  const double n = d.norm();
  if (n <= radius_) return point;
  return center_ + d * (radius_ / n);
}

bool BallDomain::contains(const Matrix& point, double tol) const { return (point - center_).norm() <= radius_ + tol; }

DomainSequence::DomainSequence(std::vector<std::reference_wrapper<const ConvexDomain>> domains, double diameter)
    : domains_(std::move(domains)), diameter_(diameter) {
  require(!domains_.empty(), ErrorCode::InvalidParams, "domain sequence is empty");
}

const ConvexDomain& DomainSequence::at(int t) const {
  require(t >= 0 && t < size(), ErrorCode::InvalidParams, "domain index " + std::to_string(t) + " out of range");
  return domains_[t].get();
}

OgdStepResult ogd_step(OgdState& state, const Matrix& grad, const ConvexDomain& next, const ConvexDomain& current) {
  require(grad.rows() == state.decision.rows() && grad.cols() == state.decision.cols(), ErrorCode::DimensionMismatch,
          "ogd_step: gradient shape does not match the decision");
  const Matrix intermediate = state.decision - state.eta * grad;
  OgdStepResult out;
  out.decision = next.project(intermediate);
  const Matrix stay = current.project(intermediate);
  out.zeta = (stay - out.decision).norm();
  state.decision = out.decision;
  state.zeta_log.push_back(out.zeta);
  ++state.step;
  return out;
}

double step_size_default(double diameter, double grad_bound, int horizon) {
  require(horizon >= 1, ErrorCode::InvalidParams, "horizon must be at least 1");
  require(grad_bound > 0.0, ErrorCode::InvalidParams, "gradient bound must be positive");
  require(diameter > 0.0, ErrorCode::InvalidParams, "diameter must be positive");
  return diameter / (grad_bound * std::sqrt(static_cast<double>(horizon)));
}

OgdRun run_ogd(const TimeVaryingDomain& domain, const std::vector<OnlineLoss>& losses, const Matrix& x1,
                    double eta) {
  require(eta > 0.0, ErrorCode::InvalidParams, "step size must be positive");
  const int horizon = static_cast<int>(losses.size());
  OgdRun run;
  OgdState state;
  state.decision = domain.at(0).project(x1);
  state.eta = eta;
  for (int t = 0; t < horizon; ++t) {
    run.decisions.push_back(state.decision);
    const double value = losses[t].value(state.decision);
    run.losses.push_back(value);
    state.cumulative_loss += value;
    const Matrix grad = losses[t].gradient(state.decision);
    // The last step still needs a domain for x_{T+1}; reuse X_T.
    const ConvexDomain& next = domain.at(t + 1 < horizon ? t + 1 : t);
    const OgdStepResult step = ogd_step(state, grad, next, domain.at(t));
    run.zetas.push_back(step.zeta);
  }
  return run;
}

}  // namespace safe_nsc
