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
#include "safe_nsc/regret.hpp"

#include <cmath>
#include <functional>
#include <string>

#include "safe_nsc/barrier.hpp"
#include "safe_nsc/errors.hpp"

namespace safe_nsc {

namespace {

struct Objective {
  std::function<double(const Matrix&)> value;
  std::function<Matrix(const Matrix&)> gradient;
  double lipschitz = 0.0;
};

// Quadratic model of the objective in column-major vec coordinates, read off
// the gradient at zero and at the unit matrices.
QuadraticObjective quadratic_model(const Objective& obj, Eigen::Index rows, Eigen::Index cols) {
  const Eigen::Index n = rows * cols;
  const Matrix g0 = obj.gradient(Matrix::Zero(rows, cols));
  QuadraticObjective q;
  q.linear = Eigen::Map<const Vector>(g0.data(), n);
  q.hessian.resize(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    Matrix e = Matrix::Zero(rows, cols);
    e(j % rows, j / rows) = 1.0;
    const Matrix gj = obj.gradient(e) - g0;
    q.hessian.col(j) = Eigen::Map<const Vector>(gj.data(), n);
  }
  q.hessian = 0.5 * (q.hessian + q.hessian.transpose());
  return q;
}

// Barrier solve of the quadratic, then accelerated projected gradient with
// function-value restart until the fixed-point residual is below tolerance.
ComparatorResult minimise(const Objective& obj, const GainSet& set, const ComparatorConfig& cfg) {
  const auto proj = [&](const Matrix& k) { return project_gain_set(set, k, cfg.projection).point; };
  ComparatorResult out;
  if (obj.lipschitz == 0.0) {
    out.gain = proj(Matrix::Zero(set.input_dim, set.state_dim));
    out.value = obj.value(out.gain);
    return out;
  }
  const double step = 1.0 / obj.lipschitz;
  const auto residual_at = [&](const Matrix& k) { return (k - proj(k - step * obj.gradient(k))).norm(); };

  QuadraticObjective model = quadratic_model(obj, set.input_dim, set.state_dim);
  model.hessian *= step;
  model.linear *= step;
  BarrierConfig bcfg;
  bcfg.gap_tol = 1e-12;
  const BarrierResult ipm = minimise_over_gain_set(set, model, bcfg);
  if (!ipm.feasible) throw Error(ErrorCode::InfeasibleSafeSet, "comparator: gain set has no interior point");
  Matrix k = proj(ipm.point);
  double residual = residual_at(k);
  out.iterations = ipm.newton_steps;
  if (residual <= cfg.fixed_point_tol) {
    out.gain = k;
    out.value = obj.value(k);
    out.residual = residual;
    return out;
  }

  Matrix y = k;
  double theta = 1.0;
  double value = obj.value(k);
  for (int it = 1; it <= cfg.max_iters; ++it) {
    Matrix next = proj(y - step * obj.gradient(y));
    const double next_value = obj.value(next);
    if (next_value > value) {
      // Restart from the last iterate with a plain projected step.
      theta = 1.0;
      next = proj(k - step * obj.gradient(k));
      y = next;
    } else {
      const double theta_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * theta * theta));
      y = next + ((theta - 1.0) / theta_next) * (next - k);
      theta = theta_next;
    }
    const bool small_move = (next - k).norm() <= cfg.fixed_point_tol;
    k = std::move(next);
    value = obj.value(k);
    if (small_move || it % 50 == 0) {
      residual = residual_at(k);
      if (residual <= cfg.fixed_point_tol) {
        out.gain = k;
        out.value = value;
        out.residual = residual;
        out.iterations += it;
        return out;
      }
    }
  }
  throw Error(ErrorCode::ConvergenceFailure,
              "comparator did not reach the fixed-point tolerance in " + std::to_string(cfg.max_iters) + " iterations");
}

double curvature(const LtvSystem& sys, const LossSpec& loss, int t) {
  const Matrix& b = sys.b(t);
  const Matrix h = b.transpose() * loss.q(t) * b + loss.r(t);
  return Eigen::SelfAdjointEigenSolver<Matrix>(0.5 * (h + h.transpose()), Eigen::EigenvaluesOnly)
      .eigenvalues()
      .maxCoeff();
}

bool same_set(const GainSet& a, const GainSet& b) {
  if (a.input_dim != b.input_dim || a.state_dim != b.state_dim || a.spectral_cap != b.spectral_cap) return false;
  if (a.halfspaces.size() != b.halfspaces.size() || a.norm_bounds.size() != b.norm_bounds.size()) return false;
  for (std::size_t i = 0; i < a.halfspaces.size(); ++i) {
    if (a.halfspaces[i].rhs != b.halfspaces[i].rhs || a.halfspaces[i].normal != b.halfspaces[i].normal) return false;
  }
  for (std::size_t i = 0; i < a.norm_bounds.size(); ++i) {
    if (a.norm_bounds[i].radius != b.norm_bounds[i].radius || a.norm_bounds[i].direction != b.norm_bounds[i].direction)
      return false;
  }
  if (a.contraction.has_value() != b.contraction.has_value()) return false;
  if (!a.contraction) return true;
  const auto& ca = *a.contraction;
  const auto& cb = *b.contraction;
  return ca.radius == cb.radius && ca.offset == cb.offset && ca.left == cb.left && ca.right == cb.right;
}

}  // namespace

ComparatorResult comparator_step(const LtvSystem& sys, const LossSpec& loss, const GainSet& set, int t,
                                 const Vector& x, const Vector& w, const ComparatorConfig& cfg) {
  require(cfg.fixed_point_tol > 0.0 && cfg.max_iters > 0, ErrorCode::InvalidParams, "bad comparator config");
  Objective obj;
  obj.value = [&](const Matrix& k) { return loss_in_gain(loss, sys, t, x, w, k); };
  obj.gradient = [&](const Matrix& k) { return loss_gradient(loss, sys, t, x, w, k); };
  obj.lipschitz = 2.0 * x.squaredNorm() * curvature(sys, loss, t);
  return minimise(obj, set, cfg);
}

std::vector<GainMatrix> hindsight_comparators(const RunTrace& trace, const LtvSystem& sys, const LossSpec& loss,
                                              const ComparatorConfig& cfg) {
  require(trace.sets.size() == trace.steps.size(), ErrorCode::InvalidParams,
          "trace carries no gain sets; comparators need the per-step sets");
  std::vector<GainMatrix> out;
  out.reserve(trace.steps.size());
  for (int t = 0; t < trace.horizon(); ++t) {
    const StepRecord& s = trace.steps[t];
    try {
      out.push_back(comparator_step(sys, loss, trace.sets[t], t, s.x, s.w, cfg).gain);
    } catch (const Error& e) {
      throw Error(e.code(), "comparator at step " + std::to_string(t) + ": " + e.what());
    }
  }
  return out;
}

ComparatorResult fixed_hindsight_comparator(const RunTrace& trace, const LtvSystem& sys, const LossSpec& loss,
                                            const ComparatorConfig& cfg) {
  require(!trace.sets.empty() && trace.sets.size() == trace.steps.size(), ErrorCode::InvalidParams,
          "trace carries no gain sets");
  for (const GainSet& s : trace.sets) {
    require(same_set(s, trace.sets.front()), ErrorCode::InvalidParams,
            "fixed comparator needs a trace with a time-invariant gain set");
  }
  Objective obj;
  obj.value = [&](const Matrix& k) {
    double v = 0.0;
    for (int t = 0; t < trace.horizon(); ++t) v += loss_in_gain(loss, sys, t, trace.steps[t].x, trace.steps[t].w, k);
    return v;
  };
  obj.gradient = [&](const Matrix& k) {
    Matrix g = Matrix::Zero(k.rows(), k.cols());
    for (int t = 0; t < trace.horizon(); ++t) g += loss_gradient(loss, sys, t, trace.steps[t].x, trace.steps[t].w, k);
    return g;
  };
  for (int t = 0; t < trace.horizon(); ++t) {
    obj.lipschitz += 2.0 * trace.steps[t].x.squaredNorm() * curvature(sys, loss, t);
  }
  return minimise(obj, trace.sets.front(), cfg);
}

double path_length(const std::vector<GainMatrix>& comparators) {
  double total = 0.0;
  for (std::size_t t = 1; t < comparators.size(); ++t) total += (comparators[t - 1] - comparators[t]).norm();
  return total;
}

double set_variation(const std::vector<double>& zetas) {
  double total = 0.0;
  for (std::size_t t = 0; t < zetas.size(); ++t) {
    require(zetas[t] >= 0.0, ErrorCode::NegativeZeta, "zeta at step " + std::to_string(t) + " is negative");
    total += zetas[t];
  }
  return total;
}

BoundTerms theorem_bound_terms(const BoundConstants& consts, double eta, int horizon, double path, double variation) {
  require(eta > 0.0 && std::isfinite(eta), ErrorCode::InvalidParams, "theorem_bound: eta must be positive");
  require(horizon >= 0 && path >= 0.0 && variation >= 0.0, ErrorCode::InvalidParams,
          "theorem_bound: horizon, C_T and S_T must be nonnegative");
  const double df = consts.domain_diameter;
  const double gf = consts.gradient_bound;
  BoundTerms b;
  b.gradient = eta * horizon * gf * gf / 2.0;
  b.diameter = 7.0 * df * df / (4.0 * eta);
  b.path = df * path / eta;
  b.variation = df * variation / eta;
  return b;
}

double theorem_bound(const BoundConstants& consts, double eta, int horizon, double path, double variation) {
  return theorem_bound_terms(consts, eta, horizon, path, variation).total();
}

double standard_oco_bound(const BoundConstants& consts, double eta, int horizon, double path) {
  const BoundTerms b = theorem_bound_terms(consts, eta, horizon, path, 0.0);
  return b.gradient + b.diameter + b.path;
}

RegretReport dynamic_regret(const RunTrace& trace, const std::vector<GainMatrix>& comparators, const LtvSystem& sys,
                            const LossSpec& loss, const BoundConstants& consts) {
  require(comparators.size() == trace.steps.size(), ErrorCode::DimensionMismatch,
          "one comparator per step is required");
  RegretReport r;
  r.comparators = comparators;
  double regret = 0.0;
  double path = 0.0;
  double variation = 0.0;
  for (int t = 0; t < trace.horizon(); ++t) {
    const StepRecord& s = trace.steps[t];
    require(s.zeta >= 0.0, ErrorCode::NegativeZeta, "zeta at step " + std::to_string(t) + " is negative");
    const double star = loss_in_gain(loss, sys, t, s.x, s.w, comparators[t]);
    r.comparator_losses.push_back(star);
    regret += loss_in_gain(loss, sys, t, s.x, s.w, s.gain) - star;
    if (t > 0) path += (comparators[t - 1] - comparators[t]).norm();
    variation += s.zeta;
    r.cumulative_regret.push_back(regret);
    r.cumulative_bound.push_back(theorem_bound(consts, trace.eta, t + 1, path, variation));
  }
  r.regret = regret;
  r.path_length = path;
  r.set_variation = variation;
  r.terms = theorem_bound_terms(consts, trace.eta, trace.horizon(), path, variation);
  r.bound = r.terms.total();
  r.slack = r.bound - r.regret;
  return r;
}

}  // namespace safe_nsc
