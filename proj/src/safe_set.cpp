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
#include "safe_nsc/safe_set.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "safe_nsc/errors.hpp"

namespace safe_nsc {

ContractionMetric ContractionMetric::identity(int state_dim) {
  ContractionMetric m;
  m.transform = Matrix::Identity(state_dim, state_dim);
  m.inverse = Matrix::Identity(state_dim, state_dim);
  m.condition = 1.0;
  return m;
}

ContractionMetric ContractionMetric::from_lqr(const Matrix& a, const Matrix& b, const Matrix& q, const Matrix& r) {
  require(a.rows() == a.cols() && b.rows() == a.rows() && q.rows() == a.rows() && r.rows() == b.cols(),
          ErrorCode::DimensionMismatch, "from_lqr: inconsistent shapes");
  // Riccati value iteration; converges for stabilizable (A, B) and Q > 0.
  Matrix p = q;
  constexpr int kMaxIters = 100000;
  int it = 0;
  for (; it < kMaxIters; ++it) {
    const Matrix btp = b.transpose() * p;
    const Matrix gain = (r + btp * b).ldlt().solve(btp * a);
    Matrix next = q + a.transpose() * p * a - a.transpose() * p * b * gain;
    next = 0.5 * (next + next.transpose());
    const double change = (next - p).cwiseAbs().maxCoeff();
    p = std::move(next);
    if (change <= 1e-13 * std::max(1.0, p.cwiseAbs().maxCoeff())) break;
  }
  require(it < kMaxIters && p.allFinite(), ErrorCode::ConvergenceFailure, "Riccati iteration did not converge");
  const SymmetricRoot root = symmetric_root(p);
  ContractionMetric m;
  m.transform = root.root;
  m.inverse = root.inverse_root;
  m.condition = root.condition;
  return m;
}

AffineSpectralBound AffineSpectralBound::contraction(const Matrix& a, const Matrix& b, const ContractionMetric& metric,
                                                     double radius) {
  require(metric.transform.rows() == a.rows(), ErrorCode::DimensionMismatch, "metric does not match the state size");
  AffineSpectralBound c;
  c.offset = metric.transform * a * metric.inverse;
  c.left = metric.transform * b;
  c.right = metric.inverse;
  c.radius = radius;
  Eigen::SelfAdjointEigenSolver<Matrix> le(c.left.transpose() * c.left);
  Eigen::SelfAdjointEigenSolver<Matrix> re(c.right * c.right.transpose());
  c.left_basis = le.eigenvectors();
  c.left_eigs = le.eigenvalues().cwiseMax(0.0);
  c.right_basis = re.eigenvectors();
  c.right_eigs = re.eigenvalues().cwiseMax(0.0);
  return c;
}

void add_halfspace(GainSet& set, Halfspace h) {
  if (h.normal.norm() == 0.0) {
    require(h.rhs >= 0.0, ErrorCode::InfeasibleSafeSet,
            "constraint row " + std::to_string(h.row) + " reduces to 0 <= " + std::to_string(h.rhs));
    return;
  }
  set.halfspaces.push_back(std::move(h));
}

GainSet build_gain_set(const LtvSystem& sys, const SafetySpec& safety, const BoundConstants& consts, int t,
                       const Vector& x, const ContractionMetric& metric) {
  require(x.size() == sys.state_dim(), ErrorCode::DimensionMismatch, "build_gain_set: state size mismatch");
  require(x.allFinite(), ErrorCode::InvalidParams, "build_gain_set: non-finite state");
  require(safety.state_dim() == sys.state_dim() && safety.input_dim() == sys.input_dim(),
          ErrorCode::DimensionMismatch, "safety spec does not match the system");
  require(t + 1 < safety.steps(), ErrorCode::InvalidParams,
          "build_gain_set needs the constraints of step " + std::to_string(t + 1));
  const Matrix& a = sys.a(t);
  const Matrix& b = sys.b(t);
  const SafetyRecord& next = safety.at(t + 1);
  const SafetyRecord& now = safety.at(t);
  const double w = sys.noise_bound();

  GainSet set;
  set.input_dim = sys.input_dim();
  set.state_dim = sys.state_dim();
  set.spectral_cap = consts.kappa;

  const Vector ax = a * x;
  for (Eigen::Index i = 0; i < next.state_rows.rows(); ++i) {
    const Vector row = next.state_rows.row(i).transpose();
    Halfspace h;
    h.normal = -(b.transpose() * row) * x.transpose();
    h.rhs = next.state_rhs(i) - row.dot(ax) - w * row.norm();
    h.source = Halfspace::Source::StateRow;
    h.row = static_cast<int>(i);
    add_halfspace(set, std::move(h));
  }
  for (Eigen::Index j = 0; j < now.input_rows.rows(); ++j) {
    Halfspace h;
    h.normal = -now.input_rows.row(j).transpose() * x.transpose();
    h.rhs = now.input_rhs(j);
    h.source = Halfspace::Source::InputRow;
    h.row = static_cast<int>(j);
    add_halfspace(set, std::move(h));
  }
  set.contraction = AffineSpectralBound::contraction(a, b, metric, 1.0 - consts.gamma);
  return set;
}

GainSet build_time_invariant_set(const Matrix& a, const Matrix& b, const SafetyRecord& record, double state_bound,
                                 double kappa, double gamma, const ContractionMetric& metric) {
  require(record.state_rows.rows() == 0, ErrorCode::InvalidParams,
          "time-invariant gain sets support input constraints only");
  require(state_bound > 0.0, ErrorCode::InvalidParams, "state bound must be positive");
  GainSet set;
  set.input_dim = static_cast<int>(b.cols());
  set.state_dim = static_cast<int>(a.rows());
  set.spectral_cap = kappa;
  for (Eigen::Index j = 0; j < record.input_rows.rows(); ++j) {
    const Vector dir = record.input_rows.row(j).transpose();
    const double rhs = record.input_rhs(j);
    require(rhs >= 0.0, ErrorCode::InfeasibleSafeSet,
            "input row " + std::to_string(j) + " excludes u = 0, no gain is robustly safe");
    if (dir.norm() == 0.0) continue;
    set.norm_bounds.push_back(RowNormBound{dir, rhs / state_bound});
  }
  set.contraction = AffineSpectralBound::contraction(a, b, metric, 1.0 - gamma);
  return set;
}

MembershipResult membership(const GainSet& set, const Matrix& k, double tol) {
  require(k.rows() == set.input_dim && k.cols() == set.state_dim, ErrorCode::DimensionMismatch,
          "membership: gain shape does not match the set");
  MembershipResult out;
  out.max_violation = -std::numeric_limits<double>::infinity();
  auto note = [&](double v, const std::string& what) {
    if (v > out.max_violation) {
      out.max_violation = v;
      out.worst = what;
    }
  };
  for (std::size_t i = 0; i < set.halfspaces.size(); ++i) {
    const auto& h = set.halfspaces[i];
    note(frob_inner(h.normal, k) - h.rhs, "halfspace " + std::to_string(i));
  }
  for (std::size_t i = 0; i < set.norm_bounds.size(); ++i) {
    const auto& nb = set.norm_bounds[i];
    note((k.transpose() * nb.direction).norm() - nb.radius, "norm bound " + std::to_string(i));
  }
  note(op_norm(k) - set.spectral_cap, "spectral cap");
  if (set.contraction) {
    note(op_norm(set.contraction->image(k)) - set.contraction->radius, "contraction");
  }
  out.member = out.max_violation <= tol;
  return out;
}

SafetyReport verify_realized_safety(const SafetySpec& safety, int t, const Vector& x_next, const Vector& u,
                                    double tol) {
  const SafetyRecord& next = safety.at(t + 1);
  const SafetyRecord& now = safety.at(t);
  SafetyReport rep;
  rep.state_slack = next.state_rhs - next.state_rows * x_next;
  rep.input_slack = now.input_rhs - now.input_rows * u;
  rep.min_slack = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < rep.state_slack.size(); ++i) {
    rep.min_slack = std::min(rep.min_slack, rep.state_slack(i));
    if (rep.state_slack(i) < -tol) ++rep.violations;
  }
  for (Eigen::Index i = 0; i < rep.input_slack.size(); ++i) {
    rep.min_slack = std::min(rep.min_slack, rep.input_slack(i));
    if (rep.input_slack(i) < -tol) ++rep.violations;
  }
  return rep;
}

}  // namespace safe_nsc
