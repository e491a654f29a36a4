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
#include "safe_nsc/projection.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include "safe_nsc/barrier.hpp"
#include "safe_nsc/errors.hpp"

namespace safe_nsc {

void ProjectionConfig::validate() const {
  require(max_iters >= 1, ErrorCode::InvalidParams, "max_iters must be at least 1");
  require(kkt_tol > 0.0, ErrorCode::InvalidParams, "kkt_tol must be positive");
  require(feasibility_slack >= 0.0, ErrorCode::InvalidParams, "feasibility_slack must be nonnegative");
}

Matrix project_halfspace(const Matrix& k, const Matrix& normal, double rhs) {
  require(k.rows() == normal.rows() && k.cols() == normal.cols(), ErrorCode::DimensionMismatch,
          "project_halfspace: shape mismatch");
  const double nn = normal.squaredNorm();
  require(nn > 0.0, ErrorCode::ZeroNormal, "halfspace normal is zero");
  const double excess = frob_inner(normal, k) - rhs;
  if (excess <= 0.0) return k;
  return k - (excess / nn) * normal;
}

Matrix project_spectral_ball(const Matrix& k, double radius) { return clip_singular_values(k, radius); }

Matrix project_row_norm(const Matrix& k, const RowNormBound& bound) {
  require(bound.direction.size() == k.rows(), ErrorCode::DimensionMismatch, "project_row_norm: shape mismatch");
  const double aa = bound.direction.squaredNorm();
  require(aa > 0.0, ErrorCode::ZeroNormal, "row-norm direction is zero");
  const Vector v = k.transpose() * bound.direction;
  const double n = v.norm();
  if (n <= bound.radius) return k;
  const Vector excess = v * (1.0 - bound.radius / n);
  return k - bound.direction * excess.transpose() / aa;
}

double affine_spectral_floor(const AffineSpectralBound& bound) {
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(bound.left);
  const Matrix proj = bound.left * cod.pseudoInverse();
  const Matrix residual = bound.offset - proj * bound.offset;
  return op_norm(residual);
}

namespace {

// Solves K + rho * L'L K RR' = rhs through the cached eigenbases.
Matrix recouple(const AffineSpectralBound& b, const Matrix& rhs, double rho) {
  Matrix tilde = b.left_basis.transpose() * rhs * b.right_basis;
  for (Eigen::Index i = 0; i < tilde.rows(); ++i) {
    for (Eigen::Index j = 0; j < tilde.cols(); ++j) {
      tilde(i, j) /= 1.0 + rho * b.left_eigs(i) * b.right_eigs(j);
    }
  }
  return b.left_basis * tilde * b.right_basis.transpose();
}

constexpr int kStallWindow = 50;
constexpr double kStallImprovement = 1e-3;
constexpr double kRhoGrowth = 10.0;
constexpr double kRhoMax = 1e8;

}  // namespace

AffineProjection project_affine_spectral(const AffineSpectralBound& bound, const Matrix& target,
                                         AffineSplitState& state, double tol, int max_iters) {
  AffineProjection out;
  const Matrix image = bound.image(target);
  if (op_norm(image) <= bound.radius) {
    out.point = target;
    out.multiplier = Matrix::Zero(image.rows(), image.cols());
    out.converged = true;
    return out;
  }
  if (!state.initialised) {
    state.aux = clip_singular_values(image, bound.radius);
    state.dual = Matrix::Zero(image.rows(), image.cols());
    state.rho = 1.0;
    state.initialised = true;
  }
  Matrix k = target;
  double window_start = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= max_iters; ++it) {
    k = recouple(bound, target + state.rho * bound.adjoint(bound.offset - state.aux + state.dual), state.rho);
    const Matrix m = bound.image(k);
    const Matrix prev = state.aux;
    state.aux = clip_singular_values(m + state.dual, bound.radius);
    state.dual += m - state.aux;
    const double primal = (m - state.aux).norm();
    const double dual = state.rho * bound.adjoint(state.aux - prev).norm();
    out.iterations = it;
    if (primal <= tol && dual <= tol) {
      out.converged = true;
      break;
    }
    if (it % kStallWindow == 0) {
      if (primal > (1.0 - kStallImprovement) * window_start && primal > dual && state.rho < kRhoMax) {
        state.rho *= kRhoGrowth;
        state.dual /= kRhoGrowth;
      }
      window_start = primal;
    }
  }
  out.point = k;
  out.multiplier = state.rho * state.dual;
  return out;
}

namespace {

enum class Kind { Half, RowNorm, Spectral, Affine };

// One Dykstra block per constraint.
struct Block {
  Kind kind;
  std::size_t index = 0;
  Matrix increment;
  Matrix multiplier;  // Affine only
  AffineSplitState split;
};

struct DykstraOutcome {
  Matrix point;
  int sweeps = 0;
  double kkt = std::numeric_limits<double>::infinity();
  double violation = std::numeric_limits<double>::infinity();
  bool converged = false;
  bool stalled = false;
};

std::string fmt_sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

double max_violation(const GainSet& set, const Matrix& k) {
  if (set.halfspaces.empty() && set.norm_bounds.empty() && !set.contraction) {
    return std::max(0.0, op_norm(k) - set.spectral_cap);
  }
  return std::max(0.0, membership(set, k, 0.0).max_violation);
}

// sup_{K in C_j} <p, K> - <p, x> plus any part of p that is not a valid
// normal direction for the block.
double block_gap(const GainSet& set, Kind kind, std::size_t index, const Matrix& p, const Matrix& lam,
                 const Matrix& x) {
  switch (kind) {
    case Kind::Half: {
      const auto& h = set.halfspaces[index];
      const double lambda = frob_inner(p, h.normal) / h.normal.squaredNorm();
      const double off = (p - lambda * h.normal).norm();
      const double neg = std::max(0.0, -lambda) * h.normal.norm();
      return std::abs(lambda * (h.rhs - frob_inner(h.normal, x))) + off + neg;
    }
    case Kind::RowNorm: {
      const auto& nb = set.norm_bounds[index];
      const double aa = nb.direction.squaredNorm();
      const Vector s = p.transpose() * nb.direction / aa;
      const double off = (p - nb.direction * s.transpose()).norm();
      return std::abs(nb.radius * s.norm() - frob_inner(p, x)) + off;
    }
    case Kind::Spectral:
      return std::abs(set.spectral_cap * nuclear_norm(p) - frob_inner(p, x));
    case Kind::Affine: {
      const auto& c = *set.contraction;
      const double off = (p + c.adjoint(lam)).norm();
      return std::abs(c.radius * nuclear_norm(lam) - frob_inner(lam, c.image(x))) + off;
    }
  }
  return 0.0;
}

// Increments are ordered halfspaces, norm bounds, spectral cap, contraction.
double kkt_certificate(const GainSet& set, const Matrix& target, const Matrix& x, const std::vector<Matrix>& incs,
                       const Matrix& contraction_multiplier, double violation) {
  double kkt = violation;
  Matrix total = Matrix::Zero(x.rows(), x.cols());
  std::size_t i = 0;
  auto visit = [&](Kind kind, std::size_t index) {
    total += incs[i];
    kkt = std::max(kkt, block_gap(set, kind, index, incs[i], contraction_multiplier, x));
    ++i;
  };
  for (std::size_t j = 0; j < set.halfspaces.size(); ++j) visit(Kind::Half, j);
  for (std::size_t j = 0; j < set.norm_bounds.size(); ++j) visit(Kind::RowNorm, j);
  visit(Kind::Spectral, 0);
  if (set.contraction) visit(Kind::Affine, 0);
  return std::max(kkt, (target - x - total).norm());
}

constexpr int kStallSweeps = 200;

DykstraOutcome dykstra(const GainSet& set, const Matrix& target, const ProjectionConfig& cfg) {
  std::vector<Block> blocks;
  for (std::size_t i = 0; i < set.halfspaces.size(); ++i) blocks.push_back({Kind::Half, i, {}, {}, {}});
  for (std::size_t i = 0; i < set.norm_bounds.size(); ++i) blocks.push_back({Kind::RowNorm, i, {}, {}, {}});
  blocks.push_back({Kind::Spectral, 0, {}, {}, {}});
  if (set.contraction) blocks.push_back({Kind::Affine, 0, {}, {}, {}});
  for (auto& b : blocks) b.increment = Matrix::Zero(target.rows(), target.cols());

  const double inner_tol = std::min(1e-12, 1e-3 * cfg.kkt_tol);
  DykstraOutcome out;
  Matrix x = target;
  std::vector<double> violation_history;
  for (int sweep = 1; sweep <= cfg.max_iters; ++sweep) {
    for (auto& b : blocks) {
      const Matrix y = x + b.increment;
      switch (b.kind) {
        case Kind::Half: {
          const auto& h = set.halfspaces[b.index];
          x = project_halfspace(y, h.normal, h.rhs);
          break;
        }
        case Kind::RowNorm: x = project_row_norm(y, set.norm_bounds[b.index]); break;
        case Kind::Spectral: x = project_spectral_ball(y, set.spectral_cap); break;
        case Kind::Affine: {
          AffineProjection ap = project_affine_spectral(*set.contraction, y, b.split, inner_tol);
          x = std::move(ap.point);
          b.multiplier = std::move(ap.multiplier);
          break;
        }
      }
      b.increment = y - x;
    }
    out.sweeps = sweep;
    out.violation = max_violation(set, x);
    std::vector<Matrix> incs;
    Matrix lam;
    for (const auto& b : blocks) {
      incs.push_back(b.increment);
      if (b.kind == Kind::Affine) lam = b.multiplier;
    }
    const double kkt = kkt_certificate(set, target, x, incs, lam, out.violation);
    out.kkt = kkt;
    if (kkt <= cfg.kkt_tol && out.violation <= cfg.feasibility_slack) {
      out.converged = true;
      break;
    }
    // An empty intersection shows up as a violation that stops shrinking.
    violation_history.push_back(out.violation);
    if (sweep > kStallSweeps) {
      const double before = violation_history[sweep - 1 - kStallSweeps];
      if (out.violation > 100.0 * cfg.feasibility_slack + 1e-12 && out.violation > 0.99 * before) {
        out.stalled = true;
        break;
      }
    }
  }
  out.point = std::move(x);
  return out;
}

GainSet shrunk(const GainSet& set, double margin) {
  GainSet s = set;
  for (auto& h : s.halfspaces) h.rhs -= margin * h.normal.norm();
  for (auto& nb : s.norm_bounds) nb.radius -= margin;
  s.spectral_cap -= margin;
  if (s.contraction) s.contraction->radius -= margin;
  return s;
}

bool trivially_empty(const GainSet& set) {
  if (set.spectral_cap < 0.0) return true;
  for (const auto& nb : set.norm_bounds) {
    if (nb.radius < 0.0) return true;
  }
  if (set.contraction) {
    if (set.contraction->radius < 0.0) return true;
    if (affine_spectral_floor(*set.contraction) > set.contraction->radius) return true;
  }
  return false;
}

constexpr double kProbeMargin = 1e-7;

}  // namespace

namespace {

BarrierConfig barrier_config(const ProjectionConfig& cfg) {
  BarrierConfig b;
  b.gap_tol = std::clamp(1e-2 * cfg.kkt_tol, 1e-13, 1e-10);
  b.max_newton = std::max(cfg.max_iters, 50);
  return b;
}

// Multipliers refitted from the primal point: least squares of target - x
// over the normal cones of the nearly active constraints, then clipped to
// the cones. The barrier's own estimates mu / slack lose precision as the
// slacks approach rounding level.
struct Refit {
  std::vector<Matrix> increments;
  Matrix contraction_multiplier;
};

Refit refit_multipliers(const GainSet& set, const Matrix& target, const Matrix& x, double active_tol) {
  struct Atom {
    std::size_t block;
    Matrix dir;  // gain-space increment per unit coefficient
  };
  struct SpectralFace {
    std::size_t block;
    Matrix u;
    Matrix v;
    bool contraction;
  };
  std::vector<Atom> atoms;
  std::vector<SpectralFace> faces;
  std::size_t block = 0;
  for (const auto& h : set.halfspaces) {
    if (h.rhs - frob_inner(h.normal, x) <= active_tol * h.normal.norm()) atoms.push_back({block, h.normal});
    ++block;
  }
  for (const auto& nb : set.norm_bounds) {
    const Vector v = x.transpose() * nb.direction;
    const double n = v.norm();
    if (n > 0.0 && nb.radius - n <= active_tol * nb.direction.norm()) {
      atoms.push_back({block, nb.direction * (v / n).transpose()});
    }
    ++block;
  }
  // Spectral faces: Lambda = U_a M V_a' with M symmetric on the active singular space.
  auto add_face = [&](const Matrix& y, double radius, bool contraction) {
    Eigen::JacobiSVD<Matrix> svd(y, Eigen::ComputeThinU | Eigen::ComputeThinV);
    int k = 0;
    while (k < svd.singularValues().size() && svd.singularValues()(k) >= radius - active_tol) ++k;
    if (k == 0) return;
    const Matrix u = svd.matrixU().leftCols(k);
    const Matrix v = svd.matrixV().leftCols(k);
    faces.push_back({block, u, v, contraction});
    for (int a = 0; a < k; ++a) {
      for (int b = a; b < k; ++b) {
        Matrix lam = u.col(a) * v.col(b).transpose();
        if (a != b) lam += u.col(b) * v.col(a).transpose();
        atoms.push_back({block, contraction ? Matrix(-set.contraction->adjoint(lam)) : lam});
      }
    }
  };
  add_face(x, set.spectral_cap, false);
  ++block;
  if (set.contraction) add_face(set.contraction->image(x), set.contraction->radius, true);
  const std::size_t blocks = block + (set.contraction ? 1 : 0);

  Refit out;
  out.increments.assign(blocks, Matrix::Zero(x.rows(), x.cols()));
  if (set.contraction) out.contraction_multiplier = Matrix::Zero(set.contraction->offset.rows(), set.contraction->offset.cols());
  if (atoms.empty()) return out;
  Matrix design(x.size(), atoms.size());
  for (std::size_t j = 0; j < atoms.size(); ++j) design.col(j) = Eigen::Map<const Vector>(atoms[j].dir.data(), x.size());
  const Matrix residual = target - x;
  const Vector coef = design.completeOrthogonalDecomposition().solve(Eigen::Map<const Vector>(residual.data(), x.size()));

  std::size_t j = 0;
  std::size_t face = 0;
  while (j < atoms.size()) {
    const std::size_t b = atoms[j].block;
    const bool spectral = face < faces.size() && faces[face].block == b;
    if (!spectral) {
      out.increments[b] += std::max(0.0, coef(j)) * atoms[j].dir;
      ++j;
      continue;
    }
    const SpectralFace& f = faces[face++];
    const Eigen::Index k = f.u.cols();
    Matrix m = Matrix::Zero(k, k);
    for (Eigen::Index a = 0; a < k; ++a) {
      for (Eigen::Index c = a; c < k; ++c, ++j) {
        m(a, c) = coef(j);
        m(c, a) = coef(j);
      }
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(m);
    const Matrix psd = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).asDiagonal() * es.eigenvectors().transpose();
    const Matrix lam = f.u * psd * f.v.transpose();
    if (f.contraction) {
      out.contraction_multiplier = lam;
      out.increments[b] = -set.contraction->adjoint(lam);
    } else {
      out.increments[b] = lam;
    }
  }
  return out;
}

ProjectionResult interior_projection(const GainSet& set, const Matrix& target, const ProjectionConfig& cfg) {
  BarrierConfig bcfg = barrier_config(cfg);
  BarrierResult run;
  double violation = 0.0;
  double kkt = 0.0;
  // A certificate just above tolerance is retried on a tighter gap.
  for (int attempt = 0; attempt < 3; ++attempt, bcfg.gap_tol *= 1e-2) {
    run = minimise_over_gain_set(set, QuadraticObjective::distance_to(target), bcfg);
    if (!run.feasible) throw Error(ErrorCode::InfeasibleSafeSet, "gain set has no interior point");
    violation = max_violation(set, run.point);
    kkt = kkt_certificate(set, target, run.point, run.increments, run.contraction_multiplier, violation);
    for (const double tol : {1e-8, 1e-6, 1e-4}) {
      if (kkt <= cfg.kkt_tol) break;
      const Refit fit = refit_multipliers(set, target, run.point, tol);
      kkt = std::min(kkt, kkt_certificate(set, target, run.point, fit.increments, fit.contraction_multiplier, violation));
    }
    if (run.converged && kkt <= cfg.kkt_tol && violation <= cfg.feasibility_slack) break;
  }
  if (!run.converged || kkt > cfg.kkt_tol || violation > cfg.feasibility_slack) {
    throw Error(ErrorCode::ProjectionDidNotConverge,
                "interior-point projection stopped after " + std::to_string(run.newton_steps) +
                    " Newton steps with KKT residual " + fmt_sci(kkt));
  }
  ProjectionResult res;
  res.point = run.point;
  res.iterations = run.newton_steps;
  res.kkt_residual = kkt;
  res.distance = (target - run.point).norm();
  return res;
}

ProjectionResult dykstra_projection(const GainSet& set, const Matrix& target, const ProjectionConfig& cfg) {
  const DykstraOutcome run = dykstra(set, target, cfg);
  if (!run.converged) {
    if (!feasibility_probe(set, cfg).feasible) {
      throw Error(ErrorCode::InfeasibleSafeSet, "gain set is empty (feasibility probe failed)");
    }
    throw Error(ErrorCode::ProjectionDidNotConverge,
                "Dykstra stopped after " + std::to_string(run.sweeps) + " sweeps with KKT residual " +
                    fmt_sci(run.kkt) + " and violation " + fmt_sci(run.violation));
  }
  ProjectionResult res;
  res.point = run.point;
  res.iterations = run.sweeps;
  res.kkt_residual = run.kkt;
  res.distance = (target - run.point).norm();
  return res;
}

}  // namespace

ProjectionResult project_gain_set(const GainSet& set, const Matrix& target, const ProjectionConfig& cfg) {
  cfg.validate();
  require(target.rows() == set.input_dim && target.cols() == set.state_dim, ErrorCode::DimensionMismatch,
          "project_gain_set: target shape does not match the set");
  require(target.allFinite(), ErrorCode::InvalidParams, "project_gain_set: non-finite target");
  if (membership(set, target, 0.0).member) {
    ProjectionResult res;
    res.point = target;
    return res;
  }
  if (trivially_empty(set)) {
    throw Error(ErrorCode::InfeasibleSafeSet, "gain set is empty (a constraint cannot be met by any gain)");
  }
  return cfg.method == ProjectionMethod::InteriorPoint ? interior_projection(set, target, cfg)
                                                        : dykstra_projection(set, target, cfg);
}

ProbeResult feasibility_probe(const GainSet& set, const ProjectionConfig& cfg) {
  cfg.validate();
  ProbeResult out;
  const GainSet inner = shrunk(set, kProbeMargin);
  if (trivially_empty(inner)) return out;
  const Matrix zero = Matrix::Zero(set.input_dim, set.state_dim);
  if (membership(inner, zero, 0.0).member) {
    out.feasible = true;
    out.witness = zero;
    return out;
  }
  if (cfg.method == ProjectionMethod::InteriorPoint) {
    BarrierConfig b = barrier_config(cfg);
    b.interior_margin = kProbeMargin;
    const BarrierResult run = interior_point(set, b);
    if (run.feasible && membership(inner, run.point, 0.0).member) {
      out.feasible = true;
      out.witness = run.point;
    }
    return out;
  }
  const DykstraOutcome run = dykstra(inner, zero, cfg);
  if (run.converged && membership(set, run.point, 0.0).member) {
    out.feasible = true;
    out.witness = run.point;
  }
  return out;
}

TighteningReport tightening_report(const LtvSystem& sys, const SafetySpec& safety, int t, const Vector& x,
                                   const GainSet& set, const ProjectionConfig& cfg) {
  const SafetyRecord& next = safety.at(t + 1);
  TighteningReport rep;
  rep.slack = Vector::Zero(next.state_rows.rows());
  const Vector ax = sys.a(t) * x;
  for (Eigen::Index i = 0; i < next.state_rows.rows(); ++i) {
    const Vector row = next.state_rows.row(i).transpose();
    rep.slack(i) = next.state_rhs(i) - row.dot(ax) - sys.noise_bound() * row.norm();
  }
  const ProbeResult probe = feasibility_probe(set, cfg);
  rep.feasible = probe.feasible;
  if (probe.feasible) rep.witness = probe.witness;
  return rep;
}

}  // namespace safe_nsc
