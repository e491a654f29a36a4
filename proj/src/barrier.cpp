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
#include "safe_nsc/barrier.hpp"

#include <cmath>
#include <limits>
#include <functional>
#include <optional>

#include "safe_nsc/errors.hpp"

namespace safe_nsc {

QuadraticObjective QuadraticObjective::distance_to(const Matrix& target) {
  QuadraticObjective obj;
  const Eigen::Index n = target.size();
  obj.hessian = Matrix::Identity(n, n);
  obj.linear = -Eigen::Map<const Vector>(target.data(), n);
  return obj;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Constraints in vec(K) coordinates, normalised so that a unit of slack is a
// unit of distance in the constraint's own norm. `phase_one` adds a common
// relaxation variable sigma as the last coordinate.
struct Halfspace1 {
  Vector g;
  double b = 0.0;
  double norm = 1.0;
};

struct Cone {
  Matrix jac;  // v = jac k
  double c = 0.0;
};

struct Lmi {
  Matrix offset;               // m x p with m >= p
  std::vector<Matrix> basis;   // dY / dk_j
  double r = 0.0;
  bool transposed = false;
};

class Barrier {
 public:
  Barrier(const GainSet& set, bool phase_one) : rows_(set.input_dim), cols_(set.state_dim), phase_one_(phase_one) {
    n_ = rows_ * cols_;
    for (const auto& h : set.halfspaces) {
      const double nn = h.normal.norm();
      require(nn > 0.0, ErrorCode::ZeroNormal, "halfspace normal is zero");
      halfspaces_.push_back({Eigen::Map<const Vector>(h.normal.data(), n_) / nn, h.rhs / nn, nn});
      nu_ += 1.0;
    }
    for (const auto& nb : set.norm_bounds) {
      const double an = nb.direction.norm();
      require(an > 0.0, ErrorCode::ZeroNormal, "row-norm direction is zero");
      Cone c;
      c.jac = Matrix::Zero(cols_, n_);
      for (int col = 0; col < cols_; ++col) {
        for (int row = 0; row < rows_; ++row) c.jac(col, row + col * rows_) = nb.direction(row) / an;
      }
      c.c = nb.radius / an;
      cones_.push_back(std::move(c));
      nu_ += 2.0;
    }
    {
      Lmi cap;
      cap.r = set.spectral_cap;
      cap.transposed = rows_ < cols_;
      const int m = cap.transposed ? cols_ : rows_;
      const int p = cap.transposed ? rows_ : cols_;
      cap.offset = Matrix::Zero(m, p);
      for (int col = 0; col < cols_; ++col) {
        for (int row = 0; row < rows_; ++row) {
          Matrix e = Matrix::Zero(m, p);
          if (cap.transposed) e(col, row) = 1.0; else e(row, col) = 1.0;
          cap.basis.push_back(std::move(e));
        }
      }
      lmis_.push_back(std::move(cap));
      nu_ += m + p;
    }
    if (set.contraction) {
      const auto& c = *set.contraction;
      Lmi con;
      con.r = c.radius;
      con.transposed = c.offset.rows() < c.offset.cols();
      con.offset = con.transposed ? Matrix(c.offset.transpose()) : c.offset;
      for (int col = 0; col < cols_; ++col) {
        for (int row = 0; row < rows_; ++row) {
          const Matrix d = -c.left.col(row) * c.right.row(col);
          con.basis.push_back(con.transposed ? Matrix(d.transpose()) : d);
        }
      }
      nu_ += con.offset.rows() + con.offset.cols();
      lmis_.push_back(std::move(con));
      has_contraction_ = true;
    }
  }

  int dim() const { return n_ + (phase_one_ ? 1 : 0); }
  double nu() const { return nu_; }

  // Largest normalised violation at k (sigma needed for strict feasibility).
  double violation(const Vector& k) const {
    double v = -kInf;
    for (const auto& h : halfspaces_) v = std::max(v, h.g.dot(k) - h.b);
    for (const auto& c : cones_) v = std::max(v, (c.jac * k).norm() - c.c);
    for (const auto& l : lmis_) v = std::max(v, op_norm(image(l, k)) - l.r);
    return v;
  }

  // Barrier value; nullopt outside the domain. Gradient and Hessian when requested.
  std::optional<double> eval(const Vector& z, Vector* grad, Matrix* hess) const {
    const Vector k = z.head(n_);
    const double sigma = phase_one_ ? z(n_) : 0.0;
    const int d = dim();
    if (grad) grad->setZero(d);
    if (hess) hess->setZero(d, d);
    double value = 0.0;
    Vector ds(d);
    for (const auto& h : halfspaces_) {
      const double s = h.b + sigma - h.g.dot(k);
      if (!(s > 0.0)) return std::nullopt;
      value -= std::log(s);
      if (grad || hess) {
        ds.head(n_) = -h.g;
        if (phase_one_) ds(n_) = 1.0;
        if (grad) *grad -= ds / s;
        if (hess) hess->selfadjointView<Eigen::Lower>().rankUpdate(ds, 1.0 / (s * s));
      }
    }
    for (const auto& c : cones_) {
      const double rho = c.c + sigma;
      const Vector v = c.jac * k;
      const double s = rho * rho - v.squaredNorm();
      if (!(rho > 0.0) || !(s > 0.0)) return std::nullopt;
      value -= std::log(s);
      if (grad || hess) {
        ds.head(n_) = -2.0 * c.jac.transpose() * v;
        if (phase_one_) ds(n_) = 2.0 * rho;
        if (grad) *grad -= ds / s;
        if (hess) {
          hess->selfadjointView<Eigen::Lower>().rankUpdate(ds, 1.0 / (s * s));
          hess->topLeftCorner(n_, n_).triangularView<Eigen::Lower>() += (2.0 / s) * c.jac.transpose() * c.jac;
          if (phase_one_) (*hess)(n_, n_) -= 2.0 / s;
        }
      }
    }
    for (const auto& l : lmis_) {
      const double rho = l.r + sigma;
      if (!(rho > 0.0)) return std::nullopt;
      const Matrix y = image(l, k);
      const Eigen::Index m = y.rows();
      const Eigen::Index p = y.cols();
      const Matrix s = rho * rho * Matrix::Identity(p, p) - y.transpose() * y;
      Eigen::LLT<Matrix> llt(s);
      if (llt.info() != Eigen::Success) return std::nullopt;
      const Matrix& lower = llt.matrixLLT();
      double logdet = 0.0;
      for (Eigen::Index i = 0; i < p; ++i) {
        if (!(lower(i, i) > 0.0)) return std::nullopt;
        logdet += 2.0 * std::log(lower(i, i));
      }
      const double extra = static_cast<double>(m - p);
      value -= logdet + extra * std::log(rho);
      if (!grad && !hess) continue;
      const Matrix sinv = llt.solve(Matrix::Identity(p, p));
      const Matrix ysinv = y * sinv;
      if (grad) {
        for (int j = 0; j < n_; ++j) (*grad)(j) += 2.0 * (ysinv.cwiseProduct(l.basis[j])).sum();
        if (phase_one_) (*grad)(n_) += -2.0 * rho * sinv.trace() - extra / rho;
      }
      if (hess) {
        // Directional data per coordinate: W = S^{-1} dS and X = dY S^{-1}.
        std::vector<Matrix> w(d);
        std::vector<Matrix> x(n_);
        for (int j = 0; j < n_; ++j) {
          const Matrix yd = y.transpose() * l.basis[j];
          w[j] = -sinv * (yd + yd.transpose());
          x[j] = l.basis[j] * sinv;
        }
        if (phase_one_) w[n_] = 2.0 * rho * sinv;
        for (int i = 0; i < d; ++i) {
          const Matrix wt = w[i].transpose();
          for (int j = 0; j <= i; ++j) {
            double h = (wt.cwiseProduct(w[j])).sum();
            if (i < n_ && j < n_) h += 2.0 * (x[i].cwiseProduct(l.basis[j])).sum();
            (*hess)(i, j) += h;
          }
        }
        if (phase_one_) (*hess)(n_, n_) += -2.0 * sinv.trace() + extra / (rho * rho);
      }
    }
    if (hess) {
      const Matrix full = hess->selfadjointView<Eigen::Lower>();
      *hess = full;
    }
    return value;
  }

  // Per-constraint increments grad(phi_i)/t in gain space at a phase-two point.
  void increments(const Vector& k, double t, BarrierResult& out) const {
    out.increments.clear();
    auto as_matrix = [&](const Vector& v) { return Matrix(Eigen::Map<const Matrix>(v.data(), rows_, cols_)); };
    for (const auto& h : halfspaces_) {
      const double s = h.b - h.g.dot(k);
      out.increments.push_back(as_matrix(h.g / (s * t)));
    }
    for (const auto& c : cones_) {
      const Vector v = c.jac * k;
      const double s = c.c * c.c - v.squaredNorm();
      out.increments.push_back(as_matrix(2.0 * c.jac.transpose() * v / (s * t)));
    }
    for (std::size_t b = 0; b < lmis_.size(); ++b) {
      const auto& l = lmis_[b];
      const Matrix y = image(l, k);
      const Eigen::Index p = y.cols();
      const Matrix s = l.r * l.r * Matrix::Identity(p, p) - y.transpose() * y;
      const Matrix lam = 2.0 * y * s.llt().solve(Matrix::Identity(p, p)) / t;
      Vector g(n_);
      for (int j = 0; j < n_; ++j) g(j) = (lam.cwiseProduct(l.basis[j])).sum();
      out.increments.push_back(as_matrix(g));
      if (has_contraction_ && b + 1 == lmis_.size()) {
        out.contraction_multiplier = l.transposed ? Matrix(lam.transpose()) : lam;
      }
    }
  }

  Matrix to_gain(const Vector& k) const { return Eigen::Map<const Matrix>(k.data(), rows_, cols_); }

 private:
  Matrix image(const Lmi& l, const Vector& k) const {
    Matrix y = l.offset;
    for (int j = 0; j < n_; ++j) {
      if (k(j) != 0.0) y += k(j) * l.basis[j];
    }
    return y;
  }

  int rows_;
  int cols_;
  int n_ = 0;
  bool phase_one_;
  double nu_ = 0.0;
  bool has_contraction_ = false;
  std::vector<Halfspace1> halfspaces_;
  std::vector<Cone> cones_;
  std::vector<Lmi> lmis_;
};

struct Objective {
  // f0(z) = 0.5 z'Pz + q'z on the full coordinate vector.
  Matrix p;
  Vector q;
  double value(const Vector& z) const { return 0.5 * z.dot(p * z) + q.dot(z); }
};

struct PathState {
  Vector z;
  double t = 1.0;
  int newton = 0;
};

enum class CenterStatus { Centered, Stalled, Budget };

constexpr int kMaxCenteringSteps = 100;

// Damped Newton on t f0 + phi from a strictly feasible z.
CenterStatus center(const Barrier& barrier, const Objective& f0, PathState& st, const BarrierConfig& cfg,
                    const std::function<bool(const Vector&)>& stop_early = {}) {
  Vector g;
  Matrix h;
  const int first = st.newton;
  for (;;) {
    if (st.newton >= cfg.max_newton) return CenterStatus::Budget;
    if (st.newton - first >= kMaxCenteringSteps) return CenterStatus::Stalled;
    const std::optional<double> phi = barrier.eval(st.z, &g, &h);
    if (!phi) return CenterStatus::Stalled;
    g += st.t * (f0.p * st.z + f0.q);
    h += st.t * f0.p;
    Eigen::LLT<Matrix> llt(h);
    Vector step;
    if (llt.info() == Eigen::Success) {
      step = -llt.solve(g);
    } else {
      step = -h.ldlt().solve(g);
    }
    const double decrement = -g.dot(step);
    ++st.newton;
    if (!(decrement >= 0.0) || !std::isfinite(decrement)) return CenterStatus::Stalled;
    if (decrement <= 1e-8) return CenterStatus::Centered;
    // Objective change from its exact quadratic model; the barrier change is
    // evaluated directly.
    const double lin = st.t * (f0.p * st.z + f0.q).dot(step);
    const double quad = st.t * step.dot(f0.p * step);
    double alpha = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 60; ++ls, alpha *= 0.5) {
      const Vector trial = st.z + alpha * step;
      const std::optional<double> phi_trial = barrier.eval(trial, nullptr, nullptr);
      if (!phi_trial) continue;
      const double change = alpha * lin + 0.5 * alpha * alpha * quad + (*phi_trial - *phi);
      if (decrement < 1e-2 || change <= -0.01 * alpha * decrement) {
        st.z = trial;
        moved = true;
        break;
      }
    }
    if (!moved) return decrement <= 1e-6 ? CenterStatus::Centered : CenterStatus::Stalled;
    if (stop_early && stop_early(st.z)) return CenterStatus::Centered;
  }
}

BarrierResult phase_one(const GainSet& set, const BarrierConfig& cfg, const Vector& start) {
  const Barrier barrier(set, true);
  const int n = barrier.dim() - 1;
  BarrierResult out;
  PathState st;
  st.z = Vector::Zero(n + 1);
  st.z.head(n) = start;
  st.z(n) = std::max(barrier.violation(start), 0.0) + 1.0;
  Objective f0;
  f0.p = Matrix::Zero(n + 1, n + 1);
  f0.q = Vector::Zero(n + 1);
  f0.q(n) = 1.0;
  const double target = -cfg.interior_margin;
  auto done = [&](const Vector& z) { return z(n) <= target; };
  st.t = 1.0;
  while (st.newton < cfg.max_newton) {
    if (done(st.z)) break;
    const CenterStatus status = center(barrier, f0, st, cfg, done);
    if (done(st.z)) break;
    if (status != CenterStatus::Centered) break;
    if (barrier.nu() / st.t <= 1e-3 * cfg.interior_margin) break;
    st.t *= cfg.growth;
  }
  out.newton_steps = st.newton;
  out.point = barrier.to_gain(st.z.head(n));
  out.feasible = done(st.z);
  out.converged = out.feasible;
  return out;
}

}  // namespace

BarrierResult interior_point(const GainSet& set, const BarrierConfig& cfg) {
  const Barrier plain(set, false);
  const Vector zero = Vector::Zero(plain.dim());
  if (plain.violation(zero) <= -cfg.interior_margin) {
    BarrierResult out;
    out.point = plain.to_gain(zero);
    out.feasible = out.converged = true;
    return out;
  }
  return phase_one(set, cfg, zero);
}

BarrierResult minimise_over_gain_set(const GainSet& set, const QuadraticObjective& obj, const BarrierConfig& cfg) {
  const Barrier barrier(set, false);
  const int n = barrier.dim();
  require(obj.hessian.rows() == n && obj.hessian.cols() == n && obj.linear.size() == n, ErrorCode::DimensionMismatch,
          "objective size does not match the gain set");
  BarrierResult start = interior_point(set, cfg);
  if (!start.feasible) return start;

  Objective f0{obj.hessian, obj.linear};
  PathState st;
  st.z = Eigen::Map<const Vector>(start.point.data(), n);
  const double grad_scale = (f0.p * st.z + f0.q).norm();
  st.t = cfg.initial_weight * barrier.nu() / std::max(grad_scale, 1e-12);
  st.newton = start.newton_steps;
  BarrierResult out;
  out.feasible = true;
  // Last centred iterate; a stalled centring at large t falls back to it.
  PathState centred;
  bool have_centred = false;
  for (;;) {
    const CenterStatus status = center(barrier, f0, st, cfg);
    if (status == CenterStatus::Centered) {
      centred = st;
      have_centred = true;
      if (barrier.nu() / st.t <= cfg.gap_tol) {
        out.converged = true;
        break;
      }
    } else {
      if (have_centred) {
        const int used = st.newton;
        st = centred;
        st.newton = used;
        out.converged = barrier.nu() / st.t <= 1e3 * cfg.gap_tol;
      }
      break;
    }
    st.t *= cfg.growth;
  }
  out.point = barrier.to_gain(st.z);
  out.gap_bound = barrier.nu() / st.t;
  out.newton_steps = st.newton;
  barrier.increments(st.z, st.t, out);
  return out;
}

}  // namespace safe_nsc
