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
#include "support/penalty_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace safe_nsc::testing {

namespace {

// Independent SVD-based ball projection (BDC rather than Jacobi).
Matrix ball(const Matrix& m, double r) {
  Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Vector s = svd.singularValues();
  if (s.size() == 0 || s(0) <= r) return m;
  s = s.cwiseMin(r);
  return svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
}

double spectral(const Matrix& m) {
  Eigen::BDCSVD<Matrix> svd(m);
  return svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
}

struct Multipliers {
  std::vector<double> half;
  std::vector<Vector> rows;
  Matrix cap;
  Matrix contraction;
};

// Residual image - projection for each constraint, evaluated at the shifted point.
struct Residuals {
  std::vector<double> half;
  std::vector<Vector> rows;
  Matrix cap;
  Matrix contraction;
};

Residuals residuals(const GainSet& set, const Matrix& k, const Multipliers& y, double mu) {
  Residuals r;
  for (std::size_t i = 0; i < set.halfspaces.size(); ++i) {
    const auto& h = set.halfspaces[i];
    const double z = (h.normal.array() * k.array()).sum() + y.half[i] / mu;
    r.half.push_back(std::max(0.0, z - h.rhs));
  }
  for (std::size_t i = 0; i < set.norm_bounds.size(); ++i) {
    const auto& nb = set.norm_bounds[i];
    const Vector z = k.transpose() * nb.direction + y.rows[i] / mu;
    const double n = z.norm();
    r.rows.push_back(n <= nb.radius ? Vector::Zero(z.size()).eval() : (z * (1.0 - nb.radius / n)).eval());
  }
  const Matrix zc = k + y.cap / mu;
  r.cap = zc - ball(zc, set.spectral_cap);
  if (set.contraction) {
    const auto& c = *set.contraction;
    const Matrix z = c.offset - c.left * k * c.right + y.contraction / mu;
    r.contraction = z - ball(z, c.radius);
  }
  return r;
}

Matrix gradient(const GainSet& set, const Matrix& k, const Matrix& target, const Multipliers& y, double mu) {
  const Residuals r = residuals(set, k, y, mu);
  Matrix g = k - target;
  for (std::size_t i = 0; i < set.halfspaces.size(); ++i) g += mu * r.half[i] * set.halfspaces[i].normal;
  for (std::size_t i = 0; i < set.norm_bounds.size(); ++i) {
    g += mu * set.norm_bounds[i].direction * r.rows[i].transpose();
  }
  g += mu * r.cap;
  if (set.contraction) {
    const auto& c = *set.contraction;
    g -= mu * c.left.transpose() * r.contraction * c.right.transpose();
  }
  return g;
}

double violation(const GainSet& set, const Matrix& k) {
  double v = spectral(k) - set.spectral_cap;
  for (const auto& h : set.halfspaces) v = std::max(v, (h.normal.array() * k.array()).sum() - h.rhs);
  for (const auto& nb : set.norm_bounds) v = std::max(v, (k.transpose() * nb.direction).norm() - nb.radius);
  if (set.contraction) {
    const auto& c = *set.contraction;
    v = std::max(v, spectral(c.offset - c.left * k * c.right) - c.radius);
  }
  return std::max(v, 0.0);
}

}  // namespace

OracleResult penalty_oracle(const GainSet& set, const Matrix& target, double tol) {
  const double mu = 10.0;
  double lip = 1.0 + mu;
  for (const auto& h : set.halfspaces) lip += mu * h.normal.squaredNorm();
  for (const auto& nb : set.norm_bounds) lip += mu * nb.direction.squaredNorm();
  if (set.contraction) {
    const auto& c = *set.contraction;
    lip += mu * std::pow(spectral(c.left) * spectral(c.right), 2);
  }
  const double step = 1.0 / lip;

  Multipliers y;
  y.half.assign(set.halfspaces.size(), 0.0);
  for (const auto& nb : set.norm_bounds) {
    (void)nb;
    y.rows.push_back(Vector::Zero(target.cols()));
  }
  y.cap = Matrix::Zero(target.rows(), target.cols());
  if (set.contraction) y.contraction = Matrix::Zero(set.contraction->offset.rows(), set.contraction->offset.cols());

  OracleResult out;
  Matrix k = target;
  for (int outer = 1; outer <= 5000; ++outer) {
    // Accelerated gradient with adaptive restart on the inner problem.
    Matrix prev = k;
    Matrix z = k;
    double theta = 1.0;
    Matrix k_new = k;
    for (int inner = 0; inner < 200000; ++inner) {
      const Matrix g = gradient(set, z, target, y, mu);
      // 1-strongly convex: ||g|| bounds the distance to the inner minimiser.
      if (g.norm() <= 1e-2 * tol) {
        k_new = z;
        break;
      }
      const Matrix next = z - step * g;
      const double theta_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * theta * theta));
      Matrix extrap = next + ((theta - 1.0) / theta_next) * (next - prev);
      if (((z - next).array() * (next - prev).array()).sum() > 0.0) {
        theta = 1.0;
        extrap = next;
      } else {
        theta = theta_next;
      }
      prev = next;
      z = extrap;
      k_new = next;
    }
    const Residuals r = residuals(set, k_new, y, mu);
    for (std::size_t i = 0; i < y.half.size(); ++i) y.half[i] = mu * r.half[i];
    for (std::size_t i = 0; i < y.rows.size(); ++i) y.rows[i] = mu * r.rows[i];
    y.cap = mu * r.cap;
    if (set.contraction) y.contraction = mu * r.contraction;
    const double change = (k_new - k).norm();
    k = k_new;
    out.outer_iterations = outer;
    if (violation(set, k) <= tol && change <= tol) break;
  }
  out.point = k;
  out.max_violation = violation(set, k);
  return out;
}

}  // namespace safe_nsc::testing
