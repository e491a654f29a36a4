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
#include "safe_nsc/linalg.hpp"

#include <algorithm>
#include <cmath>

#include "safe_nsc/errors.hpp"

namespace safe_nsc {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NoiseBoundViolated: return "NoiseBoundViolated";
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::UnknownFamily: return "UnknownFamily";
    case ErrorCode::InfeasibleSafeSet: return "InfeasibleSafeSet";
    case ErrorCode::ZeroNormal: return "ZeroNormal";
    case ErrorCode::SvdFailure: return "SvdFailure";
    case ErrorCode::ProjectionDidNotConverge: return "ProjectionDidNotConverge";
    case ErrorCode::ConvergenceFailure: return "ConvergenceFailure";
    case ErrorCode::NegativeZeta: return "NegativeZeta";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
  }
  return "Unknown";
}

namespace {

Eigen::JacobiSVD<Matrix> svd_of(const Matrix& m, bool vectors) {
  const unsigned opts = vectors ? (Eigen::ComputeThinU | Eigen::ComputeThinV) : 0u;
  Eigen::JacobiSVD<Matrix> svd(m, opts);
  if (svd.info() != Eigen::Success) {
    throw Error(ErrorCode::SvdFailure, "JacobiSVD did not converge");
  }
  return svd;
}

}  // namespace

double op_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  if (m.rows() == 1 || m.cols() == 1) return m.norm();
  return svd_of(m, false).singularValues()(0);
}

double nuclear_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  if (m.rows() == 1 || m.cols() == 1) return m.norm();
  return svd_of(m, false).singularValues().sum();
}

Matrix clip_singular_values(const Matrix& m, double radius) {
  require(radius >= 0.0, ErrorCode::InvalidParams, "spectral radius must be nonnegative");
  if (m.size() == 0) return m;
  if (m.rows() == 1 || m.cols() == 1) {
    const double n = m.norm();
    if (n <= radius) return m;
    return m * (radius / n);
  }
  auto svd = svd_of(m, true);
  const Vector& s = svd.singularValues();
  if (s(0) <= radius) return m;
  const Vector clipped = s.cwiseMin(radius);
  return svd.matrixU() * clipped.asDiagonal() * svd.matrixV().transpose();
}

SymmetricRoot symmetric_root(const Matrix& spd) {
  require(spd.rows() == spd.cols(), ErrorCode::DimensionMismatch, "symmetric_root needs a square matrix");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (spd + spd.transpose()));
  const Vector lambda = eig.eigenvalues();
  require(lambda.minCoeff() > 0.0, ErrorCode::InvalidParams, "symmetric_root needs a positive definite matrix");
  const Matrix& v = eig.eigenvectors();
  SymmetricRoot out;
  out.root = v * lambda.cwiseSqrt().asDiagonal() * v.transpose();
  out.inverse_root = v * lambda.cwiseSqrt().cwiseInverse().asDiagonal() * v.transpose();
  out.condition = std::sqrt(lambda.maxCoeff() / lambda.minCoeff());
  return out;
}

double spectral_radius(const Matrix& m) {
  require(m.rows() == m.cols(), ErrorCode::DimensionMismatch, "spectral_radius needs a square matrix");
  if (m.size() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> eig(m, false);
  return eig.eigenvalues().cwiseAbs().maxCoeff();
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace safe_nsc
