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
#pragma once

#include <functional>
#include <vector>

#include "safe_nsc/linalg.hpp"

namespace safe_nsc {

/// A convex, compact decision set for one step.
class ConvexDomain {
 public:
  virtual ~ConvexDomain() = default;
  virtual Matrix project(const Matrix& point) const = 0;
  virtual bool contains(const Matrix& point, double tol) const = 0;
};

/// Sequence of domains X_t, all inside a set of diameter `diameter()`.
class TimeVaryingDomain {
 public:
  virtual ~TimeVaryingDomain() = default;
  virtual const ConvexDomain& at(int t) const = 0;
  virtual double diameter() const = 0;
};

/// Entrywise box lo <= X <= hi (intervals in one dimension).
class BoxDomain final : public ConvexDomain {
 public:
  BoxDomain(Matrix lo, Matrix hi);
  static BoxDomain interval(double lo, double hi);
  Matrix project(const Matrix& point) const override;
  bool contains(const Matrix& point, double tol) const override;

 private:
  Matrix lo_;
  Matrix hi_;
};

/// Frobenius ball around a center.
class BallDomain final : public ConvexDomain {
 public:
  BallDomain(Matrix center, double radius);
  Matrix project(const Matrix& point) const override;
  bool contains(const Matrix& point, double tol) const override;

 private:
  Matrix center_;
  double radius_;
};

/// Explicit per-step list of domains.
class DomainSequence final : public TimeVaryingDomain {
 public:
  DomainSequence(std::vector<std::reference_wrapper<const ConvexDomain>> domains, double diameter);
  const ConvexDomain& at(int t) const override;
  double diameter() const override { return diameter_; }
  int size() const { return static_cast<int>(domains_.size()); }

 private:
  std::vector<std::reference_wrapper<const ConvexDomain>> domains_;
  double diameter_;
};

struct OgdState {
  Matrix decision;
  double eta = 0.0;
  int step = 0;
  double cumulative_loss = 0.0;
  std::vector<double> zeta_log;
};

struct OgdStepResult {
  Matrix decision;
  double zeta = 0.0;
};

/// x' = x_t - eta grad; x_{t+1} = P_{X_{t+1}}(x'), zeta_t = ||P_{X_t}(x') - x_{t+1}||.
/// Advances `state` in place.
OgdStepResult ogd_step(OgdState& state, const Matrix& grad, const ConvexDomain& next, const ConvexDomain& current);

/// eta = D / (G sqrt(T)).
double step_size_default(double diameter, double grad_bound, int horizon);

/// A revealed convex loss with its gradient.
struct OnlineLoss {
  std::function<double(const Matrix&)> value;
  std::function<Matrix(const Matrix&)> gradient;
};

struct OgdRun {
  std::vector<Matrix> decisions;  // x_1 .. x_T
  std::vector<double> losses;
  std::vector<double> zetas;
};

/// Safe-OGD over a time-varying domain; x1 is projected onto X_1 first.
OgdRun run_ogd(const TimeVaryingDomain& domain, const std::vector<OnlineLoss>& losses, const Matrix& x1,
                    double eta);

}  // namespace safe_nsc
