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
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "safe_nsc/errors.hpp"
#include "safe_nsc/oco_core.hpp"

namespace safe_nsc {
namespace {

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

OgdState state_at(double x, double eta) {
  OgdState s;
  s.decision = scalar(x);
  s.eta = eta;
  return s;
}

TEST(OgdStep, FixedPointWithZeroGradient) {
  const BoxDomain box = BoxDomain::interval(-1.0, 1.0);
  OgdState s = state_at(0.3, 0.5);
  const OgdStepResult r = ogd_step(s, scalar(0.0), box, box);
  EXPECT_EQ(r.decision(0, 0), 0.3);
  EXPECT_EQ(r.zeta, 0.0);
  EXPECT_EQ(s.step, 1);
}

TEST(OgdStep, InteriorUpdate) {
  const BoxDomain box = BoxDomain::interval(-1.0, 1.0);
  OgdState s = state_at(0.0, 0.5);
  const OgdStepResult r = ogd_step(s, scalar(-1.0), box, box);
  EXPECT_DOUBLE_EQ(r.decision(0, 0), 0.5);
  EXPECT_EQ(r.zeta, 0.0);
  EXPECT_DOUBLE_EQ(s.decision(0, 0), 0.5);
}

TEST(OgdStep, DisjointIntervals) {
  const BoxDomain current = BoxDomain::interval(-1.0, 0.0);
  const BoxDomain next = BoxDomain::interval(1.0, 2.0);
  OgdState s = state_at(0.0, 0.5);
  const OgdStepResult r = ogd_step(s, scalar(-1.0), next, current);
  EXPECT_DOUBLE_EQ(r.decision(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(r.zeta, 1.0);
  ASSERT_EQ(s.zeta_log.size(), 1u);
}

TEST(OgdStep, ShapeMismatchThrows) {
  const BoxDomain box = BoxDomain::interval(-1.0, 1.0);
  OgdState s = state_at(0.0, 0.5);
  EXPECT_THROW(ogd_step(s, Matrix::Zero(2, 1), box, box), Error);
}

TEST(StepSizeDefault, Examples) {
  EXPECT_DOUBLE_EQ(step_size_default(1.0, 1.0, 100), 0.1);
  EXPECT_NEAR(step_size_default(6.0, 4.0, 10000), 0.015, 1e-15);
  EXPECT_DOUBLE_EQ(step_size_default(3.0, 2.0, 1), 1.5);
  EXPECT_THROW(step_size_default(1.0, 0.0, 10), Error);
  EXPECT_THROW(step_size_default(1.0, 1.0, 0), Error);
}

TEST(Domains, ProjectionsLandInside) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n(0.0, 3.0);
  const BallDomain ball(Matrix::Ones(2, 2), 0.7);
  const BoxDomain box(Matrix::Constant(2, 2, -1.0), Matrix::Constant(2, 2, 0.5));
  for (int i = 0; i < 200; ++i) {
    Matrix p(2, 2);
    p << n(rng), n(rng), n(rng), n(rng);
    EXPECT_TRUE(ball.contains(ball.project(p), 1e-12));
    EXPECT_TRUE(box.contains(box.project(p), 0.0));
    // Midpoints of feasible pairs stay feasible.
    Matrix q(2, 2);
    q << n(rng), n(rng), n(rng), n(rng);
    EXPECT_TRUE(ball.contains(0.5 * (ball.project(p) + ball.project(q)), 1e-12));
  }
  EXPECT_THROW(BallDomain(Matrix::Zero(1, 1), -1.0), Error);
  EXPECT_THROW(BoxDomain::interval(1.0, 0.0), Error);
}

class MovingIntervals final : public TimeVaryingDomain {
 public:
  explicit MovingIntervals(std::vector<BoxDomain> boxes) : boxes_(std::move(boxes)) {}
  const ConvexDomain& at(int t) const override { return boxes_.at(t); }
  double diameter() const override { return 4.0; }

 private:
  std::vector<BoxDomain> boxes_;
};

TEST(RunOgd, TimeInvariantDomainHasZeroVariation) {
  const BoxDomain box = BoxDomain::interval(-1.0, 1.0);
  std::vector<std::reference_wrapper<const ConvexDomain>> seq(20, std::cref(box));
  const DomainSequence domain(seq, 2.0);
  std::vector<OnlineLoss> losses;
  for (int t = 0; t < 20; ++t) {
    const double target = t % 2 == 0 ? 3.0 : -3.0;
    losses.push_back({[target](const Matrix& x) { return std::pow(x(0, 0) - target, 2); },
                      [target](const Matrix& x) { return scalar(2.0 * (x(0, 0) - target)); }});
  }
  const OgdRun run = run_ogd(domain, losses, scalar(5.0), 0.1);
  ASSERT_EQ(run.decisions.size(), 20u);
  EXPECT_EQ(run.decisions.front()(0, 0), 1.0);
  for (double z : run.zetas) EXPECT_EQ(z, 0.0);
  for (const Matrix& x : run.decisions) EXPECT_TRUE(box.contains(x, 0.0));
}

TEST(RunOgd, DisjointIntervalsAccumulateUnitVariation) {
  std::vector<BoxDomain> boxes;
  for (int t = 0; t < 11; ++t) boxes.push_back(t % 2 == 0 ? BoxDomain::interval(-1.0, 0.0) : BoxDomain::interval(1.0, 2.0));
  // x' = 0.5 sits in the gap every step; the gradient sign alternates.
  OgdState s = state_at(0.0, 0.5);
  double total = 0.0;
  for (int t = 0; t < 10; ++t) {
    const double g = t % 2 == 0 ? -1.0 : 1.0;
    total += ogd_step(s, scalar(g), boxes[t + 1], boxes[t]).zeta;
  }
  EXPECT_DOUBLE_EQ(total, 10.0);
}

// Synthetic OCO: quadratic losses over drifting intervals, regret against
// the per-step minimizer compared with the dynamic regret bound.
TEST(RunOgd, DynamicRegretWithinBound) {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> target(-3.0, 3.0);
  for (int horizon : {100, 1000}) {
    std::vector<BoxDomain> boxes;
    for (int t = 0; t < horizon; ++t) {
      const double c = std::sin(t / 10.0);
      boxes.push_back(BoxDomain::interval(c - 1.0, c + 1.0));
    }
    const MovingIntervals domain(boxes);
    std::vector<double> targets;
    std::vector<OnlineLoss> losses;
    for (int t = 0; t < horizon; ++t) {
      const double a = target(rng);
      targets.push_back(a);
      losses.push_back({[a](const Matrix& x) { return std::pow(x(0, 0) - a, 2); },
                        [a](const Matrix& x) { return scalar(2.0 * (x(0, 0) - a)); }});
    }
    const double diameter = 4.0;  // every interval sits inside [-2, 2]
    const double grad = 10.0;     // |2 (x - a)| <= 2 (2 + 3)
    const double eta = step_size_default(diameter, grad, horizon);
    const OgdRun run = run_ogd(domain, losses, scalar(0.0), eta);

    double regret = 0.0;
    double path = 0.0;
    double previous = 0.0;
    for (int t = 0; t < horizon; ++t) {
      const double c = std::sin(t / 10.0);
      const double best = std::clamp(targets[t], c - 1.0, c + 1.0);
      regret += run.losses[t] - std::pow(best - targets[t], 2);
      if (t > 0) path += std::abs(best - previous);
      previous = best;
      EXPECT_TRUE(boxes[t].contains(run.decisions[t], 0.0));
    }
    double variation = 0.0;
    for (double z : run.zetas) variation += z;
    const double bound = eta * horizon * grad * grad / 2.0 + 7.0 * diameter * diameter / (4.0 * eta) +
                         diameter * path / eta + diameter * variation / eta;
    EXPECT_GT(variation, 0.0);
    EXPECT_LE(regret, bound) << "T=" << horizon;
  }
}

}  // namespace
}  // namespace safe_nsc
