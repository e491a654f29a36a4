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

#include <cmath>
#include <random>

#include "safe_nsc/errors.hpp"
#include "safe_nsc/regret.hpp"
#include "safe_nsc/scenario.hpp"
#include "support/fixtures.hpp"

namespace safe_nsc {
namespace {

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

struct ScalarProblem {
  LtvSystem sys = testing::scalar_system(4, 0.1);
  LossSpec loss = LossSpec::constant(scalar(1.0), scalar(1.0), 4);
  GainSet set = testing::scalar_interval_set();
};

TEST(ComparatorStep, ScalarMinimizerOnTheBoundary) {
  const ScalarProblem p;
  const ComparatorResult r = comparator_step(p.sys, p.loss, p.set, 0, Vector::Constant(1, 0.5), Vector::Zero(1));
  EXPECT_NEAR(r.gain(0, 0), 0.5, 1e-8);
  EXPECT_NEAR(r.value, 0.125, 1e-10);
  EXPECT_LE(r.residual, 1e-9);
}

TEST(ComparatorStep, ZeroStateReturnsTheProjectionOfZero) {
  const ScalarProblem p;
  const ComparatorResult r = comparator_step(p.sys, p.loss, p.set, 0, Vector::Zero(1), Vector::Constant(1, 0.05));
  EXPECT_NEAR(r.gain(0, 0), 0.5, 1e-8);
}

// Single-input instances; halfspaces and the norm cap only, so membership
// is a few dot products and a dense grid is affordable.
struct GridInstance {
  Matrix a, b;
  Vector x, w;
  std::vector<Eigen::Vector2d> normals;
  std::vector<double> rhs;
  double cap = 0.0;
};

double grid_objective(const GridInstance& g, double k0, double k1) {
  const double u = -(k0 * g.x(0) + k1 * g.x(1));
  const double n0 = g.a(0, 0) * g.x(0) + g.a(0, 1) * g.x(1) + g.b(0, 0) * u + g.w(0);
  const double n1 = g.a(1, 0) * g.x(0) + g.a(1, 1) * g.x(1) + g.b(1, 0) * u + g.w(1);
  return n0 * n0 + n1 * n1 + u * u;
}

bool grid_member(const GridInstance& g, double k0, double k1) {
  if (std::hypot(k0, k1) > g.cap) return false;
  for (std::size_t i = 0; i < g.normals.size(); ++i) {
    if (g.normals[i](0) * k0 + g.normals[i](1) * k1 > g.rhs[i]) return false;
  }
  return true;
}

// Grid at 1e-3 over the cap box, then three zoomed grids around the best point.
double grid_search(const GridInstance& g) {
  double best = std::numeric_limits<double>::infinity();
  double c0 = 0.0, c1 = 0.0, half = g.cap, h = 1e-3;
  for (int level = 0; level < 4; ++level) {
    const int n = static_cast<int>(std::ceil(half / h));
    double b0 = c0, b1 = c1;
    for (int i = -n; i <= n; ++i) {
      for (int j = -n; j <= n; ++j) {
        const double k0 = c0 + i * h, k1 = c1 + j * h;
        if (!grid_member(g, k0, k1)) continue;
        const double v = grid_objective(g, k0, k1);
        if (v < best) {
          best = v;
          b0 = k0;
          b1 = k1;
        }
      }
    }
    c0 = b0;
    c1 = b1;
    half = 20.0 * h;
    h /= 10.0;
  }
  return best;
}

TEST(ComparatorStep, AgreesWithGridSearch) {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    GridInstance g;
    g.a = testing::random_matrix(rng, 2, 2, 0.5);
    g.b = testing::random_matrix(rng, 2, 1);
    g.x = testing::random_matrix(rng, 2, 1);
    g.w = testing::random_matrix(rng, 2, 1, 0.05);
    g.cap = 1.0 + unit(rng);
    GainSet set;
    set.input_dim = 1;
    set.state_dim = 2;
    set.spectral_cap = g.cap;
    for (int i = 0; i < 2; ++i) {
      const Matrix n = testing::random_matrix(rng, 1, 2);
      const double rhs = 0.2 + 0.5 * unit(rng);
      set.halfspaces.push_back({n, rhs});
      g.normals.emplace_back(n(0, 0), n(0, 1));
      g.rhs.push_back(rhs);
    }
    const LtvSystem sys = LtvSystem::time_invariant(g.a, g.b, 1, 0.1);
    const LossSpec loss = LossSpec::constant(Matrix::Identity(2, 2), scalar(1.0), 1);
    const ComparatorResult r = comparator_step(sys, loss, set, 0, g.x, g.w);
    const double oracle = grid_search(g);
    EXPECT_NEAR(r.value, oracle, 1e-5) << "trial " << trial;
    EXPECT_TRUE(membership(set, r.gain, 1e-9).member);
  }
}

TEST(PathLength, Examples) {
  EXPECT_EQ(path_length({scalar(0.3), scalar(0.3), scalar(0.3)}), 0.0);
  EXPECT_EQ(path_length({scalar(0.5), scalar(1.5)}), 1.0);
  EXPECT_EQ(path_length({scalar(0.5)}), 0.0);
  std::mt19937_64 rng(3);
  std::vector<GainMatrix> seq;
  for (int i = 0; i < 50; ++i) seq.push_back(testing::random_matrix(rng, 2, 3));
  double direct = 0.0;
  for (int i = 1; i < 50; ++i) {
    double sq = 0.0;
    for (int r = 0; r < 2; ++r) {
      for (int c = 0; c < 3; ++c) sq += std::pow(seq[i - 1](r, c) - seq[i](r, c), 2);
    }
    direct += std::sqrt(sq);
  }
  EXPECT_NEAR(path_length(seq), direct, 1e-13 * direct);
}

TEST(SetVariation, Examples) {
  EXPECT_EQ(set_variation({1.0, 0.5}), 1.5);
  EXPECT_EQ(set_variation(std::vector<double>(10, 1.0)), 10.0);
  EXPECT_EQ(set_variation({}), 0.0);
  try {
    set_variation({0.1, -1e-3});
    FAIL() << "expected NegativeZeta";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NegativeZeta);
  }
}

BoundConstants hand_constants(double gf, double df) {
  BoundConstants c;
  c.gradient_bound = gf;
  c.domain_diameter = df;
  return c;
}

TEST(TheoremBound, HandValue) {
  EXPECT_NEAR(theorem_bound(hand_constants(4.0, 6.0), 0.1, 100, 0.0, 0.0), 710.0, 1e-10);
  EXPECT_THROW(theorem_bound(hand_constants(4.0, 6.0), 0.0, 100, 0.0, 0.0), Error);
}

TEST(TheoremBound, SquareRootGrowthAtTheTunedStep) {
  const BoundConstants c = hand_constants(4.0, 6.0);
  auto tuned = [&](int horizon) {
    const double eta = 6.0 * std::sqrt(7.0) / (4.0 * std::sqrt(2.0 * horizon));
    return theorem_bound(c, eta, horizon, 0.0, 0.0);
  };
  const double slope = std::log(tuned(10000) / tuned(100)) / std::log(100.0);
  EXPECT_NEAR(slope, 0.5, 1e-12);
}

TEST(TheoremBound, LinearInVariationAndReducesWithoutIt) {
  const BoundConstants c = hand_constants(4.0, 6.0);
  const double base = theorem_bound(c, 0.2, 50, 1.3, 2.0);
  EXPECT_NEAR(theorem_bound(c, 0.2, 50, 1.3, 2.5) - base, 6.0 * 0.5 / 0.2, 1e-10);
  EXPECT_EQ(theorem_bound(c, 0.2, 50, 1.3, 0.0), standard_oco_bound(c, 0.2, 50, 1.3));
  const BoundTerms t = theorem_bound_terms(c, 0.2, 50, 1.3, 2.0);
  EXPECT_DOUBLE_EQ(t.total(), base);
}

RunTrace one_step_trace(double gain) {
  RunTrace trace;
  StepRecord s;
  s.x = Vector::Constant(1, 0.5);
  s.w = Vector::Zero(1);
  s.u = -gain * s.x;
  s.gain = scalar(gain);
  trace.steps.push_back(s);
  trace.sets.push_back(testing::scalar_interval_set());
  trace.eta = 0.1;
  return trace;
}

TEST(DynamicRegret, OneStepScalar) {
  const ScalarProblem p;
  const BoundConstants consts = BoundConstants::compute(p.sys, p.loss, 3.0, 0.5);
  const RegretReport r = dynamic_regret(one_step_trace(1.0), {scalar(0.5)}, p.sys, p.loss, consts);
  EXPECT_NEAR(r.regret, 0.125, 1e-15);
  EXPECT_NEAR(r.comparator_losses[0], 0.125, 1e-15);
  EXPECT_EQ(r.path_length, 0.0);
  EXPECT_EQ(dynamic_regret(one_step_trace(0.5), {scalar(0.5)}, p.sys, p.loss, consts).regret, 0.0);
  EXPECT_THROW(dynamic_regret(one_step_trace(1.0), {}, p.sys, p.loss, consts), Error);
}

TEST(FixedHindsightComparator, RejectsDifferentSets) {
  const ScalarProblem p;
  RunTrace trace = one_step_trace(1.0);
  trace.steps.push_back(trace.steps[0]);
  GainSet other = p.set;
  other.spectral_cap = 2.0;
  trace.sets.push_back(other);
  try {
    fixed_hindsight_comparator(trace, p.sys, p.loss);
    FAIL() << "expected InvalidParams";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidParams);
  }
}

TEST(DynamicRegret, QuadrotorRunStaysUnderTheBound) {
  ScenarioConfig cfg = quadrotor_preset();
  cfg.horizon = 100;
  const ScenarioInstance q = build_scenario(cfg);
  const RunTrace trace = run_safe_ogd(q.sys, q.safety, q.loss, q.noise, q.controller);
  const std::vector<GainMatrix> comps = hindsight_comparators(trace, q.sys, q.loss);
  for (int t = 0; t < trace.horizon(); ++t) {
    EXPECT_TRUE(membership(trace.sets[t], comps[t], 1e-8).member) << "t=" << t;
    EXPECT_LE(comparator_step(q.sys, q.loss, trace.sets[t], t, trace.steps[t].x, trace.steps[t].w).value,
              loss_in_gain(q.loss, q.sys, t, trace.steps[t].x, trace.steps[t].w, trace.steps[t].gain) + 1e-9);
  }
  const RegretReport r = dynamic_regret(trace, comps, q.sys, q.loss, q.consts);
  EXPECT_GE(r.regret, -1e-9);
  EXPECT_GT(r.slack, 0.0);
  for (int t = 0; t < trace.horizon(); ++t) EXPECT_LE(r.cumulative_regret[t], r.cumulative_bound[t]);
}

}  // namespace
}  // namespace safe_nsc
