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
#include <set>

#include "safe_nsc/errors.hpp"
#include "safe_nsc/noise_lab.hpp"

namespace safe_nsc {
namespace {

// Analytic mean and variance per family.
std::pair<double, double> moments(NoiseFamily f, const NoiseParams& p) {
  switch (f) {
    case NoiseFamily::Gaussian: return {p.first, p.second * p.second};
    case NoiseFamily::Uniform: return {0.5 * (p.first + p.second), std::pow(p.second - p.first, 2) / 12.0};
    case NoiseFamily::Gamma: return {p.first * p.second, p.first * p.second * p.second};
    case NoiseFamily::Beta: {
      const double s = p.first + p.second;
      return {p.first / s, p.first * p.second / (s * s * (s + 1.0))};
    }
    case NoiseFamily::Exponential: return {1.0 / p.first, 1.0 / (p.first * p.first)};
    case NoiseFamily::Weibull: {
      const double g1 = std::tgamma(1.0 + 1.0 / p.first);
      const double g2 = std::tgamma(1.0 + 2.0 / p.first);
      return {p.second * g1, p.second * p.second * (g2 - g1 * g1)};
    }
  }
  return {0.0, 0.0};
}

TEST(NoiseModel, ZeroBoundGivesZeroNoise) {
  for (NoiseFamily f : kAllFamilies) {
    const NoiseModel m(f, 3, 0.0, 7);
    for (int t = 0; t < 20; ++t) EXPECT_EQ(m.sample(t), Vector::Zero(3)) << family_name(f);
  }
}

TEST(NoiseModel, SameKeySameDraw) {
  const NoiseModel a(NoiseFamily::Gaussian, 4, 0.1, 42);
  const NoiseModel b(NoiseFamily::Gaussian, 4, 0.1, 42);
  for (int t = 0; t < 50; ++t) {
    EXPECT_EQ(a.sample(t), a.sample(t));
    EXPECT_EQ(a.sample(t), b.sample(t));
  }
  EXPECT_NE(a.sample(0), NoiseModel(NoiseFamily::Gaussian, 4, 0.1, 43).sample(0));
}

TEST(NoiseModel, WeibullStreamStaysInTheBall) {
  const NoiseModel m(NoiseFamily::Weibull, {1.5, 1.0}, 6, 0.1, 3);
  double max_norm = 0.0;
  double mean_norm = 0.0;
  const int n = 10000;
  for (int t = 0; t < n; ++t) {
    const double r = m.sample(t).norm();
    max_norm = std::max(max_norm, r);
    mean_norm += r / n;
  }
  EXPECT_LE(max_norm, 0.1);
  EXPECT_GT(mean_norm, 0.0);
  EXPECT_LT(mean_norm, 0.1);
}

TEST(NoiseModel, EveryFamilyRespectsTheBound) {
  for (NoiseFamily f : kAllFamilies) {
    const NoiseModel m(f, 6, 0.1, 9);
    for (int t = 0; t < 2000; ++t) ASSERT_LE(m.sample(t).norm(), 0.1) << family_name(f);
  }
}

TEST(CenteringShift, AnalyticMeans) {
  EXPECT_EQ(centering_shift(NoiseFamily::Gaussian, {0.0, 2.0}), 0.0);
  EXPECT_DOUBLE_EQ(centering_shift(NoiseFamily::Exponential, {2.0, 0.0}), 0.5);
  EXPECT_EQ(centering_shift(NoiseFamily::Uniform, {-3.0, 3.0}), 0.0);
  for (NoiseFamily f : kAllFamilies) {
    const NoiseParams p = default_params(f);
    EXPECT_NEAR(centering_shift(f, p), moments(f, p).first, 1e-12) << family_name(f);
  }
}

// Sample moments of the raw draws against the analytic ones, at about five
// standard errors.
TEST(RawDraw, MomentsMatchTheFamilies) {
  const int n = 200000;
  for (NoiseFamily f : kAllFamilies) {
    const NoiseParams p = default_params(f);
    const auto [mean, var] = moments(f, p);
    double s1 = 0.0;
    double s2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double x = raw_draw(f, p, 17, 0, static_cast<std::uint64_t>(i));
      s1 += x;
      s2 += x * x;
    }
    const double m = s1 / n;
    const double v = s2 / n - m * m;
    EXPECT_NEAR(m, mean, 5.0 * std::sqrt(var / n)) << family_name(f);
    EXPECT_NEAR(v, var, 0.05 * var) << family_name(f);
  }
}

TEST(CounterUniform, OpenUnitIntervalAndKeyed) {
  std::set<double> seen;
  for (std::uint64_t i = 0; i < 1000; ++i) {
    const double u = counter_uniform(1, 2, i, 0);
    EXPECT_GT(u, 0.0);
    EXPECT_LT(u, 1.0);
    seen.insert(u);
  }
  EXPECT_EQ(seen.size(), 1000u);
  EXPECT_EQ(counter_uniform(5, 6, 7, 8), counter_uniform(5, 6, 7, 8));
  EXPECT_NE(counter_uniform(5, 6, 7, 8), counter_uniform(5, 6, 7, 9));
}

TEST(Families, NamesRoundTripAndUnknownIsRejected) {
  for (NoiseFamily f : kAllFamilies) EXPECT_EQ(parse_family(family_name(f)), f);
  EXPECT_EQ(parse_family("GAUSSIAN"), NoiseFamily::Gaussian);
  try {
    parse_family("cauchy");
    FAIL() << "expected UnknownFamily";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownFamily);
  }
}

TEST(Families, InvalidParametersAreRejected) {
  EXPECT_THROW(validate_params(NoiseFamily::Gaussian, {0.0, -1.0}), Error);
  EXPECT_THROW(validate_params(NoiseFamily::Uniform, {1.0, 0.0}), Error);
  EXPECT_THROW(validate_params(NoiseFamily::Gamma, {0.0, 1.0}), Error);
  EXPECT_THROW(validate_params(NoiseFamily::Beta, {1.0, 0.0}), Error);
  EXPECT_THROW(validate_params(NoiseFamily::Exponential, {0.0, 0.0}), Error);
  EXPECT_THROW(validate_params(NoiseFamily::Weibull, {-1.0, 1.0}), Error);
  EXPECT_THROW(NoiseModel(NoiseFamily::Gaussian, 2, -0.1, 1), Error);
}

}  // namespace
}  // namespace safe_nsc
