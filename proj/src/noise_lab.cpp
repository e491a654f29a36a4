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
#include "safe_nsc/noise_lab.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <string>

#include "safe_nsc/errors.hpp"

namespace safe_nsc {

namespace {

constexpr std::uint64_t splitmix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Sub-streams inside one coordinate draw (Beta needs two gammas).
constexpr std::uint64_t kPrimaryStream = 0;
constexpr std::uint64_t kSecondaryStream = 1;
constexpr int kMaxRejections = 10000;

struct DrawCursor {
  std::uint64_t seed;
  std::uint64_t stream;
  std::uint64_t index;
  std::uint64_t draw = 0;

  double uniform() { return counter_uniform(seed, stream, index, draw++); }

  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  // Marsaglia-Tsang; shape < 1 boosted through shape + 1.
  double gamma(double shape) {
    if (shape < 1.0) {
      const double g = gamma(shape + 1.0);
      return g * std::pow(uniform(), 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (int i = 0; i < kMaxRejections; ++i) {
      const double z = normal();
      const double v0 = 1.0 + c * z;
      if (v0 <= 0.0) continue;
      const double v = v0 * v0 * v0;
      const double u = uniform();
      if (std::log(u) < 0.5 * z * z + d - d * v + d * std::log(v)) return d * v;
    }
    throw Error(ErrorCode::InvariantViolation, "gamma sampler exceeded the rejection cap");
  }
};

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

}  // namespace

std::string_view family_name(NoiseFamily family) {
  switch (family) {
    case NoiseFamily::Gaussian: return "gaussian";
    case NoiseFamily::Uniform: return "uniform";
    case NoiseFamily::Gamma: return "gamma";
    case NoiseFamily::Beta: return "beta";
    case NoiseFamily::Exponential: return "exponential";
    case NoiseFamily::Weibull: return "weibull";
  }
  return "unknown";
}

NoiseFamily parse_family(std::string_view name) {
  const std::string key = lower(name);
  for (NoiseFamily f : kAllFamilies) {
    if (family_name(f) == key) return f;
  }
  throw Error(ErrorCode::UnknownFamily, "unknown noise family '" + std::string(name) + "'");
}

NoiseParams default_params(NoiseFamily family) {
  switch (family) {
    case NoiseFamily::Gaussian: return {0.0, 1.0};
    case NoiseFamily::Uniform: return {-1.0, 1.0};
    case NoiseFamily::Gamma: return {2.0, 1.0};
    case NoiseFamily::Beta: return {2.0, 5.0};
    case NoiseFamily::Exponential: return {1.0, 0.0};
    case NoiseFamily::Weibull: return {1.5, 1.0};
  }
  throw Error(ErrorCode::UnknownFamily, "unknown noise family");
}

std::pair<std::string_view, std::string_view> param_names(NoiseFamily family) {
  switch (family) {
    case NoiseFamily::Gaussian: return {"mean", "sigma"};
    case NoiseFamily::Uniform: return {"low", "high"};
    case NoiseFamily::Gamma: return {"shape", "scale"};
    case NoiseFamily::Beta: return {"alpha", "beta"};
    case NoiseFamily::Exponential: return {"rate", ""};
    case NoiseFamily::Weibull: return {"shape", "scale"};
  }
  return {"", ""};
}

void validate_params(NoiseFamily family, const NoiseParams& p) {
  const bool finite = std::isfinite(p.first) && std::isfinite(p.second);
  bool ok = finite;
  switch (family) {
    case NoiseFamily::Gaussian: ok = ok && p.second >= 0.0; break;
    case NoiseFamily::Uniform: ok = ok && p.first <= p.second; break;
    case NoiseFamily::Gamma:
    case NoiseFamily::Beta:
    case NoiseFamily::Weibull: ok = ok && p.first > 0.0 && p.second > 0.0; break;
    case NoiseFamily::Exponential: ok = ok && p.first > 0.0; break;
  }
  require(ok, ErrorCode::InvalidParams,
          "invalid parameters (" + std::to_string(p.first) + ", " + std::to_string(p.second) + ") for " +
              std::string(family_name(family)));
}

double centering_shift(NoiseFamily family, const NoiseParams& p) {
  validate_params(family, p);
  switch (family) {
    case NoiseFamily::Gaussian: return p.first;
    case NoiseFamily::Uniform: return 0.5 * (p.first + p.second);
    case NoiseFamily::Gamma: return p.first * p.second;
    case NoiseFamily::Beta: return p.first / (p.first + p.second);
    case NoiseFamily::Exponential: return 1.0 / p.first;
    case NoiseFamily::Weibull: return p.second * std::tgamma(1.0 + 1.0 / p.first);
  }
  throw Error(ErrorCode::UnknownFamily, "unknown noise family");
}

double counter_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t index, std::uint64_t draw) {
  std::uint64_t h = splitmix(seed);
  h = splitmix(h ^ stream);
  h = splitmix(h ^ index);
  h = splitmix(h ^ draw);
  // 53 random bits, offset by half an ulp so the result is never 0 or 1.
  return (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53;
}

double raw_draw(NoiseFamily family, const NoiseParams& p, std::uint64_t seed, std::uint64_t stream,
                std::uint64_t index) {
  DrawCursor cur{seed, stream * 2 + kPrimaryStream, index};
  switch (family) {
    case NoiseFamily::Gaussian: return p.first + p.second * cur.normal();
    case NoiseFamily::Uniform: return p.first + (p.second - p.first) * cur.uniform();
    case NoiseFamily::Gamma: return p.second * cur.gamma(p.first);
    case NoiseFamily::Beta: {
      DrawCursor other{seed, stream * 2 + kSecondaryStream, index};
      const double x = cur.gamma(p.first);
      const double y = other.gamma(p.second);
      return x / (x + y);
    }
    case NoiseFamily::Exponential: return -std::log(cur.uniform()) / p.first;
    case NoiseFamily::Weibull: return p.second * std::pow(-std::log(cur.uniform()), 1.0 / p.first);
  }
  throw Error(ErrorCode::UnknownFamily, "unknown noise family");
}

NoiseModel::NoiseModel(NoiseFamily family, NoiseParams params, int dim, double bound, std::uint64_t seed)
    : family_(family), params_(params), dim_(dim), bound_(bound), seed_(seed) {
  validate_params(family, params);
  require(dim > 0, ErrorCode::InvalidParams, "noise dimension must be positive");
  require(std::isfinite(bound) && bound >= 0.0, ErrorCode::InvalidParams, "noise bound must be nonnegative");
}

Vector NoiseModel::sample(int t) const {
  require(t >= 0, ErrorCode::InvalidParams, "negative step index");
  Vector w = Vector::Zero(dim_);
  if (bound_ == 0.0) return w;
  const double shift = centering_shift(family_, params_);
  for (int i = 0; i < dim_; ++i) {
    const auto index = static_cast<std::uint64_t>(t) * static_cast<std::uint64_t>(dim_) + static_cast<std::uint64_t>(i);
    w(i) = raw_draw(family_, params_, seed_, 0, index) - shift;
  }
  double norm = w.norm();
  if (norm > bound_) {
    double scale = bound_ / norm;
    Vector clipped = w * scale;
    // Rounding can leave the clipped norm an ulp above the bound.
    while (clipped.norm() > bound_) {
      scale = std::nextafter(scale, 0.0);
      clipped = w * scale;
    }
    w = clipped;
  }
  return w;
}

}  // namespace safe_nsc
