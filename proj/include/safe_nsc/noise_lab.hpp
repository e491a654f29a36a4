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

#include <cstdint>
#include <string>
#include <string_view>

#include "safe_nsc/linalg.hpp"

namespace safe_nsc {

enum class NoiseFamily { Gaussian, Uniform, Gamma, Beta, Exponential, Weibull };

inline constexpr NoiseFamily kAllFamilies[] = {NoiseFamily::Gaussian, NoiseFamily::Uniform,     NoiseFamily::Gamma,
                                               NoiseFamily::Beta,     NoiseFamily::Exponential, NoiseFamily::Weibull};

std::string_view family_name(NoiseFamily family);
/// Case-insensitive; throws UnknownFamily.
NoiseFamily parse_family(std::string_view name);

/// Two per-family parameters:
///   Gaussian (mean, sigma), Uniform (low, high), Gamma (shape, scale),
///   Beta (alpha, beta), Exponential (rate, unused), Weibull (shape, scale).
struct NoiseParams {
  double first = 0.0;
  double second = 0.0;
};

NoiseParams default_params(NoiseFamily family);
/// Names of the two parameters as used in scenario files ("" when unused).
std::pair<std::string_view, std::string_view> param_names(NoiseFamily family);
void validate_params(NoiseFamily family, const NoiseParams& params);

/// Mean of the raw per-coordinate distribution; subtracted before clipping.
double centering_shift(NoiseFamily family, const NoiseParams& params);

/// Counter-based uniform in (0, 1), a pure function of its key.
double counter_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t index, std::uint64_t draw);

/// One raw draw of the family keyed on (seed, stream, index); not centered.
double raw_draw(NoiseFamily family, const NoiseParams& params, std::uint64_t seed, std::uint64_t stream,
                std::uint64_t index);

/// Bounded noise generator: w_t is a pure function of (seed, t).
class NoiseModel {
 public:
  NoiseModel(NoiseFamily family, NoiseParams params, int dim, double bound, std::uint64_t seed);
  NoiseModel(NoiseFamily family, int dim, double bound, std::uint64_t seed)
      : NoiseModel(family, default_params(family), dim, bound, seed) {}

  /// Centered draw radially clipped into the ball ||w|| <= bound.
  Vector sample(int t) const;

  NoiseFamily family() const { return family_; }
  const NoiseParams& params() const { return params_; }
  int dim() const { return dim_; }
  double bound() const { return bound_; }
  std::uint64_t seed() const { return seed_; }

 private:
  NoiseFamily family_;
  NoiseParams params_;
  int dim_;
  double bound_;
  std::uint64_t seed_;
};

}  // namespace safe_nsc
