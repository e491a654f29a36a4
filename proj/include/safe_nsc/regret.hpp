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

#include <vector>

#include "safe_nsc/controller.hpp"

namespace safe_nsc {

struct ComparatorConfig {
  double fixed_point_tol = 1e-9;
  int max_iters = 100000;
  ProjectionConfig projection;
};

struct ComparatorResult {
  GainMatrix gain;
  double value = 0.0;
  double residual = 0.0;  // ||K - P(K - grad / L)||_F at exit
  int iterations = 0;  // Newton steps plus gradient iterations
};

/// argmin over `set` of f_t(K) built from the realized (x, w): interior-point
/// solve of the quadratic, certified by the projected-gradient fixed-point
/// residual and polished by accelerated projected gradient when needed.
ComparatorResult comparator_step(const LtvSystem& sys, const LossSpec& loss, const GainSet& set, int t,
                                 const Vector& x, const Vector& w, const ComparatorConfig& cfg = {});

/// One comparator per step of the trace, from its realized states, noise and sets.
std::vector<GainMatrix> hindsight_comparators(const RunTrace& trace, const LtvSystem& sys, const LossSpec& loss,
                                              const ComparatorConfig& cfg = {});

/// Best single gain for the summed loss of a trace whose sets all coincide;
/// throws InvalidParams when they differ.
ComparatorResult fixed_hindsight_comparator(const RunTrace& trace, const LtvSystem& sys, const LossSpec& loss,
                                            const ComparatorConfig& cfg = {});

/// C_T = sum_t ||K*_{t-1} - K*_t||_F.
double path_length(const std::vector<GainMatrix>& comparators);

/// S_T = sum_t zeta_t; throws NegativeZeta.
double set_variation(const std::vector<double>& zetas);

struct BoundTerms {
  double gradient = 0.0;   // eta T G_f^2 / 2
  double diameter = 0.0;   // 7 D_f^2 / (4 eta)
  double path = 0.0;       // D_f C_T / eta
  double variation = 0.0;  // D_f S_T / eta
  double total() const { return gradient + diameter + path + variation; }
};

BoundTerms theorem_bound_terms(const BoundConstants& consts, double eta, int horizon, double path, double variation);
double theorem_bound(const BoundConstants& consts, double eta, int horizon, double path, double variation);
/// Fixed-domain dynamic regret bound without the set-variation term.
double standard_oco_bound(const BoundConstants& consts, double eta, int horizon, double path);

struct RegretReport {
  std::vector<GainMatrix> comparators;
  std::vector<double> comparator_losses;
  std::vector<double> cumulative_regret;  // prefix sums of f_t(K_t) - f_t(K_t*)
  std::vector<double> cumulative_bound;   // bound at horizon t with prefix C_t, S_t
  double regret = 0.0;
  double path_length = 0.0;
  double set_variation = 0.0;
  double bound = 0.0;
  double slack = 0.0;
  BoundTerms terms;
};

/// Regret of the trace against the given comparators, both sides built from
/// the realized (x_t, w_t).
RegretReport dynamic_regret(const RunTrace& trace, const std::vector<GainMatrix>& comparators, const LtvSystem& sys,
                            const LossSpec& loss, const BoundConstants& consts);

}  // namespace safe_nsc
