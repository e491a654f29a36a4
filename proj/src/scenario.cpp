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
#include "safe_nsc/scenario.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "safe_nsc/errors.hpp"

#ifndef SAFE_NSC_VERSION
#define SAFE_NSC_VERSION "unknown"
#endif

namespace safe_nsc {

using nlohmann::json;

namespace {

std::string_view to_string(ProjectionMethod m) { return m == ProjectionMethod::Dykstra ? "dykstra" : "interior_point"; }
std::string_view to_string(InitPolicy p) { return p == InitPolicy::Witness ? "witness" : "project_zero"; }

template <typename E, std::size_t N>
E parse_enum(std::string_view text, const std::array<E, N>& values, const std::string& field) {
  for (E v : values) {
    if (to_string(v) == text) return v;
  }
  std::string options;
  for (E v : values) options += (options.empty() ? "" : ", ") + std::string(to_string(v));
  throw Error(ErrorCode::ValidationError, field + ": unknown value \"" + std::string(text) + "\" (expected " + options + ")");
}

constexpr std::array kScenarioKinds{ScenarioKind::Quadrotor, ScenarioKind::Synthetic2d, ScenarioKind::Custom};
constexpr std::array kSchedules{WeightSchedule::Constant, WeightSchedule::Sinusoidal, WeightSchedule::Step};
constexpr std::array kControllers{ControllerKind::SafeOgd, ControllerKind::FixedGain, ControllerKind::Dac};
constexpr std::array kComparators{ComparatorMode::None, ComparatorMode::Dynamic, ComparatorMode::Fixed};
constexpr std::array kMetrics{MetricKind::Identity, MetricKind::Lqr};
constexpr std::array kMethods{ProjectionMethod::InteriorPoint, ProjectionMethod::Dykstra};
constexpr std::array kInits{InitPolicy::ProjectZero, InitPolicy::Witness};


// Field access with the dotted path in every error.
class Section {
 public:
  Section(const json& obj, std::string where, std::initializer_list<const char*> allowed) : obj_(obj), where_(std::move(where)) {
    if (!obj.is_object()) throw Error(ErrorCode::ValidationError, label() + ": expected an object");
    const std::set<std::string> keys(allowed.begin(), allowed.end());
    for (const auto& [key, value] : obj.items()) {
      if (!keys.count(key)) throw Error(ErrorCode::ValidationError, "unknown key \"" + path(key) + "\"");
    }
  }

  bool has(const char* key) const { return obj_.contains(key); }
  const json& at(const char* key) const { return obj_.at(key); }
  std::string path(const std::string& key) const { return where_.empty() ? key : where_ + "." + key; }

  double number(const char* key) const {
    const json& v = obj_.at(key);
    if (!v.is_number()) throw Error(ErrorCode::ValidationError, path(key) + ": expected a number");
    return v.get<double>();
  }
  int integer(const char* key) const {
    const json& v = obj_.at(key);
    if (!v.is_number_integer()) throw Error(ErrorCode::ValidationError, path(key) + ": expected an integer");
    return v.get<int>();
  }
  std::uint64_t unsigned_integer(const char* key) const {
    const json& v = obj_.at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
      throw Error(ErrorCode::ValidationError, path(key) + ": expected a nonnegative integer");
    }
    return v.get<std::uint64_t>();
  }
  bool boolean(const char* key) const {
    const json& v = obj_.at(key);
    if (!v.is_boolean()) throw Error(ErrorCode::ValidationError, path(key) + ": expected true or false");
    return v.get<bool>();
  }
  std::string string(const char* key) const {
    const json& v = obj_.at(key);
    if (!v.is_string()) throw Error(ErrorCode::ValidationError, path(key) + ": expected a string");
    return v.get<std::string>();
  }
  Vector vector(const char* key) const { return to_vector(obj_.at(key), path(key)); }
  Matrix matrix(const char* key) const { return to_matrix(obj_.at(key), path(key)); }

  static Vector to_vector(const json& v, const std::string& where) {
    if (!v.is_array()) throw Error(ErrorCode::ValidationError, where + ": expected an array of numbers");
    Vector out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) throw Error(ErrorCode::ValidationError, where + ": expected an array of numbers");
      out(static_cast<Eigen::Index>(i)) = v[i].get<double>();
    }
    return out;
  }
  static Matrix to_matrix(const json& v, const std::string& where) {
    if (!v.is_array() || v.empty()) throw Error(ErrorCode::ValidationError, where + ": expected an array of rows");
    const std::size_t cols = v[0].is_array() ? v[0].size() : 0;
    Matrix out(static_cast<Eigen::Index>(v.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < v.size(); ++i) {
      const Vector row = to_vector(v[i], where);
      if (static_cast<std::size_t>(row.size()) != cols || cols == 0) {
        throw Error(ErrorCode::ValidationError, where + ": rows must be nonempty and of equal length");
      }
      out.row(static_cast<Eigen::Index>(i)) = row.transpose();
    }
    return out;
  }

 private:
  std::string label() const { return where_.empty() ? "config" : where_; }
  const json& obj_;
  std::string where_;
};

json to_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

json to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(to_json(Vector(m.row(i).transpose())));
  return rows;
}

bool controllable(const Matrix& a, const Matrix& b) {
  const Eigen::Index n = a.rows();
  Matrix ctrb(n, n * b.cols());
  Matrix block = b;
  for (Eigen::Index i = 0; i < n; ++i) {
    ctrb.middleCols(i * b.cols(), b.cols()) = block;
    block = a * block;
  }
  const Vector sv = Eigen::JacobiSVD<Matrix>(ctrb).singularValues();
  return sv(n - 1) > 1e-3 * std::max(1.0, sv(0));
}

ContractionMetric make_metric(const ScenarioConfig& cfg, const Matrix& a, const Matrix& b) {
  if (cfg.metric == MetricKind::Lqr) return ContractionMetric::from_lqr(a, b, cfg.q, cfg.r);
  return ContractionMetric::identity(static_cast<int>(a.rows()));
}

SafetySpec make_safety(const ScenarioConfig& cfg, int state_dim) {
  const int steps = cfg.horizon + 1;
  if (cfg.state_lo.size() == 0) return SafetySpec::input_box(steps, state_dim, cfg.input_lo, cfg.input_hi);
  return SafetySpec::boxes(steps, cfg.state_lo, cfg.state_hi, cfg.input_lo, cfg.input_hi);
}

LossSpec make_loss(const ScenarioConfig& cfg) {
  std::vector<Matrix> q;
  std::vector<Matrix> r;
  q.reserve(cfg.horizon);
  r.reserve(cfg.horizon);
  for (int t = 0; t < cfg.horizon; ++t) {
    const auto [qt, rt] = schedule_weights(cfg.schedule, t, cfg.horizon);
    q.push_back(qt * cfg.q);
    r.push_back(rt * cfg.r);
  }
  return LossSpec(std::move(q), std::move(r));
}

// Controller settings that do not depend on the step size.
ControllerConfig base_controller(const ScenarioConfig& cfg, const LtvSystem& sys, const SafetySpec& safety,
                                 const LossSpec& loss, const ContractionMetric& metric) {
  ControllerConfig cc;
  cc.kappa = cfg.kappa;
  cc.gamma = cfg.gamma;
  cc.projection = cfg.projection;
  cc.init = cfg.init;
  cc.metric = metric;
  if (cfg.time_invariant_set) {
    const BoundConstants consts = controller_constants(sys, loss, cc);
    cc.fixed_set = build_time_invariant_set(sys.a(0), sys.b(0), safety.at(0), consts.state_bound, cfg.kappa,
                                            cfg.gamma, metric);
  }
  return cc;
}

}  // namespace

std::string_view to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::Quadrotor: return "quadrotor";
    case ScenarioKind::Synthetic2d: return "synthetic2d";
    case ScenarioKind::Custom: return "custom";
  }
  return "?";
}

std::string_view to_string(WeightSchedule schedule) {
  switch (schedule) {
    case WeightSchedule::Constant: return "constant";
    case WeightSchedule::Sinusoidal: return "sinusoidal";
    case WeightSchedule::Step: return "step";
  }
  return "?";
}

std::string_view to_string(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::SafeOgd: return "safe_ogd";
    case ControllerKind::FixedGain: return "fixed_gain";
    case ControllerKind::Dac: return "dac";
  }
  return "?";
}

std::string_view to_string(ComparatorMode mode) {
  switch (mode) {
    case ComparatorMode::None: return "none";
    case ComparatorMode::Dynamic: return "dynamic";
    case ComparatorMode::Fixed: return "fixed";
  }
  return "?";
}

std::string_view to_string(MetricKind kind) { return kind == MetricKind::Lqr ? "lqr" : "identity"; }

void ScenarioConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::ValidationError, what); };
  if (horizon <= 0) fail("horizon: must be a positive integer");
  if (!(noise_bound > 0.0) || !std::isfinite(noise_bound)) fail("noise.bound: must be positive");
  if (noise_params) {
    try {
      validate_params(family, *noise_params);
    } catch (const Error& e) {
      fail(std::string("noise.params: ") + e.what());
    }
  }
  if (scenario != ScenarioKind::Synthetic2d) {
    if (a.size() == 0 || b.size() == 0) fail("system: A and B are required");
    if (a.rows() != a.cols()) fail("system.A: must be square");
    if (b.rows() != a.rows()) fail("system.B: row count must match A");
  }
  if (input_lo.size() == 0 || input_lo.size() != input_hi.size()) fail("safety: input_lo and input_hi are required");
  if (b.size() != 0 && input_lo.size() != b.cols()) fail("safety.input_lo: length must match the columns of B");
  if ((input_hi - input_lo).minCoeff() <= 0.0 || input_hi.minCoeff() <= 0.0 || input_lo.maxCoeff() >= 0.0) {
    fail("safety: input boxes must contain zero in their interior");
  }
  if (state_lo.size() != state_hi.size()) fail("safety: state_lo and state_hi must have equal length");
  if (state_lo.size() != 0) {
    if (a.size() != 0 && state_lo.size() != a.rows()) fail("safety.state_lo: length must match the state dimension");
    if (state_hi.minCoeff() <= 0.0 || state_lo.maxCoeff() >= 0.0) {
      fail("safety: state boxes must contain zero in their interior");
    }
  }
  if (q.size() == 0 || r.size() == 0) fail("loss: Q and R are required");
  if (a.size() != 0 && (q.rows() != a.rows() || q.cols() != a.rows())) fail("loss.Q: shape must match the state");
  if (b.size() != 0 && (r.rows() != b.cols() || r.cols() != b.cols())) fail("loss.R: shape must match the input");
  if (!(kappa > 0.0)) fail("controller.kappa: must be positive");
  if (!(gamma > 0.0 && gamma < 1.0)) fail("controller.gamma: must lie in (0, 1)");
  if (eta && !(*eta > 0.0)) fail("controller.eta: must be positive");
  if (!(eta_scale > 0.0)) fail("controller.eta_scale: must be positive");
  if (protocol_step < 0 || protocol_step > 2) fail("controller.step_size: must be eta1 or eta2");
  if (controllers.empty()) fail("controllers: at least one controller is required");
  if (time_invariant_set && state_lo.size() != 0) fail("controller.time_invariant_set: needs input-only constraints");
  const bool baseline = std::any_of(controllers.begin(), controllers.end(),
                                    [](ControllerKind k) { return k != ControllerKind::SafeOgd; });
  if (baseline && state_lo.size() != 0) fail("controllers: fixed_gain and dac need input-only constraints");
  if (comparator == ComparatorMode::Fixed && !time_invariant_set) {
    fail("comparator.mode: fixed needs controller.time_invariant_set");
  }
  if (initial_state && a.size() != 0 && initial_state->size() != a.rows()) {
    fail("initial_state: length must match the state dimension");
  }
  try {
    dac.validate();
    if (projection.max_iters <= 0 || !(projection.kkt_tol > 0.0)) throw Error(ErrorCode::InvalidParams, "bad tolerances");
    if (!(comparator_cfg.fixed_point_tol > 0.0) || comparator_cfg.max_iters <= 0) {
      throw Error(ErrorCode::InvalidParams, "bad comparator tolerances");
    }
  } catch (const Error& e) {
    fail(e.what());
  }
}

ScenarioConfig quadrotor_preset() {
  ScenarioConfig c;
  c.scenario = ScenarioKind::Quadrotor;
  c.horizon = 500;
  c.seed = 1;
  c.family = NoiseFamily::Gaussian;
  c.noise_bound = 0.1;
  c.a = Matrix::Identity(6, 6);
  for (int i = 0; i < 3; ++i) c.a(i, i + 3) = 0.1;
  c.b = Matrix::Zero(6, 3);
  c.b(0, 0) = -0.0491;
  c.b(1, 1) = 0.0491;
  c.b(2, 2) = 1.0 / 200.0;
  c.b(3, 0) = -0.981;
  c.b(4, 1) = 0.981;
  c.b(5, 2) = 0.1;
  c.state_lo = -Vector::Ones(6);
  c.state_hi = Vector::Ones(6);
  c.input_hi = Vector(3);
  c.input_hi << std::numbers::pi, std::numbers::pi, 20.0;
  c.input_lo = -c.input_hi;
  c.schedule = WeightSchedule::Constant;
  c.q = Matrix::Identity(6, 6);
  c.r = Matrix::Identity(3, 3);
  c.kappa = 5.0;
  c.gamma = 0.02;
  c.metric = MetricKind::Lqr;
  c.controllers = {ControllerKind::SafeOgd};
  c.comparator = ComparatorMode::Dynamic;
  return c;
}

ScenarioConfig synthetic2d_preset() {
  ScenarioConfig c;
  c.scenario = ScenarioKind::Synthetic2d;
  c.horizon = 1000;
  c.seed = 1;
  c.system_seed = 1;
  c.family = NoiseFamily::Gaussian;
  c.noise_bound = 0.1;
  c.input_hi = Vector::Constant(1, 3.0);
  c.input_lo = -c.input_hi;
  c.schedule = WeightSchedule::Sinusoidal;
  c.q = Matrix::Identity(2, 2);
  c.r = Matrix::Identity(1, 1);
  c.kappa = 2.0;
  c.gamma = 0.1;
  c.metric = MetricKind::Lqr;
  c.time_invariant_set = true;
  c.controllers = {ControllerKind::SafeOgd, ControllerKind::Dac};
  c.comparator = ComparatorMode::Dynamic;
  return c;
}

ScenarioConfig preset(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::Quadrotor: return quadrotor_preset();
    case ScenarioKind::Synthetic2d: return synthetic2d_preset();
    case ScenarioKind::Custom: break;
  }
  return ScenarioConfig{};
}

ScenarioConfig config_from_json(const json& doc) {
  const Section top(doc, "",
                    {"scenario", "horizon", "seed", "noise", "system", "safety", "loss", "controller", "controllers",
                     "dac", "comparator", "initial_state", "output_dir"});
  ScenarioConfig c;
  if (top.has("scenario")) c = preset(parse_enum(top.string("scenario"), kScenarioKinds, "scenario"));
  if (top.has("horizon")) c.horizon = top.integer("horizon");
  if (top.has("seed")) c.seed = top.unsigned_integer("seed");

  if (top.has("noise")) {
    const Section s(top.at("noise"), "noise", {"family", "params", "bound"});
    if (s.has("family")) {
      try {
        c.family = parse_family(s.string("family"));
      } catch (const Error& e) {
        throw Error(ErrorCode::ValidationError, std::string("noise.family: ") + e.what());
      }
    }
    if (s.has("bound")) c.noise_bound = s.number("bound");
    if (s.has("params")) {
      const auto [first, second] = param_names(c.family);
      const std::string n1(first);
      const std::string n2(second);
      const json& p = s.at("params");
      if (!p.is_object()) throw Error(ErrorCode::ValidationError, "noise.params: expected an object");
      for (const auto& [key, value] : p.items()) {
        if (key != n1 && (n2.empty() || key != n2)) {
          throw Error(ErrorCode::ValidationError, "unknown key \"noise.params." + key + "\" for family " +
                                                      std::string(family_name(c.family)));
        }
        if (!value.is_number()) throw Error(ErrorCode::ValidationError, "noise.params." + key + ": expected a number");
      }
      NoiseParams params = default_params(c.family);
      if (p.contains(n1)) params.first = p.at(n1).get<double>();
      if (!n2.empty() && p.contains(n2)) params.second = p.at(n2).get<double>();
      c.noise_params = params;
    }
  }
  if (top.has("system")) {
    const Section s(top.at("system"), "system", {"A", "B", "seed"});
    if (s.has("A")) c.a = s.matrix("A");
    if (s.has("B")) c.b = s.matrix("B");
    if (s.has("seed")) c.system_seed = s.unsigned_integer("seed");
  }
  if (top.has("safety")) {
    const Section s(top.at("safety"), "safety", {"state_lo", "state_hi", "input_lo", "input_hi"});
    if (s.has("state_lo")) c.state_lo = s.vector("state_lo");
    if (s.has("state_hi")) c.state_hi = s.vector("state_hi");
    if (s.has("input_lo")) c.input_lo = s.vector("input_lo");
    if (s.has("input_hi")) c.input_hi = s.vector("input_hi");
  }
  if (top.has("loss")) {
    const Section s(top.at("loss"), "loss", {"schedule", "Q", "R"});
    if (s.has("schedule")) c.schedule = parse_enum(s.string("schedule"), kSchedules, "loss.schedule");
    if (s.has("Q")) c.q = s.matrix("Q");
    if (s.has("R")) c.r = s.matrix("R");
  }
  if (top.has("controller")) {
    const Section s(top.at("controller"), "controller",
                    {"kappa", "gamma", "eta", "eta_scale", "step_size", "metric", "init", "time_invariant_set",
                     "projection"});
    if (s.has("kappa")) c.kappa = s.number("kappa");
    if (s.has("gamma")) c.gamma = s.number("gamma");
    if (s.has("eta")) {
      if (s.at("eta").is_null()) {
        c.eta.reset();
      } else {
        c.eta = s.number("eta");
      }
    }
    if (s.has("eta_scale")) c.eta_scale = s.number("eta_scale");
    if (s.has("step_size")) {
      const std::string v = s.string("step_size");
      if (v == "configured") {
        c.protocol_step = 0;
      } else if (v == "eta1") {
        c.protocol_step = 1;
      } else if (v == "eta2") {
        c.protocol_step = 2;
      } else {
        throw Error(ErrorCode::ValidationError, "controller.step_size: expected configured, eta1 or eta2");
      }
    }
    if (s.has("metric")) c.metric = parse_enum(s.string("metric"), kMetrics, "controller.metric");
    if (s.has("init")) c.init = parse_enum(s.string("init"), kInits, "controller.init");
    if (s.has("time_invariant_set")) c.time_invariant_set = s.boolean("time_invariant_set");
    if (s.has("projection")) {
      const Section p(s.at("projection"), "controller.projection",
                      {"method", "max_iters", "kkt_tol", "feasibility_slack"});
      if (p.has("method")) c.projection.method = parse_enum(p.string("method"), kMethods, "controller.projection.method");
      if (p.has("max_iters")) c.projection.max_iters = p.integer("max_iters");
      if (p.has("kkt_tol")) c.projection.kkt_tol = p.number("kkt_tol");
      if (p.has("feasibility_slack")) c.projection.feasibility_slack = p.number("feasibility_slack");
    }
  }
  if (top.has("controllers")) {
    const json& list = top.at("controllers");
    if (!list.is_array()) throw Error(ErrorCode::ValidationError, "controllers: expected an array of names");
    c.controllers.clear();
    for (const json& v : list) {
      if (!v.is_string()) throw Error(ErrorCode::ValidationError, "controllers: expected an array of names");
      c.controllers.push_back(parse_enum(v.get<std::string>(), kControllers, "controllers"));
    }
  }
  if (top.has("dac")) {
    const Section s(top.at("dac"), "dac", {"memory", "eta", "margin_fraction"});
    if (s.has("memory")) c.dac.memory = s.integer("memory");
    if (s.has("eta")) c.dac.eta = s.number("eta");
    if (s.has("margin_fraction")) c.dac.margin_fraction = s.number("margin_fraction");
  }
  if (top.has("comparator")) {
    const Section s(top.at("comparator"), "comparator", {"mode", "fixed_point_tol", "max_iters"});
    if (s.has("mode")) c.comparator = parse_enum(s.string("mode"), kComparators, "comparator.mode");
    if (s.has("fixed_point_tol")) c.comparator_cfg.fixed_point_tol = s.number("fixed_point_tol");
    if (s.has("max_iters")) c.comparator_cfg.max_iters = s.integer("max_iters");
  }
  if (top.has("initial_state")) {
    if (top.at("initial_state").is_null()) {
      c.initial_state.reset();
    } else {
      c.initial_state = top.vector("initial_state");
    }
  }
  if (top.has("output_dir")) c.output_dir = top.string("output_dir");
  c.validate();
  return c;
}

ScenarioConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
    const long line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
    throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + e.what());
  }
  return config_from_json(doc);
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

json config_to_json(const ScenarioConfig& c) {
  json doc;
  doc["scenario"] = to_string(c.scenario);
  doc["horizon"] = c.horizon;
  doc["seed"] = c.seed;
  json noise{{"family", family_name(c.family)}, {"bound", c.noise_bound}};
  const NoiseParams params = c.noise_params.value_or(default_params(c.family));
  const auto [first, second] = param_names(c.family);
  noise["params"] = json::object();
  noise["params"][std::string(first)] = params.first;
  if (!second.empty()) noise["params"][std::string(second)] = params.second;
  doc["noise"] = noise;
  json system{{"seed", c.system_seed}};
  if (c.a.size() != 0) system["A"] = to_json(c.a);
  if (c.b.size() != 0) system["B"] = to_json(c.b);
  doc["system"] = system;
  json safety{{"input_lo", to_json(c.input_lo)}, {"input_hi", to_json(c.input_hi)}};
  if (c.state_lo.size() != 0) {
    safety["state_lo"] = to_json(c.state_lo);
    safety["state_hi"] = to_json(c.state_hi);
  }
  doc["safety"] = safety;
  doc["loss"] = {{"schedule", to_string(c.schedule)}, {"Q", to_json(c.q)}, {"R", to_json(c.r)}};
  const char* step_names[] = {"configured", "eta1", "eta2"};
  doc["controller"] = {{"kappa", c.kappa},
                       {"gamma", c.gamma},
                       {"eta", c.eta ? json(*c.eta) : json(nullptr)},
                       {"eta_scale", c.eta_scale},
                       {"step_size", step_names[std::clamp(c.protocol_step, 0, 2)]},
                       {"metric", to_string(c.metric)},
                       {"init", to_string(c.init)},
                       {"time_invariant_set", c.time_invariant_set},
                       {"projection",
                        {{"method", to_string(c.projection.method)},
                         {"max_iters", c.projection.max_iters},
                         {"kkt_tol", c.projection.kkt_tol},
                         {"feasibility_slack", c.projection.feasibility_slack}}}};
  json controllers = json::array();
  for (ControllerKind k : c.controllers) controllers.push_back(to_string(k));
  doc["controllers"] = controllers;
  doc["dac"] = {{"memory", c.dac.memory}, {"eta", c.dac.eta}, {"margin_fraction", c.dac.margin_fraction}};
  doc["comparator"] = {{"mode", to_string(c.comparator)},
                       {"fixed_point_tol", c.comparator_cfg.fixed_point_tol},
                       {"max_iters", c.comparator_cfg.max_iters}};
  doc["initial_state"] = c.initial_state ? to_json(*c.initial_state) : json(nullptr);
  doc["output_dir"] = c.output_dir;
  return doc;
}

std::pair<double, double> schedule_weights(WeightSchedule schedule, int t, int horizon) {
  const double tau = t + 1.0;
  switch (schedule) {
    case WeightSchedule::Constant: return {1.0, 1.0};
    case WeightSchedule::Sinusoidal:
      return {std::abs(std::sin(tau / (10.0 * std::numbers::pi))), std::abs(std::sin(tau / (20.0 * std::numbers::pi)))};
    case WeightSchedule::Step: {
      const double low = std::log(2.0) / 2.0;
      const double n = horizon;
      if (tau <= n / 5.0) return {low, 1.0};
      if (tau <= 2.0 * n / 5.0) return {1.0, 1.0};
      if (tau <= 3.0 * n / 5.0) return {low, low};
      if (tau <= 4.0 * n / 5.0) return {1.0, low};
      return {low, 1.0};
    }
  }
  return {1.0, 1.0};
}

SampledSystem sample_synthetic_system(const ScenarioConfig& cfg) {
  const NoiseParams params = cfg.noise_params.value_or(default_params(cfg.family));
  const double shift = centering_shift(cfg.family, params);
  constexpr int kMaxAttempts = 200;
  constexpr std::uint64_t kSystemStream = 1ULL << 40;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    auto draw = [&](std::uint64_t entry) {
      return raw_draw(cfg.family, params, cfg.system_seed, kSystemStream + entry, static_cast<std::uint64_t>(attempt)) -
             shift;
    };
    SampledSystem s;
    s.a = Matrix(2, 2);
    s.b = Matrix(2, 1);
    s.a << draw(0), draw(1), draw(2), draw(3);
    s.b << draw(4), draw(5);
    s.attempts = attempt + 1;
    s.raw_spectral_radius = spectral_radius(s.a);
    if (!(s.raw_spectral_radius > 1e-6) || !s.b.allFinite() || s.b.norm() < 1e-3) continue;
    s.a *= 0.9 / s.raw_spectral_radius;
    if (!controllable(s.a, s.b)) continue;
    ScenarioConfig probe_cfg = cfg;
    probe_cfg.a = s.a;
    probe_cfg.b = s.b;
    try {
      const ContractionMetric metric = make_metric(probe_cfg, s.a, s.b);
      const LtvSystem sys = LtvSystem::time_invariant(s.a, s.b, 1, cfg.noise_bound);
      const LossSpec loss = LossSpec::constant(cfg.q, cfg.r, 1);
      ControllerConfig cc;
      cc.kappa = cfg.kappa;
      cc.gamma = cfg.gamma;
      cc.metric = metric;
      const BoundConstants consts = controller_constants(sys, loss, cc);
      const SafetySpec safety = make_safety(probe_cfg, 2);
      const GainSet set = build_time_invariant_set(s.a, s.b, safety.at(0), consts.state_bound, cfg.kappa, cfg.gamma,
                                                   metric);
      if (!feasibility_probe(set, cfg.projection).feasible) continue;
      const bool needs_dac =
          std::find(cfg.controllers.begin(), cfg.controllers.end(), ControllerKind::Dac) != cfg.controllers.end();
      if (needs_dac && !feasibility_probe(dac_gain_set(sys, safety, loss, cc, cfg.dac), cfg.projection).feasible) {
        continue;
      }
    } catch (const Error&) {
      continue;
    }
    return s;
  }
  throw Error(ErrorCode::InfeasibleSafeSet,
              "synthetic2d: no controllable plant with a feasible gain set in " + std::to_string(kMaxAttempts) +
                  " draws");
}

namespace {

ScenarioInstance assemble(const ScenarioConfig& input) {
  ScenarioConfig cfg = input;
  json provenance;
  if (cfg.scenario == ScenarioKind::Synthetic2d) {
    const SampledSystem s = sample_synthetic_system(cfg);
    cfg.a = s.a;
    cfg.b = s.b;
    provenance["sampled_system"] = {{"A", to_json(s.a)},
                                    {"B", to_json(s.b)},
                                    {"raw_spectral_radius", s.raw_spectral_radius},
                                    {"rescaled_spectral_radius", 0.9},
                                    {"attempts", s.attempts},
                                    {"system_seed", cfg.system_seed}};
  }
  cfg.validate();
  LtvSystem sys = LtvSystem::time_invariant(cfg.a, cfg.b, cfg.horizon, cfg.noise_bound);
  SafetySpec safety = make_safety(cfg, static_cast<int>(cfg.a.rows()));
  LossSpec loss = make_loss(cfg);
  NoiseModel noise(cfg.family, cfg.noise_params.value_or(default_params(cfg.family)), static_cast<int>(cfg.a.rows()),
                   cfg.noise_bound, cfg.seed);
  const ContractionMetric metric = make_metric(cfg, cfg.a, cfg.b);
  ControllerConfig cc = base_controller(cfg, sys, safety, loss, metric);
  const BoundConstants consts = controller_constants(sys, loss, cc);
  if (cfg.protocol_step > 0) {
    const auto [eta1, eta2] = protocol_step_sizes(consts, cfg.horizon);
    cc.eta = cfg.protocol_step == 1 ? eta1 : eta2;
  } else if (cfg.eta) {
    cc.eta = *cfg.eta;
  } else {
    cc.eta = cfg.eta_scale * step_size_default(consts.domain_diameter, consts.gradient_bound, cfg.horizon);
  }
  provenance["metric_condition"] = metric.condition;
  return ScenarioInstance{cfg, std::move(sys), std::move(safety), std::move(loss), std::move(noise), std::move(cc),
                          consts, std::move(provenance)};
}

}  // namespace

ScenarioInstance build_scenario(const ScenarioConfig& cfg) { return assemble(cfg); }

std::pair<double, double> protocol_step_sizes(const BoundConstants& consts, int horizon) {
  require(horizon >= 1, ErrorCode::InvalidParams, "horizon must be at least 1");
  const double eta1 = consts.domain_diameter / consts.gradient_bound * std::sqrt(7.0 / (2.0 * horizon));
  return {eta1, 8.0 * eta1};
}

json summary_to_json(const RunSummary& s, const BoundConstants& consts, const std::optional<RegretReport>& report) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json doc{{"controller", s.controller},
           {"cumulative_loss", s.cumulative_loss},
           {"regret", opt(s.regret)},
           {"bound", opt(s.bound)},
           {"path_length", opt(s.path_length)},
           {"set_variation", s.set_variation},
           {"max_state_norm", s.max_state_norm},
           {"max_input_norm", s.max_input_norm},
           {"max_grad_norm", s.max_grad_norm},
           {"violations", s.violations},
           {"wall_clock_s", s.wall_clock_s},
           {"eta", s.eta},
           {"constants",
            {{"noise_bound", consts.noise_bound},
             {"kappa", consts.kappa},
             {"gamma", consts.gamma},
             {"grad_scale", consts.grad_scale},
             {"kappa_b", consts.kappa_b},
             {"state_dim", consts.state_dim},
             {"input_dim", consts.input_dim},
             {"metric_condition", consts.metric_condition},
             {"state_bound", consts.state_bound},
             {"domain_diameter", consts.domain_diameter},
             {"gradient_bound", consts.gradient_bound}}},
           {"provenance", s.provenance}};
  if (report) {
    doc["bound_terms"] = {{"gradient", report->terms.gradient},
                          {"diameter", report->terms.diameter},
                          {"path", report->terms.path},
                          {"variation", report->terms.variation}};
    doc["slack"] = report->slack;
    doc["cumulative_regret"] = report->cumulative_regret;
    doc["cumulative_bound"] = report->cumulative_bound;
  }
  return doc;
}

ScenarioResult run_scenario(const ScenarioConfig& input) {
  const ScenarioInstance inst = build_scenario(input);
  const ScenarioConfig& cfg = inst.config;
  ScenarioResult result;
  result.config = cfg;
  result.consts = inst.consts;
  for (ControllerKind kind : cfg.controllers) {
    ControllerRun run;
    switch (kind) {
      case ControllerKind::SafeOgd:
        run.trace = run_safe_ogd(inst.sys, inst.safety, inst.loss, inst.noise, inst.controller, cfg.initial_state);
        break;
      case ControllerKind::FixedGain:
        run.trace = fixed_gain_run(inst.sys, inst.safety, inst.loss, inst.noise, inst.controller, cfg.initial_state);
        break;
      case ControllerKind::Dac: {
        DacConfig dac = cfg.dac;
        if (cfg.protocol_step == 2) dac.eta *= 8.0;
        run.trace = dac_run(inst.sys, inst.safety, inst.loss, inst.noise, inst.controller, dac, cfg.initial_state);
        break;
      }
    }
    if (kind == ControllerKind::SafeOgd && cfg.comparator != ComparatorMode::None) {
      std::vector<GainMatrix> comparators;
      if (cfg.comparator == ComparatorMode::Dynamic) {
        comparators = hindsight_comparators(run.trace, inst.sys, inst.loss, cfg.comparator_cfg);
      } else {
        const ComparatorResult fixed = fixed_hindsight_comparator(run.trace, inst.sys, inst.loss, cfg.comparator_cfg);
        comparators.assign(static_cast<std::size_t>(run.trace.horizon()), fixed.gain);
      }
      run.regret = dynamic_regret(run.trace, comparators, inst.sys, inst.loss, inst.consts);
    }
    RunSummary& s = run.summary;
    s.controller = std::string(to_string(kind));
    s.cumulative_loss = run.trace.cumulative_loss;
    if (run.regret) {
      s.regret = run.regret->regret;
      s.bound = run.regret->bound;
      s.path_length = run.regret->path_length;
    }
    s.set_variation = run.trace.set_variation;
    s.max_state_norm = run.trace.max_state_norm;
    s.max_input_norm = run.trace.max_input_norm;
    s.max_grad_norm = run.trace.max_grad_norm;
    s.violations = run.trace.violations;
    s.wall_clock_s = run.trace.wall_clock_s;
    s.eta = run.trace.eta;
    const NoiseParams params = cfg.noise_params.value_or(default_params(cfg.family));
    s.provenance = inst.provenance;
    s.provenance["seed"] = cfg.seed;
    s.provenance["eta"] = run.trace.eta;
    s.provenance["kappa"] = cfg.kappa;
    s.provenance["gamma"] = cfg.gamma;
    s.provenance["family"] = family_name(cfg.family);
    s.provenance["noise_params"] = {params.first, params.second};
    s.provenance["code_version"] = SAFE_NSC_VERSION;
    s.provenance["zero_in_initial_set"] = run.trace.zero_in_initial_set;
    s.provenance["final_state"] = to_json(run.trace.final_state);
    s.provenance["config"] = config_to_json(cfg);
    result.runs.push_back(std::move(run));
  }
  return result;
}

void write_trace_csv(const std::filesystem::path& path, const RunTrace& trace) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.precision(17);
  const Eigen::Index dx = trace.steps.empty() ? trace.final_state.size() : trace.steps.front().x.size();
  const Eigen::Index du = trace.steps.empty() ? 0 : trace.steps.front().u.size();
  out << "t";
  for (Eigen::Index i = 0; i < dx; ++i) out << ",x" << i;
  for (Eigen::Index i = 0; i < du; ++i) out << ",u" << i;
  for (Eigen::Index i = 0; i < dx; ++i) out << ",w" << i;
  out << ",loss,zeta,min_slack\n";
  for (std::size_t t = 0; t < trace.steps.size(); ++t) {
    const StepRecord& s = trace.steps[t];
    out << t;
    for (Eigen::Index i = 0; i < s.x.size(); ++i) out << ',' << s.x(i);
    for (Eigen::Index i = 0; i < s.u.size(); ++i) out << ',' << s.u(i);
    for (Eigen::Index i = 0; i < s.w.size(); ++i) out << ',' << s.w(i);
    out << ',' << s.loss << ',' << s.zeta << ',' << s.min_slack << '\n';
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

std::vector<TraceRow> read_trace_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, path.string() + ": empty file");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  int dx = 0;
  int du = 0;
  for (const std::string& h : header) {
    if (h.size() > 1 && h[0] == 'x') ++dx;
    if (h.size() > 1 && h[0] == 'u') ++du;
  }
  const std::size_t width = 1 + 2 * static_cast<std::size_t>(dx) + du + 3;
  if (header.size() != width || header.front() != "t" || header.back() != "min_slack") {
    throw Error(ErrorCode::ParseError, path.string() + ": unexpected header");
  }
  std::vector<TraceRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> cells;
    std::stringstream ss(line);
    std::string cell;
    try {
      while (std::getline(ss, cell, ',')) cells.push_back(std::stod(cell));
    } catch (const std::exception&) {
      throw Error(ErrorCode::ParseError, path.string() + ": line " + std::to_string(lineno) + ": bad number");
    }
    if (cells.size() != width) {
      throw Error(ErrorCode::ParseError, path.string() + ": line " + std::to_string(lineno) + ": wrong column count");
    }
    TraceRow r;
    r.t = static_cast<int>(cells[0]);
    r.x = Eigen::Map<const Vector>(cells.data() + 1, dx);
    r.u = Eigen::Map<const Vector>(cells.data() + 1 + dx, du);
    r.w = Eigen::Map<const Vector>(cells.data() + 1 + dx + du, dx);
    r.loss = cells[width - 3];
    r.zeta = cells[width - 2];
    r.min_slack = cells[width - 1];
    rows.push_back(std::move(r));
  }
  return rows;
}

void export_plot_data(const std::filesystem::path& path, const ControllerRun& run) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.precision(17);
  out << "t,series,value\n";
  double cumulative = 0.0;
  for (std::size_t t = 0; t < run.trace.steps.size(); ++t) {
    const StepRecord& s = run.trace.steps[t];
    cumulative += s.loss;
    out << t << ",state_norm," << s.x.norm() << '\n';
    out << t << ",input_norm," << s.u.norm() << '\n';
    out << t << ",loss," << s.loss << '\n';
    out << t << ",cumulative_loss," << cumulative << '\n';
    if (run.regret) {
      out << t << ",cumulative_regret," << run.regret->cumulative_regret[t] << '\n';
      out << t << ",regret_bound," << run.regret->cumulative_bound[t] << '\n';
    }
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

void write_outputs(const std::filesystem::path& dir, const ScenarioResult& result) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
  for (const ControllerRun& run : result.runs) {
    const std::string stem = run.summary.controller;
    write_trace_csv(dir / (stem + "_trace.csv"), run.trace);
    export_plot_data(dir / (stem + "_plot.csv"), run);
    std::ofstream out(dir / (stem + "_summary.json"));
    if (!out) throw Error(ErrorCode::IoError, "cannot write summary into " + dir.string());
    out << summary_to_json(run.summary, result.consts, run.regret).dump(2) << '\n';
  }
}

VerifyReport verify_trace(const std::filesystem::path& trace_csv) {
  const std::string name = trace_csv.filename().string();
  const std::string suffix = "_trace.csv";
  require(name.size() > suffix.size() && name.ends_with(suffix), ErrorCode::ValidationError,
          "trace file name must end in " + suffix);
  const std::filesystem::path summary_path =
      trace_csv.parent_path() / (name.substr(0, name.size() - suffix.size()) + "_summary.json");
  std::ifstream in(summary_path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + summary_path.string());
  json summary;
  try {
    summary = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, summary_path.string() + ": " + e.what());
  }
  const ScenarioConfig cfg = config_from_json(summary.at("provenance").at("config"));
  const ScenarioInstance inst = build_scenario(cfg);
  const std::vector<TraceRow> rows = read_trace_csv(trace_csv);

  VerifyReport rep;
  rep.steps = static_cast<int>(rows.size());
  if (rep.steps != cfg.horizon) rep.problems.push_back("trace has " + std::to_string(rep.steps) + " rows, expected " +
                                                       std::to_string(cfg.horizon));
  const Vector final_state = Section::to_vector(summary.at("provenance").at("final_state"), "final_state");
  constexpr double kTol = 1e-9;
  for (int t = 0; t < rep.steps; ++t) {
    const TraceRow& r = rows[t];
    const Vector x_next = t + 1 < rep.steps ? rows[t + 1].x : final_state;
    if (r.w.norm() > inst.sys.noise_bound() + kTol) ++rep.noise_violations;
    const SafetyReport s = verify_realized_safety(inst.safety, t, x_next, r.u, kTol);
    rep.safety_violations += s.violations;
    const Vector predicted = inst.sys.a(t) * r.x + inst.sys.b(t) * r.u + r.w;
    rep.max_dynamics_defect = std::max(rep.max_dynamics_defect, (predicted - x_next).norm());
  }
  if (rep.safety_violations > 0) rep.problems.push_back(std::to_string(rep.safety_violations) + " constraint violations");
  if (rep.noise_violations > 0) rep.problems.push_back(std::to_string(rep.noise_violations) + " noise-bound violations");
  if (rep.max_dynamics_defect > 1e-8) {
    rep.problems.push_back("states do not follow the dynamics (defect " + std::to_string(rep.max_dynamics_defect) + ")");
  }
  if (summary.contains("cumulative_regret") && summary.contains("cumulative_bound")) {
    rep.bound_checked = true;
    const auto regret = summary.at("cumulative_regret").get<std::vector<double>>();
    const auto bound = summary.at("cumulative_bound").get<std::vector<double>>();
    for (std::size_t t = 0; t < regret.size() && t < bound.size(); ++t) {
      if (regret[t] > bound[t]) rep.bound_dominates = false;
    }
    const double recomputed =
        theorem_bound(inst.consts, summary.at("eta").get<double>(), cfg.horizon,
                      summary.at("path_length").get<double>(), summary.at("set_variation").get<double>());
    const double stored = summary.at("bound").get<double>();
    if (std::abs(recomputed - stored) > 1e-9 * std::max(1.0, std::abs(stored))) {
      rep.problems.push_back("stored bound does not match the recomputed bound");
    }
    if (!rep.bound_dominates) rep.problems.push_back("regret exceeds the bound at some prefix");
  }
  return rep;
}

}  // namespace safe_nsc
