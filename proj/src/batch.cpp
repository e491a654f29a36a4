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
#include "safe_nsc/batch.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "safe_nsc/errors.hpp"

namespace safe_nsc {

using nlohmann::json;

namespace {

const char* step_label(int step) {
  switch (step) {
    case 1: return "eta1";
    case 2: return "eta2";
    default: return "configured";
  }
}

int parse_step(const std::string& s) {
  if (s == "configured") return 0;
  if (s == "eta1") return 1;
  if (s == "eta2") return 2;
  throw Error(ErrorCode::ValidationError, "step_sizes: expected configured, eta1 or eta2, got \"" + s + "\"");
}

WeightSchedule parse_schedule(const std::string& s) {
  for (WeightSchedule w : {WeightSchedule::Constant, WeightSchedule::Sinusoidal, WeightSchedule::Step}) {
    if (to_string(w) == s) return w;
  }
  throw Error(ErrorCode::ValidationError, "schedules: unknown schedule \"" + s + "\"");
}

std::vector<std::string> string_list(const json& doc, const char* key) {
  const json& v = doc.at(key);
  if (!v.is_array()) throw Error(ErrorCode::ValidationError, std::string(key) + ": expected an array");
  std::vector<std::string> out;
  for (const json& item : v) {
    if (!item.is_string()) throw Error(ErrorCode::ValidationError, std::string(key) + ": expected strings");
    out.push_back(item.get<std::string>());
  }
  return out;
}

}  // namespace

int BatchResult::failures() const {
  return static_cast<int>(std::count_if(entries.begin(), entries.end(), [](const BatchEntry& e) { return !e.result; }));
}

std::optional<double> quadrotor_reference_loss(NoiseFamily family) {
  switch (family) {
    case NoiseFamily::Gaussian: return 44.05;
    case NoiseFamily::Uniform: return 151.49;
    case NoiseFamily::Gamma: return 159.21;
    case NoiseFamily::Beta: return 186.98;
    case NoiseFamily::Exponential: return 126.69;
    case NoiseFamily::Weibull: return 195.71;
  }
  return std::nullopt;
}

BatchGrid parse_grid(const std::string& text, const std::filesystem::path& dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
    const long line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
    throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorCode::ValidationError, "grid: expected an object");
  const std::set<std::string> allowed{"base", "base_config", "families", "seeds", "step_sizes", "schedules", "threads"};
  for (const auto& [key, value] : doc.items()) {
    if (!allowed.count(key)) throw Error(ErrorCode::ValidationError, "unknown key \"" + key + "\" in grid");
  }
  require(doc.contains("base") != doc.contains("base_config"), ErrorCode::ValidationError,
          "grid: exactly one of base and base_config is required");
  BatchGrid grid;
  if (doc.contains("base")) {
    grid.base = config_from_json(doc.at("base"));
  } else {
    if (!doc.at("base_config").is_string()) throw Error(ErrorCode::ValidationError, "base_config: expected a path");
    std::filesystem::path p = doc.at("base_config").get<std::string>();
    if (p.is_relative()) p = dir / p;
    grid.base = load_config(p);
  }
  if (doc.contains("families")) {
    for (const std::string& f : string_list(doc, "families")) {
      try {
        grid.families.push_back(parse_family(f));
      } catch (const Error& e) {
        throw Error(ErrorCode::ValidationError, std::string("families: ") + e.what());
      }
    }
  } else {
    grid.families = {grid.base.family};
  }
  if (doc.contains("seeds")) {
    const json& s = doc.at("seeds");
    if (!s.is_array()) throw Error(ErrorCode::ValidationError, "seeds: expected an array");
    for (const json& v : s) {
      if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
        throw Error(ErrorCode::ValidationError, "seeds: expected nonnegative integers");
      }
      grid.seeds.push_back(v.get<std::uint64_t>());
    }
  } else {
    grid.seeds = {grid.base.seed};
  }
  if (doc.contains("step_sizes")) {
    for (const std::string& s : string_list(doc, "step_sizes")) grid.step_sizes.push_back(parse_step(s));
  }
  if (doc.contains("schedules")) {
    for (const std::string& s : string_list(doc, "schedules")) grid.schedules.push_back(parse_schedule(s));
  }
  if (doc.contains("threads")) {
    const json& t = doc.at("threads");
    if (!t.is_number_integer() || t.get<int>() < 0) throw Error(ErrorCode::ValidationError, "threads: expected n >= 0");
    grid.threads = t.get<int>();
  }
  return grid;
}

BatchGrid load_grid(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_grid(buf.str(), path.parent_path());
}

std::vector<ScenarioConfig> expand_grid(const BatchGrid& grid) {
  const std::vector<int> steps = grid.step_sizes.empty() ? std::vector<int>{grid.base.protocol_step} : grid.step_sizes;
  const std::vector<WeightSchedule> schedules =
      grid.schedules.empty() ? std::vector<WeightSchedule>{grid.base.schedule} : grid.schedules;
  std::vector<ScenarioConfig> out;
  for (NoiseFamily family : grid.families) {
    for (WeightSchedule schedule : schedules) {
      for (int step : steps) {
        for (std::uint64_t seed : grid.seeds) {
          ScenarioConfig c = grid.base;
          if (c.family != family) c.noise_params.reset();
          c.family = family;
          c.schedule = schedule;
          c.protocol_step = step;
          c.seed = seed;
          out.push_back(std::move(c));
        }
      }
    }
  }
  return out;
}

std::string run_label(const ScenarioConfig& cfg) {
  std::string label = std::string(family_name(cfg.family)) + "_" + std::string(to_string(cfg.schedule)) + "_" +
                      step_label(cfg.protocol_step) + "_seed" + std::to_string(cfg.seed);
  std::transform(label.begin(), label.end(), label.begin(), [](unsigned char ch) { return std::tolower(ch); });
  return label;
}

BatchResult run_batch(const BatchGrid& grid, const std::filesystem::path& out) {
  BatchResult result;
  for (ScenarioConfig& c : expand_grid(grid)) {
    BatchEntry e;
    e.label = run_label(c);
    e.config = std::move(c);
    result.entries.push_back(std::move(e));
  }
  if (result.entries.empty()) return result;

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < result.entries.size(); i = next++) {
      BatchEntry& e = result.entries[i];
      try {
        e.result = run_scenario(e.config);
        if (!out.empty()) write_outputs(out / e.label, *e.result);
      } catch (const Error& err) {
        e.result.reset();
        e.error_code = err.code();
        e.error = err.what();
      } catch (const std::exception& err) {
        e.result.reset();
        e.error = err.what();
      }
    }
  };
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t n = std::min<std::size_t>(grid.threads > 0 ? grid.threads : hw, result.entries.size());
  {
    std::vector<std::jthread> pool;
    for (std::size_t i = 1; i < n; ++i) pool.emplace_back(worker);
    worker();
  }
  result.table = aggregate(result.entries);
  if (!out.empty()) write_aggregate_csv(out / "aggregate.csv", result.table);
  return result;
}

std::vector<AggregateRow> aggregate(const std::vector<BatchEntry>& entries) {
  std::vector<AggregateRow> rows;
  auto find_row = [&](const ScenarioConfig& c) -> AggregateRow& {
    for (AggregateRow& r : rows) {
      if (r.family == c.family && r.schedule == c.schedule && r.step_size == c.protocol_step) return r;
    }
    AggregateRow r;
    r.family = c.family;
    r.schedule = c.schedule;
    r.step_size = c.protocol_step;
    if (c.scenario == ScenarioKind::Quadrotor) r.paper_reference = quadrotor_reference_loss(c.family);
    rows.push_back(std::move(r));
    return rows.back();
  };
  std::map<std::pair<std::size_t, std::string>, std::vector<double>> samples;
  for (const BatchEntry& e : entries) {
    AggregateRow& row = find_row(e.config);
    const std::size_t index = static_cast<std::size_t>(&row - rows.data());
    if (!e.result) {
      ++row.failures;
      continue;
    }
    for (const ControllerRun& run : e.result->runs) {
      samples[{index, run.summary.controller}].push_back(run.summary.cumulative_loss);
      row.controllers[run.summary.controller].violations += run.summary.violations;
    }
  }
  for (const auto& [key, values] : samples) {
    ControllerStats& s = rows[key.first].controllers[key.second];
    s.runs = static_cast<int>(values.size());
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean_loss = sum / s.runs;
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean_loss) * (v - s.mean_loss);
    s.std_loss = s.runs > 1 ? std::sqrt(ss / (s.runs - 1)) : 0.0;
  }
  for (AggregateRow& r : rows) {
    const auto it = r.controllers.find("safe_ogd");
    if (r.paper_reference && it != r.controllers.end() && it->second.runs > 0) {
      const double ratio = it->second.mean_loss / *r.paper_reference;
      r.reference_flag = !(ratio <= 10.0 && ratio >= 0.1);
    }
  }
  return rows;
}

void write_aggregate_csv(const std::filesystem::path& path, const std::vector<AggregateRow>& rows) {
  std::set<std::string> names;
  for (const AggregateRow& r : rows) {
    for (const auto& [name, stats] : r.controllers) names.insert(name);
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.precision(10);
  out << "family,schedule,step_size";
  for (const std::string& n : names) out << ',' << n << "_mean," << n << "_std," << n << "_runs," << n << "_violations";
  out << ",failures,paper_safe_ogd,reference_flag\n";
  for (const AggregateRow& r : rows) {
    out << family_name(r.family) << ',' << to_string(r.schedule) << ',' << step_label(r.step_size);
    for (const std::string& n : names) {
      const auto it = r.controllers.find(n);
      if (it == r.controllers.end() || it->second.runs == 0) {
        out << ",,,0,0";
      } else {
        out << ',' << it->second.mean_loss << ',' << it->second.std_loss << ',' << it->second.runs << ','
            << it->second.violations;
      }
    }
    out << ',' << r.failures << ',';
    if (r.paper_reference) out << *r.paper_reference;
    out << ',' << (r.reference_flag ? "differs_over_10x" : "") << '\n';
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

}  // namespace safe_nsc
