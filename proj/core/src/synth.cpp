/*
 * Copyright 2026 The Custody Audit Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "custody/synth.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "custody/format.hpp"

namespace custody {

namespace {

constexpr double kCuts[] = {1.0, 2.0, 3.0, 4.0};

// Weight keys that are not schema variables.
constexpr std::string_view kOverrideRecorded = "override_recorded";
constexpr std::string_view kOverrideToHigher = "override_to_higher";

double weight(const std::map<std::string, double>& w, const std::string& key) {
  const auto it = w.find(key);
  return it == w.end() ? 0.0 : it->second;
}

// Draws a category code (0 = reference) for a one-hot unit.
double draw_category(const SamplingUnit& unit, const CohortSchema& schema,
                     const std::map<std::string, double>& w, RngStream& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < unit.columns.size(); ++i) {
    acc += weight(w, schema.variable(unit.columns[i]).name);
    if (u < acc) return static_cast<double>(i + 1);
  }
  return 0.0;
}

double latent_score(const CohortSchema& schema, const std::vector<double>& values,
                    const std::map<std::string, double>& coefficients,
                    double intercept) {
  double latent = intercept;
  for (const auto& [name, c] : coefficients) {
    latent += c * values[schema.index_of(name)];
  }
  return latent;
}

std::uint64_t parse_u64(std::string_view key, std::string_view text) {
  text = trim(text);
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw std::invalid_argument("config key '" + std::string(key) +
                                "': expected a non-negative integer");
  return v;
}

double parse_real(std::string_view key, std::string_view text) {
  const auto v = parse_double(text);
  if (!v)
    throw std::invalid_argument("config key '" + std::string(key) +
                                "': expected a number");
  return *v;
}

}  // namespace

std::map<std::string, double> default_coefficients(SynthTarget target) {
  if (target == SynthTarget::kInitial) {
    return {{"ic_institut_adj", 0.30},
            {"off_1_gs_max", 0.12},
            {"prior_commits", 0.15},
            {"off_1_prs_max", 0.10}};
  }
  return {{"ic_custdy_level", 0.55}, {"re_discip_reports", 0.35},
          {"age", -0.03},            {"off_1_prs_max", 0.10},
          {"off_1_gs_max", 0.05},    {"prior_commits", 0.08}};
}

double default_intercept(SynthTarget target) {
  return target == SynthTarget::kInitial ? 0.0 : 1.1;
}

std::map<std::string, double> default_weights() {
  return {{"gender_female", 0.07},
          {"employed", 0.40},
          {"race_B", 0.45},
          {"race_A", 0.01},
          {"race_H", 0.10},
          {"race_I", 0.005},
          {"race_O", 0.01},
          {"mrt_stat_DIV", 0.10},
          {"mrt_stat_SEP", 0.05},
          {"mrt_stat_MAR", 0.15},
          {"mrt_stat_WID", 0.02},
          {"escape_hist_1", 0.04},
          {"escape_hist_2", 0.01},
          {"escape_hist_3", 0.005},
          {"escape_hist_4", 0.002},
          {"escape_hist_5", 0.001},
          {std::string(kOverrideRecorded), 0.5},
          {std::string(kOverrideToHigher), 0.3}};
}

int quantize_latent(double latent) {
  int level = kMinLevel;
  for (double c : kCuts) {
    if (latent >= c) ++level;
  }
  return level;
}

void SynthConfig::validate() const {
  const CohortSchema schema = pact_schema();
  if (!(noise >= 0.0) || !std::isfinite(noise))
    throw std::invalid_argument("noise must be finite and >= 0");
  for (const auto& [name, c] : coefficients) {
    if (!schema.has(name))
      throw std::invalid_argument("coefficient for unknown variable: " + name);
    if (!std::isfinite(c))
      throw std::invalid_argument("coefficient for " + name + " is not finite");
  }
  if (intercept && !std::isfinite(*intercept))
    throw std::invalid_argument("intercept is not finite");

  auto merged = default_weights();
  for (const auto& [name, w] : weights) {
    const bool special = name == kOverrideRecorded || name == kOverrideToHigher;
    if (!special) {
      const auto idx = schema.find(name);
      if (!idx || schema.variable(*idx).quantitative())
        throw std::invalid_argument("weight for non-categorical key: " + name);
    }
    if (!(w >= 0.0 && w <= 1.0))
      throw std::invalid_argument("weight for " + name + " outside [0, 1]");
    merged[name] = w;
  }
  for (const auto& unit : schema.units()) {
    if (!unit.is_group) continue;
    double sum = 0.0;
    for (std::size_t c : unit.columns) sum += weight(merged, schema.variable(c).name);
    if (sum > 1.0 + 1e-12)
      throw std::invalid_argument("weights of group '" + unit.name + "' sum to more than 1");
  }
}

Cohort generate_synthetic_cohort(const SynthConfig& config) {
  config.validate();
  const CohortSchema schema = pact_schema();
  auto w = default_weights();
  for (const auto& [k, v] : config.weights) w[k] = v;
  const auto coefficients =
      config.coefficients.empty() ? default_coefficients(config.target) : config.coefficients;
  const double intercept = config.intercept.value_or(default_intercept(config.target));
  const auto ic_coefficients = default_coefficients(SynthTarget::kInitial);
  const double ic_intercept = default_intercept(SynthTarget::kInitial);

  const auto idx = [&schema](std::string_view name) { return schema.index_of(name); };
  const std::size_t i_female = idx("gender_female");
  const std::size_t i_old = idx("age_gt_45");
  const std::size_t i_young = idx("age_lt_25");
  const std::size_t i_age = idx("age");
  const std::size_t i_prs = idx("off_1_prs_max");
  const std::size_t i_gs = idx("off_1_gs_max");
  const std::size_t i_ic = idx("ic_custdy_level");
  const std::size_t i_pc = idx("prior_commits");
  const std::size_t i_adj = idx("ic_institut_adj");
  const std::size_t i_disc = idx("re_discip_reports");
  const std::size_t i_emp = idx("employed");

  std::vector<Record> records;
  records.reserve(config.n);
  for (std::size_t row = 0; row < config.n; ++row) {
    RngStream rng(config.seed, {row});
    Record r;
    r.values.assign(schema.size(), 0.0);
    auto& v = r.values;

    v[i_female] = rng.bernoulli(w["gender_female"]) ? 1.0 : 0.0;
    const double age = std::clamp(std::round(34.0 + 11.0 * rng.normal()), 18.0, 80.0);
    v[i_age] = age;
    v[i_young] = age < 25.0 ? 1.0 : 0.0;
    v[i_old] = age > 45.0 ? 1.0 : 0.0;
    for (const auto& unit : schema.units()) {
      // The age band follows the numeric age.
      if (unit.is_group && unit.name != "age_band")
        unit.write(draw_category(unit, schema, w, rng), v);
    }
    v[i_prs] = 1.0 + static_cast<double>(rng.uniform_index(4));
    v[i_gs] = 1.0 + static_cast<double>(rng.uniform_index(15));
    v[i_pc] = std::min<double>(rng.poisson(1.2), 30.0);
    v[i_adj] = static_cast<double>(rng.uniform_index(11));
    v[i_disc] = std::min<double>(rng.poisson(1.5), 50.0);
    v[i_emp] = rng.bernoulli(w["employed"]) ? 1.0 : 0.0;

    const double eps_ic = rng.normal();
    const double eps_re = rng.normal();
    if (config.target == SynthTarget::kInitial) {
      v[i_ic] = 1.0;  // placeholder so the latent never reads garbage
      const double latent = latent_score(schema, v, coefficients, intercept) +
                            config.noise * eps_ic;
      r.custody_level = quantize_latent(latent);
      v[i_ic] = r.custody_level;
    } else {
      v[i_ic] = 1.0;
      const double ic_latent = latent_score(schema, v, ic_coefficients, ic_intercept) +
                               config.noise * eps_ic;
      v[i_ic] = quantize_latent(ic_latent);
      const double latent = latent_score(schema, v, coefficients, intercept) +
                            config.noise * eps_re;
      r.custody_level = quantize_latent(latent);
    }

    if (rng.bernoulli(w[std::string(kOverrideRecorded)])) {
      r.override_to_higher = rng.bernoulli(w[std::string(kOverrideToHigher)]);
    }
    records.push_back(std::move(r));
  }
  return Cohort(schema, std::move(records));
}

std::map<std::string, std::string> parse_key_values(std::string_view text) {
  std::map<std::string, std::string> out;
  std::size_t line_no = 0;
  for (const auto& raw : split(text, '\n')) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos)
      line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    if (key.empty())
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": empty key");
    out[key] = std::string(trim(line.substr(eq + 1)));
  }
  return out;
}

SynthConfig parse_synth_config(std::string_view text) {
  SynthConfig config;
  for (const auto& [key, value] : parse_key_values(text)) {
    if (key == "n") {
      config.n = static_cast<std::size_t>(parse_u64(key, value));
    } else if (key == "seed") {
      config.seed = parse_u64(key, value);
    } else if (key == "noise") {
      config.noise = parse_real(key, value);
    } else if (key == "intercept") {
      config.intercept = parse_real(key, value);
    } else if (key == "target") {
      if (value == "initial") {
        config.target = SynthTarget::kInitial;
      } else if (value == "reclassification") {
        config.target = SynthTarget::kReclassification;
      } else {
        throw std::invalid_argument("config key 'target': expected initial or reclassification");
      }
    } else if (key.rfind("weights.", 0) == 0) {
      config.weights[key.substr(8)] = parse_real(key, value);
    } else if (key.rfind("coef.", 0) == 0) {
      config.coefficients[key.substr(5)] = parse_real(key, value);
    }
    // Other keys belong to the command-line front end and are ignored here.
  }
  config.validate();
  return config;
}

SynthConfig load_synth_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_synth_config(ss.str());
}

}  // namespace custody
