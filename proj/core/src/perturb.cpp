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

#include "custody/perturb.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <boost/math/distributions/normal.hpp>

#include "custody/parallel.hpp"

namespace custody {

Experiment experiment_from_int(int k) {
  if (k < 1 || k > 5) throw std::invalid_argument("experiment must be 1..5");
  return static_cast<Experiment>(k);
}

void DeltaDistribution::add(int delta) {
  if (delta < -kMaxDelta || delta > kMaxDelta) throw std::out_of_range("delta out of range");
  ++counts[static_cast<std::size_t>(delta + kMaxDelta)];
  ++n;
}

std::size_t DeltaDistribution::count(int delta) const {
  if (delta < -kMaxDelta || delta > kMaxDelta) return 0;
  return counts[static_cast<std::size_t>(delta + kMaxDelta)];
}

void PerturbPlan::validate() const {
  if (n < 1) throw std::invalid_argument("per-stratum sample size must be >= 1");
  if (!(confidence > 0.0 && confidence < 1.0))
    throw std::invalid_argument("confidence must lie in (0, 1)");
  const bool by_race = experiment == Experiment::kE3 || experiment == Experiment::kE4;
  if (by_race && races.empty()) throw std::invalid_argument("E3/E4 need at least one race");
}

double z_score(double confidence) {
  if (!(confidence > 0.0 && confidence < 1.0))
    throw std::invalid_argument("confidence must lie in (0, 1)");
  const boost::math::normal_distribution<double> standard;
  return boost::math::quantile(standard, 1.0 - (1.0 - confidence) / 2.0);
}

std::vector<double> margins_of_error(const Cohort& stratum, double confidence) {
  if (stratum.size() < 2)
    throw DataError("degenerate stratum: margin of error needs at least 2 records");
  const double z = z_score(confidence);
  const auto& schema = stratum.schema();
  const double n = static_cast<double>(stratum.size());
  std::vector<double> margins(schema.size(), 0.0);
  for (std::size_t i = 0; i < schema.size(); ++i) {
    if (!schema.variable(i).quantitative()) continue;
    double mean = 0.0;
    for (const auto& r : stratum.records()) mean += r.values[i];
    mean /= n;
    double ss = 0.0;
    for (const auto& r : stratum.records()) ss += (r.values[i] - mean) * (r.values[i] - mean);
    margins[i] = z * std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }
  return margins;
}

Record sample_e1(const std::vector<Multiset>& stratum_multisets, const CohortSchema& schema,
                 RngStream& rng) {
  Record out;
  out.values.assign(schema.size(), 0.0);
  for (const auto& m : stratum_multisets) m.unit.write(m.draw(rng), out.values);
  return out;
}

SingleChange sample_e2(const Record& base, const std::vector<Multiset>& stratum_multisets,
                       const CohortSchema& schema, RngStream& rng) {
  if (stratum_multisets.empty() || stratum_multisets.front().size == 0)
    throw DataError("sample_e2: empty stratum");
  SingleChange out{base, rng.uniform_index(schema.units().size()), false};
  const auto& m = stratum_multisets[out.changed_unit];
  const double before = m.unit.read(base.values);
  const double after = m.draw(rng);
  m.unit.write(after, out.record.values);
  out.coincident = before == after;
  return out;
}

SingleChange sample_e2(const Record& base, const Cohort& stratum, RngStream& rng) {
  if (stratum.empty()) throw DataError("sample_e2: empty stratum");
  return sample_e2(base, multisets(stratum), stratum.schema(), rng);
}

Record sample_e5(const Record& base, const CohortSchema& schema,
                 const std::vector<double>& margins, RngStream& rng) {
  Record out = base;
  for (std::size_t i = 0; i < schema.size(); ++i) {
    const auto& spec = schema.variable(i);
    if (!spec.quantitative()) continue;
    const double x = base.values[i];
    const double lo = spec.domain.clamp(x - margins[i]);
    const double hi = spec.domain.clamp(x + margins[i]);
    double v = rng.uniform(lo, hi);
    // Round half to even under the default floating-point environment.
    if (spec.domain.integral) v = spec.domain.clamp(std::nearbyint(v));
    out.values[i] = v;
  }
  return out;
}

Record sample_e5(const Record& base, const Cohort& stratum, double confidence,
                 RngStream& rng) {
  return sample_e5(base, stratum.schema(), margins_of_error(stratum, confidence), rng);
}

std::vector<StratumKey> experiment_strata(const PerturbPlan& plan) {
  std::vector<StratumKey> keys;
  const bool by_race =
      plan.experiment == Experiment::kE3 || plan.experiment == Experiment::kE4;
  for (int level = kMinLevel; level <= kMaxLevel; ++level) {
    if (!by_race) {
      keys.push_back({level, std::nullopt});
      continue;
    }
    for (const auto& race : plan.races) keys.push_back({level, race});
  }
  return keys;
}

namespace {

std::uint64_t race_stream_id(const PerturbPlan& plan, const StratumKey& key) {
  if (!key.race) return 0;
  const auto it = std::find(plan.races.begin(), plan.races.end(), *key.race);
  if (it == plan.races.end()) throw std::invalid_argument("race not in plan: " + *key.race);
  return static_cast<std::uint64_t>(it - plan.races.begin()) + 1;
}

}  // namespace

std::vector<SyntheticObservation> synthesize(const PerturbPlan& plan, const Cohort& stratum,
                                             const StratumKey& key, unsigned jobs) {
  plan.validate();
  if (stratum.empty()) throw DataError("stratum " + key.to_string() + " has no records");
  const auto& schema = stratum.schema();
  const auto exp = plan.experiment;
  const bool single_change = exp == Experiment::kE2 || exp == Experiment::kE4;

  std::vector<Multiset> bags;
  std::vector<double> margins;
  if (exp == Experiment::kE5) {
    margins = margins_of_error(stratum, plan.confidence);
  } else {
    bags = multisets(stratum);
  }

  const std::uint64_t level_id = key.level ? static_cast<std::uint64_t>(*key.level) : 0;
  const std::uint64_t race_id = race_stream_id(plan, key);
  std::vector<SyntheticObservation> out(plan.n);
  parallel_for(plan.n, jobs, [&](std::size_t i) {
    RngStream rng(plan.seed, {static_cast<std::uint64_t>(exp), level_id, race_id, i});
    SyntheticObservation obs;
    if (exp == Experiment::kE1 || exp == Experiment::kE3) {
      obs.record = sample_e1(bags, schema, rng);
    } else {
      const std::size_t row = rng.uniform_index(stratum.size());
      obs.base_row = row;
      if (single_change) {
        auto change = sample_e2(stratum[row], bags, schema, rng);
        obs.record = std::move(change.record);
        obs.changed_unit = change.changed_unit;
        obs.coincident = change.coincident;
      } else {
        obs.record = sample_e5(stratum[row], schema, margins, rng);
      }
    }
    obs.record.custody_level = key.level.value_or(stratum[0].custody_level);
    obs.record.override_to_higher.reset();
    out[i] = std::move(obs);
  });
  return out;
}

ExperimentResult run_experiment(const PerturbPlan& plan, const RandomForest& forest,
                                const Cohort& cohort, unsigned jobs) {
  plan.validate();
  forest.check_schema(cohort.schema());
  ExperimentResult result;
  result.plan = plan;
  const bool single_change =
      plan.experiment == Experiment::kE2 || plan.experiment == Experiment::kE4;

  for (const auto& key : experiment_strata(plan)) {
    const Cohort stratum = select(cohort, key);
    if (stratum.empty()) {
      result.skipped.push_back({key, "no records"});
      continue;
    }
    if (plan.experiment == Experiment::kE5 && stratum.size() < 2) {
      result.skipped.push_back({key, "fewer than 2 records"});
      continue;
    }
    const auto observations = synthesize(plan, stratum, key, jobs);
    std::vector<int> predicted(observations.size());
    parallel_for(observations.size(), jobs,
                 [&](std::size_t i) { predicted[i] = predict(forest, observations[i].record); });

    DeltaDistribution dist;
    dist.stratum = key;
    std::size_t coincident = 0;
    std::vector<std::vector<int>> by_unit(cohort.schema().units().size());
    for (std::size_t i = 0; i < observations.size(); ++i) {
      const int delta = predicted[i] - *key.level;
      dist.add(delta);
      if (single_change) {
        if (observations[i].coincident) ++coincident;
        by_unit[*observations[i].changed_unit].push_back(delta);
      }
    }
    result.distributions.push_back(dist);
    if (single_change) {
      result.coincidences.emplace_back(key, coincident);
      for (std::size_t u = 0; u < by_unit.size(); ++u) {
        if (by_unit[u].empty()) continue;
        result.unit_deltas.push_back(
            {key, cohort.schema().units()[u].name, std::move(by_unit[u])});
      }
    }
  }
  return result;
}

void write_deltas_csv(std::ostream& out, const ExperimentResult& result) {
  out << "stratum,delta,count,n\n";
  for (const auto& d : result.distributions) {
    for (int delta = -kMaxDelta; delta <= kMaxDelta; ++delta) {
      out << d.stratum.to_string() << ',' << delta << ',' << d.count(delta) << ',' << d.n
          << '\n';
    }
  }
}

}  // namespace custody
