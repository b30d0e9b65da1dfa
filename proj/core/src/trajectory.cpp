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

#include "custody/trajectory.hpp"

#include <algorithm>
#include <cstdlib>
#include <map>
#include <ostream>
#include <set>

#include "custody/format.hpp"
#include "custody/parallel.hpp"

namespace custody {

std::string GroupKey::to_string() const {
  std::string s = "level=" + std::to_string(start_level);
  if (race) s += "|race=" + *race;
  return s;
}

Trajectory simulate_individual(const RandomForest& reclass_forest, const Record& base,
                               std::size_t years) {
  const auto& schema = reclass_forest.schema();
  const std::size_t prev_col = schema.index_of("ic_custdy_level");
  const std::size_t age_col = schema.index_of("age");
  if (base.values.size() != schema.size())
    throw DataError("schema mismatch: record does not match the reclassification forest");

  Trajectory t;
  t.start_level = base.custody_level;
  t.levels.reserve(years + 1);
  t.ages.reserve(years + 1);
  t.levels.push_back(base.custody_level);
  t.ages.push_back(base.values[age_col]);
  std::vector<double> values = base.values;
  for (std::size_t step = 1; step <= years; ++step) {
    values[prev_col] = t.levels.back();
    values[age_col] = base.values[age_col] + static_cast<double>(step);
    t.levels.push_back(predict(reclass_forest, values));
    t.ages.push_back(values[age_col]);
  }
  return t;
}

std::vector<GroupKey> make_groups(const std::vector<int>& levels,
                                  const std::vector<std::string>& races) {
  std::vector<GroupKey> out;
  for (int l : levels) {
    if (races.empty()) {
      out.push_back({l, std::nullopt});
    } else {
      for (const auto& r : races) out.push_back({l, r});
    }
  }
  return out;
}

namespace {

std::uint64_t stable_hash(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::vector<TrajectoryEnsemble> simulate_ensemble(const RandomForest& reclass_forest,
                                                  const Cohort& cohort,
                                                  std::size_t per_group,
                                                  const std::vector<GroupKey>& groups,
                                                  std::size_t years, std::uint64_t seed,
                                                  unsigned jobs) {
  reclass_forest.check_schema(cohort.schema());
  std::vector<TrajectoryEnsemble> out;
  for (const auto& group : groups) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < cohort.size(); ++i) {
      const auto& r = cohort[i];
      if (r.custody_level != group.start_level) continue;
      if (group.race && race_of(cohort.schema(), r) != *group.race) continue;
      rows.push_back(i);
    }
    if (rows.empty()) throw DataError("trajectory group " + group.to_string() + " is empty");

    TrajectoryEnsemble ensemble;
    ensemble.group = group;
    ensemble.horizon = years;
    RngStream rng(seed, {stable_hash(group.to_string())});
    std::vector<std::size_t> chosen;
    if (rows.size() >= per_group) {
      // Partial Fisher-Yates.
      for (std::size_t i = 0; i < per_group; ++i) {
        std::swap(rows[i], rows[i + rng.uniform_index(rows.size() - i)]);
      }
      chosen.assign(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(per_group));
    } else {
      ensemble.with_replacement = true;
      for (std::size_t i = 0; i < per_group; ++i) chosen.push_back(rows[rng.uniform_index(rows.size())]);
    }
    ensemble.trajectories.resize(chosen.size());
    parallel_for(chosen.size(), jobs, [&](std::size_t i) {
      Trajectory t = simulate_individual(reclass_forest, cohort[chosen[i]], years);
      t.person_id = i;
      t.source_row = chosen[i];
      ensemble.trajectories[i] = std::move(t);
    });
    out.push_back(std::move(ensemble));
  }
  return out;
}

std::vector<double> average_trajectory(const TrajectoryEnsemble& ensemble) {
  if (ensemble.trajectories.empty()) throw DataError("average of an empty ensemble");
  std::vector<long long> sums(ensemble.horizon + 1, 0);
  for (const auto& t : ensemble.trajectories) {
    if (t.levels.size() != sums.size())
      throw DataError("ensemble members have different horizons");
    for (std::size_t s = 0; s < sums.size(); ++s) sums[s] += t.levels[s];
  }
  std::vector<double> mean(sums.size());
  const double n = static_cast<double>(ensemble.trajectories.size());
  for (std::size_t s = 0; s < sums.size(); ++s) mean[s] = static_cast<double>(sums[s]) / n;
  return mean;
}

double volatility(std::span<const int> levels) {
  if (levels.size() < 2) throw DataError("volatility needs a horizon of at least 1 year");
  long long total = 0;
  for (std::size_t t = 1; t < levels.size(); ++t) total += std::abs(levels[t] - levels[t - 1]);
  return static_cast<double>(total) / static_cast<double>(levels.size() - 1);
}

std::vector<VolatilityStat> volatility_table(const std::vector<TrajectoryEnsemble>& ensembles) {
  std::vector<VolatilityStat> out;
  for (const auto& e : ensembles) {
    if (e.trajectories.empty()) throw DataError("group " + e.group.to_string() + " is empty");
    double sum = 0.0;
    for (const auto& t : e.trajectories) sum += volatility(t);
    out.push_back({e.group, sum / static_cast<double>(e.trajectories.size()),
                   e.trajectories.size()});
  }
  return out;
}

void write_trajectories_csv(std::ostream& out, const std::vector<TrajectoryEnsemble>& ensembles) {
  out << "person_id,group,step,age,level\n";
  for (const auto& e : ensembles) {
    for (const auto& t : e.trajectories) {
      for (std::size_t s = 0; s < t.levels.size(); ++s) {
        out << t.person_id << ',' << e.group.to_string() << ',' << s << ','
            << format_double(t.ages[s]) << ',' << t.levels[s] << '\n';
      }
    }
  }
}

void write_averages_csv(std::ostream& out, const std::vector<TrajectoryEnsemble>& ensembles) {
  out << "group,step,mean_level\n";
  for (const auto& e : ensembles) {
    const auto mean = average_trajectory(e);
    for (std::size_t s = 0; s < mean.size(); ++s) {
      out << e.group.to_string() << ',' << s << ',' << format_double(mean[s]) << '\n';
    }
  }
}

void write_volatility_csv(std::ostream& out, const std::vector<VolatilityStat>& stats) {
  std::vector<std::string> races;
  std::set<int> levels;
  std::map<std::pair<int, std::string>, double> grid;
  for (const auto& s : stats) {
    const std::string race = s.group.race.value_or("all");
    if (std::find(races.begin(), races.end(), race) == races.end()) races.push_back(race);
    levels.insert(s.group.start_level);
    grid[{s.group.start_level, race}] = s.mean_weighted_changes_per_person_year;
  }
  out << "start_level";
  for (const auto& r : races) out << ',' << r;
  out << '\n';
  for (int l : levels) {
    out << l;
    for (const auto& r : races) {
      const auto it = grid.find({l, r});
      out << ',' << (it == grid.end() ? std::string() : format_double(it->second));
    }
    out << '\n';
  }
}

}  // namespace custody
