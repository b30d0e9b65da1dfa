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

#include "custody/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "custody/format.hpp"
#include "custody/parallel.hpp"

namespace custody {

std::string_view to_string(Direction d) {
  return d == Direction::kIncrease ? "increase" : "decrease";
}

std::vector<std::string> default_sensitivity_variables() {
  return {"off_1_prs_max", "off_1_gs_max", "prior_commits", "ic_institut_adj"};
}

namespace {

constexpr std::size_t kNoColumn = static_cast<std::size_t>(-1);

// Mean prediction with `column` scaled and clamped (kNoColumn: unmodified).
double mean_prediction(const RandomForest& forest, const std::vector<Record>& rows,
                       std::size_t column, double scale, const Domain& domain,
                       unsigned jobs) {
  std::vector<int> predicted(rows.size());
  parallel_for(rows.size(), jobs, [&](std::size_t i) {
    if (column == kNoColumn) {
      predicted[i] = predict(forest, rows[i]);
      return;
    }
    std::vector<double> values = rows[i].values;
    values[column] = domain.clamp(values[column] * scale);
    predicted[i] = predict(forest, values);
  });
  // Integer sum, so the mean does not depend on evaluation order.
  long long sum = 0;
  for (int p : predicted) sum += p;
  return static_cast<double>(sum) / static_cast<double>(rows.size());
}

}  // namespace

std::vector<SensitivityCell> sensitivity_scan(const RandomForest& forest,
                                              const Cohort& cohort,
                                              const std::vector<std::string>& variables,
                                              double factor, unsigned jobs) {
  forest.check_schema(cohort.schema());
  if (!std::isfinite(factor) || factor < 0.0 || factor >= 1.0)
    throw std::invalid_argument("factor must lie in [0, 1)");
  const auto& schema = cohort.schema();
  std::vector<std::size_t> columns;
  for (const auto& name : variables) {
    const std::size_t c = schema.index_of(name);
    if (!schema.variable(c).quantitative())
      throw DataError("sensitivity variable is not quantitative: " + name);
    columns.push_back(c);
  }

  std::map<int, std::vector<Record>> by_level;
  for (const auto& r : cohort.records()) by_level[r.custody_level].push_back(r);

  std::vector<SensitivityCell> cells;
  for (const auto& [level, rows] : by_level) {
    if (rows.empty()) continue;
    const double baseline = mean_prediction(forest, rows, kNoColumn, 1.0, Domain{}, jobs);
    if (baseline == 0.0) throw DataError("baseline mean is zero");
    for (std::size_t v = 0; v < variables.size(); ++v) {
      const auto& domain = schema.variable(columns[v]).domain;
      for (Direction d : {Direction::kDecrease, Direction::kIncrease}) {
        const double scale = d == Direction::kIncrease ? 1.0 + factor : 1.0 - factor;
        SensitivityCell cell;
        cell.variable = variables[v];
        cell.direction = d;
        cell.factor = factor;
        cell.start_level = level;
        cell.baseline_mean = baseline;
        cell.perturbed_mean = mean_prediction(forest, rows, columns[v], scale, domain, jobs);
        cell.relative_change = 100.0 * (cell.perturbed_mean - baseline) / baseline;
        cells.push_back(cell);
      }
    }
  }
  return cells;
}

std::string report_negligible(const SensitivityCell& cell, double threshold) {
  if (std::fabs(cell.relative_change) < threshold) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "<%g%%", threshold);
    return buf;
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", cell.relative_change);
  return buf;
}

void write_sensitivity_csv(std::ostream& out, const std::vector<SensitivityCell>& cells) {
  out << "variable,direction,start_level,baseline_mean,perturbed_mean,relative_change_pct\n";
  for (const auto& c : cells) {
    out << c.variable << ',' << to_string(c.direction) << ',' << c.start_level << ','
        << format_double(c.baseline_mean) << ',' << format_double(c.perturbed_mean) << ','
        << format_double(c.relative_change) << '\n';
  }
}

std::string sensitivity_table(const std::vector<SensitivityCell>& cells, double threshold) {
  std::set<int> levels;
  std::vector<std::string> variables;
  for (const auto& c : cells) {
    levels.insert(c.start_level);
    if (std::find(variables.begin(), variables.end(), c.variable) == variables.end())
      variables.push_back(c.variable);
  }
  std::ostringstream out;
  out << std::left << std::setw(32) << "Variable change";
  for (int l : levels) out << std::right << std::setw(10) << ("CL " + std::to_string(l));
  out << '\n';
  for (const auto& v : variables) {
    for (Direction d : {Direction::kDecrease, Direction::kIncrease}) {
      const auto pct = cells.empty() ? 0.0 : cells.front().factor * 100.0;
      std::ostringstream label;
      label << format_double(pct) << "% " << (d == Direction::kIncrease ? "inc. " : "dec. ") << v;
      out << std::left << std::setw(32) << label.str();
      for (int l : levels) {
        std::string text = "-";
        for (const auto& c : cells) {
          if (c.variable == v && c.direction == d && c.start_level == l)
            text = report_negligible(c, threshold);
        }
        out << std::right << std::setw(10) << text;
      }
      out << '\n';
    }
  }
  return out.str();
}

}  // namespace custody
