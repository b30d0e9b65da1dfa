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

#ifndef CUSTODY_SENSITIVITY_HPP_
#define CUSTODY_SENSITIVITY_HPP_

#include <iosfwd>
#include <string>
#include <vector>

#include "custody/dataset.hpp"
#include "custody/forest.hpp"

namespace custody {

enum class Direction { kIncrease, kDecrease };

std::string_view to_string(Direction d);

struct SensitivityCell {
  std::string variable;
  Direction direction = Direction::kIncrease;
  double factor = 0.10;
  int start_level = 2;
  double baseline_mean = 0.0;   // mean prediction on unmodified records
  double perturbed_mean = 0.0;  // mean prediction after scaling
  double relative_change = 0.0; // percent
};

// Prior record score, offense gravity, prior commitments, institutional
// adjustment.
std::vector<std::string> default_sensitivity_variables();

// For every start level present among 2..5 (and 1 when present), scales
// each variable by (1 +/- factor), clamps to its domain without rounding,
// and compares mean predictions. Pure; `jobs` only affects speed.
std::vector<SensitivityCell> sensitivity_scan(const RandomForest& forest,
                                              const Cohort& cohort,
                                              const std::vector<std::string>& variables,
                                              double factor = 0.10, unsigned jobs = 1);

// "<0.1%" when |relative_change| < threshold, else e.g. "-13.2%".
std::string report_negligible(const SensitivityCell& cell, double threshold = 0.1);

// Columns: variable,direction,start_level,baseline_mean,perturbed_mean,relative_change_pct
void write_sensitivity_csv(std::ostream& out, const std::vector<SensitivityCell>& cells);

// One row per (direction, variable), one column per start level.
std::string sensitivity_table(const std::vector<SensitivityCell>& cells,
                              double threshold = 0.1);

}  // namespace custody

#endif  // CUSTODY_SENSITIVITY_HPP_
