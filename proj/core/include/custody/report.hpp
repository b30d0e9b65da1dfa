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

#ifndef CUSTODY_REPORT_HPP_
#define CUSTODY_REPORT_HPP_

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "custody/counterfactual.hpp"
#include "custody/fairness.hpp"
#include "custody/forest.hpp"
#include "custody/perturb.hpp"
#include "custody/sensitivity.hpp"
#include "custody/trajectory.hpp"

namespace custody {

using Json = nlohmann::ordered_json;

inline constexpr std::string_view kReportSchema = "custody-audit-report";
inline constexpr int kReportSchemaVersion = 1;

// One block of the audit report. `model` names the surrogate that produced
// it ("initial", "reclassification", or empty for data-only sections).
struct Section {
  std::string name;
  std::string model;
  std::string fingerprint;
  Json provenance;  // seeds and parameters needed to regenerate the body
  Json body;
};

// Every section a report can hold, in output order.
const std::vector<std::string>& report_section_names();

struct AuditReport {
  Json document;
};

// Absent sections are written with status "skipped". Two sections from the
// same model role with different schema fingerprints are a DataError.
AuditReport assemble(const Json& metadata, const std::vector<Section>& sections);

std::string serialize(const AuditReport& report);
AuditReport parse_report(std::string_view text);

// ---- Section builders ----

Section forest_section(std::string_view model, const RandomForest& forest);
Section experiment_section(const ExperimentResult& result, const RandomForest& forest);
Section sensitivity_section(const std::vector<SensitivityCell>& cells,
                            const std::vector<std::string>& variables, double factor,
                            const RandomForest& forest);

struct TrajectoryRun {
  std::string name;
  std::size_t per_group = 0;
  std::size_t horizon = 0;
  std::uint64_t seed = 0;
  std::vector<TrajectoryEnsemble> ensembles;
  bool keep_individuals = false;
  bool with_volatility = false;
};

Section trajectory_section(const std::vector<TrajectoryRun>& runs, const RandomForest& forest);

struct ParityRow {
  ProtectedGroup group;
  RatePair model;
  RatePair data;
};

Section fairness_section(const std::vector<FairnessRow>& rows,
                         const std::vector<ParityRow>& parity, const RandomForest* forest);

Section counterfactual_section(const CounterfactualRate& rate,
                               const std::vector<Counterfactual>& examples, std::size_t k,
                               double max_distance, std::uint64_t seed,
                               const CohortSchema& schema);

// ---- Plot extracts ----

struct BoxQuantiles {
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
};

// Type-7 quantiles.
BoxQuantiles box_quantiles(const std::vector<double>& sample);

enum class FigureKind {
  kDeltaHistogram,    // rows (stratum, delta, count, frequency); needs an experiment
  kDeltaQuantiles,    // per changed unit, experiments 2 and 4
  kSensitivity,       // baseline, increase and decrease means per level
  kTrajectories,      // individual trajectories
  kAverageTrajectories,
  kRaceAverageTrajectories,
};

// CSV text for one figure. Throws DataError when the section is missing.
std::string emit_plot_data(const AuditReport& report, FigureKind kind, int experiment = 0);

// (file name, CSV text) for every figure whose section is present.
std::vector<std::pair<std::string, std::string>> plot_files(const AuditReport& report);

}  // namespace custody

#endif  // CUSTODY_REPORT_HPP_
