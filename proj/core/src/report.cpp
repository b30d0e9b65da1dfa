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

#include "custody/report.hpp"

#include <algorithm>
#include <cstddef>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "custody/format.hpp"

namespace custody {
namespace {

const char* const kStatusOk = "ok";
const char* const kStatusSkipped = "skipped";

std::string model_role(const RandomForest& forest) {
  return forest.schema().has("re_discip_reports") ? "reclassification" : "initial";
}

Json quantiles_json(const BoxQuantiles& q) {
  return Json{{"min", q.min}, {"q1", q.q1}, {"median", q.median}, {"q3", q.q3}, {"max", q.max}};
}

Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

Json optional_json(const std::optional<std::string>& v) {
  return v ? Json(*v) : Json(nullptr);
}

Json rate_json(const RatePair& r) {
  return Json{{"p_a", optional_json(r.p_a)},
              {"p_not_a", optional_json(r.p_not_a)},
              {"hits_a", r.hits_a},
              {"n_a", r.n_a},
              {"hits_not_a", r.hits_not_a},
              {"n_not_a", r.n_not_a},
              {"excluded", r.excluded},
              {"undefined", r.undefined()}};
}

Json forest_provenance(const RandomForest& forest) {
  const auto& p = forest.params();
  Json params{{"n_trees", p.n_trees},
              {"max_depth", p.max_depth ? Json(*p.max_depth) : Json(nullptr)},
              {"min_samples_split", p.min_samples_split},
              {"features_per_split",
               p.features_per_split ? Json(*p.features_per_split) : Json("sqrt")},
              {"bootstrap", p.bootstrap}};
  Json out{{"seed", p.seed}, {"params", std::move(params)}};
  if (const auto& t = forest.training()) {
    out["training"] = Json{{"split_seed", t->split_seed},
                           {"test_fraction", t->test_fraction},
                           {"n_train", t->n_train},
                           {"n_test", t->n_test}};
  }
  return out;
}

const Json& require_section(const AuditReport& report, const std::string& name) {
  const auto& sections = report.document.at("sections");
  auto it = sections.find(name);
  if (it == sections.end() || it->at("status") != kStatusOk) {
    throw DataError("report section " + name + " is missing");
  }
  return *it;
}

std::string experiment_section_name(int k) { return "experiment_" + std::to_string(k); }

void csv_row(std::ostream& out, std::initializer_list<std::string> cells) {
  bool first = true;
  for (const auto& c : cells) {
    if (!first) out << ',';
    out << c;
    first = false;
  }
  out << '\n';
}

std::string number(const Json& v) {
  if (v.is_null()) return "";
  if (v.is_number_integer() || v.is_number_unsigned()) return v.dump();
  return format_double(v.get<double>());
}

std::string delta_histogram(const Json& body) {
  std::ostringstream out;
  csv_row(out, {"stratum", "delta", "count", "frequency"});
  for (const auto& d : body.at("distributions")) {
    const auto n = d.at("n").get<std::size_t>();
    const auto& counts = d.at("counts");
    for (std::size_t i = 0; i < counts.size(); ++i) {
      const auto c = counts[i].get<std::size_t>();
      const double freq = n == 0 ? 0.0 : static_cast<double>(c) / static_cast<double>(n);
      csv_row(out, {d.at("stratum").get<std::string>(),
                    std::to_string(static_cast<int>(i) - kMaxDelta), std::to_string(c),
                    format_double(freq)});
    }
  }
  return out.str();
}

std::string delta_quantiles(const Json& body) {
  std::ostringstream out;
  csv_row(out, {"stratum", "unit", "n", "min", "q1", "median", "q3", "max"});
  for (const auto& u : body.at("unit_deltas")) {
    const auto& q = u.at("quantiles");
    csv_row(out, {u.at("stratum").get<std::string>(), u.at("unit").get<std::string>(),
                  number(u.at("n")), number(q.at("min")), number(q.at("q1")),
                  number(q.at("median")), number(q.at("q3")), number(q.at("max"))});
  }
  return out.str();
}

std::string sensitivity_extract(const Json& body) {
  std::ostringstream out;
  csv_row(out, {"variable", "direction", "start_level", "baseline_mean", "perturbed_mean",
                "relative_change_pct"});
  for (const auto& c : body.at("cells")) {
    csv_row(out, {c.at("variable").get<std::string>(), c.at("direction").get<std::string>(),
                  number(c.at("start_level")), number(c.at("baseline_mean")),
                  number(c.at("perturbed_mean")), number(c.at("relative_change_pct"))});
  }
  return out.str();
}

bool run_has_race(const Json& run) {
  return std::any_of(run.at("ensembles").begin(), run.at("ensembles").end(),
                     [](const Json& e) { return !e.at("race").is_null(); });
}

std::string individual_extract(const Json& body) {
  std::ostringstream out;
  csv_row(out, {"run", "group", "person_id", "step", "age", "level"});
  for (const auto& run : body.at("runs")) {
    for (const auto& e : run.at("ensembles")) {
      if (!e.contains("trajectories")) continue;
      for (const auto& t : e.at("trajectories")) {
        const auto& levels = t.at("levels");
        const auto& ages = t.at("ages");
        for (std::size_t s = 0; s < levels.size(); ++s) {
          csv_row(out, {run.at("name").get<std::string>(), e.at("group").get<std::string>(),
                        number(t.at("person_id")), std::to_string(s), number(ages[s]),
                        number(levels[s])});
        }
      }
    }
  }
  return out.str();
}

std::string average_extract(const Json& body, bool by_race) {
  std::ostringstream out;
  csv_row(out, {"run", "horizon", "group", "step", "mean_level"});
  for (const auto& run : body.at("runs")) {
    if (run.at("keep_individuals").get<bool>() || run_has_race(run) != by_race) continue;
    for (const auto& e : run.at("ensembles")) {
      const auto& mean = e.at("mean");
      for (std::size_t s = 0; s < mean.size(); ++s) {
        csv_row(out, {run.at("name").get<std::string>(), number(run.at("horizon")),
                      e.at("group").get<std::string>(), std::to_string(s), number(mean[s])});
      }
    }
  }
  return out.str();
}

void check_document(const Json& doc) {
  if (!doc.is_object() || doc.value("schema", "") != kReportSchema) {
    throw DataError("not an audit report");
  }
  if (doc.value("version", 0) != kReportSchemaVersion) {
    throw DataError("unsupported audit report version");
  }
  const auto& sections = doc.at("sections");
  for (const auto& name : report_section_names()) {
    if (!sections.contains(name)) throw DataError("report section " + name + " is absent");
    const auto status = sections.at(name).value("status", "");
    if (status != kStatusOk && status != kStatusSkipped) {
      throw DataError("report section " + name + " has invalid status");
    }
  }
}

}  // namespace

const std::vector<std::string>& report_section_names() {
  static const std::vector<std::string> names = {
      "forest_initial", "forest_reclassification", "experiment_1", "experiment_2",
      "experiment_3",   "experiment_4",           "experiment_5", "sensitivity",
      "trajectories",   "fairness",               "counterfactual"};
  return names;
}

AuditReport assemble(const Json& metadata, const std::vector<Section>& sections) {
  const auto& names = report_section_names();
  std::map<std::string, const Section*> by_name;
  std::map<std::string, std::string> fingerprints;
  for (const auto& s : sections) {
    if (std::find(names.begin(), names.end(), s.name) == names.end()) {
      throw std::invalid_argument("unknown report section: " + s.name);
    }
    if (!by_name.emplace(s.name, &s).second) {
      throw std::invalid_argument("duplicate report section: " + s.name);
    }
    if (s.model.empty()) continue;
    auto [it, inserted] = fingerprints.emplace(s.model, s.fingerprint);
    if (!inserted && it->second != s.fingerprint) {
      throw DataError("section " + s.name + " has schema fingerprint " + s.fingerprint +
                      " but the " + s.model + " model elsewhere has " + it->second);
    }
  }

  Json doc;
  doc["schema"] = kReportSchema;
  doc["version"] = kReportSchemaVersion;
  doc["metadata"] = metadata.is_null() ? Json::object() : metadata;
  Json fp = Json::object();
  for (const auto& [model, f] : fingerprints) fp[model] = f;
  doc["schema_fingerprints"] = std::move(fp);
  Json out = Json::object();
  for (const auto& name : names) {
    auto it = by_name.find(name);
    if (it == by_name.end()) {
      out[name] = Json{{"status", kStatusSkipped}};
      continue;
    }
    const Section& s = *it->second;
    out[name] = Json{{"status", kStatusOk},
                     {"model", s.model.empty() ? Json(nullptr) : Json(s.model)},
                     {"schema_fingerprint",
                      s.fingerprint.empty() ? Json(nullptr) : Json(s.fingerprint)},
                     {"provenance", s.provenance.is_null() ? Json::object() : s.provenance},
                     {"body", s.body}};
  }
  doc["sections"] = std::move(out);
  return AuditReport{std::move(doc)};
}

std::string serialize(const AuditReport& report) { return report.document.dump(2) + "\n"; }

AuditReport parse_report(std::string_view text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw DataError(std::string("malformed audit report: ") + e.what());
  }
  check_document(doc);
  return AuditReport{std::move(doc)};
}

// ---- Section builders ----

Section forest_section(std::string_view model, const RandomForest& forest) {
  Json importance = Json::array();
  for (const auto& f : ranked(mdi_importance(forest))) {
    importance.push_back(Json{{"variable", f.name}, {"weight", f.weight}});
  }
  const auto& t = forest.training();
  Json body{{"n_trees", forest.trees().size()},
            {"n_features", forest.schema().size()},
            {"held_out_accuracy", t ? Json(t->held_out_accuracy) : Json(nullptr)},
            {"importance", std::move(importance)}};
  return Section{"forest_" + std::string(model), std::string(model), forest.fingerprint(),
                 forest_provenance(forest), std::move(body)};
}

Section experiment_section(const ExperimentResult& result, const RandomForest& forest) {
  const auto& plan = result.plan;
  const int k = static_cast<int>(plan.experiment);
  Json provenance{{"seed", plan.seed},
                  {"experiment", k},
                  {"n", plan.n},
                  {"races", plan.races},
                  {"confidence", plan.confidence},
                  {"forest_seed", forest.params().seed}};

  Json dists = Json::array();
  for (const auto& d : result.distributions) {
    dists.push_back(Json{{"stratum", d.stratum.to_string()},
                         {"level", d.stratum.level ? Json(*d.stratum.level) : Json(nullptr)},
                         {"race", optional_json(d.stratum.race)},
                         {"n", d.n},
                         {"counts", d.counts}});
  }
  Json skipped = Json::array();
  for (const auto& s : result.skipped) {
    skipped.push_back(Json{{"stratum", s.stratum.to_string()}, {"reason", s.reason}});
  }
  Json coincidences = Json::array();
  for (const auto& [key, count] : result.coincidences) {
    coincidences.push_back(Json{{"stratum", key.to_string()}, {"count", count}});
  }
  Json units = Json::array();
  for (const auto& u : result.unit_deltas) {
    std::vector<double> sample(u.deltas.begin(), u.deltas.end());
    units.push_back(Json{{"stratum", u.stratum.to_string()},
                         {"unit", u.unit},
                         {"n", u.deltas.size()},
                         {"quantiles", quantiles_json(box_quantiles(sample))}});
  }
  Json body{{"delta_min", -kMaxDelta},
            {"delta_max", kMaxDelta},
            {"distributions", std::move(dists)},
            {"skipped", std::move(skipped)}};
  if (plan.experiment == Experiment::kE2 || plan.experiment == Experiment::kE4) {
    body["coincidences"] = std::move(coincidences);
    body["unit_deltas"] = std::move(units);
  }
  return Section{experiment_section_name(k), model_role(forest), forest.fingerprint(),
                 std::move(provenance), std::move(body)};
}

Section sensitivity_section(const std::vector<SensitivityCell>& cells,
                            const std::vector<std::string>& variables, double factor,
                            const RandomForest& forest) {
  Json rows = Json::array();
  for (const auto& c : cells) {
    rows.push_back(Json{{"variable", c.variable},
                        {"direction", std::string(to_string(c.direction))},
                        {"start_level", c.start_level},
                        {"baseline_mean", c.baseline_mean},
                        {"perturbed_mean", c.perturbed_mean},
                        {"relative_change_pct", c.relative_change},
                        {"display", report_negligible(c)}});
  }
  Json provenance{{"seed", nullptr},
                  {"factor", factor},
                  {"variables", variables},
                  {"forest_seed", forest.params().seed}};
  return Section{"sensitivity", model_role(forest), forest.fingerprint(), std::move(provenance),
                 Json{{"cells", std::move(rows)}}};
}

Section trajectory_section(const std::vector<TrajectoryRun>& runs, const RandomForest& forest) {
  Json prov_runs = Json::array();
  Json body_runs = Json::array();
  for (const auto& run : runs) {
    prov_runs.push_back(Json{{"name", run.name},
                             {"per_group", run.per_group},
                             {"horizon", run.horizon},
                             {"seed", run.seed}});
    Json ensembles = Json::array();
    for (const auto& e : run.ensembles) {
      Json item{{"group", e.group.to_string()},
                {"start_level", e.group.start_level},
                {"race", optional_json(e.group.race)},
                {"size", e.trajectories.size()},
                {"with_replacement", e.with_replacement},
                {"mean", average_trajectory(e)}};
      if (run.keep_individuals) {
        Json people = Json::array();
        for (const auto& t : e.trajectories) {
          people.push_back(Json{{"person_id", t.person_id},
                                {"source_row", t.source_row},
                                {"levels", t.levels},
                                {"ages", t.ages}});
        }
        item["trajectories"] = std::move(people);
      }
      ensembles.push_back(std::move(item));
    }
    Json r{{"name", run.name},
           {"horizon", run.horizon},
           {"keep_individuals", run.keep_individuals},
           {"ensembles", std::move(ensembles)}};
    if (run.with_volatility) {
      Json vol = Json::array();
      for (const auto& v : volatility_table(run.ensembles)) {
        vol.push_back(Json{{"group", v.group.to_string()},
                           {"start_level", v.group.start_level},
                           {"race", optional_json(v.group.race)},
                           {"mean_weighted_changes_per_person_year",
                            v.mean_weighted_changes_per_person_year},
                           {"n", v.n}});
      }
      r["volatility"] = std::move(vol);
    }
    body_runs.push_back(std::move(r));
  }
  Json provenance{{"runs", std::move(prov_runs)}, {"forest_seed", forest.params().seed}};
  return Section{"trajectories", model_role(forest), forest.fingerprint(),
                 std::move(provenance), Json{{"runs", std::move(body_runs)}}};
}

Section fairness_section(const std::vector<FairnessRow>& rows,
                         const std::vector<ParityRow>& parity, const RandomForest* forest) {
  Json table = Json::array();
  for (const auto& r : rows) {
    Json item{{"decision", std::string(to_string(r.query.decision))},
              {"group", std::string(to_string(r.query.group))},
              {"given_high_adjustment", r.query.given_high_adjustment}};
    item.update(rate_json(r.rates));
    table.push_back(std::move(item));
  }
  Json par = Json::array();
  for (const auto& p : parity) {
    const ParityGap gap = parity_gap(p.model, p.data);
    par.push_back(Json{{"group", std::string(to_string(p.group))},
                       {"model", rate_json(p.model)},
                       {"data", rate_json(p.data)},
                       {"gap_a", optional_json(gap.gap_a)},
                       {"gap_not_a", optional_json(gap.gap_not_a)}});
  }
  Json provenance{{"seed", nullptr},
                  {"forest_seed", forest ? Json(forest->params().seed) : Json(nullptr)}};
  Section s{"fairness", "", "", std::move(provenance),
            Json{{"decision_table", std::move(table)}, {"predictive_parity", std::move(par)}}};
  if (forest != nullptr) {
    s.model = model_role(*forest);
    s.fingerprint = forest->fingerprint();
  }
  return s;
}

Section counterfactual_section(const CounterfactualRate& rate,
                               const std::vector<Counterfactual>& examples, std::size_t k,
                               double max_distance, std::uint64_t seed,
                               const CohortSchema& schema) {
  Json items = Json::array();
  for (const auto& c : examples) {
    items.push_back(Json{{"base", c.base.to_string()},
                         {"base_class", std::string(to_string(c.base_class))},
                         {"changes", c.describe_changes()},
                         {"counterfactual", c.point.to_string()},
                         {"new_class", std::string(to_string(c.new_class))},
                         {"distance", c.distance}});
  }
  Json provenance{{"seed", seed},
                  {"k", k},
                  {"max_distance", max_distance},
                  {"sample_size", rate.sample_size}};
  Json body{{"sample_size", rate.sample_size},
            {"hits", rate.hits},
            {"fraction", rate.fraction},
            {"examples", std::move(items)}};
  // The kNN reads the data directly; its schema is recorded but not tied to
  // a forest role.
  provenance["cohort_fingerprint"] = schema.fingerprint();
  return Section{"counterfactual", "", "", std::move(provenance), std::move(body)};
}

// ---- Plot extracts ----

BoxQuantiles box_quantiles(const std::vector<double>& sample) {
  if (sample.empty()) throw std::invalid_argument("quantiles of an empty sample");
  return BoxQuantiles{quantile_type7(sample, 0.0), quantile_type7(sample, 0.25),
                      quantile_type7(sample, 0.5), quantile_type7(sample, 0.75),
                      quantile_type7(sample, 1.0)};
}

std::string emit_plot_data(const AuditReport& report, FigureKind kind, int experiment) {
  switch (kind) {
    case FigureKind::kDeltaHistogram:
      experiment_from_int(experiment);
      return delta_histogram(
          require_section(report, experiment_section_name(experiment)).at("body"));
    case FigureKind::kDeltaQuantiles:
      if (experiment != 2 && experiment != 4) {
        throw std::invalid_argument("delta quantiles exist for experiments 2 and 4 only");
      }
      return delta_quantiles(
          require_section(report, experiment_section_name(experiment)).at("body"));
    case FigureKind::kSensitivity:
      return sensitivity_extract(require_section(report, "sensitivity").at("body"));
    case FigureKind::kTrajectories:
      return individual_extract(require_section(report, "trajectories").at("body"));
    case FigureKind::kAverageTrajectories:
      return average_extract(require_section(report, "trajectories").at("body"), false);
    case FigureKind::kRaceAverageTrajectories:
      return average_extract(require_section(report, "trajectories").at("body"), true);
  }
  throw std::invalid_argument("unknown figure kind");
}

std::vector<std::pair<std::string, std::string>> plot_files(const AuditReport& report) {
  struct Spec {
    const char* file;
    const char* section;
    FigureKind kind;
    int experiment;
  };
  static const Spec specs[] = {
      {"fig3_e1_delta_histogram.csv", "experiment_1", FigureKind::kDeltaHistogram, 1},
      {"fig4_e2_delta_histogram.csv", "experiment_2", FigureKind::kDeltaHistogram, 2},
      {"fig4_e2_quantiles.csv", "experiment_2", FigureKind::kDeltaQuantiles, 2},
      {"fig5_e3_delta_histogram.csv", "experiment_3", FigureKind::kDeltaHistogram, 3},
      {"fig6_e4_delta_histogram.csv", "experiment_4", FigureKind::kDeltaHistogram, 4},
      {"fig6_e4_quantiles.csv", "experiment_4", FigureKind::kDeltaQuantiles, 4},
      {"fig7_e5_delta_histogram.csv", "experiment_5", FigureKind::kDeltaHistogram, 5},
      {"fig8_sensitivity.csv", "sensitivity", FigureKind::kSensitivity, 0},
      {"fig9_trajectories.csv", "trajectories", FigureKind::kTrajectories, 0},
      {"fig10_average_trajectories.csv", "trajectories", FigureKind::kAverageTrajectories, 0},
      {"fig11_race_average_trajectories.csv", "trajectories",
       FigureKind::kRaceAverageTrajectories, 0},
  };
  std::vector<std::pair<std::string, std::string>> out;
  const auto& sections = report.document.at("sections");
  for (const auto& s : specs) {
    if (sections.at(s.section).at("status") != kStatusOk) continue;
    out.emplace_back(s.file, emit_plot_data(report, s.kind, s.experiment));
  }
  return out;
}

}  // namespace custody
