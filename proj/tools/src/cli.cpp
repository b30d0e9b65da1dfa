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

#include "custody/cli.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "custody/counterfactual.hpp"
#include "custody/dataset.hpp"
#include "custody/fairness.hpp"
#include "custody/forest.hpp"
#include "custody/format.hpp"
#include "custody/perturb.hpp"
#include "custody/report.hpp"
#include "custody/rng.hpp"
#include "custody/schema.hpp"
#include "custody/sensitivity.hpp"
#include "custody/synth.hpp"
#include "custody/trajectory.hpp"

namespace custody::cli {
namespace {

namespace fs = std::filesystem;

constexpr const char* kVersion = "0.1.0";

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Child streams of the master seed. The primary cohort uses the master seed
// itself so that `synth --seed S` reproduces the cohort of `audit --seed S`.
enum Stream : std::uint64_t {
  kReclassCohort = 2,
  kForestInitial = 3,
  kForestReclass = 4,
  kSplitInitial = 5,
  kSplitReclass = 6,
  kExperimentBase = 10,  // + experiment number
  kTrajectoryBase = 30,  // + run index
  kCounterfactualSample = 40,
};

std::uint64_t stream_seed(std::uint64_t master, std::uint64_t stream) {
  return derive_seed(master, {stream});
}

struct Options {
  std::optional<std::uint64_t> seed;
  unsigned jobs = 1;
  std::string config;
  std::string out;

  std::string cohort;
  std::string reclass_cohort;
  std::string forest;
  std::size_t cohort_n = 10000;

  // synth
  std::size_t synth_n = 10000;
  std::string target = "initial";
  std::optional<double> noise;

  // train
  std::string model = "initial";
  std::size_t trees = 100;
  std::optional<std::size_t> max_depth;
  std::size_t min_split = 2;
  std::string features = "sqrt";
  double test_fraction = 0.2;

  // perturb
  int experiment = 0;
  std::size_t perturb_n = 100;
  std::vector<std::string> races{"Black", "White"};
  double confidence = 0.95;

  // sensitivity
  double factor = 0.10;
  std::vector<std::string> variables;

  // trajectory
  std::size_t per_group = 10;
  std::size_t years = 8;
  std::vector<std::string> trajectory_races;
  std::vector<int> start_levels{2, 3, 4, 5};
  std::size_t average_per_group = 50;
  std::size_t race_per_group = 100;
  std::vector<std::size_t> average_horizons{20, 100};

  // counterfactual
  std::size_t k = 5;
  std::size_t sample = 500;
  double max_distance = 3.0;
  std::size_t examples = 20;

  // report
  std::string report;

  std::map<std::string, std::string> synth_extras;  // weights.*, coef.*, intercept
};

// ---- Option registration ----

void add_common(CLI::App* app, Options& o, bool stochastic) {
  if (stochastic) app->add_option("--seed", o.seed, "Master random seed (required)");
  app->add_option("--jobs", o.jobs, "Worker threads; results do not depend on it")
      ->check(CLI::PositiveNumber);
  app->add_option("--config", o.config, "key = value file; command-line flags win");
}

void add_cohort(CLI::App* app, Options& o) {
  app->add_option("--cohort", o.cohort, "Cohort CSV; synthesized from --seed when absent");
  app->add_option("--cohort-n", o.cohort_n, "Size of a synthesized cohort")
      ->check(CLI::PositiveNumber);
}

void add_forest_params(CLI::App* app, Options& o) {
  app->add_option("--trees", o.trees, "Number of trees")->check(CLI::PositiveNumber);
  app->add_option("--max-depth", o.max_depth, "Maximum tree depth (unlimited by default)");
  app->add_option("--min-split", o.min_split, "Minimum node size to split");
  app->add_option("--features", o.features, "Features per split: sqrt or a count");
  app->add_option("--test-fraction", o.test_fraction, "Held-out fraction per level")
      ->check(CLI::Range(0.0, 0.95));
}

void add_forest_input(CLI::App* app, Options& o) {
  app->add_option("--forest", o.forest, "Forest JSON; trained from the cohort when absent");
  add_forest_params(app, o);
}

// ---- Config merge ----

bool is_synth_extra(const std::string& key) {
  return key == "intercept" || key.rfind("weights.", 0) == 0 || key.rfind("coef.", 0) == 0;
}

void merge_config(CLI::App* sub, Options& o) {
  if (o.config.empty()) return;
  std::ifstream in(o.config);
  if (!in) throw UsageError("cannot open config file " + o.config);
  std::stringstream text;
  text << in.rdbuf();
  for (const auto& [key, value] : parse_key_values(text.str())) {
    if (key == "config") throw UsageError("config files cannot nest");
    if (sub->get_name() == "synth" && is_synth_extra(key)) {
      o.synth_extras[key] = value;
      continue;
    }
    CLI::Option* opt = sub->get_option_no_throw("--" + key);
    if (opt == nullptr) throw UsageError("unknown config key '" + key + "'");
    if (opt->count() != 0) continue;
    for (const auto& item : split(value, ',')) opt->add_result(std::string(trim(item)));
    try {
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw UsageError("config key '" + key + "': " + e.what());
    }
  }
}

// ---- Inputs ----

std::uint64_t require_seed(const Options& o, const std::string& why) {
  if (!o.seed) throw UsageError("--seed is required " + why);
  return *o.seed;
}

SynthTarget parse_target(const std::string& s) {
  if (s == "initial") return SynthTarget::kInitial;
  if (s == "reclassification") return SynthTarget::kReclassification;
  throw UsageError("target must be initial or reclassification, got '" + s + "'");
}

Model parse_model(const std::string& s) {
  return parse_target(s) == SynthTarget::kInitial ? Model::kInitial : Model::kReclassification;
}

std::string model_name(Model m) {
  return m == Model::kInitial ? "initial" : "reclassification";
}

struct CohortInput {
  Cohort cohort;
  Json provenance;
};

CohortInput synthetic(std::size_t n, std::uint64_t seed, SynthTarget target) {
  SynthConfig config;
  config.n = n;
  config.seed = seed;
  config.target = target;
  Json prov{{"source", "synthetic"},
            {"n", n},
            {"seed", seed},
            {"target", target == SynthTarget::kInitial ? "initial" : "reclassification"},
            {"noise", config.noise}};
  return {generate_synthetic_cohort(config), std::move(prov)};
}

CohortInput from_file(const std::string& path) {
  Cohort c = load_cohort(path, pact_schema());
  Json prov{{"source", "file"}, {"path", path}, {"n", c.size()}};
  return {std::move(c), std::move(prov)};
}

// Primary (initial-classification) cohort.
CohortInput primary_cohort(const Options& o) {
  if (!o.cohort.empty()) return from_file(o.cohort);
  return synthetic(o.cohort_n, require_seed(o, "to synthesize a cohort (or pass --cohort)"),
                   SynthTarget::kInitial);
}

CohortInput reclass_cohort(const Options& o, const std::string& path) {
  if (!path.empty()) return from_file(path);
  const auto master = require_seed(o, "to synthesize a cohort (or pass --cohort)");
  return synthetic(o.cohort_n, stream_seed(master, kReclassCohort),
                   SynthTarget::kReclassification);
}

ForestParams forest_params(const Options& o, std::uint64_t seed) {
  ForestParams p;
  p.n_trees = o.trees;
  p.max_depth = o.max_depth;
  p.min_samples_split = o.min_split;
  if (o.features != "sqrt") {
    const auto v = parse_double(o.features);
    if (!v || *v < 1 || *v != static_cast<double>(static_cast<std::size_t>(*v))) {
      throw UsageError("--features must be sqrt or a positive integer");
    }
    p.features_per_split = static_cast<std::size_t>(*v);
  }
  p.seed = seed;
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return p;
}

RandomForest train_model(const Options& o, const Cohort& cohort, Model model) {
  const auto master = require_seed(o, "to train a forest (or pass --forest)");
  const bool initial = model == Model::kInitial;
  const auto params = forest_params(o, stream_seed(master, initial ? kForestInitial
                                                                   : kForestReclass));
  return train_with_holdout(model_view(cohort, model), params, o.test_fraction,
                            stream_seed(master, initial ? kSplitInitial : kSplitReclass),
                            o.jobs);
}

RandomForest obtain_forest(const Options& o, const Cohort& cohort, Model model) {
  if (!o.forest.empty()) return load_forest(o.forest);
  return train_model(o, cohort, model);
}

// ---- Output helpers ----

fs::path out_dir(const Options& o) {
  fs::path dir = o.out.empty() ? fs::path(".") : fs::path(o.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory " + dir.string());
  return dir;
}

template <class Writer>
void write_file(const fs::path& path, Writer&& writer) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  writer(out);
  if (!out) throw DataError("failed writing " + path.string());
}

void write_text(const fs::path& path, const std::string& text) {
  write_file(path, [&](std::ostream& os) { os << text; });
}

void write_importance_csv(std::ostream& os, const RandomForest& forest) {
  os << "rank,variable,weight\n";
  std::size_t rank = 1;
  for (const auto& f : ranked(mdi_importance(forest))) {
    os << rank++ << ',' << f.name << ',' << format_double(f.weight) << '\n';
  }
}

std::string forest_summary(const RandomForest& forest) {
  std::ostringstream s;
  s << forest.trees().size() << " trees over " << forest.schema().size() << " variables";
  if (const auto& t = forest.training()) {
    s << ", held-out accuracy " << format_double(t->held_out_accuracy) << " (" << t->n_test
      << " records)";
  }
  const auto top = ranked(mdi_importance(forest));
  if (!top.empty()) s << ", top variable " << top.front().name;
  return s.str();
}

std::string experiment_summary(const ExperimentResult& r) {
  std::ostringstream s;
  s << "E" << static_cast<int>(r.plan.experiment) << ": " << r.distributions.size()
    << " strata x " << r.plan.n << " observations";
  std::size_t unchanged = 0;
  std::size_t total = 0;
  for (const auto& d : r.distributions) {
    unchanged += d.count(0);
    total += d.n;
  }
  if (total > 0) {
    s << ", unchanged fraction "
      << format_double(static_cast<double>(unchanged) / static_cast<double>(total));
  }
  if (!r.skipped.empty()) s << ", " << r.skipped.size() << " strata skipped";
  return s.str();
}

PerturbPlan perturb_plan(const Options& o, int experiment, std::uint64_t master) {
  PerturbPlan plan;
  try {
    plan.experiment = experiment_from_int(experiment);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  plan.n = o.perturb_n;
  plan.races = o.races;
  plan.confidence = o.confidence;
  plan.seed = stream_seed(master, kExperimentBase + static_cast<std::uint64_t>(experiment));
  try {
    plan.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return plan;
}

std::vector<ParityRow> parity_rows(const RandomForest& forest, const Cohort& cohort) {
  const Cohort view = project(cohort, forest.schema());
  std::vector<ParityRow> rows;
  for (auto g : {ProtectedGroup::kBlack, ProtectedGroup::kHispanic, ProtectedGroup::kAgeOver45,
                 ProtectedGroup::kFemale}) {
    ParityRow row{g, conditional_rate(view, {Decision::kPredictedAbove3, g, false}, &forest),
                  conditional_rate(view, {Decision::kInitialLevelAbove3, g, false})};
    rows.push_back(row);
  }
  return rows;
}

struct CfOutcome {
  CounterfactualRate rate;
  std::vector<Counterfactual> all;
};

CfOutcome run_counterfactuals(const Options& o, const Cohort& cohort, std::uint64_t seed) {
  if (o.k % 2 == 0) throw UsageError("--k must be odd");
  const KnnClassifier knn = knn_from_cohort(cohort, o.k);
  const auto sample = sample_cf_points(cohort, o.sample, seed);
  CfOutcome out;
  out.rate = counterfactual_rate(knn, sample, o.max_distance, o.jobs);
  for (const auto& p : sample) {
    for (auto& c : find_counterfactuals(knn, p, o.max_distance)) out.all.push_back(std::move(c));
  }
  return out;
}

// ---- Subcommands ----

int cmd_synth(const Options& o, std::ostream& out) {
  std::ostringstream text;
  for (const auto& [k, v] : o.synth_extras) text << k << " = " << v << '\n';
  SynthConfig config = parse_synth_config(text.str());
  config.n = o.synth_n;
  config.seed = require_seed(o, "for synth");
  config.target = parse_target(o.target);
  if (o.noise) config.noise = *o.noise;
  try {
    config.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const Cohort cohort = generate_synthetic_cohort(config);
  const fs::path path = o.out.empty() ? fs::path("cohort.csv") : fs::path(o.out);
  save_cohort(path, cohort);
  out << "synth: wrote " << cohort.size() << " records to " << path.string() << '\n';
  return kExitOk;
}

int cmd_train(const Options& o, std::ostream& out) {
  const Model model = parse_model(o.model);
  const CohortInput in = o.cohort.empty() && model == Model::kReclassification
                             ? reclass_cohort(o, "")
                             : primary_cohort(o);
  const RandomForest forest = train_model(o, in.cohort, model);
  const fs::path path = o.out.empty() ? fs::path("forest.json") : fs::path(o.out);
  save_forest(path, forest);
  out << "train: " << model_name(model) << " forest, " << forest_summary(forest) << " -> "
      << path.string() << '\n';
  return kExitOk;
}

int cmd_evaluate(const Options& o, std::ostream& out) {
  if (o.forest.empty()) throw UsageError("evaluate needs --forest");
  const RandomForest forest = load_forest(o.forest);
  const CohortInput in = primary_cohort(o);
  const double acc = accuracy(forest, project(in.cohort, forest.schema()));
  out << "evaluate: accuracy " << format_double(acc) << " on " << in.cohort.size()
      << " records\n";
  return kExitOk;
}

int cmd_importance(const Options& o, std::ostream& out) {
  if (o.forest.empty()) throw UsageError("importance needs --forest");
  const RandomForest forest = load_forest(o.forest);
  if (o.out.empty()) {
    write_importance_csv(out, forest);
  } else {
    write_file(o.out, [&](std::ostream& os) { write_importance_csv(os, forest); });
    out << "importance: " << forest.schema().size() << " variables -> " << o.out << '\n';
  }
  return kExitOk;
}

int cmd_perturb(const Options& o, std::ostream& out) {
  if (o.experiment == 0) throw UsageError("--experiment is required");
  const auto master = require_seed(o, "for perturb");
  const PerturbPlan plan = perturb_plan(o, o.experiment, master);
  const CohortInput in = primary_cohort(o);
  const RandomForest forest = obtain_forest(o, in.cohort, Model::kInitial);
  const auto result = run_experiment(plan, forest, project(in.cohort, forest.schema()), o.jobs);
  const fs::path dir = out_dir(o);
  const std::string stem = "e" + std::to_string(o.experiment);
  write_file(dir / (stem + "_deltas.csv"),
             [&](std::ostream& os) { write_deltas_csv(os, result); });
  const Section s = experiment_section(result, forest);
  write_text(dir / (stem + "_summary.json"),
             Json{{"provenance", s.provenance}, {"body", s.body}}.dump(2) + "\n");
  for (const auto& d : result.distributions) {
    out << "perturb: " << d.stratum.to_string() << " n=" << d.n << " counts";
    for (int delta = -kMaxDelta; delta <= kMaxDelta; ++delta) out << ' ' << d.count(delta);
    out << '\n';
  }
  for (const auto& sk : result.skipped) {
    out << "perturb: skipped " << sk.stratum.to_string() << " (" << sk.reason << ")\n";
  }
  return kExitOk;
}

int cmd_sensitivity(const Options& o, std::ostream& out) {
  const CohortInput in = primary_cohort(o);
  const RandomForest forest = obtain_forest(o, in.cohort, Model::kInitial);
  const auto vars = o.variables.empty() ? default_sensitivity_variables() : o.variables;
  const auto cells =
      sensitivity_scan(forest, project(in.cohort, forest.schema()), vars, o.factor, o.jobs);
  write_file(out_dir(o) / "sensitivity.csv",
             [&](std::ostream& os) { write_sensitivity_csv(os, cells); });
  out << sensitivity_table(cells);
  return kExitOk;
}

int cmd_trajectory(const Options& o, std::ostream& out) {
  const auto master = require_seed(o, "for trajectory");
  const CohortInput in = reclass_cohort(o, o.cohort);
  const RandomForest forest = obtain_forest(o, in.cohort, Model::kReclassification);
  const Cohort view = project(in.cohort, forest.schema());
  const auto groups = make_groups(o.start_levels, o.trajectory_races);
  const auto ensembles = simulate_ensemble(forest, view, o.per_group, groups, o.years,
                                           stream_seed(master, kTrajectoryBase), o.jobs);
  const fs::path dir = out_dir(o);
  write_file(dir / "trajectories.csv",
             [&](std::ostream& os) { write_trajectories_csv(os, ensembles); });
  write_file(dir / "trajectory_averages.csv",
             [&](std::ostream& os) { write_averages_csv(os, ensembles); });
  const auto vol = volatility_table(ensembles);
  write_file(dir / "volatility.csv", [&](std::ostream& os) { write_volatility_csv(os, vol); });
  for (const auto& v : vol) {
    out << "trajectory: " << v.group.to_string() << " n=" << v.n << " volatility "
        << format_double(v.mean_weighted_changes_per_person_year) << '\n';
  }
  return kExitOk;
}

int cmd_fairness(const Options& o, std::ostream& out) {
  const CohortInput in = primary_cohort(o);
  const auto rows = decision_table(in.cohort);
  const fs::path dir = out_dir(o);
  write_file(dir / "fairness.csv", [&](std::ostream& os) { write_fairness_csv(os, rows); });
  for (const auto& r : rows) {
    out << "fairness: " << to_string(r.query.decision)
        << (r.query.given_high_adjustment ? "|institutional_adjustment>2" : "") << " "
        << to_string(r.query.group) << " p_a=" << format_optional(r.rates.p_a)
        << " p_not_a=" << format_optional(r.rates.p_not_a) << '\n';
  }
  if (!o.forest.empty()) {
    const RandomForest forest = load_forest(o.forest);
    for (const auto& p : parity_rows(forest, in.cohort)) {
      out << "fairness: predictive parity " << to_string(p.group)
          << " model p_a=" << format_optional(p.model.p_a)
          << " data p_a=" << format_optional(p.data.p_a) << '\n';
    }
  }
  return kExitOk;
}

int cmd_counterfactual(const Options& o, std::ostream& out) {
  const auto master = require_seed(o, "for counterfactual");
  const CohortInput in = primary_cohort(o);
  const auto result = run_counterfactuals(o, in.cohort, stream_seed(master, kCounterfactualSample));
  const fs::path dir = out_dir(o);
  write_file(dir / "counterfactuals.csv",
             [&](std::ostream& os) { write_counterfactuals_csv(os, result.all); });
  const Section s = counterfactual_section(result.rate, {}, o.k, o.max_distance,
                                           stream_seed(master, kCounterfactualSample),
                                           in.cohort.schema());
  write_text(dir / "counterfactual_summary.json",
             Json{{"provenance", s.provenance}, {"body", s.body}}.dump(2) + "\n");
  out << "counterfactual: " << result.rate.hits << " of " << result.rate.sample_size
      << " sampled points (" << format_double(result.rate.fraction)
      << ") have a flipping counterfactual within distance " << format_double(o.max_distance)
      << '\n';
  return kExitOk;
}

int cmd_audit(const Options& o, std::ostream& out) {
  const auto master = require_seed(o, "for audit");
  const fs::path dir = out_dir(o);
  std::vector<Section> sections;

  const CohortInput primary = primary_cohort(o);
  const CohortInput reclass = reclass_cohort(o, o.reclass_cohort);

  const RandomForest initial = train_model(o, primary.cohort, Model::kInitial);
  const RandomForest reforest = train_model(o, reclass.cohort, Model::kReclassification);
  save_forest(dir / "forest_initial.json", initial);
  save_forest(dir / "forest_reclassification.json", reforest);
  write_file(dir / "importance_initial.csv",
             [&](std::ostream& os) { write_importance_csv(os, initial); });
  write_file(dir / "importance_reclassification.csv",
             [&](std::ostream& os) { write_importance_csv(os, reforest); });
  sections.push_back(forest_section("initial", initial));
  sections.push_back(forest_section("reclassification", reforest));
  out << "forest_initial: " << forest_summary(initial) << '\n';
  out << "forest_reclassification: " << forest_summary(reforest) << '\n';

  const Cohort initial_view = project(primary.cohort, initial.schema());
  for (int e = 1; e <= 5; ++e) {
    const auto result = run_experiment(perturb_plan(o, e, master), initial, initial_view, o.jobs);
    write_file(dir / ("e" + std::to_string(e) + "_deltas.csv"),
               [&](std::ostream& os) { write_deltas_csv(os, result); });
    sections.push_back(experiment_section(result, initial));
    out << "experiment_" << e << ": " << experiment_summary(result) << '\n';
  }

  const auto vars = o.variables.empty() ? default_sensitivity_variables() : o.variables;
  const auto cells = sensitivity_scan(initial, initial_view, vars, o.factor, o.jobs);
  write_file(dir / "sensitivity.csv",
             [&](std::ostream& os) { write_sensitivity_csv(os, cells); });
  sections.push_back(sensitivity_section(cells, vars, o.factor, initial));
  out << "sensitivity: " << cells.size() << " cells over " << vars.size() << " variables\n";

  const Cohort reclass_view = project(reclass.cohort, reforest.schema());
  std::vector<TrajectoryRun> runs;
  const auto add_run = [&](std::string name, std::size_t per_group, std::size_t horizon,
                           const std::vector<std::string>& races, bool individuals,
                           bool vol) {
    TrajectoryRun run;
    run.name = std::move(name);
    run.per_group = per_group;
    run.horizon = horizon;
    run.seed = stream_seed(master, kTrajectoryBase + runs.size());
    run.ensembles = simulate_ensemble(reforest, reclass_view, per_group,
                                      make_groups(o.start_levels, races), horizon, run.seed,
                                      o.jobs);
    run.keep_individuals = individuals;
    run.with_volatility = vol;
    runs.push_back(std::move(run));
  };
  add_run("individual", o.per_group, o.years, {}, true, false);
  for (std::size_t h : o.average_horizons) {
    add_run("average_T" + std::to_string(h), o.average_per_group, h, {}, false, false);
  }
  const std::vector<std::string> race_groups =
      o.trajectory_races.empty() ? std::vector<std::string>{"Black", "White"}
                                 : o.trajectory_races;
  add_run("by_race", o.race_per_group, o.years, race_groups, false, true);
  write_file(dir / "trajectories.csv",
             [&](std::ostream& os) { write_trajectories_csv(os, runs.front().ensembles); });
  write_file(dir / "volatility.csv", [&](std::ostream& os) {
    write_volatility_csv(os, volatility_table(runs.back().ensembles));
  });
  sections.push_back(trajectory_section(runs, reforest));
  out << "trajectories: " << runs.size() << " runs, volatility over "
      << runs.back().ensembles.size() << " level x race groups\n";

  const auto rows = decision_table(primary.cohort);
  const auto parity = parity_rows(initial, primary.cohort);
  write_file(dir / "fairness.csv", [&](std::ostream& os) { write_fairness_csv(os, rows); });
  sections.push_back(fairness_section(rows, parity, &initial));
  out << "fairness: " << rows.size() << " decision rows, " << parity.size()
      << " predictive parity rows\n";

  const std::uint64_t cf_seed = stream_seed(master, kCounterfactualSample);
  const auto cf = run_counterfactuals(o, primary.cohort, cf_seed);
  write_file(dir / "counterfactuals.csv",
             [&](std::ostream& os) { write_counterfactuals_csv(os, cf.all); });
  std::vector<Counterfactual> shown(
      cf.all.begin(), cf.all.begin() + static_cast<std::ptrdiff_t>(
                                           std::min(o.examples, cf.all.size())));
  sections.push_back(counterfactual_section(cf.rate, shown, o.k, o.max_distance, cf_seed,
                                            primary.cohort.schema()));
  out << "counterfactual: " << cf.rate.hits << " of " << cf.rate.sample_size << " ("
      << format_double(cf.rate.fraction) << ")\n";

  Json metadata{{"tool", "custody-audit"},
                {"tool_version", kVersion},
                {"master_seed", master},
                {"seed_derivation", "derive_seed(master_seed, [stream])"},
                {"timestamps", Json{{"generated", nullptr}}},
                {"inputs", Json{{"cohort", primary.provenance},
                                {"reclassification_cohort", reclass.provenance}}}};
  const AuditReport report = assemble(metadata, sections);
  write_text(dir / "audit-report.json", serialize(report));
  for (const auto& [file, csv] : plot_files(report)) write_text(dir / file, csv);
  out << "audit: wrote " << (dir / "audit-report.json").string() << '\n';
  return kExitOk;
}

int cmd_report(const Options& o, std::ostream& out) {
  if (o.report.empty()) throw UsageError("report needs --report");
  std::ifstream in(o.report, std::ios::binary);
  if (!in) throw DataError("cannot open " + o.report);
  std::stringstream text;
  text << in.rdbuf();
  const AuditReport report = parse_report(text.str());
  if (serialize(report) != text.str()) {
    throw DataError(o.report + " is not in canonical form");
  }
  const fs::path dir = out_dir(o);
  std::size_t n = 0;
  for (const auto& [file, csv] : plot_files(report)) {
    write_text(dir / file, csv);
    ++n;
  }
  out << "report: " << n << " plot extracts -> " << dir.string() << '\n';
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Audit tooling for custody classification models", "custody-audit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  auto* synth = app.add_subcommand("synth", "Generate a synthetic cohort CSV");
  add_common(synth, o, true);
  synth->add_option("--n", o.synth_n, "Number of records")->check(CLI::PositiveNumber);
  synth->add_option("--target", o.target, "initial or reclassification");
  synth->add_option("--noise", o.noise, "Latent noise standard deviation");
  synth->add_option("--out", o.out, "Output CSV (default cohort.csv)");

  auto* train = app.add_subcommand("train", "Train a surrogate random forest");
  add_common(train, o, true);
  add_cohort(train, o);
  add_forest_params(train, o);
  train->add_option("--model", o.model, "initial or reclassification");
  train->add_option("--out", o.out, "Output JSON (default forest.json)");

  auto* evaluate = app.add_subcommand("evaluate", "Accuracy of a forest on a cohort");
  add_common(evaluate, o, true);
  add_cohort(evaluate, o);
  evaluate->add_option("--forest", o.forest, "Forest JSON");

  auto* importance = app.add_subcommand("importance", "Mean decrease in impurity");
  add_common(importance, o, false);
  importance->add_option("--forest", o.forest, "Forest JSON");
  importance->add_option("--out", o.out, "Output CSV (stdout when absent)");

  auto* perturb = app.add_subcommand("perturb", "Perturbation experiments 1 to 5");
  add_common(perturb, o, true);
  add_cohort(perturb, o);
  add_forest_input(perturb, o);
  perturb->add_option("--experiment", o.experiment, "Experiment number")
      ->check(CLI::Range(1, 5));
  perturb->add_option("--n", o.perturb_n, "Synthetic observations per stratum")
      ->check(CLI::PositiveNumber);
  perturb->add_option("--races", o.races, "Races crossed with levels in experiments 3 and 4");
  perturb->add_option("--confidence", o.confidence, "Margin-of-error confidence level");
  perturb->add_option("--out", o.out, "Output directory");

  auto* sensitivity = app.add_subcommand("sensitivity", "Scaling scans of quantitative inputs");
  add_common(sensitivity, o, true);
  add_cohort(sensitivity, o);
  add_forest_input(sensitivity, o);
  sensitivity->add_option("--factor", o.factor, "Relative scaling factor")
      ->check(CLI::Range(0.0, 1.0));
  sensitivity->add_option("--variables", o.variables, "Variables to scale");
  sensitivity->add_option("--out", o.out, "Output directory");

  auto* trajectory = app.add_subcommand("trajectory", "Repeated reclassification");
  add_common(trajectory, o, true);
  add_cohort(trajectory, o);
  add_forest_input(trajectory, o);
  trajectory->add_option("--per-group", o.per_group, "People per start level")
      ->check(CLI::PositiveNumber);
  trajectory->add_option("--years", o.years, "Horizon in years")->check(CLI::PositiveNumber);
  trajectory->add_option("--races", o.trajectory_races, "Cross start levels with these races");
  trajectory->add_option("--start-levels", o.start_levels, "Start levels")
      ->check(CLI::Range(kMinLevel, kMaxLevel));
  trajectory->add_option("--out", o.out, "Output directory");

  auto* fairness = app.add_subcommand("fairness", "Conditional decision rates");
  add_common(fairness, o, true);
  add_cohort(fairness, o);
  fairness->add_option("--forest", o.forest, "Forest JSON for predictive parity");
  fairness->add_option("--out", o.out, "Output directory");

  auto* counterfactual = app.add_subcommand("counterfactual", "Protected-attribute flips");
  add_common(counterfactual, o, true);
  add_cohort(counterfactual, o);
  counterfactual->add_option("--k", o.k, "Neighbours")->check(CLI::PositiveNumber);
  counterfactual->add_option("--sample", o.sample, "Sampled base points")
      ->check(CLI::PositiveNumber);
  counterfactual->add_option("--max-distance", o.max_distance, "Taxicab radius");
  counterfactual->add_option("--out", o.out, "Output directory");

  auto* audit = app.add_subcommand("audit", "Run every analysis and write the report");
  add_common(audit, o, true);
  add_cohort(audit, o);
  add_forest_params(audit, o);
  audit->add_option("--reclass-cohort", o.reclass_cohort, "Reclassification cohort CSV");
  audit->add_option("--perturb-n", o.perturb_n, "Synthetic observations per stratum")
      ->check(CLI::PositiveNumber);
  audit->add_option("--races", o.races, "Races crossed with levels in experiments 3 and 4");
  audit->add_option("--confidence", o.confidence, "Margin-of-error confidence level");
  audit->add_option("--factor", o.factor, "Sensitivity scaling factor")
      ->check(CLI::Range(0.0, 1.0));
  audit->add_option("--variables", o.variables, "Sensitivity variables");
  audit->add_option("--per-group", o.per_group, "Individual trajectories per level");
  audit->add_option("--years", o.years, "Trajectory horizon")->check(CLI::PositiveNumber);
  audit->add_option("--average-per-group", o.average_per_group, "People per averaged group");
  audit->add_option("--average-horizons", o.average_horizons, "Horizons of averaged runs");
  audit->add_option("--race-per-group", o.race_per_group, "People per level x race group");
  audit->add_option("--trajectory-races", o.trajectory_races, "Races for volatility");
  audit->add_option("--start-levels", o.start_levels, "Trajectory start levels")
      ->check(CLI::Range(kMinLevel, kMaxLevel));
  audit->add_option("--k", o.k, "Neighbours")->check(CLI::PositiveNumber);
  audit->add_option("--sample", o.sample, "Counterfactual base points");
  audit->add_option("--max-distance", o.max_distance, "Counterfactual radius");
  audit->add_option("--examples", o.examples, "Counterfactuals listed in the report");
  audit->add_option("--out", o.out, "Output directory");

  auto* report = app.add_subcommand("report", "Regenerate plot extracts from a report");
  add_common(report, o, false);
  report->add_option("--report", o.report, "audit-report.json");
  report->add_option("--out", o.out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  try {
    merge_config(sub, o);
    if (name == "synth") return cmd_synth(o, out);
    if (name == "train") return cmd_train(o, out);
    if (name == "evaluate") return cmd_evaluate(o, out);
    if (name == "importance") return cmd_importance(o, out);
    if (name == "perturb") return cmd_perturb(o, out);
    if (name == "sensitivity") return cmd_sensitivity(o, out);
    if (name == "trajectory") return cmd_trajectory(o, out);
    if (name == "fairness") return cmd_fairness(o, out);
    if (name == "counterfactual") return cmd_counterfactual(o, out);
    if (name == "audit") return cmd_audit(o, out);
    if (name == "report") return cmd_report(o, out);
    throw UsageError("unknown subcommand " + name);
  } catch (const UsageError& e) {
    err << "custody-audit " << name << ": usage error: " << e.what() << '\n';
    err << "run 'custody-audit " << name << " --help' for options\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    err << "custody-audit " << name << ": usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "custody-audit " << name << ": data error: " << e.what() << '\n';
    return kExitData;
  }
}

int run(int argc, const char* const* argv) { return run(argc, argv, std::cout, std::cerr); }

}  // namespace custody::cli
