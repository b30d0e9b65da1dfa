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

#include "custody/forest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "custody/parallel.hpp"

namespace custody {

double gini(const LevelCounts& counts) {
  double n = 0.0;
  for (auto c : counts) n += c;
  if (n == 0.0) return 0.0;
  double sum_sq = 0.0;
  for (auto c : counts) sum_sq += (c / n) * (c / n);
  return std::max(0.0, 1.0 - sum_sq);
}

int majority_level(const LevelCounts& counts) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < counts.size(); ++i) {
    if (counts[i] > counts[best]) best = i;
  }
  return kMinLevel + static_cast<int>(best);
}

void ForestParams::validate() const {
  if (n_trees < 1) throw std::invalid_argument("n_trees must be >= 1");
  if (min_samples_split < 2) throw std::invalid_argument("min_samples_split must be >= 2");
  if (features_per_split && *features_per_split < 1)
    throw std::invalid_argument("features_per_split must be >= 1");
}

std::size_t ForestParams::features_for(std::size_t n_features) const {
  if (features_per_split) return std::min(*features_per_split, n_features);
  const auto k = static_cast<std::size_t>(std::sqrt(static_cast<double>(n_features)));
  return std::max<std::size_t>(1, k);
}

const TreeNode& DecisionTree::leaf_for(std::span<const double> values) const {
  const TreeNode* node = &nodes_.front();
  while (!node->is_leaf()) {
    node = &nodes_[values[node->feature] <= node->threshold ? node->left : node->right];
  }
  return *node;
}

std::size_t DecisionTree::depth() const {
  std::vector<std::size_t> depth(nodes_.size(), 0);
  std::size_t deepest = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    deepest = std::max(deepest, depth[i]);
    if (!nodes_[i].is_leaf()) {
      depth[nodes_[i].left] = depth[i] + 1;
      depth[nodes_[i].right] = depth[i] + 1;
    }
  }
  return deepest;
}

RandomForest::RandomForest(std::vector<DecisionTree> trees, ForestParams params,
                           CohortSchema schema)
    : trees_(std::move(trees)), params_(params), schema_(std::move(schema)) {
  for (const auto& t : trees_) {
    if (t.feature_order().size() != schema_.size())
      throw std::invalid_argument("tree feature set differs from forest schema");
  }
}

void RandomForest::check_schema(const CohortSchema& schema) const {
  if (schema.fingerprint() != fingerprint()) {
    throw DataError("schema mismatch: forest was trained on schema " + fingerprint() +
                    ", data has schema " + schema.fingerprint());
  }
}

RngStream tree_stream(std::uint64_t seed, std::size_t index) {
  return RngStream(seed, {0x7472656573ULL, index});
}

namespace {

struct Sample {
  double value;
  int level;
};

double sum_sq_over_n(const LevelCounts& c, double n) {
  double s = 0.0;
  for (auto v : c) s += static_cast<double>(v) * v;
  return s / n;
}

LevelCounts tally(const Cohort& cohort, std::span<const std::size_t> rows) {
  LevelCounts c{};
  for (std::size_t r : rows) ++c[cohort[r].custody_level - kMinLevel];
  return c;
}

// Greedy CART growth by weighted Gini decrease.
class TreeBuilder {
 public:
  TreeBuilder(const Cohort& cohort, const ForestParams& params, RngStream& rng)
      : cohort_(cohort),
        params_(params),
        rng_(rng),
        n_features_(cohort.schema().size()),
        k_features_(params.features_for(n_features_)) {}

  DecisionTree build(std::vector<std::size_t> rows) {
    grow(rows, 0, rows.size(), 0);
    std::vector<std::string> names;
    for (const auto& v : cohort_.schema().variables()) names.push_back(v.name);
    return DecisionTree(std::move(nodes_), std::move(names));
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double score = -std::numeric_limits<double>::infinity();
  };

  int grow(std::vector<std::size_t>& rows, std::size_t begin, std::size_t end,
           std::size_t depth) {
    const std::span<const std::size_t> span(rows.data() + begin, end - begin);
    const int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    TreeNode node;
    node.class_counts = tally(cohort_, span);
    node.n_samples = static_cast<std::uint32_t>(span.size());
    node.impurity = gini(node.class_counts);

    const bool depth_reached = params_.max_depth && depth >= *params_.max_depth;
    if (depth_reached || span.size() < params_.min_samples_split || node.impurity == 0.0) {
      nodes_[id] = node;
      return id;
    }
    const Split split = best_split(span, node.class_counts);
    if (split.feature < 0) {
      nodes_[id] = node;
      return id;
    }
    const auto f = static_cast<std::size_t>(split.feature);
    const auto mid = std::stable_partition(
        rows.begin() + static_cast<std::ptrdiff_t>(begin),
        rows.begin() + static_cast<std::ptrdiff_t>(end),
        [&](std::size_t r) { return cohort_[r].values[f] <= split.threshold; });
    const auto split_at = static_cast<std::size_t>(mid - rows.begin());
    node.feature = split.feature;
    node.threshold = split.threshold;
    nodes_[id] = node;
    const int left = grow(rows, begin, split_at, depth + 1);
    const int right = grow(rows, split_at, end, depth + 1);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
  }

  // Features are visited in a random order. Constant features are skipped
  // without counting toward the per-split budget, and the search continues
  // past the budget until some split strictly lowers impurity. Among
  // equally good splits the earlier schema feature, then the lower
  // threshold, wins.
  Split best_split(std::span<const std::size_t> rows, const LevelCounts& total) {
    const double n = static_cast<double>(rows.size());
    const double parent = sum_sq_over_n(total, n);
    const double tol = 1e-12 * std::max(1.0, n);

    std::vector<std::size_t> order(n_features_);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng_.uniform_index(i)]);
    }

    Split best;
    std::size_t visited = 0;
    for (std::size_t f : order) {
      if (visited >= k_features_ && best.feature >= 0 && best.score - parent > tol) break;
      samples_.clear();
      for (std::size_t r : rows) samples_.push_back({cohort_[r].values[f], cohort_[r].custody_level});
      std::sort(samples_.begin(), samples_.end(),
                [](const Sample& a, const Sample& b) { return a.value < b.value; });
      if (samples_.front().value == samples_.back().value) continue;
      ++visited;

      LevelCounts left{};
      for (std::size_t i = 0; i + 1 < samples_.size(); ++i) {
        ++left[samples_[i].level - kMinLevel];
        const double v = samples_[i].value;
        const double next = samples_[i + 1].value;
        if (v == next) continue;
        LevelCounts right{};
        for (std::size_t c = 0; c < right.size(); ++c) right[c] = total[c] - left[c];
        const double n_left = static_cast<double>(i + 1);
        const double score = sum_sq_over_n(left, n_left) + sum_sq_over_n(right, n - n_left);
        double threshold = v + (next - v) / 2.0;
        if (threshold >= next) threshold = v;
        const int fi = static_cast<int>(f);
        const bool better = score > best.score + tol;
        const bool tie = !better && score >= best.score - tol &&
                         (fi < best.feature || (fi == best.feature && threshold < best.threshold));
        if (better || tie) best = Split{fi, threshold, score};
      }
    }
    if (best.feature < 0 || best.score - parent <= tol) return Split{};
    return best;
  }

  const Cohort& cohort_;
  const ForestParams& params_;
  RngStream& rng_;
  std::size_t n_features_;
  std::size_t k_features_;
  std::vector<TreeNode> nodes_;
  std::vector<Sample> samples_;
};

void require_nonempty(const Cohort& cohort, const char* what) {
  if (cohort.empty()) throw DataError(std::string(what) + ": cohort is empty");
}

}  // namespace

DecisionTree train_tree(const Cohort& cohort, std::span<const std::size_t> rows,
                        const ForestParams& params, RngStream& rng) {
  params.validate();
  if (rows.empty()) throw DataError("train_tree: no training rows");
  TreeBuilder builder(cohort, params, rng);
  return builder.build(std::vector<std::size_t>(rows.begin(), rows.end()));
}

DecisionTree train_tree(const Cohort& cohort, const ForestParams& params, RngStream& rng) {
  require_nonempty(cohort, "train_tree");
  std::vector<std::size_t> rows(cohort.size());
  std::iota(rows.begin(), rows.end(), 0);
  return train_tree(cohort, rows, params, rng);
}

RandomForest train_forest(const Cohort& cohort, const ForestParams& params, unsigned jobs) {
  params.validate();
  require_nonempty(cohort, "train_forest");
  std::vector<DecisionTree> trees(params.n_trees);
  parallel_for(params.n_trees, jobs, [&](std::size_t t) {
    RngStream rng = tree_stream(params.seed, t);
    std::vector<std::size_t> rows(cohort.size());
    if (params.bootstrap) {
      for (auto& r : rows) r = rng.uniform_index(cohort.size());
    } else {
      std::iota(rows.begin(), rows.end(), 0);
    }
    trees[t] = train_tree(cohort, rows, params, rng);
  });
  return RandomForest(std::move(trees), params, cohort.schema());
}

int predict(const RandomForest& forest, std::span<const double> values) {
  if (values.size() != forest.schema().size()) {
    throw DataError("schema mismatch: record has " + std::to_string(values.size()) +
                    " values, forest expects " + std::to_string(forest.schema().size()));
  }
  LevelCounts votes{};
  for (const auto& tree : forest.trees()) ++votes[tree.predict(values) - kMinLevel];
  return majority_level(votes);
}

int predict(const RandomForest& forest, const Record& record) {
  return predict(forest, std::span<const double>(record.values));
}

double accuracy(const RandomForest& forest, const Cohort& cohort) {
  require_nonempty(cohort, "accuracy");
  forest.check_schema(cohort.schema());
  std::size_t hits = 0;
  for (const auto& r : cohort.records()) {
    if (predict(forest, r) == r.custody_level) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(cohort.size());
}

ImportanceMap mdi_importance(const RandomForest& forest) {
  const auto& schema = forest.schema();
  std::vector<double> total(schema.size(), 0.0);
  for (const auto& tree : forest.trees()) {
    const auto& nodes = tree.nodes();
    const double n_root = nodes.front().n_samples;
    for (const auto& node : nodes) {
      if (node.is_leaf()) continue;
      const auto& l = nodes[node.left];
      const auto& r = nodes[node.right];
      const double decrease = node.n_samples * node.impurity - l.n_samples * l.impurity -
                              r.n_samples * r.impurity;
      total[node.feature] += decrease / n_root;
    }
  }
  double sum = 0.0;
  for (auto& v : total) {
    v /= static_cast<double>(forest.trees().size());
    sum += v;
  }
  ImportanceMap out;
  for (std::size_t i = 0; i < schema.size(); ++i) {
    out.push_back({schema.variable(i).name, sum > 0.0 ? total[i] / sum : 0.0});
  }
  return out;
}

ImportanceMap ranked(ImportanceMap importances) {
  std::stable_sort(importances.begin(), importances.end(),
                   [](const auto& a, const auto& b) { return a.weight > b.weight; });
  return importances;
}

TrainTestSplit stratified_split(const Cohort& cohort, double test_fraction,
                                std::uint64_t seed) {
  if (!(test_fraction >= 0.0 && test_fraction < 1.0))
    throw std::invalid_argument("test_fraction must lie in [0, 1)");
  std::vector<bool> in_test(cohort.size(), false);
  for (int level = kMinLevel; level <= kMaxLevel; ++level) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < cohort.size(); ++i) {
      if (cohort[i].custody_level == level) rows.push_back(i);
    }
    RngStream rng(seed, {0x73706c6974ULL, static_cast<std::uint64_t>(level)});
    for (std::size_t i = rows.size(); i > 1; --i) {
      std::swap(rows[i - 1], rows[rng.uniform_index(i)]);
    }
    const auto n_test = static_cast<std::size_t>(
        std::llround(test_fraction * static_cast<double>(rows.size())));
    for (std::size_t i = 0; i < n_test; ++i) in_test[rows[i]] = true;
  }
  TrainTestSplit split{Cohort(cohort.schema()), Cohort(cohort.schema())};
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    (in_test[i] ? split.test : split.train).add(cohort[i]);
  }
  return split;
}

RandomForest train_with_holdout(const Cohort& cohort, const ForestParams& params,
                                double test_fraction, std::uint64_t split_seed,
                                unsigned jobs) {
  auto split = stratified_split(cohort, test_fraction, split_seed);
  RandomForest forest = train_forest(split.train, params, jobs);
  TrainingInfo info;
  info.split_seed = split_seed;
  info.test_fraction = test_fraction;
  info.n_train = split.train.size();
  info.n_test = split.test.size();
  info.held_out_accuracy = split.test.empty() ? 0.0 : accuracy(forest, split.test);
  forest.set_training(info);
  return forest;
}

// ---- Serialization ----

namespace {

using nlohmann::ordered_json;

constexpr std::string_view kFormat = "custody-forest";
constexpr int kFormatVersion = 1;

VariableKind kind_from(std::string_view s) {
  for (auto k : {VariableKind::kBinary, VariableKind::kGroupMember,
                 VariableKind::kQuantitativeInteger, VariableKind::kQuantitativeReal}) {
    if (to_string(k) == s) return k;
  }
  throw DataError("unknown variable kind '" + std::string(s) + "'");
}

VariableRole role_from(std::string_view s) {
  for (auto r : {VariableRole::kProtected, VariableRole::kFeature,
                 VariableRole::kOutcomeAdjacent}) {
    if (to_string(r) == s) return r;
  }
  throw DataError("unknown variable role '" + std::string(s) + "'");
}

ordered_json schema_json(const CohortSchema& schema) {
  ordered_json vars = ordered_json::array();
  for (const auto& v : schema.variables()) {
    ordered_json models = ordered_json::array();
    if (v.models.contains(Model::kInitial)) models.push_back("initial-classification");
    if (v.models.contains(Model::kReclassification)) models.push_back("reclassification");
    ordered_json j;
    j["name"] = v.name;
    j["kind"] = to_string(v.kind);
    j["lo"] = v.domain.lo;
    j["hi"] = std::isinf(v.domain.hi) ? ordered_json(nullptr) : ordered_json(v.domain.hi);
    j["integral"] = v.domain.integral;
    j["role"] = to_string(v.role);
    j["models"] = models;
    if (!v.group.empty()) {
      j["group"] = v.group;
      j["category"] = v.category;
    }
    vars.push_back(j);
  }
  ordered_json groups = ordered_json::array();
  for (const auto& g : schema.groups()) {
    groups.push_back({{"name", g.name}, {"reference", g.reference_label}});
  }
  return {{"variables", vars}, {"groups", groups}};
}

CohortSchema schema_from(const ordered_json& j) {
  std::vector<VariableSpec> vars;
  for (const auto& v : j.at("variables")) {
    VariableSpec s;
    s.name = v.at("name").get<std::string>();
    s.kind = kind_from(v.at("kind").get<std::string>());
    s.domain.lo = v.at("lo").get<double>();
    s.domain.hi = v.at("hi").is_null() ? std::numeric_limits<double>::infinity()
                                       : v.at("hi").get<double>();
    s.domain.integral = v.at("integral").get<bool>();
    s.role = role_from(v.at("role").get<std::string>());
    s.models.bits = 0;
    for (const auto& m : v.at("models")) {
      const auto name = m.get<std::string>();
      if (name == "initial-classification") {
        s.models.bits |= static_cast<std::uint8_t>(Model::kInitial);
      } else if (name == "reclassification") {
        s.models.bits |= static_cast<std::uint8_t>(Model::kReclassification);
      } else {
        throw DataError("unknown model '" + name + "'");
      }
    }
    if (v.contains("group")) {
      s.group = v.at("group").get<std::string>();
      s.category = v.at("category").get<std::string>();
    }
    vars.push_back(std::move(s));
  }
  std::vector<GroupSpec> groups;
  for (const auto& g : j.at("groups")) {
    groups.push_back({g.at("name").get<std::string>(), g.at("reference").get<std::string>()});
  }
  return CohortSchema(std::move(vars), std::move(groups));
}

ordered_json node_json(const DecisionTree& tree, int id) {
  const auto& n = tree.nodes()[id];
  ordered_json j;
  if (n.is_leaf()) {
    j["n_samples"] = n.n_samples;
    j["impurity"] = n.impurity;
    j["class_counts"] = n.class_counts;
    return j;
  }
  j["variable"] = tree.feature_order()[n.feature];
  j["threshold"] = n.threshold;
  j["n_samples"] = n.n_samples;
  j["impurity"] = n.impurity;
  j["class_counts"] = n.class_counts;
  j["left"] = node_json(tree, n.left);
  j["right"] = node_json(tree, n.right);
  return j;
}

int node_from(const ordered_json& j, const CohortSchema& schema,
              std::vector<TreeNode>& nodes) {
  const int id = static_cast<int>(nodes.size());
  nodes.emplace_back();
  TreeNode n;
  n.n_samples = j.at("n_samples").get<std::uint32_t>();
  n.impurity = j.at("impurity").get<double>();
  n.class_counts = j.at("class_counts").get<LevelCounts>();
  if (j.contains("variable")) {
    n.feature = static_cast<int>(schema.index_of(j.at("variable").get<std::string>()));
    n.threshold = j.at("threshold").get<double>();
    nodes[id] = n;
    const int left = node_from(j.at("left"), schema, nodes);
    const int right = node_from(j.at("right"), schema, nodes);
    nodes[id].left = left;
    nodes[id].right = right;
  } else {
    nodes[id] = n;
  }
  return id;
}

}  // namespace

std::string forest_to_json(const RandomForest& forest) {
  const auto& p = forest.params();
  ordered_json params;
  params["n_trees"] = p.n_trees;
  params["max_depth"] = p.max_depth ? ordered_json(*p.max_depth) : ordered_json(nullptr);
  params["min_samples_split"] = p.min_samples_split;
  params["features_per_split"] =
      p.features_per_split ? ordered_json(*p.features_per_split) : ordered_json("sqrt");
  params["bootstrap"] = p.bootstrap;
  params["seed"] = p.seed;

  ordered_json doc;
  doc["format"] = kFormat;
  doc["version"] = kFormatVersion;
  doc["schema_fingerprint"] = forest.fingerprint();
  doc["schema"] = schema_json(forest.schema());
  doc["params"] = params;
  if (const auto& t = forest.training()) {
    doc["training"] = {{"protocol", "stratified-holdout"},
                       {"split_seed", t->split_seed},
                       {"test_fraction", t->test_fraction},
                       {"n_train", t->n_train},
                       {"n_test", t->n_test},
                       {"held_out_accuracy", t->held_out_accuracy}};
  }
  ordered_json trees = ordered_json::array();
  for (const auto& tree : forest.trees()) trees.push_back(node_json(tree, 0));
  doc["trees"] = std::move(trees);
  return doc.dump() + "\n";
}

RandomForest forest_from_json(std::string_view text) {
  try {
    const auto doc = ordered_json::parse(text);
    if (doc.at("format").get<std::string>() != kFormat)
      throw DataError("not a forest document");
    if (doc.at("version").get<int>() != kFormatVersion)
      throw DataError("unsupported forest format version");
    CohortSchema schema = schema_from(doc.at("schema"));
    if (schema.fingerprint() != doc.at("schema_fingerprint").get<std::string>())
      throw DataError("forest schema does not match its recorded fingerprint");

    const auto& pj = doc.at("params");
    ForestParams p;
    p.n_trees = pj.at("n_trees").get<std::size_t>();
    if (!pj.at("max_depth").is_null()) p.max_depth = pj.at("max_depth").get<std::size_t>();
    p.min_samples_split = pj.at("min_samples_split").get<std::size_t>();
    if (!pj.at("features_per_split").is_string())
      p.features_per_split = pj.at("features_per_split").get<std::size_t>();
    p.bootstrap = pj.at("bootstrap").get<bool>();
    p.seed = pj.at("seed").get<std::uint64_t>();

    std::vector<std::string> names;
    for (const auto& v : schema.variables()) names.push_back(v.name);
    std::vector<DecisionTree> trees;
    for (const auto& tj : doc.at("trees")) {
      std::vector<TreeNode> nodes;
      node_from(tj, schema, nodes);
      trees.emplace_back(std::move(nodes), names);
    }
    if (trees.size() != p.n_trees) throw DataError("tree count differs from n_trees");
    RandomForest forest(std::move(trees), p, std::move(schema));
    if (doc.contains("training")) {
      const auto& t = doc.at("training");
      forest.set_training({t.at("split_seed").get<std::uint64_t>(),
                           t.at("test_fraction").get<double>(),
                           t.at("n_train").get<std::size_t>(),
                           t.at("n_test").get<std::size_t>(),
                           t.at("held_out_accuracy").get<double>()});
    }
    return forest;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed forest document: ") + e.what());
  }
}

void save_forest(const std::filesystem::path& path, const RandomForest& forest) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << forest_to_json(forest);
}

RandomForest load_forest(const std::filesystem::path& path, const CohortSchema* expected) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  RandomForest forest = forest_from_json(ss.str());
  if (expected != nullptr) forest.check_schema(*expected);
  return forest;
}

}  // namespace custody
