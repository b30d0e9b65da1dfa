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

#ifndef CUSTODY_FOREST_HPP_
#define CUSTODY_FOREST_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "custody/dataset.hpp"
#include "custody/rng.hpp"

namespace custody {

// Per-level tallies; index 0 is custody level 1.
using LevelCounts = std::array<std::uint32_t, kNumLevels>;

// Gini impurity 1 - sum p_i^2; 0 for empty or pure nodes.
double gini(const LevelCounts& counts);

// Most frequent level, ties toward the lower level. Level 1 when empty.
int majority_level(const LevelCounts& counts);

struct ForestParams {
  std::size_t n_trees = 100;
  std::optional<std::size_t> max_depth;  // nullopt: unlimited
  std::size_t min_samples_split = 2;
  // nullopt: max(1, floor(sqrt(n_features))).
  std::optional<std::size_t> features_per_split;
  bool bootstrap = true;
  std::uint64_t seed = 0;

  void validate() const;
  std::size_t features_for(std::size_t n_features) const;
};

// Flat-array tree node. Internal nodes have feature >= 0 and route
// value <= threshold to `left`.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::uint32_t n_samples = 0;
  double impurity = 0.0;
  LevelCounts class_counts{};

  bool is_leaf() const { return feature < 0; }
};

class DecisionTree {
 public:
  DecisionTree() = default;
  DecisionTree(std::vector<TreeNode> nodes, std::vector<std::string> feature_order)
      : nodes_(std::move(nodes)), feature_order_(std::move(feature_order)) {}

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  const TreeNode& root() const { return nodes_.front(); }
  const std::vector<std::string>& feature_order() const { return feature_order_; }

  const TreeNode& leaf_for(std::span<const double> values) const;
  int predict(std::span<const double> values) const {
    return majority_level(leaf_for(values).class_counts);
  }
  std::size_t depth() const;

 private:
  std::vector<TreeNode> nodes_;
  std::vector<std::string> feature_order_;
};

// Provenance of a forest trained through the stratified hold-out protocol.
struct TrainingInfo {
  std::uint64_t split_seed = 0;
  double test_fraction = 0.2;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  double held_out_accuracy = 0.0;
};

class RandomForest {
 public:
  RandomForest() = default;
  RandomForest(std::vector<DecisionTree> trees, ForestParams params,
               CohortSchema schema);

  const std::vector<DecisionTree>& trees() const { return trees_; }
  const ForestParams& params() const { return params_; }
  const CohortSchema& schema() const { return schema_; }
  std::string fingerprint() const { return schema_.fingerprint(); }

  const std::optional<TrainingInfo>& training() const { return training_; }
  void set_training(TrainingInfo info) { training_ = info; }

  // Throws DataError when `schema` differs from the training schema.
  void check_schema(const CohortSchema& schema) const;

 private:
  std::vector<DecisionTree> trees_;
  ForestParams params_;
  CohortSchema schema_;
  std::optional<TrainingInfo> training_;
};

// Stream used for tree `index` of a forest with master seed `seed`.
RngStream tree_stream(std::uint64_t seed, std::size_t index);

// Grows one CART tree on all records of `cohort` (no resampling).
DecisionTree train_tree(const Cohort& cohort, const ForestParams& params, RngStream& rng);

// Grows one tree on the given row indices (duplicates allowed).
DecisionTree train_tree(const Cohort& cohort, std::span<const std::size_t> rows,
                        const ForestParams& params, RngStream& rng);

// Trees may be grown on up to `jobs` threads; the result does not depend
// on `jobs`.
RandomForest train_forest(const Cohort& cohort, const ForestParams& params,
                          unsigned jobs = 1);

// Modal tree vote, ties toward the lower level. `values` must follow the
// forest's schema order.
int predict(const RandomForest& forest, std::span<const double> values);
int predict(const RandomForest& forest, const Record& record);

double accuracy(const RandomForest& forest, const Cohort& cohort);

struct FeatureImportance {
  std::string name;
  double weight = 0.0;
};

// Mean decrease in impurity, in schema order.
using ImportanceMap = std::vector<FeatureImportance>;

ImportanceMap mdi_importance(const RandomForest& forest);

// Sorted by descending weight, ties by schema order.
ImportanceMap ranked(ImportanceMap importances);

struct TrainTestSplit {
  Cohort train;
  Cohort test;
};

// Stratified by custody level: each level contributes round(fraction * n_level)
// records to the test set.
TrainTestSplit stratified_split(const Cohort& cohort, double test_fraction,
                                std::uint64_t seed);

// Stratified hold-out training; the returned forest carries TrainingInfo.
RandomForest train_with_holdout(const Cohort& cohort, const ForestParams& params,
                                double test_fraction, std::uint64_t split_seed,
                                unsigned jobs = 1);

// ---- Serialization ----

std::string forest_to_json(const RandomForest& forest);
RandomForest forest_from_json(std::string_view text);
void save_forest(const std::filesystem::path& path, const RandomForest& forest);
// When `expected` is given, a mismatched schema fingerprint is a DataError.
RandomForest load_forest(const std::filesystem::path& path,
                         const CohortSchema* expected = nullptr);

}  // namespace custody

#endif  // CUSTODY_FOREST_HPP_
