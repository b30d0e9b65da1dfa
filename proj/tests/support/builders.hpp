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

#ifndef CUSTODY_TESTS_BUILDERS_HPP_
#define CUSTODY_TESTS_BUILDERS_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "custody/dataset.hpp"
#include "custody/forest.hpp"
#include "custody/schema.hpp"

namespace custody::test {

// Binary features x0, x1, ...
CohortSchema binary_schema(std::size_t n);

// Integer features with a shared domain.
CohortSchema integer_schema(const std::vector<std::string>& names, double lo, double hi);

Cohort make_cohort(const CohortSchema& schema, const std::vector<std::vector<double>>& rows,
                   const std::vector<int>& levels);

// A valid record of the full schema: a 30-year-old White single unemployed
// man with no escape history, prs 1, gs 1, adj 0 and level 1, with the
// given variables overwritten.
Record pact_record(const std::map<std::string, double>& values, int level = 1);

Cohort pact_cohort(const std::vector<Record>& records);

TreeNode leaf_node(int level);
TreeNode split_node(int feature, double threshold, int left, int right);

// Node 0 is the root.
DecisionTree hand_tree(const CohortSchema& schema, std::vector<TreeNode> nodes);

RandomForest single_tree_forest(const CohortSchema& schema, std::vector<TreeNode> nodes);

// Predicts `level` everywhere.
RandomForest constant_forest(const CohortSchema& schema, int level);

// One unpruned tree on every record with every feature; reproduces the
// labels whenever equal feature vectors share a label.
RandomForest memorizing_forest(const Cohort& cohort);

// Level 5 iff ic_institut_adj > 6, else 2.
RandomForest adj_step_forest(const CohortSchema& schema);

}  // namespace custody::test

#endif  // CUSTODY_TESTS_BUILDERS_HPP_
