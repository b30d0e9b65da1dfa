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

#ifndef CUSTODY_TESTS_CF_ORACLE_HPP_
#define CUSTODY_TESTS_CF_ORACLE_HPP_

#include <vector>

#include "custody/counterfactual.hpp"

namespace custody::test {

// Full sort of all training points by (distance, index), majority of the
// first k.
CfClass brute_force_classify(const KnnClassifier& knn, const CfPoint& point);

// Enumerates the 18 protected combinations, drops the base, classifies each
// with brute_force_classify and keeps the flips within max_distance, ordered
// by (distance, point).
std::vector<Counterfactual> brute_force_counterfactuals(const KnnClassifier& knn,
                                                        const CfPoint& base,
                                                        double max_distance);

// Random grid point: gender 0..1, age_cat 0..2, race 0..2, prs 1..4,
// gs 1..15, commits 0..5, adj 0..10.
template <class Rng>
CfPoint random_cf_point(Rng& rng) {
  CfPoint p;
  p.coords = {static_cast<double>(rng.uniform_index(2)),
              static_cast<double>(rng.uniform_index(3)),
              static_cast<double>(rng.uniform_index(3)),
              1.0 + static_cast<double>(rng.uniform_index(4)),
              1.0 + static_cast<double>(rng.uniform_index(15)),
              static_cast<double>(rng.uniform_index(6)),
              static_cast<double>(rng.uniform_index(11))};
  return p;
}

}  // namespace custody::test

#endif  // CUSTODY_TESTS_CF_ORACLE_HPP_
