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

#ifndef CUSTODY_COUNTERFACTUAL_HPP_
#define CUSTODY_COUNTERFACTUAL_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "custody/dataset.hpp"

namespace custody {

enum class CfClass { kLow, kHigh };  // custody level <= 3 / > 3

std::string_view to_string(CfClass c);

inline constexpr std::size_t kCfDims = 7;
inline constexpr std::size_t kCfProtectedDims = 3;  // leading coordinates

inline constexpr std::array<std::string_view, kCfDims> kCfCoordinateNames = {
    "gender_female", "age_cat", "race", "off_1_prs_max",
    "off_1_gs_max", "prior_commits", "ic_institut_adj"};

// (gender_female, age_cat, race, prior record, gravity, prior commitments,
// institutional adjustment). age_cat: 0 under 25, 1 for 25..45, 2 over 45.
// race: 0 Black, 1 Hispanic, 2 White.
struct CfPoint {
  std::array<double, kCfDims> coords{};

  double gender_female() const { return coords[0]; }
  double age_cat() const { return coords[1]; }
  double race() const { return coords[2]; }

  std::string to_string() const;  // "(0, 1, 2, 3, 15, 0, 2)"
  auto operator<=>(const CfPoint&) const = default;
};

// Unscaled L1 distance over all seven coordinates.
double taxicab(const CfPoint& p, const CfPoint& q);

class KnnClassifier {
 public:
  // k must be odd and no larger than the training set.
  KnnClassifier(std::vector<CfPoint> points, std::vector<CfClass> labels, std::size_t k = 5);

  // Majority class of the k nearest points; distance ties go to the earlier
  // training point.
  CfClass classify(const CfPoint& point) const;

  std::size_t k() const { return k_; }
  std::size_t size() const { return points_.size(); }
  const std::vector<CfPoint>& points() const { return points_; }
  const std::vector<CfClass>& labels() const { return labels_; }

 private:
  std::vector<CfPoint> points_;
  std::vector<CfClass> labels_;
  std::size_t k_;
};

struct CoordinateChange {
  std::size_t coordinate = 0;
  double from = 0.0;
  double to = 0.0;
};

struct Counterfactual {
  CfPoint base;
  CfClass base_class = CfClass::kLow;
  CfPoint point;
  std::vector<CoordinateChange> changes;
  CfClass new_class = CfClass::kLow;
  double distance = 0.0;

  std::string describe_changes() const;  // "age_cat: 1 -> 0, race: 2 -> 1"
};

// Grid search over the 17 other (gender, age_cat, race) combinations with the
// quantitative coordinates held fixed. Keeps flipped classifications within
// max_distance, sorted by distance and then lexicographically.
std::vector<Counterfactual> find_counterfactuals(const KnnClassifier& knn, const CfPoint& base,
                                                 double max_distance = 3.0);

struct CounterfactualRate {
  std::size_t sample_size = 0;
  std::size_t hits = 0;
  double fraction = 0.0;
};

CounterfactualRate counterfactual_rate(const KnnClassifier& knn,
                                       std::span<const CfPoint> sample,
                                       double max_distance = 3.0, unsigned jobs = 1);

// nullopt for races outside Black, Hispanic and White.
std::optional<CfPoint> to_cf_point(const CohortSchema& schema, const Record& record);
CfClass cf_class(const Record& record);

// All eligible records of the cohort, in row order.
KnnClassifier knn_from_cohort(const Cohort& cohort, std::size_t k = 5);

// Uniform sample without replacement of eligible records (all of them when
// fewer than n).
std::vector<CfPoint> sample_cf_points(const Cohort& cohort, std::size_t n, std::uint64_t seed);

// base,base_class,changes,new_class,distance
void write_counterfactuals_csv(std::ostream& out, const std::vector<Counterfactual>& items);

}  // namespace custody

#endif  // CUSTODY_COUNTERFACTUAL_HPP_
