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

#include "custody/counterfactual.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "custody/format.hpp"
#include "custody/parallel.hpp"

namespace custody {

std::string_view to_string(CfClass c) { return c == CfClass::kHigh ? "High" : "Low"; }

std::string CfPoint::to_string() const {
  std::string s = "(";
  for (std::size_t i = 0; i < kCfDims; ++i) {
    if (i) s += ", ";
    s += format_double(coords[i]);
  }
  return s + ")";
}

double taxicab(const CfPoint& p, const CfPoint& q) {
  double d = 0.0;
  for (std::size_t i = 0; i < kCfDims; ++i) d += std::fabs(p.coords[i] - q.coords[i]);
  return d;
}

KnnClassifier::KnnClassifier(std::vector<CfPoint> points, std::vector<CfClass> labels,
                             std::size_t k)
    : points_(std::move(points)), labels_(std::move(labels)), k_(k) {
  if (points_.size() != labels_.size())
    throw std::invalid_argument("knn: points and labels differ in length");
  if (k_ == 0 || k_ % 2 == 0) throw std::invalid_argument("knn: k must be odd");
  if (k_ > points_.size()) throw std::invalid_argument("knn: k exceeds training size");
}

CfClass KnnClassifier::classify(const CfPoint& point) const {
  std::vector<std::pair<double, std::size_t>> dist(points_.size());
  for (std::size_t i = 0; i < points_.size(); ++i) dist[i] = {taxicab(point, points_[i]), i};
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k_), dist.end());
  std::size_t high = 0;
  for (std::size_t i = 0; i < k_; ++i) {
    if (labels_[dist[i].second] == CfClass::kHigh) ++high;
  }
  return 2 * high > k_ ? CfClass::kHigh : CfClass::kLow;
}

std::string Counterfactual::describe_changes() const {
  std::string s;
  for (const auto& c : changes) {
    if (!s.empty()) s += ", ";
    s += std::string(kCfCoordinateNames[c.coordinate]) + ": " + format_double(c.from) + " -> " +
         format_double(c.to);
  }
  return s;
}

std::vector<Counterfactual> find_counterfactuals(const KnnClassifier& knn, const CfPoint& base,
                                                 double max_distance) {
  const CfClass base_class = knn.classify(base);
  std::vector<Counterfactual> out;
  for (int g = 0; g <= 1; ++g) {
    for (int a = 0; a <= 2; ++a) {
      for (int r = 0; r <= 2; ++r) {
        CfPoint candidate = base;
        candidate.coords[0] = g;
        candidate.coords[1] = a;
        candidate.coords[2] = r;
        if (candidate == base) continue;
        const double d = taxicab(base, candidate);
        if (d > max_distance) continue;
        const CfClass c = knn.classify(candidate);
        if (c == base_class) continue;
        Counterfactual cf{base, base_class, candidate, {}, c, d};
        for (std::size_t i = 0; i < kCfProtectedDims; ++i) {
          if (candidate.coords[i] != base.coords[i])
            cf.changes.push_back({i, base.coords[i], candidate.coords[i]});
        }
        out.push_back(std::move(cf));
      }
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& x, const auto& y) {
    if (x.distance != y.distance) return x.distance < y.distance;
    return x.point < y.point;
  });
  return out;
}

CounterfactualRate counterfactual_rate(const KnnClassifier& knn,
                                       std::span<const CfPoint> sample,
                                       double max_distance, unsigned jobs) {
  if (sample.empty()) throw DataError("counterfactual_rate: empty sample");
  std::vector<char> hit(sample.size(), 0);
  parallel_for(sample.size(), jobs, [&](std::size_t i) {
    hit[i] = find_counterfactuals(knn, sample[i], max_distance).empty() ? 0 : 1;
  });
  CounterfactualRate rate;
  rate.sample_size = sample.size();
  rate.hits = static_cast<std::size_t>(std::count(hit.begin(), hit.end(), 1));
  rate.fraction = static_cast<double>(rate.hits) / static_cast<double>(rate.sample_size);
  return rate;
}

std::optional<CfPoint> to_cf_point(const CohortSchema& schema, const Record& record) {
  const std::string race = race_of(schema, record);
  double race_code = 0.0;
  if (race == "Black") {
    race_code = 0.0;
  } else if (race == "Hispanic") {
    race_code = 1.0;
  } else if (race == "White") {
    race_code = 2.0;
  } else {
    return std::nullopt;
  }
  double age_cat = 1.0;
  const auto young = schema.find("age_lt_25");
  const auto old = schema.find("age_gt_45");
  if (young && old) {
    if (record.values[*young] == 1.0) age_cat = 0.0;
    if (record.values[*old] == 1.0) age_cat = 2.0;
  } else {
    const double age = record.values[schema.index_of("age")];
    age_cat = age < 25.0 ? 0.0 : (age > 45.0 ? 2.0 : 1.0);
  }
  const auto value = [&](std::string_view name) { return record.values[schema.index_of(name)]; };
  return CfPoint{{value("gender_female"), age_cat, race_code, value("off_1_prs_max"),
                  value("off_1_gs_max"), value("prior_commits"), value("ic_institut_adj")}};
}

CfClass cf_class(const Record& record) {
  return record.custody_level > 3 ? CfClass::kHigh : CfClass::kLow;
}

KnnClassifier knn_from_cohort(const Cohort& cohort, std::size_t k) {
  std::vector<CfPoint> points;
  std::vector<CfClass> labels;
  for (const auto& r : cohort.records()) {
    if (auto p = to_cf_point(cohort.schema(), r)) {
      points.push_back(*p);
      labels.push_back(cf_class(r));
    }
  }
  return KnnClassifier(std::move(points), std::move(labels), k);
}

std::vector<CfPoint> sample_cf_points(const Cohort& cohort, std::size_t n, std::uint64_t seed) {
  std::vector<CfPoint> eligible;
  for (const auto& r : cohort.records()) {
    if (auto p = to_cf_point(cohort.schema(), r)) eligible.push_back(*p);
  }
  RngStream rng(seed, {0x6366ULL});
  const std::size_t take = std::min(n, eligible.size());
  for (std::size_t i = 0; i < take; ++i) {
    std::swap(eligible[i], eligible[i + rng.uniform_index(eligible.size() - i)]);
  }
  eligible.resize(take);
  return eligible;
}

void write_counterfactuals_csv(std::ostream& out, const std::vector<Counterfactual>& items) {
  out << "base,base_class,changes,new_class,distance\n";
  for (const auto& c : items) {
    out << '"' << c.base.to_string() << "\"," << to_string(c.base_class) << ",\""
        << c.describe_changes() << "\"," << to_string(c.new_class) << ','
        << format_double(c.distance) << '\n';
  }
}

}  // namespace custody
