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

#ifndef CUSTODY_DATASET_HPP_
#define CUSTODY_DATASET_HPP_

#include <compare>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "custody/rng.hpp"
#include "custody/schema.hpp"

namespace custody {

// One person-observation. `values` is indexed by schema position.
struct Record {
  std::vector<double> values;
  int custody_level = kMinLevel;
  std::optional<bool> override_to_higher;  // recorded decision, never modeled

  bool operator==(const Record&) const = default;
};

// Throws DataError describing the first violated invariant.
void validate_record(const CohortSchema& schema, const Record& record);

// A schema plus records that all validate against it. Immutable once built,
// apart from append-only construction through add().
class Cohort {
 public:
  Cohort() = default;
  explicit Cohort(CohortSchema schema) : schema_(std::move(schema)) {}
  Cohort(CohortSchema schema, std::vector<Record> records);

  void add(Record record);

  const CohortSchema& schema() const { return schema_; }
  const std::vector<Record>& records() const { return records_; }
  const Record& operator[](std::size_t i) const { return records_[i]; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  double value(std::size_t row, std::string_view variable) const {
    return records_[row].values[schema_.index_of(variable)];
  }

  bool operator==(const Cohort&) const = default;

 private:
  CohortSchema schema_;
  std::vector<Record> records_;
};

// ---- CSV interchange ----

Cohort read_cohort(std::istream& in, const CohortSchema& schema,
                   std::string_view source = "<stream>");
Cohort load_cohort(const std::filesystem::path& path, const CohortSchema& schema);
void write_cohort(std::ostream& out, const Cohort& cohort);
void save_cohort(const std::filesystem::path& path, const Cohort& cohort);

// ---- Stratification ----

enum class StratifyBy { kCustodyLevel, kRace, kCustodyLevelAndRace };

struct StratumKey {
  std::optional<int> level;
  std::optional<std::string> race;

  std::string to_string() const;
  auto operator<=>(const StratumKey&) const = default;
};

// Category label of the record's race group ("White" for the all-zero row).
std::string race_of(const CohortSchema& schema, const Record& record);

std::map<StratumKey, Cohort> stratify(const Cohort& cohort, StratifyBy key);

// Records whose custody level (and race, when given) match.
Cohort select(const Cohort& cohort, const StratumKey& key);

// ---- Multisets ----

// Bag of observed values of one sampling unit within a stratum. For one-hot
// groups the values are category codes; label() decodes them.
struct Multiset {
  SamplingUnit unit;
  std::map<double, std::size_t> counts;
  std::size_t size = 0;

  bool contains(double value) const { return counts.count(value) != 0; }
  std::size_t count(double value) const;
  // Uniform draw over the bag (each occurrence equally likely).
  double draw(RngStream& rng) const;
  std::map<std::string, std::size_t> labeled() const;
};

// `variable` is a standalone variable name or a one-hot group label.
Multiset multiset(const Cohort& stratum, std::string_view variable);

// One multiset per sampling unit of the stratum's schema.
std::vector<Multiset> multisets(const Cohort& stratum);

// ---- Model views ----

// Restricts to the variables of one surrogate model: numeric age and
// disciplinary reports for reclassification, age bands, marital status and
// employment for initial classification.
Cohort model_view(const Cohort& cohort, Model model);
inline Cohort reclass_view(const Cohort& cohort) {
  return model_view(cohort, Model::kReclassification);
}
inline Cohort initial_view(const Cohort& cohort) {
  return model_view(cohort, Model::kInitial);
}

// Re-expresses `cohort` over `target` (matching variables by name).
Cohort project(const Cohort& cohort, const CohortSchema& target);

}  // namespace custody

#endif  // CUSTODY_DATASET_HPP_
