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

#ifndef CUSTODY_SCHEMA_HPP_
#define CUSTODY_SCHEMA_HPP_

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace custody {

// Raised for invalid input data: malformed files, out-of-domain values,
// schema mismatches. Programming errors use std::invalid_argument.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kMinLevel = 1;
inline constexpr int kMaxLevel = 5;
inline constexpr int kNumLevels = kMaxLevel - kMinLevel + 1;

enum class VariableKind {
  kBinary,
  kGroupMember,  // one indicator of a one-hot family
  kQuantitativeInteger,
  kQuantitativeReal,
};

enum class VariableRole { kProtected, kFeature, kOutcomeAdjacent };

// Which surrogate models use a variable.
enum class Model : std::uint8_t {
  kInitial = 1,
  kReclassification = 2,
};

struct ModelSet {
  std::uint8_t bits = 0;

  bool contains(Model m) const { return (bits & static_cast<std::uint8_t>(m)) != 0; }
  bool empty() const { return bits == 0; }
};

inline constexpr ModelSet kIcOnly{1};
inline constexpr ModelSet kReOnly{2};
inline constexpr ModelSet kBothModels{3};

// Closed interval, optionally restricted to integers. Binary variables are
// the integral interval [0, 1].
struct Domain {
  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
  bool integral = true;

  bool contains(double v) const;
  double clamp(double v) const;
  bool operator==(const Domain&) const = default;
};

struct VariableSpec {
  std::string name;
  VariableKind kind = VariableKind::kQuantitativeInteger;
  Domain domain;
  VariableRole role = VariableRole::kFeature;
  ModelSet models = kBothModels;
  std::string group;     // one-hot family label; empty for standalone variables
  std::string category;  // category this indicator encodes, e.g. "Black"

  bool quantitative() const {
    return kind == VariableKind::kQuantitativeInteger ||
           kind == VariableKind::kQuantitativeReal;
  }
};

struct GroupSpec {
  std::string name;
  std::string reference_label;  // category encoded by an all-zero row
};

// The atomic unit of sampling and perturbation: either one standalone
// variable, or a whole one-hot group (whose value is a category code:
// 0 = reference, i = i-th member).
struct SamplingUnit {
  std::string name;
  std::vector<std::size_t> columns;
  bool is_group = false;
  std::vector<std::string> labels;  // groups only; labels[0] is the reference

  double read(std::span<const double> values) const;
  void write(double value, std::span<double> values) const;
  std::string label(double value) const;
};

class CohortSchema {
 public:
  CohortSchema() = default;
  CohortSchema(std::vector<VariableSpec> variables, std::vector<GroupSpec> groups);

  std::size_t size() const { return variables_.size(); }
  const std::vector<VariableSpec>& variables() const { return variables_; }
  const VariableSpec& variable(std::size_t i) const { return variables_.at(i); }
  const std::vector<GroupSpec>& groups() const { return groups_; }

  std::optional<std::size_t> find(std::string_view name) const;
  // Throws DataError naming the variable when absent.
  std::size_t index_of(std::string_view name) const;
  bool has(std::string_view name) const { return find(name).has_value(); }

  const std::vector<SamplingUnit>& units() const { return units_; }
  // Looks a unit up by variable name or group label.
  std::optional<std::size_t> find_unit(std::string_view name) const;

  // Subset of variables used by `model`, order preserved.
  CohortSchema restrict_to(Model model) const;

  // 16 hex digits; stable across runs and platforms.
  std::string fingerprint() const;

  bool operator==(const CohortSchema& other) const {
    return fingerprint() == other.fingerprint();
  }

 private:
  void build_units();

  std::vector<VariableSpec> variables_;
  std::vector<GroupSpec> groups_;
  std::vector<SamplingUnit> units_;
};

// The full variable schema of the custody-classification data: 25 variables
// covering both the initial-classification and reclassification models.
CohortSchema pact_schema();

std::string_view to_string(VariableKind kind);
std::string_view to_string(VariableRole role);

}  // namespace custody

#endif  // CUSTODY_SCHEMA_HPP_
