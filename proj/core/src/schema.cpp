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

#include "custody/schema.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "custody/format.hpp"

namespace custody {

bool Domain::contains(double v) const {
  if (!std::isfinite(v) || v < lo || v > hi) return false;
  return !integral || v == std::floor(v);
}

double Domain::clamp(double v) const { return std::clamp(v, lo, hi); }

double SamplingUnit::read(std::span<const double> values) const {
  if (!is_group) return values[columns.front()];
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (values[columns[i]] == 1.0) return static_cast<double>(i + 1);
  }
  return 0.0;
}

void SamplingUnit::write(double value, std::span<double> values) const {
  if (!is_group) {
    values[columns.front()] = value;
    return;
  }
  const auto code = static_cast<std::size_t>(value);
  for (std::size_t i = 0; i < columns.size(); ++i) {
    values[columns[i]] = (code == i + 1) ? 1.0 : 0.0;
  }
}

std::string SamplingUnit::label(double value) const {
  if (!is_group) return format_double(value);
  const auto code = static_cast<std::size_t>(value);
  return code < labels.size() ? labels[code] : std::string("?");
}

CohortSchema::CohortSchema(std::vector<VariableSpec> variables,
                           std::vector<GroupSpec> groups)
    : variables_(std::move(variables)), groups_(std::move(groups)) {
  std::set<std::string, std::less<>> names;
  for (const auto& v : variables_) {
    if (v.name.empty()) throw std::invalid_argument("variable with empty name");
    if (!names.insert(v.name).second)
      throw std::invalid_argument("duplicate variable name: " + v.name);
    if (v.models.empty())
      throw std::invalid_argument("variable belongs to no model: " + v.name);
    if (v.domain.lo > v.domain.hi)
      throw std::invalid_argument("empty domain for " + v.name);
    const bool member = v.kind == VariableKind::kGroupMember;
    if (member != !v.group.empty())
      throw std::invalid_argument("group membership inconsistent for " + v.name);
  }
  for (const auto& g : groups_) {
    const VariableSpec* first = nullptr;
    for (const auto& v : variables_) {
      if (v.group != g.name) continue;
      if (first == nullptr) {
        first = &v;
        if (!(v.domain == Domain{0.0, 1.0, true}))
          throw std::invalid_argument("one-hot member must be 0/1: " + v.name);
      } else if (v.kind != first->kind || !(v.domain == first->domain)) {
        throw std::invalid_argument("group members disagree: " + v.name);
      }
    }
    if (first == nullptr) throw std::invalid_argument("empty group: " + g.name);
  }
  for (const auto& v : variables_) {
    if (v.group.empty()) continue;
    const bool declared = std::any_of(groups_.begin(), groups_.end(),
                                      [&](const GroupSpec& g) { return g.name == v.group; });
    if (!declared) throw std::invalid_argument("undeclared group: " + v.group);
  }
  build_units();
}

void CohortSchema::build_units() {
  units_.clear();
  std::set<std::string> seen;
  for (std::size_t i = 0; i < variables_.size(); ++i) {
    const auto& v = variables_[i];
    if (v.group.empty()) {
      units_.push_back(SamplingUnit{v.name, {i}, false, {}});
      continue;
    }
    if (!seen.insert(v.group).second) continue;
    SamplingUnit unit{v.group, {}, true, {}};
    const auto g = std::find_if(groups_.begin(), groups_.end(),
                                [&](const GroupSpec& s) { return s.name == v.group; });
    unit.labels.push_back(g->reference_label);
    for (std::size_t j = i; j < variables_.size(); ++j) {
      if (variables_[j].group != v.group) continue;
      unit.columns.push_back(j);
      unit.labels.push_back(variables_[j].category.empty() ? variables_[j].name
                                                           : variables_[j].category);
    }
    units_.push_back(std::move(unit));
  }
}

std::optional<std::size_t> CohortSchema::find(std::string_view name) const {
  for (std::size_t i = 0; i < variables_.size(); ++i) {
    if (variables_[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t CohortSchema::index_of(std::string_view name) const {
  if (auto i = find(name)) return *i;
  throw DataError("unknown variable: " + std::string(name));
}

std::optional<std::size_t> CohortSchema::find_unit(std::string_view name) const {
  for (std::size_t i = 0; i < units_.size(); ++i) {
    if (units_[i].name == name) return i;
  }
  return std::nullopt;
}

CohortSchema CohortSchema::restrict_to(Model model) const {
  std::vector<VariableSpec> kept;
  std::set<std::string> used_groups;
  for (const auto& v : variables_) {
    if (!v.models.contains(model)) continue;
    kept.push_back(v);
    if (!v.group.empty()) used_groups.insert(v.group);
  }
  std::vector<GroupSpec> groups;
  for (const auto& g : groups_) {
    if (used_groups.count(g.name) != 0) groups.push_back(g);
  }
  return CohortSchema(std::move(kept), std::move(groups));
}

std::string CohortSchema::fingerprint() const {
  // FNV-1a over a canonical description.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto feed = [&h](std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    h ^= 0xff;
    h *= 0x100000001b3ULL;
  };
  for (const auto& v : variables_) {
    feed(v.name);
    feed(to_string(v.kind));
    feed(format_double(v.domain.lo));
    feed(std::isinf(v.domain.hi) ? "inf" : format_double(v.domain.hi));
    feed(v.domain.integral ? "int" : "real");
    feed(v.group);
    feed(v.category);
  }
  for (const auto& g : groups_) {
    feed(g.name);
    feed(g.reference_label);
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string_view to_string(VariableKind kind) {
  switch (kind) {
    case VariableKind::kBinary: return "binary";
    case VariableKind::kGroupMember: return "categorical-group-member";
    case VariableKind::kQuantitativeInteger: return "quantitative-integer";
    case VariableKind::kQuantitativeReal: return "quantitative-real";
  }
  return "?";
}

std::string_view to_string(VariableRole role) {
  switch (role) {
    case VariableRole::kProtected: return "protected";
    case VariableRole::kFeature: return "feature";
    case VariableRole::kOutcomeAdjacent: return "outcome-adjacent";
  }
  return "?";
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr Domain kBinaryDomain{0.0, 1.0, true};

VariableSpec binary(std::string name, VariableRole role, ModelSet models) {
  return {std::move(name), VariableKind::kBinary, kBinaryDomain, role, models, "", ""};
}

VariableSpec member(std::string name, std::string group, std::string category,
                    VariableRole role, ModelSet models) {
  return {std::move(name), VariableKind::kGroupMember, kBinaryDomain, role, models,
          std::move(group), std::move(category)};
}

VariableSpec integer(std::string name, double lo, double hi, VariableRole role,
                     ModelSet models) {
  return {std::move(name), VariableKind::kQuantitativeInteger, Domain{lo, hi, true},
          role, models, "", ""};
}

}  // namespace

CohortSchema pact_schema() {
  using R = VariableRole;
  std::vector<VariableSpec> v;
  v.push_back(binary("gender_female", R::kProtected, kBothModels));
  v.push_back(member("age_gt_45", "age_band", "over45", R::kProtected, kIcOnly));
  v.push_back(member("age_lt_25", "age_band", "under25", R::kProtected, kIcOnly));
  v.push_back(integer("age", 14, 120, R::kProtected, kReOnly));
  v.push_back(member("race_B", "race", "Black", R::kProtected, kBothModels));
  v.push_back(member("race_A", "race", "Asian", R::kProtected, kBothModels));
  v.push_back(member("race_H", "race", "Hispanic", R::kProtected, kBothModels));
  v.push_back(member("race_I", "race", "AmericanIndian", R::kProtected, kBothModels));
  v.push_back(member("race_O", "race", "Other", R::kProtected, kBothModels));
  v.push_back(integer("off_1_prs_max", 1, 4, R::kFeature, kBothModels));
  v.push_back(integer("off_1_gs_max", 1, 15, R::kFeature, kBothModels));
  v.push_back(integer("ic_custdy_level", kMinLevel, kMaxLevel, R::kOutcomeAdjacent, kReOnly));
  v.push_back(integer("prior_commits", 0, kInf, R::kFeature, kBothModels));
  v.push_back(integer("ic_institut_adj", 0, 10, R::kFeature, kIcOnly));
  v.push_back(integer("re_discip_reports", 0, kInf, R::kFeature, kReOnly));
  for (int i = 1; i <= 5; ++i) {
    v.push_back(member("escape_hist_" + std::to_string(i), "escape_hist",
                       std::to_string(i), R::kFeature, kBothModels));
  }
  v.push_back(member("mrt_stat_DIV", "mrt_stat", "Divorced", R::kFeature, kIcOnly));
  v.push_back(member("mrt_stat_SEP", "mrt_stat", "Separated", R::kFeature, kIcOnly));
  v.push_back(member("mrt_stat_MAR", "mrt_stat", "Married", R::kFeature, kIcOnly));
  v.push_back(member("mrt_stat_WID", "mrt_stat", "Widowed", R::kFeature, kIcOnly));
  v.push_back(binary("employed", R::kFeature, kIcOnly));

  std::vector<GroupSpec> groups{
      {"age_band", "25to45"},
      {"race", "White"},
      {"escape_hist", "None"},
      {"mrt_stat", "Single"},
  };
  return CohortSchema(std::move(v), std::move(groups));
}

}  // namespace custody
