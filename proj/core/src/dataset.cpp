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

#include "custody/dataset.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "custody/format.hpp"

namespace custody {

namespace {

std::string domain_text(const Domain& d) {
  std::string hi = std::isinf(d.hi) ? "inf" : format_double(d.hi);
  return "[" + format_double(d.lo) + ", " + hi + "]" + (d.integral ? " (integer)" : "");
}

}  // namespace

void validate_record(const CohortSchema& schema, const Record& record) {
  if (record.values.size() != schema.size()) {
    throw DataError("record has " + std::to_string(record.values.size()) +
                    " values, schema has " + std::to_string(schema.size()));
  }
  if (record.custody_level < kMinLevel || record.custody_level > kMaxLevel) {
    throw DataError("column 'custody_level': value " +
                    std::to_string(record.custody_level) + " outside 1..5");
  }
  for (std::size_t i = 0; i < schema.size(); ++i) {
    const auto& spec = schema.variable(i);
    if (!spec.domain.contains(record.values[i])) {
      throw DataError("column '" + spec.name + "': value " +
                      format_double(record.values[i]) + " outside domain " +
                      domain_text(spec.domain));
    }
  }
  for (const auto& unit : schema.units()) {
    if (!unit.is_group) continue;
    const std::string* first = nullptr;
    for (std::size_t c : unit.columns) {
      if (record.values[c] != 1.0) continue;
      if (first != nullptr) {
        throw DataError("one-hot violation in group '" + unit.name + "': " + *first +
                        " and " + schema.variable(c).name + " both set");
      }
      first = &schema.variable(c).name;
    }
  }
  const auto older = schema.find("age_gt_45");
  const auto younger = schema.find("age_lt_25");
  if (older && younger && record.values[*older] == 1.0 &&
      record.values[*younger] == 1.0) {
    throw DataError("age_gt_45 and age_lt_25 both set");
  }
}

Cohort::Cohort(CohortSchema schema, std::vector<Record> records)
    : schema_(std::move(schema)), records_(std::move(records)) {
  for (std::size_t i = 0; i < records_.size(); ++i) {
    try {
      validate_record(schema_, records_[i]);
    } catch (const DataError& e) {
      throw DataError("record " + std::to_string(i) + ": " + e.what());
    }
  }
}

void Cohort::add(Record record) {
  validate_record(schema_, record);
  records_.push_back(std::move(record));
}

// ---- CSV ----

Cohort read_cohort(std::istream& in, const CohortSchema& schema,
                   std::string_view source) {
  const std::string where(source);
  std::string line;
  if (!std::getline(in, line)) throw DataError(where + ": missing header row");
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);

  const auto header = split(trim(line), ',');
  std::map<std::string, std::size_t, std::less<>> column;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const std::string name(trim(header[i]));
    if (!column.emplace(name, i).second)
      throw DataError(where + ": duplicate column '" + name + "'");
  }
  std::vector<std::size_t> source_col(schema.size());
  for (std::size_t i = 0; i < schema.size(); ++i) {
    const auto it = column.find(schema.variable(i).name);
    if (it == column.end())
      throw DataError(where + ": missing column '" + schema.variable(i).name + "'");
    source_col[i] = it->second;
  }
  const auto level_it = column.find("custody_level");
  if (level_it == column.end())
    throw DataError(where + ": missing column 'custody_level'");
  const auto override_it = column.find("override_to_higher");

  Cohort cohort(schema);
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const std::string at = where + ": row " + std::to_string(row) + ": ";
    const auto fields = split(trim(line), ',');
    if (fields.size() != header.size()) {
      throw DataError(at + "expected " + std::to_string(header.size()) +
                      " fields, found " + std::to_string(fields.size()));
    }
    Record record;
    record.values.resize(schema.size());
    for (std::size_t i = 0; i < schema.size(); ++i) {
      const auto& text = fields[source_col[i]];
      const auto v = parse_double(text);
      if (!v) {
        throw DataError(at + "column '" + schema.variable(i).name +
                        "': unparseable value '" + std::string(trim(text)) + "'");
      }
      record.values[i] = *v;
    }
    const auto level = parse_double(fields[level_it->second]);
    if (!level || *level != static_cast<int>(*level)) {
      throw DataError(at + "column 'custody_level': invalid value '" +
                      std::string(trim(fields[level_it->second])) + "'");
    }
    record.custody_level = static_cast<int>(*level);
    if (override_it != column.end()) {
      const auto text = trim(fields[override_it->second]);
      if (text == "1") {
        record.override_to_higher = true;
      } else if (text == "0") {
        record.override_to_higher = false;
      } else if (!text.empty()) {
        throw DataError(at + "column 'override_to_higher': invalid value '" +
                        std::string(text) + "'");
      }
    }
    try {
      cohort.add(std::move(record));
    } catch (const DataError& e) {
      throw DataError(at + e.what());
    }
  }
  return cohort;
}

Cohort load_cohort(const std::filesystem::path& path, const CohortSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return read_cohort(in, schema, path.string());
}

void write_cohort(std::ostream& out, const Cohort& cohort) {
  const auto& schema = cohort.schema();
  for (const auto& v : schema.variables()) out << v.name << ',';
  out << "custody_level,override_to_higher\n";
  for (const auto& r : cohort.records()) {
    for (double v : r.values) out << format_double(v) << ',';
    out << r.custody_level << ',';
    if (r.override_to_higher) out << (*r.override_to_higher ? '1' : '0');
    out << '\n';
  }
}

void save_cohort(const std::filesystem::path& path, const Cohort& cohort) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  write_cohort(out, cohort);
}

// ---- Stratification ----

std::string StratumKey::to_string() const {
  std::string s;
  if (level) s = "level=" + std::to_string(*level);
  if (race) s += (s.empty() ? "" : "|") + std::string("race=") + *race;
  return s.empty() ? "all" : s;
}

std::string race_of(const CohortSchema& schema, const Record& record) {
  const auto unit = schema.find_unit("race");
  if (!unit) throw DataError("schema has no race group");
  const auto& u = schema.units()[*unit];
  return u.label(u.read(record.values));
}

std::map<StratumKey, Cohort> stratify(const Cohort& cohort, StratifyBy key) {
  std::map<StratumKey, Cohort> strata;
  for (const auto& r : cohort.records()) {
    StratumKey k;
    if (key != StratifyBy::kRace) k.level = r.custody_level;
    if (key != StratifyBy::kCustodyLevel) k.race = race_of(cohort.schema(), r);
    auto it = strata.try_emplace(k, cohort.schema()).first;
    it->second.add(r);
  }
  return strata;
}

Cohort select(const Cohort& cohort, const StratumKey& key) {
  Cohort out(cohort.schema());
  for (const auto& r : cohort.records()) {
    if (key.level && r.custody_level != *key.level) continue;
    if (key.race && race_of(cohort.schema(), r) != *key.race) continue;
    out.add(r);
  }
  return out;
}

// ---- Multisets ----

std::size_t Multiset::count(double value) const {
  const auto it = counts.find(value);
  return it == counts.end() ? 0 : it->second;
}

double Multiset::draw(RngStream& rng) const {
  if (size == 0) throw DataError("cannot sample from empty multiset '" + unit.name + "'");
  std::size_t pick = rng.uniform_index(size);
  for (const auto& [value, n] : counts) {
    if (pick < n) return value;
    pick -= n;
  }
  return counts.rbegin()->first;  // unreachable
}

std::map<std::string, std::size_t> Multiset::labeled() const {
  std::map<std::string, std::size_t> out;
  for (const auto& [value, n] : counts) out[unit.label(value)] += n;
  return out;
}

Multiset multiset(const Cohort& stratum, std::string_view variable) {
  const auto& schema = stratum.schema();
  const auto index = schema.find_unit(variable);
  if (!index) {
    // A one-hot member is not a sampling unit on its own.
    throw DataError("unknown variable or group: " + std::string(variable));
  }
  Multiset m{schema.units()[*index], {}, 0};
  for (const auto& r : stratum.records()) {
    ++m.counts[m.unit.read(r.values)];
    ++m.size;
  }
  return m;
}

std::vector<Multiset> multisets(const Cohort& stratum) {
  std::vector<Multiset> out;
  for (const auto& unit : stratum.schema().units()) {
    out.push_back(multiset(stratum, unit.name));
  }
  return out;
}

// ---- Views ----

Cohort project(const Cohort& cohort, const CohortSchema& target) {
  std::vector<std::size_t> source(target.size());
  for (std::size_t i = 0; i < target.size(); ++i) {
    const auto& name = target.variable(i).name;
    const auto idx = cohort.schema().find(name);
    if (!idx) throw DataError("cohort lacks required variable '" + name + "'");
    source[i] = *idx;
  }
  std::vector<Record> records;
  records.reserve(cohort.size());
  for (const auto& r : cohort.records()) {
    Record out;
    out.values.reserve(target.size());
    for (std::size_t s : source) out.values.push_back(r.values[s]);
    out.custody_level = r.custody_level;
    out.override_to_higher = r.override_to_higher;
    records.push_back(std::move(out));
  }
  return Cohort(target, std::move(records));
}

Cohort model_view(const Cohort& cohort, Model model) {
  return project(cohort, pact_schema().restrict_to(model));
}

}  // namespace custody
