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

#ifndef CUSTODY_FORMAT_HPP_
#define CUSTODY_FORMAT_HPP_

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace custody {

// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

// Empty string for nullopt.
std::string format_optional(const std::optional<double>& value);

// Parses a complete numeric token; nullopt on any trailing garbage.
std::optional<double> parse_double(std::string_view text);

std::vector<std::string> split(std::string_view text, char delimiter);

std::string_view trim(std::string_view text);

// Linear-interpolation quantile (Hyndman-Fan type 7) of an unsorted sample.
double quantile_type7(std::vector<double> sample, double probability);

}  // namespace custody

#endif  // CUSTODY_FORMAT_HPP_
