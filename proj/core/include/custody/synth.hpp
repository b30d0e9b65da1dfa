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

#ifndef CUSTODY_SYNTH_HPP_
#define CUSTODY_SYNTH_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "custody/dataset.hpp"

namespace custody {

// Which outcome the generated custody_level represents.
//  - kInitial: custody_level is the initial classification, and
//    ic_custdy_level equals it.
//  - kReclassification: ic_custdy_level is an initial classification drawn
//    from the default initial latent score, and custody_level is the
//    reclassification outcome driven by the configured coefficients.
enum class SynthTarget { kInitial, kReclassification };

// Configuration of the synthetic cohort generator.
//
// The custody level is 1 + #{c in {1, 2, 3, 4} : c <= latent}, where
//   latent = intercept + sum_v coefficients[v] * value_v + noise * N(0, 1).
// Empty `coefficients` selects the built-in defaults for the target.
struct SynthConfig {
  std::size_t n = 1000;
  std::uint64_t seed = 0;
  SynthTarget target = SynthTarget::kInitial;
  // Category probabilities, keyed by indicator name (race_B, mrt_stat_MAR,
  // escape_hist_1, ...) or binary variable name (gender_female, employed).
  // Unlisted keys keep their defaults. Each one-hot group must sum to <= 1;
  // the remainder is the reference category.
  std::map<std::string, double> weights;
  std::map<std::string, double> coefficients;
  std::optional<double> intercept;
  double noise = 0.5;

  // Throws std::invalid_argument.
  void validate() const;
};

// Default latent coefficients. Initial classification is dominated by
// institutional adjustment, then offense gravity, prior commitments and
// prior record score; reclassification by disciplinary reports, previous
// custody level and (negatively) age.
std::map<std::string, double> default_coefficients(SynthTarget target);
double default_intercept(SynthTarget target);
std::map<std::string, double> default_weights();

// Maps a latent score to a custody level.
int quantize_latent(double latent);

// Deterministic for a fixed config; every record satisfies the Record
// invariants of pact_schema().
Cohort generate_synthetic_cohort(const SynthConfig& config);

// Key-value text: one `key = value` per line, '#' starts a comment.
// Keys: n, seed, target, noise, intercept, weights.<name>, coef.<name>.
SynthConfig parse_synth_config(std::string_view text);
SynthConfig load_synth_config(const std::filesystem::path& path);

// Generic `key = value` reader shared with the command-line front end.
std::map<std::string, std::string> parse_key_values(std::string_view text);

}  // namespace custody

#endif  // CUSTODY_SYNTH_HPP_
