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

#ifndef CUSTODY_RNG_HPP_
#define CUSTODY_RNG_HPP_

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace custody {

// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

// Derives a child seed from a master seed and a path of stream indices.
// Distinct paths give statistically independent streams, so work items can
// be processed in any order (or in parallel) with identical results.
std::uint64_t derive_seed(std::uint64_t seed,
                          std::initializer_list<std::uint64_t> path);

// A reproducible random stream. The engine is std::mt19937_64; the
// distributions are implemented here rather than taken from <random>
// because the standard distributions are implementation-defined and would
// break bit-for-bit reproducibility across standard libraries.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed);
  RngStream(std::uint64_t seed, std::initializer_list<std::uint64_t> path);

  std::uint64_t next();

  // Uniform integer in [0, n). n must be positive.
  std::size_t uniform_index(std::size_t n);

  // Uniform real in [0, 1) with 53 bits of precision.
  double uniform();

  // Uniform real in [lo, hi]; returns lo when lo == hi.
  double uniform(double lo, double hi);

  double normal();

  bool bernoulli(double p);

  // Knuth's multiplication method; fine for the small means used here.
  std::uint32_t poisson(double mean);

 private:
  std::mt19937_64 engine_;
};

}  // namespace custody

#endif  // CUSTODY_RNG_HPP_
