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

#include <gtest/gtest.h>

#include "custody/format.hpp"

namespace custody {
namespace {

TEST(Format, ShortestRoundTrip) {
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(2.0), "2");
  EXPECT_EQ(format_double(-0.0), "0");
  EXPECT_EQ(format_double(1.0 / 3.0), "0.3333333333333333");
  for (double v : {1e-300, 123456.789, -7.25, 0.2 + 0.1}) {
    EXPECT_EQ(*parse_double(format_double(v)), v);
  }
}

TEST(Format, OptionalIsBlankWhenAbsent) {
  EXPECT_EQ(format_optional(std::nullopt), "");
  EXPECT_EQ(format_optional(0.5), "0.5");
}

TEST(Format, ParseRejectsPartialTokens) {
  EXPECT_FALSE(parse_double("1x"));
  EXPECT_FALSE(parse_double(""));
  EXPECT_FALSE(parse_double("nan"));
  EXPECT_FALSE(parse_double("inf"));
  EXPECT_EQ(*parse_double("-3.5"), -3.5);
  EXPECT_EQ(*parse_double("7"), 7.0);
}

TEST(Format, SplitKeepsEmptyFields) {
  const auto f = split("a,,b,", ',');
  ASSERT_EQ(f.size(), 4u);
  EXPECT_EQ(f[1], "");
  EXPECT_EQ(f[3], "");
  EXPECT_EQ(trim("  x y \t"), "x y");
}

TEST(Format, QuantileType7) {
  // R: quantile(c(1, 2, 3, 4), type = 7)
  const std::vector<double> s{4, 1, 3, 2};
  EXPECT_DOUBLE_EQ(quantile_type7(s, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(quantile_type7(s, 0.25), 1.75);
  EXPECT_DOUBLE_EQ(quantile_type7(s, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(quantile_type7(s, 0.75), 3.25);
  EXPECT_DOUBLE_EQ(quantile_type7(s, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(quantile_type7({5}, 0.3), 5.0);
  EXPECT_THROW(quantile_type7({}, 0.5), std::invalid_argument);
}

}  // namespace
}  // namespace custody
