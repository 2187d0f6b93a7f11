/* Copyright 2026 The Lynx Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "lynx/rational.hpp"

#include <gtest/gtest.h>

namespace lynx {
namespace {

TEST(Rational, ParsesIntegersDecimalsFractions) {
  EXPECT_EQ(*rat_parse("42"), Rat(42));
  EXPECT_EQ(*rat_parse("-3"), Rat(-3));
  EXPECT_EQ(*rat_parse("1.5"), Rat(3) / Rat(2));
  EXPECT_EQ(*rat_parse("0.125"), Rat(1) / Rat(8));
  EXPECT_EQ(*rat_parse("2.5e3"), Rat(2500));
  EXPECT_EQ(*rat_parse("25e-1"), Rat(5) / Rat(2));
  EXPECT_EQ(*rat_parse("3/7"), Rat(3) / Rat(7));
  EXPECT_FALSE(rat_parse("abc").has_value());
  EXPECT_FALSE(rat_parse("1/0").has_value());
  EXPECT_FALSE(rat_parse("1.2.3").has_value());
  EXPECT_FALSE(rat_parse("").has_value());
}

TEST(Rational, CanonicalStrings) {
  EXPECT_EQ(rat_to_string(Rat(7)), "7");
  EXPECT_EQ(rat_to_string(Rat(-7)), "-7");
  EXPECT_EQ(rat_to_string(Rat(3) / Rat(2)), "1.5");
  EXPECT_EQ(rat_to_string(Rat(1) / Rat(8)), "0.125");
  EXPECT_EQ(rat_to_string(Rat(1) / Rat(5)), "0.2");
  EXPECT_EQ(rat_to_string(Rat(1) / Rat(3)), "1/3");
  EXPECT_EQ(rat_to_string(Rat(-3) / Rat(2)), "-1.5");
}

TEST(Rational, RoundTripThroughStrings) {
  for (const Rat& r : {Rat(0), Rat(17), Rat(-5) / Rat(4), Rat(22) / Rat(7), Rat(1) / Rat(1000)}) {
    EXPECT_EQ(*rat_parse(rat_to_string(r)), r);
  }
}

TEST(Rational, FixedRendering) {
  EXPECT_EQ(rat_to_fixed(Rat(16), 3), "16.000");
  EXPECT_EQ(rat_to_fixed(Rat(1) / Rat(3), 3), "0.333");
  EXPECT_EQ(rat_to_fixed(Rat(2) / Rat(3), 3), "0.667");
  EXPECT_EQ(rat_to_fixed(Rat(-1) / Rat(2), 3), "-0.500");
  EXPECT_EQ(rat_to_fixed(Rat(1) / Rat(2000), 3), "0.001");  // half rounds away
  EXPECT_EQ(rat_to_fixed(Rat(0), 3), "0.000");
}

TEST(Rational, ExactDoubleConversion) {
  EXPECT_EQ(rat_from_double(0.5), Rat(1) / Rat(2));
  EXPECT_EQ(rat_from_double(3.0), Rat(3));
  // 0.1 is not exactly representable; the conversion captures the double.
  Rat r = rat_from_double(0.1);
  EXPECT_EQ(rat_to_double(r), 0.1);
  EXPECT_NE(r, Rat(1) / Rat(10));
}

}  // namespace
}  // namespace lynx
