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
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include <boost/multiprecision/cpp_int.hpp>

namespace lynx {

// All solver and simulator arithmetic is exact. Times are rational
// microseconds, memory is integral bytes; floats appear only when a report
// is rendered.
using BigInt = boost::multiprecision::cpp_int;
using Rat = boost::multiprecision::cpp_rational;

inline BigInt rat_num(const Rat& r) { return boost::multiprecision::numerator(r); }
inline BigInt rat_den(const Rat& r) { return boost::multiprecision::denominator(r); }

/// Parses a decimal literal ("42", "-1.5", "2.5e3") or a fraction ("3/7")
/// into an exact rational. Returns nullopt on malformed input.
std::optional<Rat> rat_parse(std::string_view text);

/// Exact conversion of a finite double (doubles are dyadic rationals).
Rat rat_from_double(double v);

/// Canonical text form: integer if integral, terminating decimal if the
/// denominator is of the form 2^a*5^b, otherwise "num/den".
std::string rat_to_string(const Rat& r);

/// Decimal rendering with exactly `digits` fractional digits, rounding
/// half away from zero. Used by reports and trace emitters.
std::string rat_to_fixed(const Rat& r, int digits = 3);

/// Nearest double, for trace formats that require JSON numbers.
double rat_to_double(const Rat& r);

inline Rat rat_min(const Rat& a, const Rat& b) { return a < b ? a : b; }
inline Rat rat_max(const Rat& a, const Rat& b) { return a < b ? b : a; }

}  // namespace lynx
