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

#include <cctype>
#include <cmath>
#include <cstdlib>

namespace lynx {

namespace {

BigInt pow10(unsigned n) {
  BigInt r = 1;
  for (unsigned i = 0; i < n; ++i) r *= 10;
  return r;
}

std::optional<Rat> parse_decimal(std::string_view s) {
  std::size_t pos = 0;
  bool neg = false;
  if (pos < s.size() && (s[pos] == '+' || s[pos] == '-')) {
    neg = (s[pos] == '-');
    ++pos;
  }
  BigInt mantissa = 0;
  int frac_digits = 0;
  bool any_digit = false;
  for (; pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos])); ++pos) {
    mantissa = mantissa * 10 + (s[pos] - '0');
    any_digit = true;
  }
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    for (; pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos])); ++pos) {
      mantissa = mantissa * 10 + (s[pos] - '0');
      ++frac_digits;
      any_digit = true;
    }
  }
  if (!any_digit) return std::nullopt;
  long exp10 = 0;
  if (pos < s.size() && (s[pos] == 'e' || s[pos] == 'E')) {
    ++pos;
    bool eneg = false;
    if (pos < s.size() && (s[pos] == '+' || s[pos] == '-')) {
      eneg = (s[pos] == '-');
      ++pos;
    }
    if (pos >= s.size()) return std::nullopt;
    long e = 0;
    for (; pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos])); ++pos) {
      e = e * 10 + (s[pos] - '0');
      if (e > 100000) return std::nullopt;
    }
    exp10 = eneg ? -e : e;
  }
  if (pos != s.size()) return std::nullopt;
  long net = exp10 - frac_digits;
  Rat r(mantissa);
  if (net > 0) {
    r *= Rat(pow10(static_cast<unsigned>(net)));
  } else if (net < 0) {
    r /= Rat(pow10(static_cast<unsigned>(-net)));
  }
  if (neg) r = -r;
  return r;
}

}  // namespace

std::optional<Rat> rat_parse(std::string_view text) {
  auto slash = text.find('/');
  if (slash != std::string_view::npos) {
    auto num = parse_decimal(text.substr(0, slash));
    auto den = parse_decimal(text.substr(slash + 1));
    if (!num || !den || *den == 0) return std::nullopt;
    if (rat_den(*num) != 1 || rat_den(*den) != 1) return std::nullopt;
    return *num / *den;
  }
  return parse_decimal(text);
}

Rat rat_from_double(double v) {
  if (!std::isfinite(v)) return Rat(0);
  return Rat(v);  // exact: every finite double is a dyadic rational
}

std::string rat_to_string(const Rat& r) {
  BigInt num = rat_num(r);
  BigInt den = rat_den(r);
  if (den == 1) return num.str();
  // Terminating decimal iff den = 2^a * 5^b.
  BigInt d = den;
  unsigned a = 0, b = 0;
  while (d % 2 == 0) { d /= 2; ++a; }
  while (d % 5 == 0) { d /= 5; ++b; }
  if (d == 1) {
    unsigned digits = a > b ? a : b;
    BigInt scaled = num * pow10(digits) / den;
    bool neg = scaled < 0;
    if (neg) scaled = -scaled;
    std::string s = scaled.str();
    if (s.size() <= digits) s.insert(0, digits + 1 - s.size(), '0');
    s.insert(s.size() - digits, ".");
    return (neg ? "-" : "") + s;
  }
  return num.str() + "/" + den.str();
}

std::string rat_to_fixed(const Rat& r, int digits) {
  BigInt scale = pow10(static_cast<unsigned>(digits));
  BigInt num = rat_num(r) * scale * 2;
  BigInt den = rat_den(r);
  bool neg = num < 0;
  if (neg) num = -num;
  BigInt scaled = (num / den + 1) / 2;  // round half away from zero
  std::string s = scaled.str();
  if (digits > 0) {
    if (s.size() <= static_cast<std::size_t>(digits))
      s.insert(0, static_cast<std::size_t>(digits) + 1 - s.size(), '0');
    s.insert(s.size() - static_cast<std::size_t>(digits), ".");
  }
  return (neg && scaled != 0 ? "-" : "") + s;
}

double rat_to_double(const Rat& r) { return static_cast<double>(r); }

}  // namespace lynx
