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
#include "lynx/ilp.hpp"

#include <cstdint>
#include <limits>

namespace lynx {

namespace {

struct ScaledConstraint {
  // Pure-boolean constraints scaled to int64 for fast rejection.
  std::vector<std::pair<int, std::int64_t>> terms;
  std::int64_t rhs_minus_const = 0;
  Rel rel = Rel::Le;
  bool usable = false;
};

bool fits_int64(const BigInt& v) {
  static const BigInt lo = std::numeric_limits<std::int64_t>::min();
  static const BigInt hi = std::numeric_limits<std::int64_t>::max();
  return v >= lo && v <= hi;
}

ScaledConstraint scale_bool_constraint(const IlpModel& model, const Constraint& c) {
  ScaledConstraint sc;
  sc.rel = c.rel;
  BigInt lcm = 1;
  for (const auto& [vi, coef] : c.lhs.terms()) {
    if (model.var_kind(vi) != VarKind::Bool) return sc;
    lcm = boost::multiprecision::lcm(lcm, rat_den(coef));
  }
  lcm = boost::multiprecision::lcm(lcm, rat_den(c.rhs));
  lcm = boost::multiprecision::lcm(lcm, rat_den(c.lhs.constant()));
  BigInt mag_sum = 0;
  std::vector<std::pair<int, BigInt>> scaled;
  for (const auto& [vi, coef] : c.lhs.terms()) {
    BigInt s = rat_num(coef) * (lcm / rat_den(coef));
    mag_sum += boost::multiprecision::abs(s);
    scaled.emplace_back(vi, s);
  }
  BigInt rhs = rat_num(c.rhs) * (lcm / rat_den(c.rhs)) -
               rat_num(c.lhs.constant()) * (lcm / rat_den(c.lhs.constant()));
  if (!fits_int64(mag_sum) || !fits_int64(rhs)) return sc;
  for (auto& [vi, s] : scaled) sc.terms.emplace_back(vi, static_cast<std::int64_t>(s));
  sc.rhs_minus_const = static_cast<std::int64_t>(rhs);
  sc.usable = true;
  return sc;
}

}  // namespace

Solution solve_exhaustive(const IlpModel& model, int max_bool_vars) {
  const int n = model.var_count();
  std::vector<int> free_bools;
  std::vector<Rat> base(n, 0);
  std::vector<bool> known(n, false);
  for (int i = 0; i < n; ++i) {
    if (model.lower_bound(i) == model.upper_bound(i)) {
      base[i] = model.lower_bound(i);
      known[i] = true;
    } else if (model.var_kind(i) == VarKind::Bool) {
      free_bools.push_back(i);
    }
  }
  const int k = static_cast<int>(free_bools.size());
  if (k > max_bool_vars)
    throw TooLarge("model has " + std::to_string(k) + " free boolean variables, limit " +
                   std::to_string(max_bool_vars));

  // Split constraints: fast pure-boolean screens first, the rest exact.
  std::vector<ScaledConstraint> fast;
  std::vector<const Constraint*> slow;
  std::vector<const Constraint*> equalities;
  for (const auto& c : model.constraints()) {
    ScaledConstraint sc = scale_bool_constraint(model, c);
    if (sc.usable) {
      fast.push_back(std::move(sc));
    } else {
      slow.push_back(&c);
    }
    if (c.rel == Rel::Eq) equalities.push_back(&c);
  }

  Solution best;
  best.status = SolStatus::Infeasible;
  bool have_best = false;

  std::vector<Rat> assign = base;
  std::vector<bool> have_val(n, false);

  const std::uint64_t total = k >= 63 ? 0 : (1ull << k);
  for (std::uint64_t code = 0; code < (k == 0 ? 1ull : total); ++code) {
    // Lexicographic order: the first issued free variable is the most
    // significant bit and 0 precedes 1.
    for (int b = 0; b < k; ++b) {
      int vi = free_bools[b];
      int bit = static_cast<int>((code >> (k - 1 - b)) & 1ull);
      assign[vi] = bit;
    }
    bool ok = true;
    for (const auto& sc : fast) {
      std::int64_t lhs = 0;
      for (const auto& [vi, coef] : sc.terms) {
        if (assign[vi] != 0) lhs += coef;
      }
      bool sat = sc.rel == Rel::Le   ? lhs <= sc.rhs_minus_const
                 : sc.rel == Rel::Ge ? lhs >= sc.rhs_minus_const
                                     : lhs == sc.rhs_minus_const;
      if (!sat) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;

    // Determine continuous variables from equality constraints.
    for (int i = 0; i < n; ++i) {
      have_val[i] = known[i] || model.var_kind(i) == VarKind::Bool;
      if (known[i]) assign[i] = base[i];
    }
    bool progress = true;
    while (progress) {
      progress = false;
      for (const Constraint* c : equalities) {
        int unknown = -1;
        bool multi = false;
        for (const auto& [vi, coef] : c->lhs.terms()) {
          if (!have_val[vi]) {
            if (unknown >= 0) {
              multi = true;
              break;
            }
            unknown = vi;
          }
        }
        if (multi || unknown < 0) continue;
        Rat rest = c->lhs.constant();
        Rat ucoef = 0;
        for (const auto& [vi, coef] : c->lhs.terms()) {
          if (vi == unknown) {
            ucoef = coef;
          } else {
            rest += coef * assign[vi];
          }
        }
        assign[unknown] = (c->rhs - rest) / ucoef;
        have_val[unknown] = true;
        progress = true;
      }
    }
    for (int i = 0; i < n && ok; ++i) {
      if (!have_val[i])
        throw std::logic_error("continuous variable " + model.var_name(i) +
                               " is not determined by the boolean assignment");
      if (assign[i] < model.lower_bound(i) || assign[i] > model.upper_bound(i)) ok = false;
    }
    if (!ok) continue;
    for (const Constraint* c : slow) {
      Rat lhs = c->lhs.constant();
      for (const auto& [vi, coef] : c->lhs.terms()) lhs += coef * assign[vi];
      bool sat = c->rel == Rel::Le ? lhs <= c->rhs : c->rel == Rel::Ge ? lhs >= c->rhs : lhs == c->rhs;
      if (!sat) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;

    Rat obj = model.objective().constant();
    for (const auto& [vi, coef] : model.objective().terms()) obj += coef * assign[vi];
    if (!have_best || obj < best.objective_value) {
      best.status = SolStatus::Optimal;
      best.assignment = assign;
      best.objective_value = obj;
      have_best = true;
    }
  }
  return best;
}

}  // namespace lynx
