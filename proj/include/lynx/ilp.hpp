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

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "lynx/errors.hpp"
#include "lynx/rational.hpp"

namespace lynx {

/// Handle into one model's variable table; only valid for that model.
struct VarId {
  int index = -1;
  int model = -1;
  bool valid() const { return index >= 0; }
};

enum class VarKind { Bool, Cont };

/// Canonicalized linear expression: at most one term per variable.
class LinExpr {
 public:
  LinExpr() = default;
  explicit LinExpr(Rat constant) : constant_(std::move(constant)) {}

  LinExpr& add(const Rat& coef, VarId v);
  LinExpr& add_constant(const Rat& c) {
    constant_ += c;
    return *this;
  }

  const std::map<int, Rat>& terms() const { return terms_; }
  const Rat& constant() const { return constant_; }

 private:
  std::map<int, Rat> terms_;  // var index -> coefficient, zero coefs dropped
  Rat constant_ = 0;
};

enum class Rel { Le, Eq, Ge };

struct Constraint {
  LinExpr lhs;
  Rel rel = Rel::Le;
  Rat rhs;
  std::string name;
};

enum class SolStatus { Optimal, Feasible, Infeasible, TimedOut };

struct Solution {
  SolStatus status = SolStatus::Infeasible;
  std::vector<Rat> assignment;  // by variable index
  Rat objective_value = 0;
  Rat bound_gap = 0;  // incumbent minus best lower bound, when not Optimal
};

/// A 0/1 integer program with dependent continuous variables and a Min
/// objective. Variables are identified by issue order, which also fixes the
/// solver's branching order.
class IlpModel {
 public:
  IlpModel();

  VarId add_bool(std::string name);
  VarId add_cont(std::string name, Rat lb, Rat ub);

  void fix(VarId v, const Rat& value);

  void add_constraint(LinExpr lhs, Rel rel, Rat rhs, std::string name = "");
  void add_le(LinExpr lhs, Rat rhs, std::string name = "") {
    add_constraint(std::move(lhs), Rel::Le, std::move(rhs), std::move(name));
  }
  void add_ge(LinExpr lhs, Rat rhs, std::string name = "") {
    add_constraint(std::move(lhs), Rel::Ge, std::move(rhs), std::move(name));
  }
  void add_eq(LinExpr lhs, Rat rhs, std::string name = "") {
    add_constraint(std::move(lhs), Rel::Eq, std::move(rhs), std::move(name));
  }

  /// z = a AND b, enforced by z <= a, z <= b, z >= a + b - 1.
  VarId linearize_and(VarId a, VarId b);
  /// n = 1 - a. Results are cached, so repeated negations share one variable.
  VarId negation(VarId a);

  void set_objective(LinExpr objective) { objective_ = std::move(objective); }
  const LinExpr& objective() const { return objective_; }

  int var_count() const { return static_cast<int>(vars_.size()); }
  int bool_count() const;
  VarKind var_kind(int index) const { return vars_[index].kind; }
  const std::string& var_name(int index) const { return vars_[index].name; }
  const Rat& lower_bound(int index) const { return vars_[index].lb; }
  const Rat& upper_bound(int index) const { return vars_[index].ub; }
  const std::vector<Constraint>& constraints() const { return cons_; }
  int id() const { return id_; }

 private:
  struct VarInfo {
    VarKind kind;
    Rat lb, ub;
    std::string name;
  };
  void check_owned(VarId v) const;

  int id_;
  std::vector<VarInfo> vars_;
  std::vector<Constraint> cons_;
  LinExpr objective_;
  std::map<int, int> negation_cache_;
};

/// Ground-truth oracle: full enumeration of the boolean assignments in
/// lexicographic issue order (so ties break toward the smallest assignment).
/// Continuous variables must be determined by the booleans through equality
/// constraints. Throws TooLarge above max_bool_vars.
Solution solve_exhaustive(const IlpModel& model, int max_bool_vars = 24);

/// Exact branch and bound. Deterministic: variables branch in issue order,
/// 0 before 1, nodes explored best-first on lower bound, newest node first
/// among equal bounds (a dive, so incumbents arrive early). The time limit
/// is enforced on a deterministic work counter so identical inputs always
/// produce identical results.
Solution solve_bnb(const IlpModel& model, std::int64_t time_limit_ms = 10000);

/// Independent feasibility check of an assignment against the raw constraint
/// list and variable bounds; shares no code with the solvers.
/// Returns a list of violated constraint/bound descriptions.
std::vector<std::string> verify_assignment(const IlpModel& model,
                                           const std::vector<Rat>& assignment);

/// CPLEX LP text rendering of the model (objective, constraints, bounds,
/// binaries) in builder order.
std::string write_lp(const IlpModel& model, const std::string& problem_name = "lynx");

}  // namespace lynx
