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

#include <atomic>
#include <sstream>

namespace lynx {

namespace {
std::atomic<int> g_next_model_id{1};
}

LinExpr& LinExpr::add(const Rat& coef, VarId v) {
  if (coef == 0) return *this;
  auto [it, inserted] = terms_.emplace(v.index, coef);
  if (!inserted) {
    it->second += coef;
    if (it->second == 0) terms_.erase(it);
  }
  return *this;
}

IlpModel::IlpModel() : id_(g_next_model_id.fetch_add(1)) {}

void IlpModel::check_owned(VarId v) const {
  if (v.model != id_ || v.index < 0 || v.index >= var_count())
    throw ModelMismatch("variable does not belong to this model");
}

VarId IlpModel::add_bool(std::string name) {
  vars_.push_back({VarKind::Bool, 0, 1, std::move(name)});
  return {var_count() - 1, id_};
}

VarId IlpModel::add_cont(std::string name, Rat lb, Rat ub) {
  vars_.push_back({VarKind::Cont, std::move(lb), std::move(ub), std::move(name)});
  return {var_count() - 1, id_};
}

void IlpModel::fix(VarId v, const Rat& value) {
  check_owned(v);
  vars_[v.index].lb = value;
  vars_[v.index].ub = value;
}

void IlpModel::add_constraint(LinExpr lhs, Rel rel, Rat rhs, std::string name) {
  cons_.push_back({std::move(lhs), rel, std::move(rhs), std::move(name)});
}

VarId IlpModel::linearize_and(VarId a, VarId b) {
  check_owned(a);
  check_owned(b);
  VarId z = add_bool("and_" + std::to_string(var_count()));
  add_le(LinExpr().add(1, z).add(-1, a), 0);
  add_le(LinExpr().add(1, z).add(-1, b), 0);
  add_ge(LinExpr().add(1, z).add(-1, a).add(-1, b), -1);
  return z;
}

VarId IlpModel::negation(VarId a) {
  check_owned(a);
  auto it = negation_cache_.find(a.index);
  if (it != negation_cache_.end()) return {it->second, id_};
  VarId n = add_bool("not_" + vars_[a.index].name);
  add_eq(LinExpr().add(1, n).add(1, a), 1);
  negation_cache_.emplace(a.index, n.index);
  return n;
}

int IlpModel::bool_count() const {
  int c = 0;
  for (const auto& v : vars_) c += v.kind == VarKind::Bool ? 1 : 0;
  return c;
}

std::vector<std::string> verify_assignment(const IlpModel& model,
                                           const std::vector<Rat>& assignment) {
  std::vector<std::string> violations;
  if (static_cast<int>(assignment.size()) != model.var_count()) {
    violations.push_back("assignment size mismatch");
    return violations;
  }
  for (int i = 0; i < model.var_count(); ++i) {
    const Rat& v = assignment[i];
    if (v < model.lower_bound(i) || v > model.upper_bound(i))
      violations.push_back("bound violated for " + model.var_name(i));
    if (model.var_kind(i) == VarKind::Bool && v != 0 && v != 1)
      violations.push_back("non-binary value for " + model.var_name(i));
  }
  int ci = 0;
  for (const auto& c : model.constraints()) {
    Rat lhs = c.lhs.constant();
    for (const auto& [vi, coef] : c.lhs.terms()) lhs += coef * assignment[vi];
    bool ok = c.rel == Rel::Le ? lhs <= c.rhs : c.rel == Rel::Ge ? lhs >= c.rhs : lhs == c.rhs;
    if (!ok) {
      std::ostringstream os;
      os << "constraint " << (c.name.empty() ? "#" + std::to_string(ci) : c.name) << " violated";
      violations.push_back(os.str());
    }
    ++ci;
  }
  return violations;
}

std::string write_lp(const IlpModel& model, const std::string& problem_name) {
  std::ostringstream os;
  os << "\\ Problem: " << problem_name << "\n";
  auto coef_str = [](const Rat& r) {
    BigInt num = rat_num(r), den = rat_den(r);
    if (den == 1) return num.str();
    std::string s = rat_to_string(r);
    if (s.find('/') == std::string::npos) return s;
    // LP text carries decimals only; non-terminating rationals are rendered
    // with 18 fractional digits.
    return rat_to_fixed(r, 18);
  };
  auto write_expr = [&](const LinExpr& e) {
    bool first = true;
    for (const auto& [vi, coef] : e.terms()) {
      Rat c = coef;
      if (first) {
        if (c < 0) {
          os << "- ";
          c = -c;
        }
        first = false;
      } else {
        os << (c < 0 ? " - " : " + ");
        if (c < 0) c = -c;
      }
      if (c != 1) os << coef_str(c) << " ";
      os << model.var_name(vi);
    }
    if (first) os << "0 " << (model.var_count() > 0 ? model.var_name(0) : "x");
  };

  os << "Minimize\n obj: ";
  write_expr(model.objective());
  os << "\nSubject To\n";
  int ci = 0;
  for (const auto& c : model.constraints()) {
    os << " " << (c.name.empty() ? "c" + std::to_string(ci) : c.name) << ": ";
    write_expr(c.lhs);
    os << (c.rel == Rel::Le ? " <= " : c.rel == Rel::Ge ? " >= " : " = ");
    os << coef_str(c.rhs - c.lhs.constant());
    os << "\n";
    ++ci;
  }
  os << "Bounds\n";
  for (int i = 0; i < model.var_count(); ++i) {
    if (model.var_kind(i) == VarKind::Cont || model.lower_bound(i) == model.upper_bound(i)) {
      os << " " << coef_str(model.lower_bound(i)) << " <= " << model.var_name(i)
         << " <= " << coef_str(model.upper_bound(i)) << "\n";
    }
  }
  os << "Binaries\n";
  for (int i = 0; i < model.var_count(); ++i) {
    if (model.var_kind(i) == VarKind::Bool && model.lower_bound(i) != model.upper_bound(i))
      os << " " << model.var_name(i) << "\n";
  }
  os << "End\n";
  return os.str();
}

}  // namespace lynx
