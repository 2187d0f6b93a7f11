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

#include <memory>
#include <queue>

namespace lynx {

namespace {

// Deterministic work budget: the "time" limit counts expanded nodes instead
// of wall-clock milliseconds so that identical inputs always give identical
// results. The constant is a rough desk-scale calibration.
constexpr std::int64_t kNodesPerMs = 25;

struct NodeState {
  std::vector<Rat> lb, ub;  // current bounds per variable
  Rat obj_lb = 0;
  std::int64_t seq = 0;
};

using NodePtr = std::shared_ptr<NodeState>;

struct NodeOrder {
  bool operator()(const NodePtr& a, const NodePtr& b) const {
    if (a->obj_lb != b->obj_lb) return a->obj_lb > b->obj_lb;  // min-heap on bound
    return a->seq < b->seq;  // newest first: equal-bound plateaus become a dive
  }
};

class Propagator {
 public:
  explicit Propagator(const IlpModel& model) : model_(model) {}

  // Interval propagation to (approximate) fixpoint. Returns false on proven
  // infeasibility. `thorough` lifts the pass cap, used at leaf nodes where
  // equality chains must collapse completely.
  bool run(NodeState& s, bool thorough) const {
    const int max_passes = thorough ? model_.var_count() + 2 : 8;
    for (int pass = 0; pass < max_passes; ++pass) {
      bool changed = false;
      for (const auto& c : model_.constraints()) {
        if (!apply(c, s, changed)) return false;
      }
      if (!changed) return true;
    }
    return true;
  }

 private:
  bool tighten_ub(NodeState& s, int vi, const Rat& ub, bool& changed) const {
    Rat v = ub;
    if (model_.var_kind(vi) == VarKind::Bool && v < 1 && v > 0) v = 0;  // integrality
    if (v < s.ub[vi]) {
      if (v < s.lb[vi]) return false;
      s.ub[vi] = v;
      changed = true;
    }
    return true;
  }
  bool tighten_lb(NodeState& s, int vi, const Rat& lb, bool& changed) const {
    Rat v = lb;
    if (model_.var_kind(vi) == VarKind::Bool && v > 0 && v < 1) v = 1;
    if (v > s.lb[vi]) {
      if (v > s.ub[vi]) return false;
      s.lb[vi] = v;
      changed = true;
    }
    return true;
  }

  bool apply(const Constraint& c, NodeState& s, bool& changed) const {
    Rat min_lhs = c.lhs.constant();
    Rat max_lhs = c.lhs.constant();
    for (const auto& [vi, coef] : c.lhs.terms()) {
      if (coef > 0) {
        min_lhs += coef * s.lb[vi];
        max_lhs += coef * s.ub[vi];
      } else {
        min_lhs += coef * s.ub[vi];
        max_lhs += coef * s.lb[vi];
      }
    }
    const bool need_le = c.rel != Rel::Ge;  // lhs <= rhs must hold
    const bool need_ge = c.rel != Rel::Le;  // lhs >= rhs must hold
    if (need_le && min_lhs > c.rhs) return false;
    if (need_ge && max_lhs < c.rhs) return false;
    for (const auto& [vi, coef] : c.lhs.terms()) {
      if (s.lb[vi] == s.ub[vi]) continue;
      if (need_le) {
        // coef*x <= rhs - (min_lhs - coef*x_min_part)
        if (coef > 0) {
          Rat slack = c.rhs - (min_lhs - coef * s.lb[vi]);
          if (!tighten_ub(s, vi, slack / coef, changed)) return false;
        } else {
          Rat slack = c.rhs - (min_lhs - coef * s.ub[vi]);
          if (!tighten_lb(s, vi, slack / coef, changed)) return false;
        }
      }
      if (need_ge) {
        if (coef > 0) {
          Rat slack = c.rhs - (max_lhs - coef * s.ub[vi]);
          if (!tighten_lb(s, vi, slack / coef, changed)) return false;
        } else {
          Rat slack = c.rhs - (max_lhs - coef * s.lb[vi]);
          if (!tighten_ub(s, vi, slack / coef, changed)) return false;
        }
      }
    }
    return true;
  }

  const IlpModel& model_;
};

Rat objective_lower_bound(const IlpModel& model, const NodeState& s) {
  Rat b = model.objective().constant();
  for (const auto& [vi, coef] : model.objective().terms()) {
    b += coef * (coef > 0 ? s.lb[vi] : s.ub[vi]);
  }
  return b;
}

int next_branch_var(const IlpModel& model, const NodeState& s) {
  for (int i = 0; i < model.var_count(); ++i) {
    if (model.var_kind(i) == VarKind::Bool && s.lb[i] != s.ub[i]) return i;
  }
  return -1;
}

}  // namespace

Solution solve_bnb(const IlpModel& model, std::int64_t time_limit_ms) {
  Propagator prop(model);
  const std::int64_t node_budget =
      time_limit_ms <= 0 ? 1 : std::max<std::int64_t>(64, time_limit_ms * kNodesPerMs);

  auto root = std::make_shared<NodeState>();
  root->lb.reserve(model.var_count());
  root->ub.reserve(model.var_count());
  for (int i = 0; i < model.var_count(); ++i) {
    root->lb.push_back(model.lower_bound(i));
    root->ub.push_back(model.upper_bound(i));
  }

  Solution out;
  out.status = SolStatus::Infeasible;

  if (!prop.run(*root, false)) return out;
  root->obj_lb = objective_lower_bound(model, *root);

  std::priority_queue<NodePtr, std::vector<NodePtr>, NodeOrder> open;
  std::int64_t next_seq = 1;
  open.push(root);

  bool have_best = false;
  Rat best_obj = 0;
  std::vector<Rat> best_assign;
  std::int64_t nodes = 0;
  bool exhausted_budget = false;

  while (!open.empty()) {
    if (nodes >= node_budget) {
      exhausted_budget = true;
      break;
    }
    NodePtr node = open.top();
    open.pop();
    ++nodes;
    if (have_best && node->obj_lb >= best_obj) continue;

    int bv = next_branch_var(model, *node);
    if (bv < 0) {
      // Leaf: all booleans fixed; collapse the continuous chain.
      NodeState leaf = *node;
      if (!prop.run(leaf, true)) continue;
      bool determined = true;
      for (int i = 0; i < model.var_count(); ++i) {
        if (leaf.lb[i] != leaf.ub[i]) {
          determined = false;
          break;
        }
      }
      if (!determined)
        throw std::logic_error(
            "continuous variables are not determined by the boolean assignment");
      std::vector<Rat> assign = leaf.lb;
      if (!verify_assignment(model, assign).empty()) continue;
      Rat obj = model.objective().constant();
      for (const auto& [vi, coef] : model.objective().terms()) obj += coef * assign[vi];
      if (!have_best || obj < best_obj) {
        have_best = true;
        best_obj = obj;
        best_assign = std::move(assign);
      }
      continue;
    }

    for (int val = 0; val <= 1; ++val) {  // branch 0 before 1
      auto child = std::make_shared<NodeState>(*node);
      child->lb[bv] = val;
      child->ub[bv] = val;
      child->seq = next_seq++;
      if (!prop.run(*child, false)) continue;
      child->obj_lb = objective_lower_bound(model, *child);
      if (have_best && child->obj_lb >= best_obj) continue;
      open.push(child);
    }
  }

  if (!exhausted_budget) {
    if (have_best) {
      out.status = SolStatus::Optimal;
      out.objective_value = best_obj;
      out.assignment = std::move(best_assign);
    }
    return out;
  }
  // Budget exhausted: report the incumbent with its bound gap, if any.
  Rat global_lb = have_best ? best_obj : Rat(0);
  if (!open.empty()) global_lb = open.top()->obj_lb;
  if (have_best) {
    out.status = SolStatus::Feasible;
    out.objective_value = best_obj;
    out.assignment = std::move(best_assign);
    out.bound_gap = best_obj - rat_min(global_lb, best_obj);
  } else {
    out.status = SolStatus::TimedOut;
  }
  return out;
}

}  // namespace lynx
