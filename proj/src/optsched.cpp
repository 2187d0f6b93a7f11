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
#include "lynx/optsched.hpp"

#include <algorithm>
#include <sstream>

namespace lynx {

namespace {

std::string tag(int t, int i) { return std::to_string(t) + "_" + std::to_string(i); }

std::vector<int> free_list(const OperatorGraph& g, int i) {
  // Candidates freed after op i executes: its deps and itself, deduplicated.
  std::vector<int> dl = g.ops[i].deps;
  dl.push_back(i);
  std::sort(dl.begin(), dl.end());
  dl.erase(std::unique(dl.begin(), dl.end()), dl.end());
  return dl;
}

}  // namespace

std::string CheckReport::to_string() const {
  std::ostringstream os;
  for (const auto& v : issues) {
    switch (v.kind) {
      case CheckIssue::Kind::MandatoryMissing: os << "MandatoryMissing"; break;
      case CheckIssue::Kind::DependencyViolation: os << "DependencyViolation"; break;
      case CheckIssue::Kind::CommExclusionViolation: os << "CommExclusionViolation"; break;
      case CheckIssue::Kind::OverlapBudgetViolation: os << "OverlapBudgetViolation"; break;
      case CheckIssue::Kind::BudgetViolation: os << "BudgetViolation"; break;
      case CheckIssue::Kind::RetentionChainViolation: os << "RetentionChainViolation"; break;
      case CheckIssue::Kind::IndexOutOfRange: os << "IndexOutOfRange"; break;
    }
    os << " at phase " << v.phase << " op " << v.op << ": " << v.detail << "\n";
  }
  return os.str();
}

OptModelInstance build_opt_model(const OperatorGraph& graph, const HardwareProfile& hw,
                                 std::int64_t static_bytes) {
  const int n = graph.size();
  if (n == 0) throw EmptyGraph("operator graph is empty");
  if (static_bytes >= hw.mem_budget_bytes)
    throw BudgetTooSmall("static bytes " + std::to_string(static_bytes) +
                         " do not fit the budget " + std::to_string(hw.mem_budget_bytes));

  OptModelInstance inst;
  inst.graph = graph;
  inst.budget_bytes = hw.mem_budget_bytes;
  inst.static_bytes = static_bytes;
  inst.cost_us.reserve(n);
  for (const auto& op : graph.ops) inst.cost_us.push_back(effective_time(op, hw));

  IlpModel& m = inst.model;
  const Rat budget(inst.budget_bytes);

  // Decision variables, phase-major. Issue order fixes the branch order.
  inst.S.assign(n, {});
  inst.R.assign(n, {});
  for (int t = 0; t < n; ++t) {
    inst.R[t].resize(t + 1);
    for (int i = 0; i <= t; ++i) {
      inst.R[t][i] = m.add_bool("R_" + tag(t, i));
      if (i == t) {
        m.fix(inst.R[t][i], 1);
      } else if (graph.is_comm(t) && graph.is_comm(i)) {
        m.fix(inst.R[t][i], 0);  // comm may not recompute during comm
      } else if (!graph.schedulable[i]) {
        m.fix(inst.R[t][i], 0);
      }
    }
    inst.S[t].resize(t);
    for (int i = 0; i < t; ++i) {
      inst.S[t][i] = m.add_bool("S_" + tag(t, i));
      if (!graph.schedulable[i]) m.fix(inst.S[t][i], 1);  // pinned resident
    }
  }

  // Dependency availability: R_t_i <= R_t_j + S_t_j for every dep j of i.
  for (int t = 0; t < n; ++t) {
    for (int i = 0; i <= t; ++i) {
      if (m.lower_bound(inst.R[t][i].index) == 0 && m.upper_bound(inst.R[t][i].index) == 0)
        continue;
      for (int j : graph.ops[i].deps) {
        LinExpr e;
        e.add(1, inst.R[t][i]).add(-1, inst.R[t][j]).add(-1, inst.S[t][j]);
        m.add_le(std::move(e), 0, "dep_" + tag(t, i) + "_" + std::to_string(j));
      }
    }
  }

  // Retention chaining: S_t_i <= R_{t-1}_i + S_{t-1}_i.
  for (int t = 1; t < n; ++t) {
    for (int i = 0; i < t; ++i) {
      LinExpr e;
      e.add(1, inst.S[t][i]).add(-1, inst.R[t - 1][i]);
      if (i < t - 1) e.add(-1, inst.S[t - 1][i]);
      m.add_le(std::move(e), 0, "chain_" + tag(t, i));
    }
  }

  // Overlap budget inside each communication phase.
  for (int t = 0; t < n; ++t) {
    if (!graph.is_comm(t)) continue;
    LinExpr e;
    for (int i = 0; i < t; ++i) e.add(inst.cost_us[i], inst.R[t][i]);
    if (!e.terms().empty()) m.add_le(std::move(e), inst.cost_us[t], "overlap_" + std::to_string(t));
  }

  // Memory ledger. U_t_0 is the phase-entry usage, U_t_{k+1} the usage after
  // position k. Retention past the last phase is zero.
  for (int t = 0; t < n; ++t) {
    VarId u_prev = m.add_cont("U_" + tag(t, 0), 0, budget);
    {
      LinExpr e;
      e.add(1, u_prev);
      for (int i = 0; i < t; ++i) e.add(Rat(-graph.ops[i].out_bytes), inst.S[t][i]);
      m.add_eq(std::move(e), Rat(static_bytes), "mem_init_" + std::to_string(t));
    }
    for (int k = 0; k <= t; ++k) {
      // U_t_{k+1} = U_t_k + generated(op k) - freed after op k-1. Sampling
      // right after each generation keeps transient peaks visible.
      VarId u_next = m.add_cont("U_" + tag(t, k + 1), 0, budget);
      LinExpr e;
      e.add(1, u_next).add(-1, u_prev).add(Rat(-graph.ops[k].out_bytes), inst.R[t][k]);
      Rat rhs = 0;
      const int prev = k - 1;
      if (prev >= 0) {
        for (int d : free_list(graph, prev)) {
          // F_t_d_prev = R_t_prev AND (not S_{t+1}_d) AND over later
          // executing users of d in this phase, folded ascending.
          bool const_zero = false;
          std::vector<VarId> factors;
          auto push_factor = [&](VarId v, bool negate) {
            const Rat& lb = m.lower_bound(v.index);
            const Rat& ub = m.upper_bound(v.index);
            if (lb == ub) {
              bool value = lb == 1;
              if (negate) value = !value;
              if (!value) const_zero = true;
              return;  // constant-1 factors drop out
            }
            factors.push_back(negate ? m.negation(v) : v);
          };
          push_factor(inst.R[t][prev], false);
          if (t + 1 < n && !const_zero) push_factor(inst.S[t + 1][d], true);
          for (int j : graph.users[d]) {
            if (const_zero) break;
            if (j > prev && j <= t) push_factor(inst.R[t][j], true);
          }
          if (const_zero) continue;
          const Rat bytes(graph.ops[d].out_bytes);
          if (factors.empty()) {
            rhs += -bytes;  // freeing is unconditional
            continue;
          }
          VarId f;
          if (factors.size() == 1) {
            f = m.add_bool("F_" + tag(t, d) + "_" + std::to_string(prev));
            m.add_eq(LinExpr().add(1, f).add(-1, factors[0]), 0);
          } else {
            VarId acc = factors[0];
            for (std::size_t x = 1; x + 1 < factors.size(); ++x)
              acc = m.linearize_and(acc, factors[x]);
            f = m.add_bool("F_" + tag(t, d) + "_" + std::to_string(prev));
            VarId b = factors.back();
            m.add_le(LinExpr().add(1, f).add(-1, acc), 0);
            m.add_le(LinExpr().add(1, f).add(-1, b), 0);
            m.add_ge(LinExpr().add(1, f).add(-1, acc).add(-1, b), -1);
          }
          e.add(bytes, f);
        }
      }
      m.add_eq(std::move(e), rhs, "mem_" + tag(t, k + 1));
      u_prev = u_next;
    }
  }

  // Objective: all computation minus what hides inside communication phases.
  // A sub-resolution penalty on every optional recompute breaks objective
  // ties toward the smallest recompute set; real objective values are
  // multiples of 1/lcm(time denominators), and the total penalty stays below
  // half of that spacing. The decoded schedule cost is recomputed exactly.
  BigInt denom_lcm = 1;
  for (const Rat& c : inst.cost_us) denom_lcm = boost::multiprecision::lcm(denom_lcm, rat_den(c));
  std::int64_t optional_recomputes = 0;
  for (int t = 0; t < n; ++t) optional_recomputes += t;
  const Rat tie_eps = Rat(1) / (Rat(2) * Rat(denom_lcm) * Rat(optional_recomputes + 1));
  LinExpr obj;
  for (int t = 0; t < n; ++t) {
    for (int i = 0; i <= t; ++i) obj.add(inst.cost_us[i], inst.R[t][i]);
    if (graph.is_comm(t)) {
      for (int i = 0; i < t; ++i) obj.add(-inst.cost_us[i], inst.R[t][i]);
    }
    for (int i = 0; i < t; ++i) obj.add(tie_eps, inst.R[t][i]);
  }
  m.set_objective(std::move(obj));
  return inst;
}

RecomputationSchedule solve_opt(const OptModelInstance& instance, std::int64_t time_limit_ms) {
  Solution sol = solve_bnb(instance.model, time_limit_ms);
  RecomputationSchedule sched;
  sched.status = sol.status;
  if (sol.status == SolStatus::Infeasible || sol.status == SolStatus::TimedOut) return sched;

  const int n = instance.graph.size();
  sched.bound_gap = sol.bound_gap;
  sched.cost_us = 0;
  for (int t = 0; t < n; ++t) {
    sched.cost_us += instance.cost_us[t];  // mandatory execution of op t
    for (int i = 0; i < t; ++i) {
      if (sol.assignment[instance.S[t][i].index] == 1) sched.keep.emplace_back(t, i);
      if (sol.assignment[instance.R[t][i].index] == 1) {
        sched.recompute.emplace_back(t, i);
        if (instance.graph.is_comm(t)) {
          sched.overlapped.emplace_back(t, i);
        } else {
          sched.cost_us += instance.cost_us[i];
        }
      }
    }
  }
  CheckReport report = check_schedule(sched, instance);
  if (!report.empty())
    throw std::logic_error("solver produced an invalid schedule:\n" + report.to_string());
  return sched;
}

CheckReport check_schedule(const RecomputationSchedule& schedule,
                           const OptModelInstance& instance) {
  CheckReport report;
  const OperatorGraph& g = instance.graph;
  const int n = g.size();
  auto add = [&report](CheckIssue::Kind k, int t, int i, std::string detail) {
    report.issues.push_back({k, t, i, std::move(detail)});
  };

  // Dense grids from the pair lists.
  std::vector<std::vector<bool>> R(n, std::vector<bool>(n, false));
  std::vector<std::vector<bool>> S(n, std::vector<bool>(n, false));
  for (int t = 0; t < n; ++t) R[t][t] = true;
  for (auto [t, i] : schedule.recompute) {
    if (t < 0 || t >= n || i < 0 || i >= t) {
      add(CheckIssue::Kind::IndexOutOfRange, t, i, "recompute pair");
      continue;
    }
    R[t][i] = true;
  }
  for (auto [t, i] : schedule.keep) {
    if (t < 0 || t >= n || i < 0 || i >= t) {
      add(CheckIssue::Kind::IndexOutOfRange, t, i, "keep pair");
      continue;
    }
    S[t][i] = true;
  }
  if (!report.empty()) return report;

  for (int t = 0; t < n; ++t) {
    if (!R[t][t]) add(CheckIssue::Kind::MandatoryMissing, t, t, "R_t_t must be 1");
    for (int i = 0; i < t; ++i) {
      if (S[0][i]) add(CheckIssue::Kind::RetentionChainViolation, 0, i, "S_0 must be empty");
      if (t >= 1 && S[t][i] && !(R[t - 1][i] || S[t - 1][i]))
        add(CheckIssue::Kind::RetentionChainViolation, t, i,
            "retained without prior execution or retention");
    }

    Rat overlap_load = 0;
    for (int i = 0; i <= t; ++i) {
      if (!R[t][i]) continue;
      if (i < t && g.is_comm(t) && g.is_comm(i))
        add(CheckIssue::Kind::CommExclusionViolation, t, i, "comm op inside comm phase");
      if (i < t && g.is_comm(t)) overlap_load += instance.cost_us[i];
      for (int j : g.ops[i].deps) {
        bool available = S[t][j] || (j < i && R[t][j]);
        if (!available)
          add(CheckIssue::Kind::DependencyViolation, t, i,
              "dependency " + std::to_string(j) + " not resident");
      }
    }
    if (g.is_comm(t) && overlap_load > instance.cost_us[t])
      add(CheckIssue::Kind::OverlapBudgetViolation, t, t,
          "overlapped recompute " + rat_to_string(overlap_load) + " exceeds " +
              rat_to_string(instance.cost_us[t]));

    // Memory replay with the freeing semantics: a tensor is dropped after
    // the last of its executing users in this phase, unless it is retained
    // into the next phase.
    Rat mem(instance.static_bytes);
    for (int i = 0; i < t; ++i) {
      if (S[t][i]) mem += Rat(g.ops[i].out_bytes);
    }
    const Rat budget(instance.budget_bytes);
    if (mem > budget)
      add(CheckIssue::Kind::BudgetViolation, t, -1,
          "phase entry usage " + rat_to_string(mem) + " exceeds budget");
    for (int k = 0; k <= t; ++k) {
      if (R[t][k]) mem += Rat(g.ops[k].out_bytes);
      if (mem > budget)
        add(CheckIssue::Kind::BudgetViolation, t, k,
            "usage " + rat_to_string(mem) + " after op " + std::to_string(k) +
                " exceeds budget");
      std::vector<int> dl = g.ops[k].deps;
      dl.push_back(k);
      std::sort(dl.begin(), dl.end());
      dl.erase(std::unique(dl.begin(), dl.end()), dl.end());
      for (int d : dl) {
        bool freed = R[t][k];
        if (freed && t + 1 < n && S[t + 1][d]) freed = false;
        if (freed) {
          for (int j : g.users[d]) {
            if (j > k && j <= t && R[t][j]) {
              freed = false;
              break;
            }
          }
        }
        if (freed) mem -= Rat(g.ops[d].out_bytes);
      }
    }
  }
  return report;
}

StagePhaseGraph unroll_1f1b(const OperatorGraph& single, int n_microbatches, int n_batch) {
  StagePhaseGraph out;
  const int fwd_n = single.fwd_op_count;
  const int total = single.size();
  const int bwd_n = total - fwd_n;
  out.single_fwd_ops = fwd_n;
  out.single_bwd_ops = bwd_n;
  if (n_batch < 1) n_batch = 1;
  if (n_batch > n_microbatches) n_batch = n_microbatches;

  // Stage-local 1F1B order: (pass kind, microbatch).
  std::vector<std::pair<bool, int>> passes;  // (backward?, microbatch)
  const int warmup = n_batch - 1;
  for (int mb = 0; mb < std::min(warmup, n_microbatches); ++mb) passes.emplace_back(false, mb);
  for (int mb = warmup; mb < n_microbatches; ++mb) {
    passes.emplace_back(false, mb);
    passes.emplace_back(true, mb - warmup);
  }
  for (int mb = std::max(0, n_microbatches - warmup); mb < n_microbatches; ++mb)
    passes.emplace_back(true, mb);

  // Per-microbatch mapping from single-graph index to global phase index.
  std::vector<std::vector<int>> remap(n_microbatches, std::vector<int>(total, -1));
  OperatorGraph& g = out.graph;
  for (auto [backward, mb] : passes) {
    const int lo = backward ? fwd_n : 0;
    const int hi = backward ? total : fwd_n;
    for (int i = lo; i < hi; ++i) {
      OperatorSpec op = single.ops[i];
      op.id = g.size();
      op.name = "mb" + std::to_string(mb) + "/" + op.name;
      for (auto& d : op.deps) d = remap[mb][d];
      remap[mb][i] = op.id;
      g.ops.push_back(std::move(op));
      g.schedulable.push_back(single.schedulable[i]);
      out.origin.push_back({mb, backward, i - lo});
      if (!backward && i == fwd_n - 1) g.fwd_op_count = g.size();
    }
  }
  for (int mb = 0; mb < n_microbatches; ++mb) {
    for (int c : single.checkpoint_ops) {
      if (remap[mb][c] >= 0) g.checkpoint_ops.push_back(remap[mb][c]);
    }
  }
  std::sort(g.checkpoint_ops.begin(), g.checkpoint_ops.end());
  g.users.assign(g.size(), {});
  for (int i = 0; i < g.size(); ++i) {
    for (int d : g.ops[i].deps) g.users[d].push_back(i);
  }
  return out;
}

StagePhaseGraph build_stage_phase_graph(const Profile& profile, int stage_index,
                                        int stage_layers) {
  const int stages = profile.pipeline.n_stages;
  OperatorGraph single = expand_graph(profile.model, stage_layers, stage_index == 0,
                                      stage_index == stages - 1);
  const int n_batch = std::min(stages - stage_index, profile.pipeline.n_microbatches);
  return unroll_1f1b(single, profile.pipeline.n_microbatches, n_batch);
}

}  // namespace lynx
