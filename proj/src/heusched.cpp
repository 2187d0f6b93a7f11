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
#include "lynx/heusched.hpp"

#include <algorithm>

namespace lynx {

namespace {

// Forward-subgraph view of the template: positions 0..n-1, the checkpoint
// is position n-1 by the template invariant.
struct FwdView {
  int n = 0;
  std::vector<Rat> cost;
  std::vector<std::int64_t> bytes;
  std::vector<bool> comm;
  std::vector<std::vector<int>> deps;  // template positions
};

FwdView make_fwd_view(const LayerTemplate& layer, const Rat& comm_scale) {
  FwdView v;
  v.n = layer.forward_op_count();
  if (v.n <= 0) throw ValidationError("layer template has no forward subgraph");
  HardwareProfile hw;
  hw.comm_scale = comm_scale;
  for (int i = 0; i < v.n; ++i) {
    const OperatorSpec& op = layer.ops[i];
    v.cost.push_back(effective_time(op, hw));
    v.bytes.push_back(op.out_bytes);
    v.comm.push_back(op.kind == OpKind::Comm);
    std::vector<int> d;
    for (int id : op.deps) d.push_back(layer.index_of(id));
    v.deps.push_back(std::move(d));
  }
  return v;
}

}  // namespace

HeuContext make_heu_context(const Profile& profile, int stage_index, int stage_layers,
                            DeltaPolicy delta_policy, Rat delta_bytes) {
  const LayerTemplate& layer = profile.model.layer;
  HeuContext ctx;
  ctx.n_layers = stage_layers;
  ctx.n_batch = std::min(profile.pipeline.n_stages - stage_index,
                         profile.pipeline.n_microbatches);
  ctx.stage_role = stage_index == profile.pipeline.n_stages - 1 ? StageRole::LastStage
                                                                : StageRole::Interior;
  auto window_time = [&](const std::vector<int>& ids, int k) -> Rat {
    if (static_cast<int>(ids.size()) <= k) return 0;
    int idx = layer.index_of(ids[k]);
    return effective_time(layer.ops[idx], profile.hardware);
  };
  ctx.ctime_us[0] = window_time(layer.fwd_comm_ids, 0);
  ctx.ctime_us[1] = window_time(layer.fwd_comm_ids, 1);
  ctx.ctime_us[2] = window_time(layer.bwd_comm_ids, 0);
  ctx.ctime_us[3] = window_time(layer.bwd_comm_ids, 1);
  ctx.static_bytes =
      Rat(profile.model.static_bytes) * Rat(stage_layers) / Rat(profile.model.n_layers);
  ctx.budget_bytes = Rat(profile.hardware.mem_budget_bytes);
  ctx.comm_scale = profile.hardware.comm_scale;
  ctx.delta_policy = delta_policy;
  ctx.delta_bytes = delta_bytes;
  return ctx;
}

HeuModelInstance build_heu_model(const LayerTemplate& layer, const HeuContext& ctx) {
  for (const Rat& c : ctx.ctime_us) {
    if (c < 0) throw WindowConfigError("negative communication window capacity");
  }
  if (ctx.n_layers < 1 || ctx.n_batch < 1)
    throw WindowConfigError("n_layers and n_batch must be positive");
  if (ctx.delta_policy == DeltaPolicy::FixedBytes && ctx.delta_bytes < 0)
    throw WindowConfigError("negative delta reservation");

  HeuModelInstance inst;
  inst.ctx = ctx;
  FwdView v = make_fwd_view(layer, ctx.comm_scale);
  inst.n = v.n;
  inst.cost_us = v.cost;
  inst.bytes = v.bytes;
  inst.is_comm = v.comm;
  if (ctx.stage_role == StageRole::LastStage) {
    inst.phases = {3, 4, 5};
  } else {
    inst.phases = {1, 2, 3, 4, 5};
  }

  if (ctx.delta_policy == DeltaPolicy::FixedBytes) {
    // Even keeping only the checkpoint must fit.
    Rat floor = ctx.static_bytes +
                Rat(ctx.n_layers) * Rat(ctx.n_batch) * Rat(v.bytes[v.n - 1]) + ctx.delta_bytes;
    if (floor > ctx.budget_bytes)
      throw BudgetInfeasible("minimal retention needs " + rat_to_string(floor) +
                             " bytes, budget is " + rat_to_string(ctx.budget_bytes));
  }

  IlpModel& m = inst.model;
  const int n = v.n;
  inst.S.resize(n);
  for (int i = 0; i < n; ++i) {
    inst.S[i] = m.add_bool("S_" + std::to_string(i));
  }
  m.fix(inst.S[n - 1], 1);  // the layer output is the checkpoint

  inst.R.assign(5, {});
  for (int t : inst.phases) {
    auto& row = inst.R[t - 1];
    row.resize(n);
    for (int i = 0; i < n; ++i) {
      row[i] = m.add_bool("R_" + std::to_string(t) + "_" + std::to_string(i));
      if (t <= 4 && v.comm[i]) m.fix(row[i], 0);  // comm cannot hide inside comm
    }
  }

  // Products (1 - S_i) * R_t_i, linearized on the complement of S.
  std::vector<std::vector<VarId>> z(5, std::vector<VarId>(n));
  for (int t : inst.phases) {
    for (int i = 0; i < n; ++i) {
      VarId r = inst.R[t - 1][i];
      bool r_fixed_zero = m.lower_bound(r.index) == 0 && m.upper_bound(r.index) == 0;
      bool s_fixed_one = m.lower_bound(inst.S[i].index) == 1;
      if (r_fixed_zero || s_fixed_one) {
        z[t - 1][i] = VarId{};
        continue;
      }
      z[t - 1][i] = m.linearize_and(m.negation(inst.S[i]), r);
    }
  }

  // Each operator is assigned exactly one phase.
  for (int i = 0; i < n; ++i) {
    LinExpr e;
    for (int t : inst.phases) e.add(1, inst.R[t - 1][i]);
    m.add_eq(std::move(e), 1, "once_" + std::to_string(i));
  }

  // Dependency: an op may run in phase t only if each dep ran in some phase
  // <= t or is retained. Phase 5 satisfies this by construction.
  for (int i = 0; i < n; ++i) {
    for (int j : v.deps[i]) {
      for (int t : inst.phases) {
        if (t == 5) continue;
        LinExpr e;
        e.add(1, inst.R[t - 1][i]);
        for (int tp : inst.phases) {
          if (tp <= t) e.add(-1, inst.R[tp - 1][j]);
        }
        e.add(-1, inst.S[j]);
        m.add_le(std::move(e), 0,
                 "dep_" + std::to_string(t) + "_" + std::to_string(i) + "_" + std::to_string(j));
      }
    }
  }

  // Window capacity: recomputation hidden in a window fits its duration.
  for (int t : inst.phases) {
    if (t == 5) continue;
    LinExpr e;
    for (int i = 0; i < n; ++i) {
      if (z[t - 1][i].valid()) e.add(v.cost[i], z[t - 1][i]);
    }
    m.add_le(std::move(e), ctx.ctime_us[t - 1], "cap_" + std::to_string(t));
  }

  // Peak memory: static + retained*(layers*batch) + forward-window
  // regeneration (once) + reservation <= budget.
  {
    LinExpr e;
    const Rat keep_w = Rat(ctx.n_layers) * Rat(ctx.n_batch);
    for (int i = 0; i < n; ++i) e.add(keep_w * Rat(v.bytes[i]), inst.S[i]);
    if (ctx.stage_role != StageRole::LastStage) {
      for (int t : {1, 2}) {
        for (int i = 0; i < n; ++i) {
          if (z[t - 1][i].valid()) e.add(Rat(ctx.n_layers) * Rat(v.bytes[i]), z[t - 1][i]);
        }
      }
    }
    Rat rhs = ctx.budget_bytes - ctx.static_bytes;
    if (ctx.delta_policy == DeltaPolicy::FixedBytes) {
      rhs -= ctx.delta_bytes;
    } else {
      // Reserve one layer's worth of every discarded tensor.
      for (int i = 0; i < n; ++i) e.add(Rat(-v.bytes[i]), inst.S[i]);
      for (int i = 0; i < n; ++i) rhs -= Rat(v.bytes[i]);
    }
    m.add_le(std::move(e), rhs, "mem_peak");
  }

  LinExpr obj;
  for (int i = 0; i < n; ++i) {
    if (z[4][i].valid()) obj.add(v.cost[i], z[4][i]);
  }
  m.set_objective(std::move(obj));
  return inst;
}

LayerPhasePlan solve_heu(const HeuModelInstance& instance, std::int64_t time_limit_ms) {
  Solution sol = solve_bnb(instance.model, time_limit_ms);
  if (sol.status == SolStatus::Infeasible)
    throw BudgetInfeasible("no retention assignment fits the memory budget");
  LayerPhasePlan plan;
  plan.status = sol.status;
  plan.role = instance.ctx.stage_role;
  if (sol.status == SolStatus::TimedOut) return plan;

  if (sol.status == SolStatus::Optimal) {
    // Retention tie-break: pin the objective, then prefer more retained
    // tensors and the lexicographically smallest retention vector.
    IlpModel tie = instance.model;
    LinExpr pin = instance.model.objective();
    tie.add_eq(std::move(pin), sol.objective_value, "obj_pin");
    LinExpr obj2;
    Rat bit(1);
    for (int i = 0; i < instance.n; ++i) {
      bit /= 2;
      obj2.add(Rat(-1) + bit, instance.S[i]);
    }
    tie.set_objective(std::move(obj2));
    Solution sol2 = solve_bnb(tie, time_limit_ms);
    if (sol2.status == SolStatus::Optimal) sol.assignment = std::move(sol2.assignment);
  }

  const int n = instance.n;
  plan.retained.resize(n);
  plan.phase.assign(n, 5);
  for (int i = 0; i < n; ++i) {
    plan.retained[i] = sol.assignment[instance.S[i].index] == 1;
    for (int t : instance.phases) {
      if (sol.assignment[instance.R[t - 1][i].index] == 1) plan.phase[i] = t;
    }
  }
  plan.critical_path_us = 0;
  for (int i = 0; i < n; ++i) {
    if (!plan.retained[i] && plan.phase[i] == 5) plan.critical_path_us += instance.cost_us[i];
  }
  if (instance.ctx.delta_policy == DeltaPolicy::FixedBytes) {
    plan.delta_bytes = instance.ctx.delta_bytes;
  } else {
    for (int i = 0; i < n; ++i) {
      if (!plan.retained[i]) plan.delta_bytes += Rat(instance.bytes[i]);
    }
  }
  return plan;
}

Rat plan_peak_bytes(const LayerPhasePlan& plan, const HeuContext& ctx,
                    const LayerTemplate& layer) {
  FwdView v = make_fwd_view(layer, ctx.comm_scale);
  Rat m_fwd = 0;
  for (int i = 0; i < v.n; ++i) {
    if (plan.retained[i]) m_fwd += Rat(v.bytes[i]);
  }
  m_fwd *= Rat(ctx.n_layers) * Rat(ctx.n_batch);
  Rat m_fwd_comm = 0;
  if (ctx.stage_role != StageRole::LastStage) {
    for (int i = 0; i < v.n; ++i) {
      if (!plan.retained[i] && (plan.phase[i] == 1 || plan.phase[i] == 2))
        m_fwd_comm += Rat(v.bytes[i]);
    }
    m_fwd_comm *= Rat(ctx.n_layers);
  }
  return ctx.static_bytes + m_fwd + m_fwd_comm + plan.delta_bytes;
}

std::vector<std::string> check_plan(const LayerPhasePlan& plan, const HeuContext& ctx,
                                    const LayerTemplate& layer) {
  std::vector<std::string> bad;
  FwdView v = make_fwd_view(layer, ctx.comm_scale);
  if (static_cast<int>(plan.retained.size()) != v.n ||
      static_cast<int>(plan.phase.size()) != v.n) {
    bad.push_back("plan size mismatch");
    return bad;
  }
  if (!plan.retained[v.n - 1]) bad.push_back("checkpoint is not retained");
  const bool last_stage = plan.role == StageRole::LastStage;
  for (int i = 0; i < v.n; ++i) {
    int t = plan.phase[i];
    if (t < 1 || t > 5) bad.push_back("op " + std::to_string(i) + " has no phase");
    if (last_stage && t < 3) bad.push_back("op " + std::to_string(i) + " uses a forward window on the last stage");
    if (t <= 4 && v.comm[i] && !plan.retained[i])
      bad.push_back("comm op " + std::to_string(i) + " recomputed inside a window");
    for (int j : v.deps[i]) {
      if (!(plan.retained[j] || plan.phase[j] <= t))
        bad.push_back("op " + std::to_string(i) + " misses dep " + std::to_string(j));
    }
  }
  for (int t = 1; t <= 4; ++t) {
    Rat load = 0;
    for (int i = 0; i < v.n; ++i) {
      if (!plan.retained[i] && plan.phase[i] == t) load += v.cost[i];
    }
    if (load > ctx.ctime_us[t - 1])
      bad.push_back("window " + std::to_string(t) + " overloaded: " + rat_to_string(load));
  }
  if (plan_peak_bytes(plan, ctx, layer) > ctx.budget_bytes) bad.push_back("peak exceeds budget");
  return bad;
}

namespace {

LayerPhasePlan make_fixed_plan(const LayerTemplate& layer, const HeuContext& ctx,
                               bool retain_all) {
  FwdView v = make_fwd_view(layer, ctx.comm_scale);
  LayerPhasePlan plan;
  plan.status = SolStatus::Optimal;
  plan.role = ctx.stage_role;
  plan.retained.assign(v.n, retain_all);
  plan.retained[v.n - 1] = true;
  plan.phase.assign(v.n, 5);
  plan.critical_path_us = 0;
  for (int i = 0; i < v.n; ++i) {
    if (!plan.retained[i]) plan.critical_path_us += v.cost[i];
  }
  plan.delta_bytes = 0;
  plan.peak_bytes = plan_peak_bytes(plan, ctx, layer);
  return plan;
}

}  // namespace

LayerPhasePlan full_recompute_plan(const LayerTemplate& layer, const HeuContext& ctx) {
  return make_fixed_plan(layer, ctx, false);
}

LayerPhasePlan retain_all_plan(const LayerTemplate& layer, const HeuContext& ctx) {
  return make_fixed_plan(layer, ctx, true);
}

StageRecomputeTimeline expand_plan_to_stage(const LayerPhasePlan& plan, const HeuContext& ctx,
                                            const PipelineConfig& pipeline, int stage) {
  const bool is_last = stage == pipeline.n_stages - 1;
  if (is_last != (plan.role == StageRole::LastStage))
    throw RoleMismatch("plan role does not match the stage position");

  StageRecomputeTimeline tl;
  tl.stage = stage;
  tl.role = plan.role;
  tl.plan = plan;

  const int L = ctx.n_layers;
  const int M = pipeline.n_microbatches;
  const int n_batch = std::min(ctx.n_batch, M);
  const int steady_backwards = std::max(0, M - n_batch + 1);
  const bool opt1 = plan.delta_bytes > 0;
  const int n = static_cast<int>(plan.retained.size());

  for (int m = 0; m < M; ++m) {
    const bool cooldown = m >= steady_backwards;
    for (int layer = 0; layer < L; ++layer) {
      for (int op = 0; op < n; ++op) {
        if (plan.retained[op]) continue;
        RecomputeItem item;
        item.owner_mb = m;
        item.owner_layer = layer;
        item.op = op;
        const int t = plan.phase[op];
        switch (t) {
          case 1:
          case 2:
            if (cooldown) {
              // No paired forward pass remains; try the synchronization
              // stalls, fall back to on-demand.
              item.host = RecomputeItem::Host::StallFill;
              item.host_mb = m;
              item.host_backward = true;
              item.host_layer = layer;
            } else {
              item.host = RecomputeItem::Host::Window;
              item.host_mb = m + n_batch - 1;
              item.host_backward = false;
              item.host_layer = layer;
              item.host_window = t - 1;
            }
            break;
          case 3:
          case 4:
            if (layer < L - 1) {
              // Ride the preceding backward layer's all-reduce windows.
              item.host = RecomputeItem::Host::Window;
              item.host_mb = m;
              item.host_backward = true;
              item.host_layer = layer + 1;
              item.host_window = t - 3;
            } else if (opt1 && m >= 1 && n_batch >= 2) {
              // First backward layer: the preceding microbatch's last
              // backward windows, funded by the reservation.
              item.host = RecomputeItem::Host::Window;
              item.host_mb = m - 1;
              item.host_backward = true;
              item.host_layer = 0;
              item.host_window = t - 3;
            } else {
              item.host = RecomputeItem::Host::CriticalPath;
              item.host_mb = m;
              item.host_backward = true;
              item.host_layer = layer;
              item.host_elem = 0;
            }
            break;
          default:
            item.host = RecomputeItem::Host::CriticalPath;
            item.host_mb = m;
            item.host_backward = true;
            item.host_layer = layer;
            item.host_elem = 0;
            break;
        }
        tl.items.push_back(item);
      }
    }
  }
  return tl;
}

}  // namespace lynx
