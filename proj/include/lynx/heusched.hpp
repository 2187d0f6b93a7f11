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

#include <array>
#include <string>
#include <vector>

#include "lynx/ilp.hpp"
#include "lynx/profile.hpp"

namespace lynx {

enum class StageRole { Interior, LastStage };

/// Phases of the per-layer plan. Windows 1-4 are the layer's two forward and
/// two backward all-reduces; phase 5 is on-demand execution in the critical
/// path. The last pipeline stage drops the forward windows: recomputation
/// there would start right after the tensors were discarded.
enum class PhaseKind { FwdComm1 = 1, FwdComm2 = 2, BwdComm1 = 3, BwdComm2 = 4, CriticalPath = 5 };

struct PhaseWindow {
  int index = 5;
  PhaseKind kind = PhaseKind::CriticalPath;
  Rat capacity_us = 0;  // CTime_t for windows 1-4; the critical path is unbounded
};

enum class DeltaPolicy {
  FixedBytes,         // reserve exactly delta_bytes
  ReserveUnretained,  // reserve one layer's worth of discarded bytes (full Opt 1)
};

struct HeuContext {
  int n_layers = 1;  // layers hosted by this stage
  int n_batch = 1;   // in-flight forward activations before the first backward
  std::array<Rat, 4> ctime_us{};  // CTime_1..CTime_4
  Rat static_bytes = 0;
  Rat budget_bytes = 0;
  Rat delta_bytes = 0;
  Rat comm_scale = 1;  // applied to comm-op recompute costs
  DeltaPolicy delta_policy = DeltaPolicy::FixedBytes;
  StageRole stage_role = StageRole::Interior;
};

/// Per-layer plan over the forward subgraph of the layer template.
/// Indices are template forward positions (0-based), the checkpoint is the
/// last one and always retained.
struct LayerPhasePlan {
  SolStatus status = SolStatus::Infeasible;
  std::vector<bool> retained;  // S_i
  std::vector<int> phase;      // 1..5 per op; meaningful where retained[i] == 0
  Rat critical_path_us = 0;    // objective
  Rat peak_bytes = 0;
  Rat delta_bytes = 0;         // realized reservation
  StageRole role = StageRole::Interior;
};

struct HeuModelInstance {
  IlpModel model;
  int n = 0;                       // forward op count
  std::vector<VarId> S;            // per op
  std::vector<std::vector<VarId>> R;  // R[t-1][i] for t in phases
  std::vector<int> phases;         // {1..5} or {3,4,5}
  std::vector<Rat> cost_us;        // effective times of forward ops
  std::vector<std::int64_t> bytes; // out_bytes of forward ops
  std::vector<bool> is_comm;
  HeuContext ctx;
};

/// Derives the solver context for one stage of a partition.
HeuContext make_heu_context(const Profile& profile, int stage_index, int stage_layers,
                            DeltaPolicy delta_policy = DeltaPolicy::FixedBytes,
                            Rat delta_bytes = 0);

/// Builds the 5-phase ILP for one layer. Throws WindowConfigError on
/// negative window capacities and BudgetInfeasible when even full
/// recomputation cannot fit the memory bound.
HeuModelInstance build_heu_model(const LayerTemplate& layer, const HeuContext& ctx);

/// Solves and decodes the plan. Among equal-objective optima the plan
/// retaining the most tensors is chosen, then the lexicographically smallest
/// retention vector. Feasibility is re-verified by check_plan.
LayerPhasePlan solve_heu(const HeuModelInstance& instance, std::int64_t time_limit_ms = 10000);

/// Peak memory of a plan per the context's accounting: static + retained
/// forward tensors (per layer, per in-flight microbatch) + tensors
/// regenerated in forward communication windows (once) + the reservation.
Rat plan_peak_bytes(const LayerPhasePlan& plan, const HeuContext& ctx, const LayerTemplate& layer);

/// Independent checker of the plan against the window, dependency,
/// single-execution and memory rules. Returns violation strings.
std::vector<std::string> check_plan(const LayerPhasePlan& plan, const HeuContext& ctx,
                                    const LayerTemplate& layer);

/// The rule-based baseline: keep only the checkpoint, recompute everything
/// else on demand in the critical path.
LayerPhasePlan full_recompute_plan(const LayerTemplate& layer, const HeuContext& ctx);

/// A no-recomputation plan: retain every forward tensor.
LayerPhasePlan retain_all_plan(const LayerTemplate& layer, const HeuContext& ctx);

/// Where one recomputation lands in the stage's 1F1B execution.
struct RecomputeItem {
  int owner_mb = 0;     // microbatch whose backward consumes the tensor
  int owner_layer = 0;  // stage-local layer
  int op = 0;           // template forward position
  enum class Host { Window, CriticalPath, StallFill } host = Host::CriticalPath;
  int host_mb = 0;
  bool host_backward = false;
  int host_layer = 0;
  int host_window = 0;  // 0 or 1 within the pass kind
  int host_elem = 0;    // CriticalPath: insert before this element of the pass
};

struct StageRecomputeTimeline {
  int stage = 0;
  StageRole role = StageRole::Interior;
  LayerPhasePlan plan;
  std::vector<RecomputeItem> items;
  // Off for timelines decoded from phase-grid schedules, whose retention
  // varies per microbatch and cannot be checked against one retention set.
  bool strict_deps = true;
};

/// Expands the per-layer plan across the stage's microbatches: steady
/// backwards draw phases 1-2 from the paired forward's windows and phases
/// 3-4 from the adjacent backward windows; the first backward layer rides
/// the preceding microbatch's final backward window when the reservation
/// funds it (otherwise the critical path); cool-down recomputation becomes
/// stall-fill work, falling back to the critical path.
StageRecomputeTimeline expand_plan_to_stage(const LayerPhasePlan& plan, const HeuContext& ctx,
                                            const PipelineConfig& pipeline, int stage);

}  // namespace lynx
