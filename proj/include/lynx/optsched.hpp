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

#include <utility>
#include <vector>

#include "lynx/ilp.hpp"
#include "lynx/profile.hpp"

namespace lynx {

/// Phase-indexed MILP over one stage's operator sequence. Phase t hosts the
/// mandatory execution of op t; any earlier op may additionally be
/// recomputed there. All indices are 0-based and phase t == op index t.
///
/// Variables: R[t][i] (i <= t, op i computed in phase t; R[t][t] pinned 1),
/// S[t][i] (i < t, output of op i retained into phase t; none for t = 0),
/// U memory-usage chain per phase, and F freeing products. Retention past
/// the final phase is defined as zero: nothing survives the iteration.
struct OptModelInstance {
  OperatorGraph graph;
  std::int64_t budget_bytes = 0;
  std::int64_t static_bytes = 0;
  std::vector<Rat> cost_us;  // effective times, comm ops scaled
  IlpModel model;
  std::vector<std::vector<VarId>> R;  // R[t].size() == t+1
  std::vector<std::vector<VarId>> S;  // S[t].size() == t
};

struct RecomputationSchedule {
  SolStatus status = SolStatus::Infeasible;
  std::vector<std::pair<int, int>> keep;        // (t, i) with S = 1
  std::vector<std::pair<int, int>> recompute;   // (t, i) with R = 1 and t != i
  std::vector<std::pair<int, int>> overlapped;  // recomputes whose phase is Comm
  Rat cost_us = 0;
  Rat bound_gap = 0;
  std::vector<Rat> peak_bytes_per_phase;
};

struct CheckIssue {
  enum class Kind {
    MandatoryMissing,
    DependencyViolation,
    CommExclusionViolation,
    OverlapBudgetViolation,
    BudgetViolation,
    RetentionChainViolation,
    IndexOutOfRange,
  };
  Kind kind;
  int phase;
  int op;
  std::string detail;
};

struct CheckReport {
  std::vector<CheckIssue> issues;
  bool empty() const { return issues.empty(); }
  std::string to_string() const;
};

/// Builds the full recomputation MILP for a phase graph. Throws EmptyGraph
/// and BudgetTooSmall (static_bytes >= budget).
OptModelInstance build_opt_model(const OperatorGraph& graph, const HardwareProfile& hw,
                                 std::int64_t static_bytes);

/// Solves the instance and decodes the schedule. Optimal and Feasible
/// solutions are re-verified with check_schedule before being returned.
RecomputationSchedule solve_opt(const OptModelInstance& instance,
                                std::int64_t time_limit_ms = 10000);

/// Independent replay of a schedule against the instance's graph, costs and
/// budget. Walks phases in order, tracking availability and the memory
/// ledger, and reports every violated rule. Shares no code with the builder.
CheckReport check_schedule(const RecomputationSchedule& schedule,
                           const OptModelInstance& instance);

/// Where each phase of an unrolled stage graph came from.
struct PhaseOrigin {
  int microbatch = 0;
  bool backward = false;
  int local_index = 0;  // position within the single-microbatch fwd/bwd part
};

struct StagePhaseGraph {
  OperatorGraph graph;
  std::vector<PhaseOrigin> origin;
  int single_fwd_ops = 0;
  int single_bwd_ops = 0;
};

/// Replicates a single-microbatch stage graph (forward block followed by
/// backward block) into the stage's full 1F1B phase sequence: n_batch - 1
/// warm-up forwards, steady one-forward-one-backward pairs, cool-down
/// backwards. Microbatch subgraphs are independent; ordering comes from the
/// phase sequence itself.
StagePhaseGraph unroll_1f1b(const OperatorGraph& single, int n_microbatches, int n_batch);

/// Convenience: expanded + unrolled phase graph for one pipeline stage.
StagePhaseGraph build_stage_phase_graph(const Profile& profile, int stage_index,
                                        int stage_layers);

}  // namespace lynx
