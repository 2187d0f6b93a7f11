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
#include <tuple>
#include <vector>

#include "lynx/heusched.hpp"
#include "lynx/optsched.hpp"
#include "lynx/pipesim.hpp"
#include "lynx/profile.hpp"

namespace lynx {

enum class PlanMode { Opt, Heu };

struct PartitionMove {
  int from = 0;
  int to = 0;
  bool accepted = true;
};

struct PartitionScheme {
  std::vector<int> layers_per_stage;
  std::vector<StageRecomputeTimeline> timelines;  // per stage, heu plans inside
  std::vector<Rat> durations_us;
  PlanMode mode = PlanMode::Heu;
  int iterations = 0;
  std::vector<PartitionMove> moves;
};

/// Plans one stage: solves the per-layer model twice (full reservation for
/// the first-backward-layer overlap, and none) and keeps the plan with the
/// smaller simulated stage period. Returns the timeline and its period.
struct StagePlan {
  StageRecomputeTimeline timeline;
  Rat duration_us;
};

class PlanCache {
 public:
  explicit PlanCache(const Profile& profile) : profile_(profile) {}

  const StagePlan& stage_plan(int stage_index, int stage_layers, PlanMode mode,
                              std::int64_t time_limit_ms = 10000);

 private:
  const Profile& profile_;
  std::map<std::tuple<int, int, int>, StagePlan> cache_;  // (key, layers, mode)
};

/// True iff the stage cannot train under the budget even with maximal
/// recomputation (only the checkpoint retained, no reservation).
bool check_oom(const ModelProfile& model, int stage_layers, int stage_index,
               const PipelineConfig& pipeline, const HardwareProfile& hw);

/// Near-even split with the remainder on later stages (they hold fewer
/// in-flight activations); layers shift toward later stages until every
/// stage passes the OOM check. Throws NoValidPartition.
PartitionScheme initial_partition(const Profile& profile, PlanMode mode = PlanMode::Heu);

/// Per-stage steady-state 1F1B periods for a layer assignment.
std::vector<Rat> stage_durations(const Profile& profile, const std::vector<int>& layers,
                                 PlanMode mode, PlanCache& cache,
                                 std::int64_t time_limit_ms = 10000);

/// Greedy load balancing: repeatedly move one layer off the longest stage to
/// the k-th shortest stage that stays OOM-free and strictly lowers the
/// longest duration; stop when no move helps.
PartitionScheme search_partition(const Profile& profile, PlanMode mode = PlanMode::Heu,
                                 std::int64_t time_limit_ms = 10000);

}  // namespace lynx
