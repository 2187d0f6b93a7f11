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

#include <string>
#include <vector>

#include "lynx/heusched.hpp"
#include "lynx/optsched.hpp"
#include "lynx/partition.hpp"
#include "lynx/pipesim.hpp"

namespace lynx {

std::string schedule_to_json(const RecomputationSchedule& schedule, int stage);
std::string plan_to_json(const LayerPhasePlan& plan, int stage);
std::string partition_to_json(const PartitionScheme& scheme);
std::string simreport_to_json(const SimReport& report);

/// Reads layers_per_stage (and mode when present) back from partition JSON.
struct PartitionFile {
  std::vector<int> layers_per_stage;
  PlanMode mode = PlanMode::Heu;
  bool has_mode = false;
};
PartitionFile read_partition_json(const std::string& text);

/// Fig. 9-style per-stage table of tensor production paths.
std::string breakdown_table(const SimReport& report);

/// Converts an optimal schedule over an unrolled stage phase graph into
/// simulator recomputation placements. Timing is exact; the ledger uses the
/// schedule's aggregate retention set.
StageRecomputeTimeline timeline_from_opt_schedule(const Profile& profile, int stage_index,
                                                  int stage_layers,
                                                  const RecomputationSchedule& schedule,
                                                  const StagePhaseGraph& phase_graph);

}  // namespace lynx
