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
#include <utility>
#include <vector>

#include "lynx/heusched.hpp"
#include "lynx/profile.hpp"

namespace lynx {

enum class SimEventKind {
  Fwd,
  Bwd,
  CommFwd,
  CommBwd,
  Recompute,
  StallRecompute,
  P2PTransfer,
  Stall,
};

const char* sim_event_kind_name(SimEventKind k);

struct SimEvent {
  int stage = 0;
  int microbatch = -1;
  SimEventKind kind = SimEventKind::Fwd;
  int op_id = -1;  // template position for recompute events
  Rat start_us;
  Rat end_us;
  bool overlapped = false;
};

struct StageStats {
  Rat busy_us;      // compute-resource occupancy
  Rat comm_us;      // comm-resource occupancy
  Rat stall_us;     // idle awaiting inputs, between first and last activity
  Rat recompute_on_demand_us;
  Rat recompute_overlapped_us;  // hidden in comm windows or stalls
};

struct StageFractions {
  // Time-weighted share of backward-consumed tensors by production path.
  Rat no_recompute;
  Rat overlapped;
  Rat on_demand;
};

struct SimOptions {
  Rat p2p_us = 0;  // per-hop activation/gradient transfer latency
};

struct SimReport {
  Rat iteration_us;
  std::vector<StageStats> per_stage;
  std::vector<StageFractions> breakdown;
  std::vector<Rat> memory_peaks;
  std::vector<std::vector<std::pair<Rat, Rat>>> memory_traces;  // (time, resident bytes)
  std::vector<SimEvent> timeline;
};

/// Deterministic replay of one training iteration under the 1F1B schedule.
/// Each stage runs its pass sequence; forward passes wait on the upstream
/// stage, backward passes on the downstream one. Comm operators occupy the
/// stage's comm resource while hosted recomputation runs on the otherwise
/// idle compute resource, capped by the window; the overflow spills onto the
/// critical path. The memory ledger allocates on production and frees after
/// the last consumer, honoring each plan's retention set.
/// Throws InconsistentPlan when a recompute event's dependencies are not
/// resident at its start.
SimReport simulate(const Profile& profile, const std::vector<int>& layers_per_stage,
                   const std::vector<StageRecomputeTimeline>& timelines,
                   const SimOptions& options = {});

/// Step function of resident bytes for one stage; its maximum equals
/// memory_peaks[stage].
std::vector<std::pair<Rat, Rat>> memory_trace(const SimReport& report, int stage);

/// Length of one steady-state 1F1B period for a stage in isolation: forward
/// wall time + backward wall time + recomputation that the windows cannot
/// hide. This is the duration the partitioner balances.
Rat stage_period_us(const Profile& profile, int stage_index, int stage_layers,
                    const StageRecomputeTimeline& timeline);

enum class TraceFormat { ChromeTrace, Csv };

/// ChromeTrace: JSON duration events, pid = stage, tid = compute|comm.
/// Csv: one row per event.
std::string emit_trace(const SimReport& report, TraceFormat format);

}  // namespace lynx
