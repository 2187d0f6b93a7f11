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
#include "lynx/partition.hpp"

#include <algorithm>
#include <numeric>

namespace lynx {

namespace {

// Cache key: embed/head attachment and the in-flight count are what make
// two stages with equal layer counts differ.
int stage_key(const Profile& profile, int stage_index) {
  const int stages = profile.pipeline.n_stages;
  const int n_batch = std::min(stages - stage_index, profile.pipeline.n_microbatches);
  int key = n_batch * 8;
  if (stage_index == 0 && !profile.model.embed_ops.empty()) key |= 1;
  if (stage_index == stages - 1 && !profile.model.head_ops.empty()) key |= 2;
  if (stage_index == stages - 1) key |= 4;
  return key;
}

StagePlan plan_stage_heu(const Profile& profile, int stage_index, int stage_layers,
                         std::int64_t time_limit_ms) {
  const LayerTemplate& layer = profile.model.layer;
  StagePlan best;
  bool have = false;
  for (DeltaPolicy policy : {DeltaPolicy::FixedBytes, DeltaPolicy::ReserveUnretained}) {
    HeuContext ctx = make_heu_context(profile, stage_index, stage_layers, policy, 0);
    LayerPhasePlan plan;
    try {
      HeuModelInstance inst = build_heu_model(layer, ctx);
      plan = solve_heu(inst, time_limit_ms);
    } catch (const BudgetInfeasible&) {
      continue;
    }
    plan.peak_bytes = plan_peak_bytes(plan, ctx, layer);
    StageRecomputeTimeline tl = expand_plan_to_stage(plan, ctx, profile.pipeline, stage_index);
    Rat period = stage_period_us(profile, stage_index, stage_layers, tl);
    if (!have || period < best.duration_us) {
      best.timeline = std::move(tl);
      best.duration_us = period;
      have = true;
    }
  }
  if (!have) throw BudgetInfeasible("stage " + std::to_string(stage_index) + " cannot fit");
  return best;
}

StagePlan plan_stage_opt(const Profile& profile, int stage_index, int stage_layers,
                         std::int64_t time_limit_ms) {
  StagePhaseGraph spg = build_stage_phase_graph(profile, stage_index, stage_layers);
  Rat static_share = Rat(profile.model.static_bytes) * Rat(stage_layers) /
                     Rat(profile.model.n_layers);
  // The MILP budget check uses integral bytes; round the share up.
  BigInt num = rat_num(static_share), den = rat_den(static_share);
  std::int64_t static_int = static_cast<std::int64_t>((num + den - 1) / den);
  OptModelInstance inst = build_opt_model(spg.graph, profile.hardware, static_int);
  RecomputationSchedule sched = solve_opt(inst, time_limit_ms);
  if (sched.status == SolStatus::Infeasible)
    throw BudgetInfeasible("stage " + std::to_string(stage_index) + " cannot fit");
  if (sched.status == SolStatus::TimedOut)
    throw TooLarge("optimal schedule search exhausted its budget for stage " +
                   std::to_string(stage_index));
  StagePlan out;
  out.timeline.stage = stage_index;
  out.timeline.plan.retained.assign(profile.model.layer.forward_op_count(), true);
  out.duration_us = sched.cost_us / Rat(profile.pipeline.n_microbatches);
  return out;
}

}  // namespace

const StagePlan& PlanCache::stage_plan(int stage_index, int stage_layers, PlanMode mode,
                                       std::int64_t time_limit_ms) {
  auto key = std::make_tuple(stage_key(profile_, stage_index), stage_layers,
                             static_cast<int>(mode));
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;
  StagePlan plan = mode == PlanMode::Heu
                       ? plan_stage_heu(profile_, stage_index, stage_layers, time_limit_ms)
                       : plan_stage_opt(profile_, stage_index, stage_layers, time_limit_ms);
  plan.timeline.stage = stage_index;
  return cache_.emplace(key, std::move(plan)).first->second;
}

bool check_oom(const ModelProfile& model, int stage_layers, int stage_index,
               const PipelineConfig& pipeline, const HardwareProfile& hw) {
  const int n_batch = std::min(pipeline.n_stages - stage_index, pipeline.n_microbatches);
  const int ckpt = model.layer.checkpoint_index();
  if (ckpt < 0) return true;
  Rat static_share = Rat(model.static_bytes) * Rat(stage_layers) / Rat(model.n_layers);
  Rat peak = static_share + Rat(stage_layers) * Rat(n_batch) *
                                Rat(model.layer.ops[ckpt].out_bytes);
  return peak > Rat(hw.mem_budget_bytes);
}

PartitionScheme initial_partition(const Profile& profile, PlanMode mode) {
  const int layers = profile.model.n_layers;
  const int stages = profile.pipeline.n_stages;
  if (layers < stages) throw NoValidPartition("fewer layers than stages");

  PartitionScheme scheme;
  scheme.mode = mode;
  scheme.layers_per_stage.assign(stages, layers / stages);
  // Remainder goes to later stages: they hold fewer in-flight activations.
  const int rem = layers % stages;
  for (int k = 0; k < rem; ++k) scheme.layers_per_stage[stages - 1 - k] += 1;

  auto oom = [&](int s) {
    return check_oom(profile.model, scheme.layers_per_stage[s], s, profile.pipeline,
                     profile.hardware);
  };
  for (int guard = 0; guard < layers * stages * stages; ++guard) {
    int bad = -1;
    for (int s = 0; s < stages; ++s) {
      if (oom(s)) {
        bad = s;
        break;
      }
    }
    if (bad < 0) return scheme;
    if (bad == stages - 1 || scheme.layers_per_stage[bad] <= 1)
      throw NoValidPartition("no OOM-free initial partition");
    scheme.layers_per_stage[bad] -= 1;
    scheme.layers_per_stage[bad + 1] += 1;
  }
  throw NoValidPartition("no OOM-free initial partition");
}

std::vector<Rat> stage_durations(const Profile& profile, const std::vector<int>& layers,
                                 PlanMode mode, PlanCache& cache, std::int64_t time_limit_ms) {
  (void)profile;
  std::vector<Rat> durations;
  for (std::size_t s = 0; s < layers.size(); ++s) {
    durations.push_back(
        cache.stage_plan(static_cast<int>(s), layers[s], mode, time_limit_ms).duration_us);
  }
  return durations;
}

PartitionScheme search_partition(const Profile& profile, PlanMode mode,
                                 std::int64_t time_limit_ms) {
  PartitionScheme scheme = initial_partition(profile, mode);
  const int stages = profile.pipeline.n_stages;
  PlanCache cache(profile);

  scheme.durations_us = stage_durations(profile, scheme.layers_per_stage, mode, cache,
                                        time_limit_ms);
  const int max_iterations = profile.model.n_layers * stages;
  bool changed = true;
  while (changed && scheme.iterations < max_iterations) {
    changed = false;
    ++scheme.iterations;

    int longest = 0;
    for (int s = 1; s < stages; ++s) {
      if (scheme.durations_us[s] > scheme.durations_us[longest]) longest = s;
    }
    const Rat d_longest = scheme.durations_us[longest];
    if (scheme.layers_per_stage[longest] <= 1) break;

    // Stages by ascending duration, ties to the smaller index.
    std::vector<int> order(stages);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return scheme.durations_us[a] < scheme.durations_us[b];
    });

    for (int k = 0; k < stages - 1; ++k) {
      const int shortest = order[k];
      if (shortest == longest) continue;
      std::vector<int> candidate = scheme.layers_per_stage;
      candidate[longest] -= 1;
      candidate[shortest] += 1;
      bool valid = true;
      for (int s = 0; s < stages && valid; ++s) {
        if (check_oom(profile.model, candidate[s], s, profile.pipeline, profile.hardware))
          valid = false;
      }
      if (!valid) continue;
      std::vector<Rat> cand_durations =
          stage_durations(profile, candidate, mode, cache, time_limit_ms);
      Rat cand_longest = cand_durations[0];
      for (const Rat& d : cand_durations) cand_longest = rat_max(cand_longest, d);
      if (cand_longest < d_longest) {
        scheme.layers_per_stage = std::move(candidate);
        scheme.durations_us = std::move(cand_durations);
        scheme.moves.push_back({longest, shortest, true});
        changed = true;
        break;  // first accepted move restarts the outer scan
      }
    }
  }

  scheme.timelines.clear();
  for (int s = 0; s < stages; ++s) {
    scheme.timelines.push_back(
        cache.stage_plan(s, scheme.layers_per_stage[s], mode, time_limit_ms).timeline);
  }
  return scheme;
}

}  // namespace lynx
