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
#include "lynx/report_io.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

namespace lynx {

using ordered_json = nlohmann::ordered_json;

namespace {

const char* status_name(SolStatus s) {
  switch (s) {
    case SolStatus::Optimal: return "optimal";
    case SolStatus::Feasible: return "feasible";
    case SolStatus::Infeasible: return "infeasible";
    case SolStatus::TimedOut: return "timed_out";
  }
  return "?";
}

ordered_json pairs_to_json(const std::vector<std::pair<int, int>>& pairs) {
  ordered_json arr = ordered_json::array();
  for (auto [t, i] : pairs) arr.push_back(ordered_json::array({t, i}));
  return arr;
}

}  // namespace

std::string schedule_to_json(const RecomputationSchedule& schedule, int stage) {
  ordered_json j;
  j["stage"] = stage;
  j["status"] = status_name(schedule.status);
  j["objective_us"] = rat_to_string(schedule.cost_us);
  if (schedule.status == SolStatus::Feasible) j["bound_gap_us"] = rat_to_string(schedule.bound_gap);
  j["keep"] = pairs_to_json(schedule.keep);
  j["recompute"] = pairs_to_json(schedule.recompute);
  j["overlapped"] = pairs_to_json(schedule.overlapped);
  ordered_json peaks = ordered_json::array();
  for (const Rat& p : schedule.peak_bytes_per_phase) peaks.push_back(rat_to_string(p));
  j["peak_bytes"] = peaks;
  return j.dump(2) + "\n";
}

std::string plan_to_json(const LayerPhasePlan& plan, int stage) {
  ordered_json j;
  j["stage"] = stage;
  j["role"] = plan.role == StageRole::LastStage ? "last" : "interior";
  j["status"] = status_name(plan.status);
  ordered_json s = ordered_json::array();
  for (std::size_t i = 0; i < plan.retained.size(); ++i) {
    if (plan.retained[i]) s.push_back(static_cast<int>(i));
  }
  j["S"] = s;
  ordered_json phases = ordered_json::object();
  for (std::size_t i = 0; i < plan.retained.size(); ++i) {
    if (!plan.retained[i]) phases[std::to_string(i)] = plan.phase[i];
  }
  j["phase_assignment"] = phases;
  j["objective_us"] = rat_to_string(plan.critical_path_us);
  j["peak_bytes"] = rat_to_string(plan.peak_bytes);
  j["delta_bytes"] = rat_to_string(plan.delta_bytes);
  return j.dump(2) + "\n";
}

std::string partition_to_json(const PartitionScheme& scheme) {
  ordered_json j;
  j["layers_per_stage"] = scheme.layers_per_stage;
  ordered_json d = ordered_json::array();
  for (const Rat& r : scheme.durations_us) d.push_back(rat_to_fixed(r, 3));
  j["durations_us"] = d;
  j["mode"] = scheme.mode == PlanMode::Opt ? "opt" : "heu";
  j["iterations"] = scheme.iterations;
  ordered_json moves = ordered_json::array();
  for (const auto& m : scheme.moves) {
    ordered_json mv;
    mv["from"] = m.from;
    mv["to"] = m.to;
    mv["accepted"] = m.accepted;
    moves.push_back(mv);
  }
  j["moves"] = moves;
  return j.dump(2) + "\n";
}

std::string simreport_to_json(const SimReport& report) {
  ordered_json j;
  j["iteration_us"] = rat_to_fixed(report.iteration_us, 3);
  ordered_json stages = ordered_json::array();
  for (const auto& st : report.per_stage) {
    ordered_json s;
    s["busy_us"] = rat_to_fixed(st.busy_us, 3);
    s["comm_us"] = rat_to_fixed(st.comm_us, 3);
    s["stall_us"] = rat_to_fixed(st.stall_us, 3);
    s["recompute_on_demand_us"] = rat_to_fixed(st.recompute_on_demand_us, 3);
    s["recompute_overlapped_us"] = rat_to_fixed(st.recompute_overlapped_us, 3);
    stages.push_back(s);
  }
  j["per_stage"] = stages;
  ordered_json breakdown = ordered_json::array();
  for (const auto& b : report.breakdown) {
    ordered_json f;
    f["no_recompute"] = rat_to_fixed(b.no_recompute, 4);
    f["overlapped"] = rat_to_fixed(b.overlapped, 4);
    f["on_demand"] = rat_to_fixed(b.on_demand, 4);
    breakdown.push_back(f);
  }
  j["breakdown"] = breakdown;
  ordered_json peaks = ordered_json::array();
  for (const Rat& p : report.memory_peaks) peaks.push_back(rat_to_string(p));
  j["memory_peaks"] = peaks;
  ordered_json events = ordered_json::array();
  for (const SimEvent& ev : report.timeline) {
    ordered_json e;
    e["stage"] = ev.stage;
    e["microbatch"] = ev.microbatch;
    e["kind"] = sim_event_kind_name(ev.kind);
    if (ev.op_id >= 0) e["op_id"] = ev.op_id;
    e["start_us"] = rat_to_fixed(ev.start_us, 3);
    e["end_us"] = rat_to_fixed(ev.end_us, 3);
    e["overlapped"] = ev.overlapped;
    events.push_back(e);
  }
  j["timeline"] = events;
  return j.dump(2) + "\n";
}

PartitionFile read_partition_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed partition document: ") + e.what());
  }
  PartitionFile out;
  if (!j.contains("layers_per_stage"))
    throw ValidationError("partition document lacks layers_per_stage");
  out.layers_per_stage = j["layers_per_stage"].get<std::vector<int>>();
  for (int l : out.layers_per_stage) {
    if (l < 1) throw ValidationError("layers_per_stage entries must be positive");
  }
  if (j.contains("mode")) {
    out.has_mode = true;
    std::string m = j["mode"].get<std::string>();
    if (m == "opt") {
      out.mode = PlanMode::Opt;
    } else if (m == "heu") {
      out.mode = PlanMode::Heu;
    } else {
      throw ValidationError("unknown partition mode '" + m + "'");
    }
  }
  return out;
}

std::string breakdown_table(const SimReport& report) {
  std::ostringstream os;
  os << "stage  no_recompute  overlapped  on_demand  iteration_us\n";
  for (std::size_t s = 0; s < report.breakdown.size(); ++s) {
    const auto& b = report.breakdown[s];
    os << std::left << std::setw(7) << s << std::setw(14) << rat_to_fixed(b.no_recompute, 4)
       << std::setw(12) << rat_to_fixed(b.overlapped, 4) << std::setw(11)
       << rat_to_fixed(b.on_demand, 4);
    if (s == 0) os << rat_to_fixed(report.iteration_us, 3);
    os << "\n";
  }
  return os.str();
}

StageRecomputeTimeline timeline_from_opt_schedule(const Profile& profile, int stage_index,
                                                  int stage_layers,
                                                  const RecomputationSchedule& schedule,
                                                  const StagePhaseGraph& phase_graph) {
  const LayerTemplate& tmpl = profile.model.layer;
  const int fwd_n = tmpl.forward_op_count();
  const int tmpl_n = static_cast<int>(tmpl.ops.size());
  const int bwd_n = tmpl_n - fwd_n;
  const int embed_n = stage_index == 0 ? static_cast<int>(profile.model.embed_ops.size()) : 0;

  // Element index and window id of each template position within its pass.
  std::vector<int> elem_of(tmpl_n, 0), window_of(tmpl_n, -1);
  auto scan = [&](int lo, int hi, const std::vector<int>& window_ids) {
    int elem = -1;
    bool prev_comm = true;
    int win = 0;
    for (int i = lo; i < hi; ++i) {
      const bool comm = tmpl.ops[i].kind == OpKind::Comm;
      if (comm || prev_comm) ++elem;
      elem_of[i] = elem;
      prev_comm = comm;
      if (comm) {
        for (std::size_t w = 0; w < window_ids.size(); ++w) {
          if (tmpl.index_of(window_ids[w]) == i) window_of[i] = static_cast<int>(w);
        }
        ++win;
      }
    }
    (void)win;
  };
  scan(0, fwd_n, tmpl.fwd_comm_ids);
  scan(fwd_n, tmpl_n, tmpl.bwd_comm_ids);

  // Map a phase-graph position to (mb, backward, layer, template position).
  struct Pos {
    int mb, layer, tmpl_pos;
    bool backward, is_layer_op;
  };
  auto locate = [&](int idx) {
    const PhaseOrigin& o = phase_graph.origin[idx];
    Pos p{o.microbatch, 0, 0, o.backward, true};
    if (!o.backward) {
      int local = o.local_index - embed_n;
      if (local < 0 || local >= stage_layers * fwd_n) {
        p.is_layer_op = false;  // embed or head
        return p;
      }
      p.layer = local / fwd_n;
      p.tmpl_pos = local % fwd_n;
    } else {
      if (bwd_n == 0) {
        p.is_layer_op = false;
        return p;
      }
      p.layer = stage_layers - 1 - o.local_index / bwd_n;
      p.tmpl_pos = fwd_n + o.local_index % bwd_n;
    }
    return p;
  };

  StageRecomputeTimeline tl;
  tl.stage = stage_index;
  tl.strict_deps = false;
  tl.role = stage_index == profile.pipeline.n_stages - 1 ? StageRole::LastStage
                                                         : StageRole::Interior;
  // Aggregate retention: a tensor counts as kept unless some microbatch
  // regenerates it.
  tl.plan.status = schedule.status;
  tl.plan.role = tl.role;
  tl.plan.retained.assign(fwd_n, true);
  tl.plan.phase.assign(fwd_n, 5);
  for (auto [t, i] : schedule.recompute) {
    Pos owner = locate(i);
    if (owner.is_layer_op && !owner.backward) tl.plan.retained[owner.tmpl_pos] = false;
  }
  tl.plan.critical_path_us = schedule.cost_us;

  for (auto [t, i] : schedule.recompute) {
    Pos owner = locate(i);
    if (!owner.is_layer_op || owner.backward) continue;  // only forward layer tensors
    Pos host = locate(t);
    RecomputeItem item;
    item.owner_mb = owner.mb;
    item.owner_layer = owner.layer;
    item.op = owner.tmpl_pos;
    if (!host.is_layer_op) {
      item.host = RecomputeItem::Host::CriticalPath;
      item.host_mb = host.mb;
      item.host_backward = host.backward;
      item.host_layer = 0;
      item.host_elem = 0;
    } else if (phase_graph.graph.is_comm(t) && window_of[host.tmpl_pos] >= 0) {
      item.host = RecomputeItem::Host::Window;
      item.host_mb = host.mb;
      item.host_backward = host.backward;
      item.host_layer = host.layer;
      item.host_window = window_of[host.tmpl_pos];
    } else {
      item.host = RecomputeItem::Host::CriticalPath;
      item.host_mb = host.mb;
      item.host_backward = host.backward;
      item.host_layer = host.layer;
      item.host_elem = elem_of[host.tmpl_pos];
    }
    tl.items.push_back(item);
  }
  return tl;
}

}  // namespace lynx
