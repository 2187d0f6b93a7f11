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
#include "lynx/pipesim.hpp"

#include <algorithm>
#include <climits>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

namespace lynx {

namespace {

struct Elem {
  bool comm = false;
  std::vector<int> ops;  // template positions (compute segment)
  int op = -1;           // comm operator position
  int window = -1;       // scheduling window index within the pass kind
  Rat dur;
};

struct Layout {
  std::vector<Elem> fwd, bwd;
  int fwd_n = 0;
  int tmpl_n = 0;
  Rat fwd_wall, bwd_wall;
  std::vector<int> produce_fwd_elem;   // per fwd op
  std::vector<int> last_fwd_use_elem;  // per fwd op, -1 when unused forward
  std::vector<int> last_bwd_use_elem;  // per fwd op, -1 when unused backward
  std::vector<int> bwd_elem_of;        // per template pos (backward part)
  std::vector<int> bwd_last_use;       // per template pos, elem of last bwd user
  std::vector<Rat> cost;               // effective per-op times
  std::vector<std::vector<int>> fwd_deps;  // per fwd op, template positions
};

std::vector<Elem> build_elems(const LayerTemplate& layer, const HardwareProfile& hw, int lo,
                              int hi, const std::vector<int>& window_ids) {
  std::vector<Elem> elems;
  for (int i = lo; i < hi; ++i) {
    const OperatorSpec& op = layer.ops[i];
    if (op.kind == OpKind::Comm) {
      Elem e;
      e.comm = true;
      e.op = i;
      e.dur = effective_time(op, hw);
      for (std::size_t w = 0; w < window_ids.size(); ++w) {
        if (layer.index_of(window_ids[w]) == i) e.window = static_cast<int>(w);
      }
      elems.push_back(std::move(e));
    } else {
      if (elems.empty() || elems.back().comm) elems.push_back({});
      elems.back().ops.push_back(i);
      elems.back().dur += op.time_us;
    }
  }
  return elems;
}

Layout build_layout(const LayerTemplate& layer, const HardwareProfile& hw) {
  Layout lay;
  lay.fwd_n = layer.forward_op_count();
  lay.tmpl_n = static_cast<int>(layer.ops.size());
  lay.fwd = build_elems(layer, hw, 0, lay.fwd_n, layer.fwd_comm_ids);
  lay.bwd = build_elems(layer, hw, lay.fwd_n, lay.tmpl_n, layer.bwd_comm_ids);
  for (const Elem& e : lay.fwd) lay.fwd_wall += e.dur;
  for (const Elem& e : lay.bwd) lay.bwd_wall += e.dur;

  auto elem_of = [](const std::vector<Elem>& elems, int pos) {
    for (std::size_t e = 0; e < elems.size(); ++e) {
      if (elems[e].comm ? elems[e].op == pos
                        : std::find(elems[e].ops.begin(), elems[e].ops.end(), pos) !=
                              elems[e].ops.end())
        return static_cast<int>(e);
    }
    return -1;
  };

  lay.produce_fwd_elem.assign(lay.fwd_n, -1);
  lay.last_fwd_use_elem.assign(lay.fwd_n, -1);
  lay.last_bwd_use_elem.assign(lay.fwd_n, -1);
  lay.bwd_elem_of.assign(lay.tmpl_n, -1);
  lay.bwd_last_use.assign(lay.tmpl_n, -1);
  for (int i = 0; i < lay.fwd_n; ++i) {
    lay.produce_fwd_elem[i] = elem_of(lay.fwd, i);
    lay.cost.push_back(effective_time(layer.ops[i], hw));
    std::vector<int> deps;
    for (int id : layer.ops[i].deps) deps.push_back(layer.index_of(id));
    lay.fwd_deps.push_back(std::move(deps));
  }
  for (int i = lay.fwd_n; i < lay.tmpl_n; ++i) {
    lay.bwd_elem_of[i] = elem_of(lay.bwd, i);
    lay.cost.push_back(effective_time(layer.ops[i], hw));
  }
  for (int i = 0; i < lay.tmpl_n; ++i) {
    for (int id : layer.ops[i].deps) {
      int d = layer.index_of(id);
      if (i < lay.fwd_n) {
        lay.last_fwd_use_elem[d] = std::max(lay.last_fwd_use_elem[d], lay.produce_fwd_elem[i]);
      } else if (d < lay.fwd_n) {
        lay.last_bwd_use_elem[d] = std::max(lay.last_bwd_use_elem[d], lay.bwd_elem_of[i]);
      } else {
        lay.bwd_last_use[d] = std::max(lay.bwd_last_use[d], lay.bwd_elem_of[i]);
      }
    }
  }
  return lay;
}

using WindowKey = std::tuple<int, bool, int, int>;  // mb, backward, layer, window
using ElemKey = std::tuple<int, bool, int, int>;    // mb, backward, layer, elem

struct StageState {
  int stage = 0;
  int layers = 0;
  StageRecomputeTimeline tl;
  const Layout* lay = nullptr;
  std::vector<Elem> embed_elems, head_elems;
  Rat embed_bytes, head_bytes;

  std::map<WindowKey, std::vector<RecomputeItem>> window_items;
  std::map<ElemKey, std::vector<RecomputeItem>> critical_items;
  std::map<int, std::vector<RecomputeItem>> stall_items;

  std::vector<std::pair<bool, int>> passes;  // (backward?, microbatch)
  std::size_t cursor = 0;
  Rat stage_free;
  bool started = false;

  // Ledger: deltas are summed for budget checks and sorted at the end for
  // the trace. Frees for regenerated tensors are registered against the
  // backward element that last consumes them.
  Rat static_share;
  Rat resident_now;
  Rat budget;
  std::vector<std::pair<Rat, Rat>> deltas;  // (time, +/- bytes)
  std::map<std::tuple<int, int, int>, Rat> regen_frees;  // (mb, layer, elem|-1)
  std::map<int, Rat> pass_end_frees;                     // mb -> bytes
  std::set<std::tuple<int, int, int>> regenerated;       // (mb, layer, op)

  std::map<int, Rat> fwd_done, bwd_done;  // microbatch -> completion time
  Rat exposed_comm;
  Rat last_end;
  Rat first_start;
  bool have_first = false;

  std::vector<SimEvent>* events = nullptr;
  bool ledger_enabled = true;

  void note_span(const Rat& s, const Rat& e) {
    if (!have_first) {
      first_start = s;
      have_first = true;
    }
    last_end = rat_max(last_end, e);
  }
  void emit(SimEventKind kind, int mb, int op, const Rat& s, const Rat& e, bool overlapped) {
    if (events) events->push_back({stage, mb, kind, op, s, e, overlapped});
    note_span(s, e);
  }
  void alloc(const Rat& t, const Rat& bytes) {
    if (!ledger_enabled || bytes == 0) return;
    resident_now += bytes;
    deltas.emplace_back(t, bytes);
  }
  void free_bytes(const Rat& t, const Rat& bytes) {
    if (!ledger_enabled || bytes == 0) return;
    resident_now -= bytes;
    deltas.emplace_back(t, -bytes);
  }
};

Rat item_cost(const StageState& st, const RecomputeItem& it) { return st.lay->cost[it.op]; }

}  // namespace

const char* sim_event_kind_name(SimEventKind k) {
  switch (k) {
    case SimEventKind::Fwd: return "fwd";
    case SimEventKind::Bwd: return "bwd";
    case SimEventKind::CommFwd: return "comm_fwd";
    case SimEventKind::CommBwd: return "comm_bwd";
    case SimEventKind::Recompute: return "recompute";
    case SimEventKind::StallRecompute: return "stall_recompute";
    case SimEventKind::P2PTransfer: return "p2p";
    case SimEventKind::Stall: return "stall";
  }
  return "?";
}

namespace {

class Simulator {
 public:
  Simulator(const Profile& profile, const std::vector<int>& layers_per_stage,
            const std::vector<StageRecomputeTimeline>& timelines, const SimOptions& opt)
      : profile_(profile),
        layers_(layers_per_stage),
        lay_(build_layout(profile.model.layer, profile.hardware)),
        opt_(opt) {
    const int S = static_cast<int>(layers_per_stage.size());
    if (static_cast<int>(timelines.size()) != S)
      throw InconsistentPlan("one timeline per stage is required");
    stages_.resize(S);
    for (int s = 0; s < S; ++s) init_stage(s, timelines[s]);
  }

  SimReport run() {
    SimReport report;
    report.timeline.clear();
    for (auto& st : stages_) st.events = &report.timeline;
    const int S = static_cast<int>(stages_.size());

    while (true) {
      int pick = -1;
      Rat pick_start;
      for (int s = 0; s < S; ++s) {
        StageState& st = stages_[s];
        if (st.cursor >= st.passes.size()) continue;
        auto [backward, mb] = st.passes[st.cursor];
        Rat input;
        if (!input_time(s, backward, mb, input)) continue;
        Rat start = rat_max(st.stage_free, input);
        if (pick < 0 || start < pick_start) {
          pick = s;
          pick_start = start;
        }
      }
      if (pick < 0) {
        for (const auto& st : stages_)
          if (st.cursor < st.passes.size())
            throw std::logic_error("pipeline deadlock: no runnable pass");
        break;
      }
      expand_pass(pick);
    }

    assemble(report);
    return report;
  }

  // One steady 1F1B period for the stage in isolation. The cycle is
  // synthetic (no preceding passes ran), so dependency checking is off.
  Rat period(int s) {
    StageState& st = stages_[s];
    st.ledger_enabled = false;
    st.tl.strict_deps = false;
    st.events = nullptr;
    const int M = profile_.pipeline.n_microbatches;
    const int n_batch = std::min(static_cast<int>(stages_.size()) - s, M);
    const int steady = std::max(0, M - n_batch + 1);
    const int m_rep = steady >= 3 ? 1 : 0;
    const int host_mb = std::min(m_rep + n_batch - 1, M - 1);
    Rat t = expand_fwd(st, host_mb, 0);
    Rat end = expand_bwd(st, m_rep, t);
    return end;
  }

 private:
  void init_stage(int s, const StageRecomputeTimeline& tl) {
    StageState& st = stages_[s];
    st.stage = s;
    st.layers = layers_[s];
    st.tl = tl;
    if (st.tl.plan.retained.empty()) {
      st.tl.plan.retained.assign(lay_.fwd_n, true);
    } else if (static_cast<int>(st.tl.plan.retained.size()) != lay_.fwd_n) {
      throw InconsistentPlan("plan retention vector does not match the layer template");
    }
    st.lay = &lay_;
    st.budget = Rat(profile_.hardware.mem_budget_bytes);
    st.static_share = Rat(profile_.model.static_bytes) * Rat(st.layers) /
                      Rat(profile_.model.n_layers);
    st.resident_now = st.static_share;
    st.deltas.emplace_back(0, st.static_share);
    const int S = static_cast<int>(stages_.size());
    if (s == 0) {
      st.embed_elems = build_elems_for(profile_.model.embed_ops);
      for (const auto& op : profile_.model.embed_ops) st.embed_bytes += Rat(op.out_bytes);
    }
    if (s == S - 1) {
      st.head_elems = build_elems_for(profile_.model.head_ops);
      for (const auto& op : profile_.model.head_ops) st.head_bytes += Rat(op.out_bytes);
    }

    for (const auto& it : st.tl.items) {
      switch (it.host) {
        case RecomputeItem::Host::Window:
          st.window_items[{it.host_mb, it.host_backward, it.host_layer, it.host_window}]
              .push_back(it);
          break;
        case RecomputeItem::Host::CriticalPath:
          st.critical_items[{it.host_mb, it.host_backward, it.host_layer, it.host_elem}]
              .push_back(it);
          break;
        case RecomputeItem::Host::StallFill:
          st.stall_items[it.host_mb].push_back(it);
          break;
      }
    }

    const int M = profile_.pipeline.n_microbatches;
    const int n_batch = std::min(S - s, M);
    const int warmup = n_batch - 1;
    for (int mb = 0; mb < std::min(warmup, M); ++mb) st.passes.emplace_back(false, mb);
    for (int mb = warmup; mb < M; ++mb) {
      st.passes.emplace_back(false, mb);
      st.passes.emplace_back(true, mb - warmup);
    }
    for (int mb = std::max(0, M - warmup); mb < M; ++mb) st.passes.emplace_back(true, mb);
  }

  std::vector<Elem> build_elems_for(const std::vector<OperatorSpec>& ops) {
    std::vector<Elem> elems;
    for (std::size_t i = 0; i < ops.size(); ++i) {
      const OperatorSpec& op = ops[i];
      if (op.kind == OpKind::Comm) {
        Elem e;
        e.comm = true;
        e.op = -1;
        e.dur = effective_time(op, profile_.hardware);
        elems.push_back(std::move(e));
      } else {
        if (elems.empty() || elems.back().comm) elems.push_back({});
        elems.back().dur += op.time_us;
      }
    }
    for (auto& e : elems) e.ops.clear();  // pre/post ops are opaque segments
    return elems;
  }

  bool input_time(int s, bool backward, int mb, Rat& out) {
    const int S = static_cast<int>(stages_.size());
    if (!backward) {
      if (s == 0) {
        out = 0;
        return true;
      }
      auto it = stages_[s - 1].fwd_done.find(mb);
      if (it == stages_[s - 1].fwd_done.end()) return false;
      out = it->second + opt_.p2p_us;
      return true;
    }
    if (s == S - 1) {
      auto it = stages_[s].fwd_done.find(mb);
      if (it == stages_[s].fwd_done.end()) return false;
      out = it->second;
      return true;
    }
    auto it = stages_[s + 1].bwd_done.find(mb);
    if (it == stages_[s + 1].bwd_done.end()) return false;
    out = it->second + opt_.p2p_us;
    return true;
  }

  void check_recompute_deps(StageState& st, const RecomputeItem& it) {
    if (!st.tl.strict_deps) return;
    for (int d : lay_.fwd_deps[it.op]) {
      bool ok = st.tl.plan.retained[d];
      if (!ok) ok = st.regenerated.count({it.owner_mb, it.owner_layer, d}) > 0;
      if (!ok)
        throw InconsistentPlan("recompute of op " + std::to_string(it.op) + " (mb " +
                               std::to_string(it.owner_mb) + ", layer " +
                               std::to_string(it.owner_layer) + ") lacks dependency " +
                               std::to_string(d));
    }
  }

  // Emits one recomputation, registers its allocation and eventual release.
  void run_recompute(StageState& st, const RecomputeItem& it, SimEventKind kind, Rat start,
                     Rat end, bool overlapped) {
    check_recompute_deps(st, it);
    st.emit(kind, it.owner_mb, it.op, start, end, overlapped);
    st.regenerated.insert({it.owner_mb, it.owner_layer, it.op});
    const Rat bytes(profile_.model.layer.ops[it.op].out_bytes);
    if (st.ledger_enabled && bytes != 0) {
      st.alloc(start, bytes);
      int rel = lay_.last_bwd_use_elem[it.op];
      st.regen_frees[{it.owner_mb, it.owner_layer, rel}] += bytes;
    }
  }

  // Packs hosted items into a comm window [t, t+dur); overflow spills past
  // the window end as on-demand work. Returns the time compute is busy until.
  Rat pack_window(StageState& st, const Rat& t, const Rat& dur, int mb, bool backward,
                  int layer, int window) {
    Rat rt = t;
    const Rat wend = t + dur;
    auto it = st.window_items.find({mb, backward, layer, window});
    Rat hidden = 0;
    if (it != st.window_items.end()) {
      for (const RecomputeItem& item : it->second) {
        Rat c = item_cost(st, item);
        Rat iend = rt + c;
        if (iend <= wend) {
          run_recompute(st, item, SimEventKind::Recompute, rt, iend, true);
          hidden += c;
        } else if (rt < wend) {
          // Preempt at the window end; the remainder is on-demand.
          run_recompute(st, item, SimEventKind::Recompute, rt, wend, true);
          st.emit(SimEventKind::Recompute, item.owner_mb, item.op, wend, iend, false);
          hidden += wend - rt;
        } else {
          run_recompute(st, item, SimEventKind::Recompute, rt, iend, false);
        }
        rt = iend;
      }
    }
    st.exposed_comm += dur - rat_min(hidden, dur);
    return rt;
  }

  void run_critical_items(StageState& st, Rat& t, int mb, bool backward, int layer, int elem) {
    auto it = st.critical_items.find({mb, backward, layer, elem});
    if (it == st.critical_items.end()) return;
    std::stable_sort(it->second.begin(), it->second.end(),
                     [](const RecomputeItem& a, const RecomputeItem& b) {
                       if (a.owner_mb != b.owner_mb) return a.owner_mb < b.owner_mb;
                       if (a.owner_layer != b.owner_layer) return a.owner_layer < b.owner_layer;
                       return a.op < b.op;
                     });
    for (const RecomputeItem& item : it->second) {
      Rat c = item_cost(st, item);
      run_recompute(st, item, SimEventKind::Recompute, t, t + c, false);
      t += c;
    }
  }

  Rat expand_fwd(StageState& st, int mb, Rat start) {
    Rat t = start;
    for (const Elem& e : st.embed_elems) {
      st.emit(e.comm ? SimEventKind::CommFwd : SimEventKind::Fwd, mb, -1, t, t + e.dur, false);
      t += e.dur;
    }
    if (!st.embed_elems.empty() && st.embed_bytes != 0) {
      st.alloc(start, st.embed_bytes);
      st.pass_end_frees[mb] += st.embed_bytes;
    }
    for (int layer = 0; layer < st.layers; ++layer) {
      for (std::size_t ei = 0; ei < lay_.fwd.size(); ++ei) {
        const Elem& e = lay_.fwd[ei];
        run_critical_items(st, t, mb, false, layer, static_cast<int>(ei));
        if (e.comm) {
          Rat rt = t;
          if (e.window >= 0) rt = pack_window(st, t, e.dur, mb, false, layer, e.window);
          else st.exposed_comm += e.dur;
          st.emit(SimEventKind::CommFwd, mb, e.op, t, t + e.dur, false);
          alloc_and_release_fwd(st, mb, layer, static_cast<int>(ei), t, t + e.dur);
          t = rat_max(t + e.dur, rt);
        } else {
          st.emit(SimEventKind::Fwd, mb, -1, t, t + e.dur, false);
          alloc_and_release_fwd(st, mb, layer, static_cast<int>(ei), t, t + e.dur);
          t += e.dur;
        }
      }
    }
    if (st.stage + 1 == static_cast<int>(stages_.size())) {
      for (const Elem& e : st.head_elems) {
        st.emit(e.comm ? SimEventKind::CommFwd : SimEventKind::Fwd, mb, -1, t, t + e.dur, false);
        t += e.dur;
      }
      if (!st.head_elems.empty() && st.head_bytes != 0) {
        st.alloc(t, st.head_bytes);
        st.pass_end_frees[mb] += st.head_bytes;
      }
    }
    return t;
  }

  void alloc_and_release_fwd(StageState& st, int mb, int layer, int elem, const Rat& t,
                             const Rat& tend) {
    if (!st.ledger_enabled) return;
    const LayerTemplate& tmpl = profile_.model.layer;
    const std::vector<bool>& retained = st.tl.plan.retained;
    const Elem& e = lay_.fwd[elem];
    Rat in = 0;
    if (e.comm) {
      in += Rat(tmpl.ops[e.op].out_bytes);
    } else {
      for (int op : e.ops) in += Rat(tmpl.ops[op].out_bytes);
    }
    st.alloc(t, in);
    // Discarded tensors drop after their last forward consumer; retained
    // ones are released by the backward pass.
    Rat out = 0;
    for (int op = 0; op < lay_.fwd_n; ++op) {
      if (retained[op]) continue;
      int rel = std::max(lay_.produce_fwd_elem[op], lay_.last_fwd_use_elem[op]);
      if (rel == elem) out += Rat(tmpl.ops[op].out_bytes);
    }
    if (out != 0) st.free_bytes(tend, out);
    (void)layer;
    (void)mb;
  }

  Rat expand_bwd(StageState& st, int mb, Rat start) {
    const LayerTemplate& tmpl = profile_.model.layer;
    const std::vector<bool>& retained = st.tl.plan.retained;
    Rat t = start;
    Rat prev_sink_bytes = 0;
    for (int layer = st.layers - 1; layer >= 0; --layer) {
      bool first_elem_done = false;
      for (std::size_t ei = 0; ei < lay_.bwd.size(); ++ei) {
        const Elem& e = lay_.bwd[ei];
        run_critical_items(st, t, mb, true, layer, static_cast<int>(ei));
        Rat tend = t + e.dur;
        if (e.comm) {
          Rat rt = t;
          if (e.window >= 0) rt = pack_window(st, t, e.dur, mb, true, layer, e.window);
          else st.exposed_comm += e.dur;
          st.emit(SimEventKind::CommBwd, mb, e.op, t, tend, false);
          if (st.ledger_enabled) st.alloc(t, Rat(tmpl.ops[e.op].out_bytes));
          release_bwd(st, mb, layer, static_cast<int>(ei), tend);
          t = rat_max(tend, rt);
        } else {
          st.emit(SimEventKind::Bwd, mb, -1, t, tend, false);
          if (st.ledger_enabled) {
            Rat in = 0;
            for (int op : e.ops) in += Rat(tmpl.ops[op].out_bytes);
            st.alloc(t, in);
          }
          release_bwd(st, mb, layer, static_cast<int>(ei), tend);
          t = tend;
        }
        if (!first_elem_done) {
          first_elem_done = true;
          // The downstream layer's gradient output has now been consumed.
          if (st.ledger_enabled && prev_sink_bytes != 0) st.free_bytes(t, prev_sink_bytes);
          prev_sink_bytes = 0;
        }
      }
      // End-of-layer sweep: tensors without an in-template backward consumer.
      if (st.ledger_enabled) {
        Rat out = 0;
        for (int op = 0; op < lay_.fwd_n; ++op) {
          if (lay_.last_bwd_use_elem[op] != -1) continue;
          if (retained[op]) out += Rat(tmpl.ops[op].out_bytes);
        }
        // Leftover regenerated-copy frees for this layer, including entries
        // whose hosting window ran after the consuming element.
        for (auto it = st.regen_frees.lower_bound({mb, layer, INT_MIN});
             it != st.regen_frees.end() && std::get<0>(it->first) == mb &&
             std::get<1>(it->first) == layer;) {
          out += it->second;
          it = st.regen_frees.erase(it);
        }
        if (lay_.tmpl_n > lay_.fwd_n) {
          // Gradient output of this layer: held until the next layer starts.
          prev_sink_bytes = Rat(tmpl.ops[lay_.tmpl_n - 1].out_bytes);
        }
        if (out != 0) st.free_bytes(t, out);
      }
      // Regenerated tensors are single-use; forget them for this layer.
      if (st.ledger_enabled) {
        for (int op = 0; op < lay_.fwd_n; ++op) st.regenerated.erase({mb, layer, op});
      }
    }
    if (st.ledger_enabled) {
      if (prev_sink_bytes != 0) st.free_bytes(t, prev_sink_bytes);
      auto pe = st.pass_end_frees.find(mb);
      if (pe != st.pass_end_frees.end()) {
        st.free_bytes(t, pe->second);
        st.pass_end_frees.erase(pe);
      }
    }
    return t;
  }

  // Frees owed at the end of backward element `elem` of (mb, layer):
  // retained forward tensors, regenerated copies, and backward transients.
  void release_bwd(StageState& st, int mb, int layer, int elem, const Rat& t) {
    if (!st.ledger_enabled) return;
    const LayerTemplate& tmpl = profile_.model.layer;
    const std::vector<bool>& retained = st.tl.plan.retained;
    Rat out = 0;
    for (int op = 0; op < lay_.fwd_n; ++op) {
      if (lay_.last_bwd_use_elem[op] != elem) continue;
      if (retained[op]) out += Rat(tmpl.ops[op].out_bytes);
    }
    auto rf = st.regen_frees.find({mb, layer, elem});
    if (rf != st.regen_frees.end()) {
      out += rf->second;
      st.regen_frees.erase(rf);
    }
    for (int op = lay_.fwd_n; op < lay_.tmpl_n; ++op) {
      if (op == lay_.tmpl_n - 1) continue;  // the gradient sink crosses layers
      int rel = lay_.bwd_last_use[op];
      if (rel < 0) rel = lay_.bwd_elem_of[op];
      if (rel == elem) out += Rat(tmpl.ops[op].out_bytes);
    }
    if (out != 0) st.free_bytes(t, out);
  }

  void expand_pass(int s) {
    StageState& st = stages_[s];
    auto [backward, mb] = st.passes[st.cursor];
    Rat input;
    input_time(s, backward, mb, input);
    Rat start = rat_max(st.stage_free, input);

    // P2P handoff onto this stage.
    const int S = static_cast<int>(stages_.size());
    if (opt_.p2p_us >= 0 && ((!backward && s > 0) || (backward && s < S - 1))) {
      st.emit(SimEventKind::P2PTransfer, mb, -1, input - opt_.p2p_us, input, false);
    }

    // Idle gap before this pass: cool-down stall recomputation may fill it.
    if (start > st.stage_free && st.started) {
      Rat t = st.stage_free;
      if (backward) {
        auto si = st.stall_items.find(mb);
        if (si != st.stall_items.end()) {
          std::vector<RecomputeItem> deferred;
          for (const RecomputeItem& item : si->second) {
            Rat c = item_cost(st, item);
            const Rat bytes(profile_.model.layer.ops[item.op].out_bytes);
            if (t + c <= start && st.resident_now + bytes <= st.budget) {
              run_recompute(st, item, SimEventKind::StallRecompute, t, t + c, true);
              t += c;
            } else {
              deferred.push_back(item);
            }
          }
          // Whatever the stall cannot host becomes on-demand work.
          for (const RecomputeItem& item : deferred) {
            RecomputeItem cp = item;
            st.critical_items[{mb, true, cp.owner_layer, 0}].push_back(cp);
          }
          st.stall_items.erase(si);
        }
      }
      if (t < start) st.emit(SimEventKind::Stall, mb, -1, t, start, false);
    }
    st.started = true;

    Rat end = backward ? expand_bwd(st, mb, start) : expand_fwd(st, mb, start);
    if (backward) {
      st.bwd_done[mb] = end;
    } else {
      st.fwd_done[mb] = end;
    }
    st.stage_free = end;
    ++st.cursor;
  }

  void assemble(SimReport& report) {
    const int S = static_cast<int>(stages_.size());
    report.per_stage.assign(S, {});
    report.breakdown.assign(S, {});
    report.memory_peaks.assign(S, 0);
    report.memory_traces.assign(S, {});
    report.iteration_us = 0;

    for (const SimEvent& ev : report.timeline)
      report.iteration_us = rat_max(report.iteration_us, ev.end_us);

    for (const SimEvent& ev : report.timeline) {
      StageStats& stat = report.per_stage[ev.stage];
      const Rat dur = ev.end_us - ev.start_us;
      switch (ev.kind) {
        case SimEventKind::Fwd:
        case SimEventKind::Bwd:
          stat.busy_us += dur;
          break;
        case SimEventKind::Recompute:
          stat.busy_us += dur;
          if (ev.overlapped) {
            stat.recompute_overlapped_us += dur;
          } else {
            stat.recompute_on_demand_us += dur;
          }
          break;
        case SimEventKind::StallRecompute:
          stat.busy_us += dur;
          stat.recompute_overlapped_us += dur;
          break;
        case SimEventKind::CommFwd:
        case SimEventKind::CommBwd:
        case SimEventKind::P2PTransfer:
          stat.comm_us += dur;
          break;
        case SimEventKind::Stall:
          break;
      }
    }
    for (int s = 0; s < S; ++s) {
      StageState& st = stages_[s];
      StageStats& stat = report.per_stage[s];
      Rat span = st.have_first ? st.last_end - st.first_start : Rat(0);
      Rat stall = span - stat.busy_us - st.exposed_comm;
      stat.stall_us = stall > 0 ? stall : Rat(0);

      // Tensor-path breakdown, weighted by regeneration cost.
      Rat no_re = 0;
      const auto& plan = st.tl.plan;
      const int M = profile_.pipeline.n_microbatches;
      for (int op = 0; op < lay_.fwd_n; ++op) {
        if (plan.retained[op]) no_re += lay_.cost[op] * Rat(st.layers) * Rat(M);
      }
      Rat total = no_re + stat.recompute_overlapped_us + stat.recompute_on_demand_us;
      if (total == 0) {
        report.breakdown[s] = {Rat(1), Rat(0), Rat(0)};
      } else {
        report.breakdown[s] = {no_re / total, stat.recompute_overlapped_us / total,
                               stat.recompute_on_demand_us / total};
      }

      // Ledger trace: sort deltas, integrate, record step points.
      std::stable_sort(st.deltas.begin(), st.deltas.end(),
                       [](const auto& a, const auto& b) { return a.first < b.first; });
      Rat resident = 0, peak = 0;
      auto& trace = report.memory_traces[s];
      for (std::size_t i = 0; i < st.deltas.size(); ++i) {
        resident += st.deltas[i].second;
        if (i + 1 < st.deltas.size() && st.deltas[i + 1].first == st.deltas[i].first) continue;
        if (!trace.empty() && trace.back().first == st.deltas[i].first) {
          trace.back().second = resident;
        } else {
          trace.emplace_back(st.deltas[i].first, resident);
        }
        peak = rat_max(peak, resident);
      }
      report.memory_peaks[s] = peak;
    }

    std::stable_sort(report.timeline.begin(), report.timeline.end(),
                     [](const SimEvent& a, const SimEvent& b) {
                       if (a.start_us != b.start_us) return a.start_us < b.start_us;
                       if (a.stage != b.stage) return a.stage < b.stage;
                       return static_cast<int>(a.kind) < static_cast<int>(b.kind);
                     });
  }

  const Profile& profile_;
  std::vector<int> layers_;
  Layout lay_;
  SimOptions opt_;
  std::vector<StageState> stages_;
};

}  // namespace

SimReport simulate(const Profile& profile, const std::vector<int>& layers_per_stage,
                   const std::vector<StageRecomputeTimeline>& timelines,
                   const SimOptions& options) {
  Simulator sim(profile, layers_per_stage, timelines, options);
  return sim.run();
}

std::vector<std::pair<Rat, Rat>> memory_trace(const SimReport& report, int stage) {
  return report.memory_traces.at(stage);
}

Rat stage_period_us(const Profile& profile, int stage_index, int stage_layers,
                    const StageRecomputeTimeline& timeline) {
  std::vector<int> layers(profile.pipeline.n_stages, 1);
  layers[stage_index] = stage_layers;
  std::vector<StageRecomputeTimeline> tls(profile.pipeline.n_stages);
  for (int s = 0; s < profile.pipeline.n_stages; ++s) {
    tls[s].stage = s;
    tls[s].plan.retained.assign(profile.model.layer.forward_op_count(), true);
  }
  tls[stage_index] = timeline;
  Simulator sim(profile, layers, tls, {});
  return sim.period(stage_index);
}

std::string emit_trace(const SimReport& report, TraceFormat format) {
  std::ostringstream os;
  if (format == TraceFormat::Csv) {
    os << "stage,microbatch,kind,op_id,start_us,end_us,overlapped\n";
    for (const SimEvent& ev : report.timeline) {
      os << ev.stage << "," << ev.microbatch << "," << sim_event_kind_name(ev.kind) << ","
         << (ev.op_id < 0 ? "" : std::to_string(ev.op_id)) << "," << rat_to_fixed(ev.start_us, 3)
         << "," << rat_to_fixed(ev.end_us, 3) << "," << (ev.overlapped ? 1 : 0) << "\n";
    }
    return os.str();
  }
  os << "[";
  bool first = true;
  for (const SimEvent& ev : report.timeline) {
    if (!first) os << ",";
    first = false;
    const bool compute_tid = ev.kind != SimEventKind::CommFwd &&
                             ev.kind != SimEventKind::CommBwd &&
                             ev.kind != SimEventKind::P2PTransfer;
    os << "\n  {\"name\": \"" << sim_event_kind_name(ev.kind);
    if (ev.microbatch >= 0) os << " mb" << ev.microbatch;
    if (ev.op_id >= 0) os << " op" << ev.op_id;
    os << "\", \"ph\": \"X\", \"pid\": " << ev.stage << ", \"tid\": \""
       << (compute_tid ? "compute" : "comm") << "\", \"ts\": " << rat_to_fixed(ev.start_us, 3)
       << ", \"dur\": " << rat_to_fixed(ev.end_us - ev.start_us, 3)
       << ", \"args\": {\"overlapped\": " << (ev.overlapped ? "true" : "false") << "}}";
  }
  os << "\n]\n";
  return os.str();
}

}  // namespace lynx
