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
#include "lynx/profile.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

namespace lynx {

using ordered_json = nlohmann::ordered_json;

namespace {

void check_keys(const ordered_json& obj, const std::string& where,
                const std::set<std::string>& allowed, bool lenient) {
  if (lenient) return;
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key())) {
      throw ValidationError("unknown key '" + it.key() + "' in " + where);
    }
  }
}

const ordered_json& require(const ordered_json& obj, const std::string& key,
                            const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ValidationError("missing key '" + key + "' in " + where);
  return *it;
}

Rat parse_rat(const ordered_json& v, const std::string& where) {
  if (v.is_number_integer()) return Rat(static_cast<long long>(v.get<std::int64_t>()));
  if (v.is_number_unsigned()) return Rat(static_cast<unsigned long long>(v.get<std::uint64_t>()));
  if (v.is_number_float()) {
    double d = v.get<double>();
    if (!std::isfinite(d)) throw ValidationError("non-finite number in " + where);
    return rat_from_double(d);
  }
  if (v.is_string()) {
    auto r = rat_parse(v.get<std::string>());
    if (!r) throw ValidationError("unparseable rational '" + v.get<std::string>() + "' in " + where);
    return *r;
  }
  throw ValidationError("expected number in " + where);
}

std::int64_t parse_bytes(const ordered_json& v, const std::string& where) {
  if (v.is_number_integer()) return v.get<std::int64_t>();
  if (v.is_number_unsigned()) {
    auto u = v.get<std::uint64_t>();
    if (u > static_cast<std::uint64_t>(INT64_MAX))
      throw ValidationError("byte count out of range in " + where);
    return static_cast<std::int64_t>(u);
  }
  throw ValidationError("expected integer byte count in " + where);
}

OperatorSpec parse_op(const ordered_json& j, const std::string& where, bool lenient) {
  if (!j.is_object()) throw ValidationError("operator must be an object in " + where);
  check_keys(j, where, {"id", "name", "kind", "time_us", "out_bytes", "deps"}, lenient);
  OperatorSpec op;
  op.id = require(j, "id", where).get<int>();
  op.name = require(j, "name", where).get<std::string>();
  std::string kind = require(j, "kind", where).get<std::string>();
  if (kind == "compute") {
    op.kind = OpKind::Compute;
  } else if (kind == "comm") {
    op.kind = OpKind::Comm;
  } else {
    throw ValidationError("bad kind '" + kind + "' in " + where);
  }
  op.time_us = parse_rat(require(j, "time_us", where), where + ".time_us");
  if (op.time_us < 0) throw ValidationError("negative time_us in " + where);
  op.out_bytes = parse_bytes(require(j, "out_bytes", where), where + ".out_bytes");
  if (op.out_bytes < 0) throw ValidationError("negative out_bytes in " + where);
  for (const auto& d : require(j, "deps", where)) op.deps.push_back(d.get<int>());
  return op;
}

std::vector<OperatorSpec> parse_op_list(const ordered_json& j, const std::string& where,
                                        bool lenient) {
  if (!j.is_array()) throw ValidationError(where + " must be an array");
  std::vector<OperatorSpec> ops;
  for (std::size_t i = 0; i < j.size(); ++i) {
    ops.push_back(parse_op(j[i], where + "[" + std::to_string(i) + "]", lenient));
  }
  return ops;
}

/// Operators in a list must form a DAG in listed order: ids unique, deps
/// reference earlier entries only.
void validate_op_list(const std::vector<OperatorSpec>& ops, const std::string& where) {
  std::unordered_map<int, std::size_t> pos;
  for (std::size_t i = 0; i < ops.size(); ++i) {
    if (!pos.emplace(ops[i].id, i).second)
      throw ValidationError("duplicate operator id " + std::to_string(ops[i].id) + " in " + where);
  }
  for (std::size_t i = 0; i < ops.size(); ++i) {
    for (int d : ops[i].deps) {
      auto it = pos.find(d);
      if (it == pos.end())
        throw ValidationError("dangling dep id " + std::to_string(d) + " in " + where);
      if (it->second >= i)
        throw ValidationError("cycle or forward dep: op " + std::to_string(ops[i].id) +
                              " depends on " + std::to_string(d) + " in " + where);
    }
  }
}

std::vector<int> parse_comm_ids(const ordered_json& j, const LayerTemplate& layer,
                                const std::string& where) {
  if (!j.is_array()) throw ValidationError(where + " must be an array");
  std::vector<int> ids = j.get<std::vector<int>>();
  if (!ids.empty() && ids.size() != 2)
    throw ValidationError(where + " must hold 0 or 2 operator ids");
  for (int id : ids) {
    int idx = layer.index_of(id);
    if (idx < 0) throw ValidationError(where + " references missing op " + std::to_string(id));
    if (layer.ops[idx].kind != OpKind::Comm)
      throw ValidationError(where + " references non-comm op " + std::to_string(id));
  }
  if (ids.size() == 2 && ids[0] == ids[1])
    throw ValidationError(where + " lists the same op twice");
  return ids;
}

ordered_json op_to_json(const OperatorSpec& op) {
  ordered_json j;
  j["id"] = op.id;
  j["name"] = op.name;
  j["kind"] = op.kind == OpKind::Comm ? "comm" : "compute";
  if (rat_den(op.time_us) == 1) {
    j["time_us"] = static_cast<std::int64_t>(rat_num(op.time_us));
  } else {
    j["time_us"] = rat_to_string(op.time_us);
  }
  j["out_bytes"] = op.out_bytes;
  j["deps"] = op.deps;
  return j;
}

}  // namespace

int LayerTemplate::index_of(int id) const {
  for (std::size_t i = 0; i < ops.size(); ++i) {
    if (ops[i].id == id) return static_cast<int>(i);
  }
  return -1;
}

int LayerTemplate::checkpoint_index() const { return index_of(checkpoint_id); }

int LayerTemplate::forward_op_count() const { return checkpoint_index() + 1; }

std::string ValidationReport::to_string() const {
  std::ostringstream os;
  for (const auto& v : issues) {
    switch (v.kind) {
      case ValidationIssue::Kind::DuplicateId: os << "DuplicateId"; break;
      case ValidationIssue::Kind::DanglingDep: os << "DanglingDep"; break;
      case ValidationIssue::Kind::ForwardDep: os << "ForwardDep"; break;
      case ValidationIssue::Kind::NegativeTime: os << "NegativeTime"; break;
      case ValidationIssue::Kind::NegativeBytes: os << "NegativeBytes"; break;
      case ValidationIssue::Kind::UserMapMismatch: os << "UserMapMismatch"; break;
      case ValidationIssue::Kind::BadIndex: os << "BadIndex"; break;
    }
    os << ": " << v.detail << "\n";
  }
  return os.str();
}

Profile load_profile(std::istream& source, bool lenient) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(source);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed profile document: ") + e.what());
  }
  if (!doc.is_object()) throw ValidationError("profile document must be an object");
  check_keys(doc, "document", {"model", "hardware", "pipeline"}, lenient);

  Profile p;

  const auto& jm = require(doc, "model", "document");
  check_keys(jm, "model",
             {"name", "n_layers", "static_bytes", "layer", "embed_ops", "head_ops",
              "embed_schedulable", "head_schedulable"},
             lenient);
  p.model.name = jm.contains("name") ? jm["name"].get<std::string>() : "unnamed";
  p.model.n_layers = require(jm, "n_layers", "model").get<int>();
  if (p.model.n_layers < 1) throw ValidationError("model.n_layers must be >= 1");
  p.model.static_bytes = parse_bytes(require(jm, "static_bytes", "model"), "model.static_bytes");
  if (p.model.static_bytes < 0) throw ValidationError("model.static_bytes must be >= 0");

  const auto& jl = require(jm, "layer", "model");
  check_keys(jl, "model.layer", {"ops", "fwd_comm_ids", "bwd_comm_ids", "checkpoint_id"}, lenient);
  p.model.layer.ops = parse_op_list(require(jl, "ops", "model.layer"), "model.layer.ops", lenient);
  if (p.model.layer.ops.empty()) throw ValidationError("model.layer.ops must not be empty");
  validate_op_list(p.model.layer.ops, "model.layer.ops");
  p.model.layer.checkpoint_id = require(jl, "checkpoint_id", "model.layer").get<int>();
  if (jl.contains("fwd_comm_ids"))
    p.model.layer.fwd_comm_ids = parse_comm_ids(jl["fwd_comm_ids"], p.model.layer, "fwd_comm_ids");
  if (jl.contains("bwd_comm_ids"))
    p.model.layer.bwd_comm_ids = parse_comm_ids(jl["bwd_comm_ids"], p.model.layer, "bwd_comm_ids");

  int ckpt = p.model.layer.checkpoint_index();
  if (ckpt < 0) throw ValidationError("checkpoint_id references a missing op");
  // The checkpoint must be the unique sink of the forward subgraph: every
  // other forward op feeds some later forward op.
  {
    const auto& ops = p.model.layer.ops;
    std::vector<bool> has_fwd_user(ckpt + 1, false);
    for (int i = 0; i <= ckpt; ++i) {
      for (int d : ops[i].deps) {
        int di = p.model.layer.index_of(d);
        if (di <= ckpt) has_fwd_user[di] = true;
      }
    }
    for (int i = 0; i < ckpt; ++i) {
      if (!has_fwd_user[i])
        throw ValidationError("checkpoint op is not the unique forward sink: op " +
                              std::to_string(ops[i].id) + " has no forward user");
    }
    for (int id : p.model.layer.fwd_comm_ids) {
      if (p.model.layer.index_of(id) > ckpt)
        throw ValidationError("fwd_comm_ids lists a backward op");
    }
    for (int id : p.model.layer.bwd_comm_ids) {
      if (p.model.layer.index_of(id) <= ckpt)
        throw ValidationError("bwd_comm_ids lists a forward op");
    }
  }

  if (jm.contains("embed_ops")) {
    p.model.embed_ops = parse_op_list(jm["embed_ops"], "model.embed_ops", lenient);
    validate_op_list(p.model.embed_ops, "model.embed_ops");
  }
  if (jm.contains("head_ops")) {
    p.model.head_ops = parse_op_list(jm["head_ops"], "model.head_ops", lenient);
    validate_op_list(p.model.head_ops, "model.head_ops");
  }
  if (jm.contains("embed_schedulable")) p.model.embed_schedulable = jm["embed_schedulable"].get<bool>();
  if (jm.contains("head_schedulable")) p.model.head_schedulable = jm["head_schedulable"].get<bool>();

  const auto& jh = require(doc, "hardware", "document");
  check_keys(jh, "hardware", {"mem_budget_bytes", "comm_scale"}, lenient);
  p.hardware.mem_budget_bytes =
      parse_bytes(require(jh, "mem_budget_bytes", "hardware"), "hardware.mem_budget_bytes");
  if (p.hardware.mem_budget_bytes <= 0)
    throw ValidationError("hardware.mem_budget_bytes must be positive");
  p.hardware.comm_scale = parse_rat(require(jh, "comm_scale", "hardware"), "hardware.comm_scale");
  if (p.hardware.comm_scale <= 0) throw ValidationError("hardware.comm_scale must be positive");

  const auto& jp = require(doc, "pipeline", "document");
  check_keys(jp, "pipeline", {"n_stages", "n_microbatches", "schedule_kind"}, lenient);
  p.pipeline.n_stages = require(jp, "n_stages", "pipeline").get<int>();
  p.pipeline.n_microbatches = require(jp, "n_microbatches", "pipeline").get<int>();
  if (p.pipeline.n_stages < 1) throw ValidationError("pipeline.n_stages must be >= 1");
  if (p.pipeline.n_microbatches < 1) throw ValidationError("pipeline.n_microbatches must be >= 1");
  if (jp.contains("schedule_kind")) {
    std::string k = jp["schedule_kind"].get<std::string>();
    if (k != "1f1b") throw ValidationError("unsupported schedule_kind '" + k + "'");
  }
  if (p.model.n_layers < p.pipeline.n_stages)
    throw ValidationError("model.n_layers must be >= pipeline.n_stages");

  return p;
}

Profile load_profile_file(const std::string& path, bool lenient) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open profile file: " + path);
  return load_profile(in, lenient);
}

Profile load_profile_string(const std::string& text, bool lenient) {
  std::istringstream in(text);
  return load_profile(in, lenient);
}

std::string serialize_profile(const Profile& p) {
  ordered_json doc;
  ordered_json jm;
  jm["name"] = p.model.name;
  jm["n_layers"] = p.model.n_layers;
  jm["static_bytes"] = p.model.static_bytes;
  ordered_json jl;
  jl["ops"] = ordered_json::array();
  for (const auto& op : p.model.layer.ops) jl["ops"].push_back(op_to_json(op));
  jl["fwd_comm_ids"] = p.model.layer.fwd_comm_ids;
  jl["bwd_comm_ids"] = p.model.layer.bwd_comm_ids;
  jl["checkpoint_id"] = p.model.layer.checkpoint_id;
  jm["layer"] = jl;
  if (!p.model.embed_ops.empty()) {
    jm["embed_ops"] = ordered_json::array();
    for (const auto& op : p.model.embed_ops) jm["embed_ops"].push_back(op_to_json(op));
    jm["embed_schedulable"] = p.model.embed_schedulable;
  }
  if (!p.model.head_ops.empty()) {
    jm["head_ops"] = ordered_json::array();
    for (const auto& op : p.model.head_ops) jm["head_ops"].push_back(op_to_json(op));
    jm["head_schedulable"] = p.model.head_schedulable;
  }
  doc["model"] = jm;
  ordered_json jh;
  jh["mem_budget_bytes"] = p.hardware.mem_budget_bytes;
  if (rat_den(p.hardware.comm_scale) == 1) {
    jh["comm_scale"] = static_cast<std::int64_t>(rat_num(p.hardware.comm_scale));
  } else {
    jh["comm_scale"] = rat_to_string(p.hardware.comm_scale);
  }
  doc["hardware"] = jh;
  ordered_json jp;
  jp["n_stages"] = p.pipeline.n_stages;
  jp["n_microbatches"] = p.pipeline.n_microbatches;
  jp["schedule_kind"] = "1f1b";
  doc["pipeline"] = jp;
  return doc.dump(2) + "\n";
}

namespace {

bool ops_equal(const std::vector<OperatorSpec>& a, const std::vector<OperatorSpec>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].id != b[i].id || a[i].name != b[i].name || a[i].kind != b[i].kind ||
        a[i].time_us != b[i].time_us || a[i].out_bytes != b[i].out_bytes ||
        a[i].deps != b[i].deps)
      return false;
  }
  return true;
}

}  // namespace

bool profiles_equal(const Profile& a, const Profile& b) {
  return a.model.name == b.model.name && a.model.n_layers == b.model.n_layers &&
         a.model.static_bytes == b.model.static_bytes &&
         ops_equal(a.model.layer.ops, b.model.layer.ops) &&
         a.model.layer.fwd_comm_ids == b.model.layer.fwd_comm_ids &&
         a.model.layer.bwd_comm_ids == b.model.layer.bwd_comm_ids &&
         a.model.layer.checkpoint_id == b.model.layer.checkpoint_id &&
         ops_equal(a.model.embed_ops, b.model.embed_ops) &&
         ops_equal(a.model.head_ops, b.model.head_ops) &&
         a.model.embed_schedulable == b.model.embed_schedulable &&
         a.model.head_schedulable == b.model.head_schedulable &&
         a.hardware.mem_budget_bytes == b.hardware.mem_budget_bytes &&
         a.hardware.comm_scale == b.hardware.comm_scale &&
         a.pipeline.n_stages == b.pipeline.n_stages &&
         a.pipeline.n_microbatches == b.pipeline.n_microbatches;
}

OperatorGraph expand_graph(const ModelProfile& model, int stage_layers, bool with_embed,
                           bool with_head) {
  if (stage_layers < 1) throw ValidationError("stage_layers must be >= 1");
  const LayerTemplate& layer = model.layer;
  const int tmpl_n = static_cast<int>(layer.ops.size());
  const int ckpt = layer.checkpoint_index();
  if (ckpt < 0) throw ValidationError("layer template has no checkpoint op");
  const int fwd_n = ckpt + 1;
  const int bwd_n = tmpl_n - fwd_n;

  // Template positions of each op id, for dependency rewiring.
  std::unordered_map<int, int> tmpl_pos;
  for (int i = 0; i < tmpl_n; ++i) tmpl_pos.emplace(layer.ops[i].id, i);

  OperatorGraph g;
  auto push = [&g](const OperatorSpec& op, std::vector<int> deps, bool sched,
                   const std::string& name) {
    OperatorSpec copy = op;
    copy.id = g.size();
    copy.name = name;
    copy.deps = std::move(deps);
    g.ops.push_back(std::move(copy));
    g.schedulable.push_back(sched);
    return copy.id;
  };

  std::vector<int> embed_pos;
  if (with_embed) {
    std::unordered_map<int, int> local;
    for (const auto& op : model.embed_ops) {
      std::vector<int> deps;
      for (int d : op.deps) deps.push_back(embed_pos[local.at(d)]);
      local.emplace(op.id, static_cast<int>(embed_pos.size()));
      embed_pos.push_back(push(op, std::move(deps), model.embed_schedulable, "embed/" + op.name));
    }
  }

  // Forward parts of all copies, chained copy-to-copy through the checkpoint.
  std::vector<std::vector<int>> fwd_index(stage_layers, std::vector<int>(fwd_n));
  int prev_ckpt = -1;
  for (int k = 0; k < stage_layers; ++k) {
    for (int i = 0; i < fwd_n; ++i) {
      std::vector<int> deps;
      for (int d : layer.ops[i].deps) deps.push_back(fwd_index[k][tmpl_pos.at(d)]);
      if (deps.empty() && prev_ckpt >= 0) deps.push_back(prev_ckpt);
      fwd_index[k][i] = push(layer.ops[i], std::move(deps), true,
                             "l" + std::to_string(k) + "/" + layer.ops[i].name);
    }
    prev_ckpt = fwd_index[k][ckpt];
    g.checkpoint_ops.push_back(prev_ckpt);
  }
  g.fwd_op_count = g.size();

  std::vector<int> head_pos;
  if (with_head) {
    std::unordered_map<int, int> local;
    for (const auto& op : model.head_ops) {
      std::vector<int> deps;
      for (int d : op.deps) deps.push_back(head_pos[local.at(d)]);
      if (deps.empty() && prev_ckpt >= 0) deps.push_back(prev_ckpt);
      local.emplace(op.id, static_cast<int>(head_pos.size()));
      head_pos.push_back(push(op, std::move(deps), model.head_schedulable, "head/" + op.name));
    }
    g.fwd_op_count = g.size();
  }

  // Backward parts in reverse copy order; each copy's entry backward op also
  // consumes the previous (downstream) copy's final backward output.
  int prev_bwd_sink = -1;
  for (int k = stage_layers - 1; k >= 0; --k) {
    std::vector<int> bwd_index(tmpl_n, -1);
    for (int i = fwd_n; i < tmpl_n; ++i) {
      std::vector<int> deps;
      for (int d : layer.ops[i].deps) {
        int p = tmpl_pos.at(d);
        deps.push_back(p < fwd_n ? fwd_index[k][p] : bwd_index[p]);
      }
      if (i == fwd_n && prev_bwd_sink >= 0) deps.push_back(prev_bwd_sink);
      std::sort(deps.begin(), deps.end());
      deps.erase(std::unique(deps.begin(), deps.end()), deps.end());
      bwd_index[i] = push(layer.ops[i], std::move(deps), true,
                          "l" + std::to_string(k) + "/" + layer.ops[i].name);
    }
    if (bwd_n > 0) prev_bwd_sink = bwd_index[tmpl_n - 1];
  }

  g.users.assign(g.size(), {});
  for (int i = 0; i < g.size(); ++i) {
    for (int d : g.ops[i].deps) g.users[d].push_back(i);
  }
  return g;
}

ValidationReport validate_graph(const OperatorGraph& graph) {
  ValidationReport report;
  auto add = [&report](ValidationIssue::Kind k, std::string detail) {
    report.issues.push_back({k, std::move(detail)});
  };
  const int n = graph.size();
  std::unordered_set<int> ids;
  for (int i = 0; i < n; ++i) {
    const auto& op = graph.ops[i];
    if (!ids.insert(op.id).second)
      add(ValidationIssue::Kind::DuplicateId, "op id " + std::to_string(op.id));
    if (op.id != i)
      add(ValidationIssue::Kind::BadIndex,
          "op at position " + std::to_string(i) + " has id " + std::to_string(op.id));
    if (op.time_us < 0) add(ValidationIssue::Kind::NegativeTime, "op " + std::to_string(op.id));
    if (op.out_bytes < 0) add(ValidationIssue::Kind::NegativeBytes, "op " + std::to_string(op.id));
    for (int d : op.deps) {
      if (d < 0 || d >= n) {
        add(ValidationIssue::Kind::DanglingDep,
            "op " + std::to_string(op.id) + " dep " + std::to_string(d));
      } else if (d >= i) {
        add(ValidationIssue::Kind::ForwardDep,
            "op " + std::to_string(op.id) + " dep " + std::to_string(d));
      }
    }
  }
  // Independent users-map reconstruction.
  std::vector<std::vector<int>> rebuilt(n);
  for (int i = 0; i < n; ++i) {
    for (int d : graph.ops[i].deps) {
      if (d >= 0 && d < n) rebuilt[d].push_back(i);
    }
  }
  if (static_cast<int>(graph.users.size()) != n) {
    add(ValidationIssue::Kind::UserMapMismatch, "users map has wrong size");
  } else {
    for (int d = 0; d < n; ++d) {
      if (graph.users[d] != rebuilt[d])
        add(ValidationIssue::Kind::UserMapMismatch, "op " + std::to_string(d));
    }
  }
  return report;
}

}  // namespace lynx
