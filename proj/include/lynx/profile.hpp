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

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "lynx/errors.hpp"
#include "lynx/rational.hpp"

namespace lynx {

enum class OpKind { Compute, Comm };

/// One profiled operator: execution time, output size and the ids of the
/// operators whose outputs it consumes. Comm operators model all-reduce
/// phases; their times are subject to HardwareProfile::comm_scale.
struct OperatorSpec {
  int id = 0;
  std::string name;
  OpKind kind = OpKind::Compute;
  Rat time_us;
  std::int64_t out_bytes = 0;
  std::vector<int> deps;
};

/// One basic layer. Operators are listed in execution order: the forward
/// subgraph first (its unique sink is `checkpoint_id`), backward operators
/// after it. The comm-id arrays are empty or hold exactly two Comm ids each.
struct LayerTemplate {
  std::vector<OperatorSpec> ops;
  std::vector<int> fwd_comm_ids;
  std::vector<int> bwd_comm_ids;
  int checkpoint_id = 0;

  int index_of(int id) const;          // position in ops, -1 if absent
  int checkpoint_index() const;        // position of the checkpoint op
  int forward_op_count() const;        // checkpoint_index() + 1
};

struct ModelProfile {
  std::string name;
  int n_layers = 1;
  std::int64_t static_bytes = 0;
  LayerTemplate layer;
  std::vector<OperatorSpec> embed_ops;
  std::vector<OperatorSpec> head_ops;
  bool embed_schedulable = false;  // default: pre/post operators stay retained
  bool head_schedulable = false;
};

struct HardwareProfile {
  std::int64_t mem_budget_bytes = 0;
  Rat comm_scale = 1;  // multiplier on Comm operator times (NVLink vs. PCIe)
};

enum class ScheduleKind { OneFOneB };

struct PipelineConfig {
  int n_stages = 1;
  int n_microbatches = 1;
  ScheduleKind schedule_kind = ScheduleKind::OneFOneB;
};

struct Profile {
  ModelProfile model;
  HardwareProfile hardware;
  PipelineConfig pipeline;
};

/// Effective execution time of an operator under the given hardware.
inline Rat effective_time(const OperatorSpec& op, const HardwareProfile& hw) {
  return op.kind == OpKind::Comm ? op.time_us * hw.comm_scale : op.time_us;
}

/// Expanded per-stage operator graph. Operators are re-indexed so that
/// ops[i].id == i and the topological index doubles as the phase index.
struct OperatorGraph {
  std::vector<OperatorSpec> ops;
  std::vector<std::vector<int>> users;  // users[d] = {i : d in deps(i)}
  std::vector<bool> schedulable;        // false pins the op's output resident
  int fwd_op_count = 0;                 // ops[0..fwd_op_count) is the forward part
  std::vector<int> checkpoint_ops;      // per layer copy, ascending

  int size() const { return static_cast<int>(ops.size()); }
  bool is_comm(int i) const { return ops[i].kind == OpKind::Comm; }
};

struct ValidationIssue {
  enum class Kind {
    DuplicateId,
    DanglingDep,
    ForwardDep,
    NegativeTime,
    NegativeBytes,
    UserMapMismatch,
    BadIndex,
  };
  Kind kind;
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;
  bool empty() const { return issues.empty(); }
  std::string to_string() const;
};

/// Parses and validates a profile document. Throws ParseError on malformed
/// JSON and ValidationError on schema or semantic violations. With
/// lenient=true unknown keys are ignored instead of rejected.
Profile load_profile(std::istream& source, bool lenient = false);
Profile load_profile_file(const std::string& path, bool lenient = false);
Profile load_profile_string(const std::string& text, bool lenient = false);

/// Canonical serialization; load_profile(serialize_profile(p)) == p.
std::string serialize_profile(const Profile& p);

bool profiles_equal(const Profile& a, const Profile& b);

/// Instantiates `stage_layers` copies of the layer template for one stage:
/// forward parts chained through the checkpoint operator, backward parts in
/// reverse copy order chained through each copy's final backward operator.
/// Embed/head operator lists are attached when with_embed/with_head is set
/// (first/last pipeline stage).
OperatorGraph expand_graph(const ModelProfile& model, int stage_layers,
                           bool with_embed = false, bool with_head = false);

/// Structural diagnostics; an empty report means the graph is well-formed
/// and its users map matches an independent reconstruction.
ValidationReport validate_graph(const OperatorGraph& graph);

}  // namespace lynx
