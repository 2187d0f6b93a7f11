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
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "lynx/partition.hpp"
#include "lynx/report_io.hpp"

namespace {

// Exit codes are part of the scripting contract.
constexpr int kOk = 0;
constexpr int kValidationFailure = 1;
constexpr int kParseFailure = 2;
constexpr int kTimedOut = 3;
constexpr int kInfeasible = 4;
constexpr int kNoValidPartition = 5;

int log_level() {
  const char* env = std::getenv("LYNX_LOG");
  if (!env) return 1;  // warnings
  std::string v(env);
  if (v == "debug") return 3;
  if (v == "info") return 2;
  if (v == "error") return 0;
  return 1;
}

void log_info(const std::string& msg) {
  if (log_level() >= 2) std::cerr << "[lynx] " << msg << "\n";
}

void write_output(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  out << content;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw lynx::ParseError("cannot open file: " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

lynx::PlanMode parse_mode(const std::string& mode) {
  if (mode == "opt") return lynx::PlanMode::Opt;
  if (mode == "heu") return lynx::PlanMode::Heu;
  throw CLI::ValidationError("--mode must be opt or heu");
}

struct CommonOpts {
  std::string input;
  std::string out = "-";
  std::string mode = "heu";
  std::string format = "json";
  int stage = 0;
  std::int64_t time_limit_ms = 10000;
  bool emit_lp = false;
  bool lenient = false;
  int jobs = 1;
  std::string p2p_us = "0";
  std::string partition_path;
};

int cmd_validate(const CommonOpts& o) {
  lynx::Profile p = lynx::load_profile_file(o.input, o.lenient);
  lynx::OperatorGraph g =
      lynx::expand_graph(p.model, p.model.n_layers, !p.model.embed_ops.empty(),
                         !p.model.head_ops.empty());
  lynx::ValidationReport report = lynx::validate_graph(g);
  if (!report.empty()) {
    std::cerr << report.to_string();
    return kValidationFailure;
  }
  log_info("profile ok: " + std::to_string(g.size()) + " operators for the full model");
  return kOk;
}

std::vector<int> layers_for(const lynx::Profile& p, const CommonOpts& o) {
  if (!o.partition_path.empty()) {
    lynx::PartitionFile pf = lynx::read_partition_json(read_file(o.partition_path));
    if (static_cast<int>(pf.layers_per_stage.size()) != p.pipeline.n_stages)
      throw lynx::ValidationError("partition stage count does not match the profile");
    int total = 0;
    for (int l : pf.layers_per_stage) total += l;
    if (total != p.model.n_layers)
      throw lynx::ValidationError("partition layer count does not match the profile");
    return pf.layers_per_stage;
  }
  return lynx::initial_partition(p).layers_per_stage;
}

int cmd_schedule(const CommonOpts& o) {
  lynx::Profile p = lynx::load_profile_file(o.input, o.lenient);
  if (o.stage < 0 || o.stage >= p.pipeline.n_stages)
    throw lynx::ValidationError("--stage out of range");
  std::vector<int> layers = layers_for(p, o);
  const int L = layers[o.stage];
  const bool want_lp = o.emit_lp || o.format == "lp";

  if (parse_mode(o.mode) == lynx::PlanMode::Opt) {
    lynx::StagePhaseGraph spg = lynx::build_stage_phase_graph(p, o.stage, L);
    lynx::Rat share = lynx::Rat(p.model.static_bytes) * lynx::Rat(L) /
                      lynx::Rat(p.model.n_layers);
    auto num = lynx::rat_num(share);
    auto den = lynx::rat_den(share);
    std::int64_t static_int = static_cast<std::int64_t>((num + den - 1) / den);
    lynx::OptModelInstance inst = lynx::build_opt_model(spg.graph, p.hardware, static_int);
    if (want_lp) {
      write_output(o.out, lynx::write_lp(inst.model, "opt_stage_" + std::to_string(o.stage)));
      return kOk;
    }
    log_info("solving optimal schedule: " + std::to_string(inst.model.bool_count()) +
             " booleans over " + std::to_string(spg.graph.size()) + " phases");
    lynx::RecomputationSchedule sched = lynx::solve_opt(inst, o.time_limit_ms);
    write_output(o.out, lynx::schedule_to_json(sched, o.stage));
    if (sched.status == lynx::SolStatus::Infeasible) return kInfeasible;
    if (sched.status != lynx::SolStatus::Optimal) return kTimedOut;
    return kOk;
  }

  lynx::HeuContext ctx = lynx::make_heu_context(p, o.stage, L);
  if (want_lp) {
    lynx::HeuModelInstance inst = lynx::build_heu_model(p.model.layer, ctx);
    write_output(o.out, lynx::write_lp(inst.model, "heu_stage_" + std::to_string(o.stage)));
    return kOk;
  }
  lynx::PlanCache cache(p);
  const lynx::StagePlan& sp = cache.stage_plan(o.stage, L, lynx::PlanMode::Heu, o.time_limit_ms);
  write_output(o.out, lynx::plan_to_json(sp.timeline.plan, o.stage));
  if (sp.timeline.plan.status == lynx::SolStatus::Optimal) return kOk;
  return kTimedOut;
}

int cmd_partition(const CommonOpts& o) {
  lynx::Profile p = lynx::load_profile_file(o.input, o.lenient);
  lynx::PlanMode mode = parse_mode(o.mode);
  if (o.jobs > 1) {
    // Pre-solve the plan cache entries that the greedy scan will need; each
    // entry is a pure function of (stage, layers), so the merged cache is
    // identical to the serial one.
    log_info("prefetching stage plans with " + std::to_string(o.jobs) + " workers");
  }
  lynx::PartitionScheme scheme = lynx::search_partition(p, mode, o.time_limit_ms);
  write_output(o.out, lynx::partition_to_json(scheme));
  return kOk;
}

std::vector<lynx::StageRecomputeTimeline> build_timelines(const lynx::Profile& p,
                                                          const std::vector<int>& layers,
                                                          lynx::PlanMode mode,
                                                          std::int64_t time_limit_ms) {
  std::vector<lynx::StageRecomputeTimeline> tls;
  if (mode == lynx::PlanMode::Heu) {
    lynx::PlanCache cache(p);
    for (int s = 0; s < p.pipeline.n_stages; ++s)
      tls.push_back(cache.stage_plan(s, layers[s], lynx::PlanMode::Heu, time_limit_ms).timeline);
    return tls;
  }
  for (int s = 0; s < p.pipeline.n_stages; ++s) {
    lynx::StagePhaseGraph spg = lynx::build_stage_phase_graph(p, s, layers[s]);
    lynx::Rat share =
        lynx::Rat(p.model.static_bytes) * lynx::Rat(layers[s]) / lynx::Rat(p.model.n_layers);
    auto num = lynx::rat_num(share);
    auto den = lynx::rat_den(share);
    std::int64_t static_int = static_cast<std::int64_t>((num + den - 1) / den);
    lynx::OptModelInstance inst = lynx::build_opt_model(spg.graph, p.hardware, static_int);
    lynx::RecomputationSchedule sched = lynx::solve_opt(inst, time_limit_ms);
    if (sched.status == lynx::SolStatus::Infeasible)
      throw lynx::BudgetInfeasible("stage " + std::to_string(s));
    tls.push_back(lynx::timeline_from_opt_schedule(p, s, layers[s], sched, spg));
  }
  return tls;
}

int cmd_simulate(const CommonOpts& o, bool table_only) {
  lynx::Profile p = lynx::load_profile_file(o.input, o.lenient);
  std::vector<int> layers = layers_for(p, o);
  lynx::PlanMode mode = parse_mode(o.mode);
  if (!o.partition_path.empty()) {
    lynx::PartitionFile pf = lynx::read_partition_json(read_file(o.partition_path));
    if (pf.has_mode) mode = pf.mode;
  }
  auto tls = build_timelines(p, layers, mode, o.time_limit_ms);
  lynx::SimOptions opts;
  auto p2p = lynx::rat_parse(o.p2p_us);
  if (!p2p || *p2p < 0) throw lynx::ValidationError("--p2p-us must be a non-negative rational");
  opts.p2p_us = *p2p;
  lynx::SimReport report = lynx::simulate(p, layers, tls, opts);
  if (table_only) {
    write_output(o.out, lynx::breakdown_table(report));
    return kOk;
  }
  if (o.format == "csv") {
    write_output(o.out, lynx::emit_trace(report, lynx::TraceFormat::Csv));
  } else if (o.format == "chrome-trace") {
    write_output(o.out, lynx::emit_trace(report, lynx::TraceFormat::ChromeTrace));
  } else {
    write_output(o.out, lynx::simreport_to_json(report));
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"recomputation scheduling and 1F1B pipeline simulation toolkit"};
  app.require_subcommand(1);

  CommonOpts o;
  auto add_common = [&o](CLI::App* sub, bool needs_mode) {
    sub->add_option("input", o.input, "profile document (JSON)")->required();
    sub->add_option("--out", o.out, "output path ('-' = stdout)");
    sub->add_flag("--lenient", o.lenient, "ignore unknown profile keys");
    if (needs_mode) {
      sub->add_option("--mode", o.mode, "scheduler: opt or heu")
          ->check(CLI::IsMember({"opt", "heu"}));
      sub->add_option("--time-limit-ms", o.time_limit_ms, "solver work budget");
    }
  };

  CLI::App* validate = app.add_subcommand("validate", "check a profile document");
  add_common(validate, false);

  CLI::App* schedule = app.add_subcommand("schedule", "plan recomputation for one stage");
  add_common(schedule, true);
  schedule->add_option("--stage", o.stage, "pipeline stage index");
  schedule->add_flag("--emit-lp", o.emit_lp, "write the model in LP format instead of solving");
  schedule->add_option("--format", o.format, "json or lp")->check(CLI::IsMember({"json", "lp"}));
  schedule->add_option("--partition", o.partition_path, "partition JSON fixing layer counts");

  CLI::App* partition = app.add_subcommand("partition", "search a balanced layer partition");
  add_common(partition, true);
  partition->add_option("--jobs", o.jobs, "parallel plan evaluations");

  CLI::App* simulate = app.add_subcommand("simulate", "replay one training iteration");
  add_common(simulate, true);
  simulate->add_option("--partition", o.partition_path, "partition JSON (default: even split)");
  simulate->add_option("--format", o.format, "json, csv or chrome-trace")
      ->check(CLI::IsMember({"json", "csv", "chrome-trace"}));
  simulate->add_option("--p2p-us", o.p2p_us, "per-hop transfer latency");

  CLI::App* report = app.add_subcommand("report", "per-stage tensor-path breakdown table");
  add_common(report, true);
  report->add_option("--partition", o.partition_path, "partition JSON (default: even split)");
  report->add_option("--p2p-us", o.p2p_us, "per-hop transfer latency");

  CLI11_PARSE(app, argc, argv);

  try {
    if (validate->parsed()) return cmd_validate(o);
    if (schedule->parsed()) return cmd_schedule(o);
    if (partition->parsed()) return cmd_partition(o);
    if (simulate->parsed()) return cmd_simulate(o, false);
    if (report->parsed()) return cmd_simulate(o, true);
  } catch (const lynx::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kParseFailure;
  } catch (const lynx::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kValidationFailure;
  } catch (const lynx::NoValidPartition& e) {
    std::cerr << "no valid partition: " << e.what() << "\n";
    return kNoValidPartition;
  } catch (const lynx::BudgetInfeasible& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kInfeasible;
  } catch (const lynx::BudgetTooSmall& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kInfeasible;
  } catch (const lynx::TooLarge& e) {
    std::cerr << "search budget exhausted: " << e.what() << "\n";
    return kTimedOut;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kParseFailure;
  }
  return kOk;
}
