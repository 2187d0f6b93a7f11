#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "lynx/partition.hpp"
#include "lynx/report_io.hpp"

namespace py = pybind11;

namespace {

lynx::Profile load(const std::string& path, bool lenient) {
  return lynx::load_profile_file(path, lenient);
}

std::string schedule_json(const std::string& path, const std::string& mode, int stage,
                          long long time_limit_ms, bool lenient) {
  lynx::Profile p = load(path, lenient);
  std::vector<int> layers = lynx::initial_partition(p).layers_per_stage;
  if (stage < 0 || stage >= p.pipeline.n_stages) throw py::value_error("stage out of range");
  if (mode == "opt") {
    lynx::StagePhaseGraph spg = lynx::build_stage_phase_graph(p, stage, layers[stage]);
    lynx::Rat share = lynx::Rat(p.model.static_bytes) * lynx::Rat(layers[stage]) /
                      lynx::Rat(p.model.n_layers);
    auto num = lynx::rat_num(share);
    auto den = lynx::rat_den(share);
    auto inst = lynx::build_opt_model(spg.graph, p.hardware,
                                      static_cast<std::int64_t>((num + den - 1) / den));
    return lynx::schedule_to_json(lynx::solve_opt(inst, time_limit_ms), stage);
  }
  lynx::PlanCache cache(p);
  const auto& sp = cache.stage_plan(stage, layers[stage], lynx::PlanMode::Heu, time_limit_ms);
  return lynx::plan_to_json(sp.timeline.plan, stage);
}

std::string partition_json(const std::string& path, const std::string& mode,
                           long long time_limit_ms, bool lenient) {
  lynx::Profile p = load(path, lenient);
  auto scheme = lynx::search_partition(
      p, mode == "opt" ? lynx::PlanMode::Opt : lynx::PlanMode::Heu, time_limit_ms);
  return lynx::partition_to_json(scheme);
}

std::string simulate_json(const std::string& path, const std::string& mode,
                          std::vector<int> layers_per_stage, const std::string& p2p_us,
                          long long time_limit_ms, bool lenient) {
  lynx::Profile p = load(path, lenient);
  std::vector<int> layers = layers_per_stage.empty()
                                ? lynx::initial_partition(p).layers_per_stage
                                : layers_per_stage;
  lynx::PlanCache cache(p);
  std::vector<lynx::StageRecomputeTimeline> tls;
  for (int s = 0; s < p.pipeline.n_stages; ++s) {
    tls.push_back(cache
                      .stage_plan(s, layers[s],
                                  mode == "opt" ? lynx::PlanMode::Opt : lynx::PlanMode::Heu,
                                  time_limit_ms)
                      .timeline);
  }
  lynx::SimOptions opts;
  auto r = lynx::rat_parse(p2p_us);
  if (!r) throw py::value_error("bad p2p_us");
  opts.p2p_us = *r;
  return lynx::simreport_to_json(lynx::simulate(p, layers, tls, opts));
}

std::string validate_file(const std::string& path, bool lenient) {
  lynx::Profile p = load(path, lenient);
  auto g = lynx::expand_graph(p.model, p.model.n_layers, !p.model.embed_ops.empty(),
                              !p.model.head_ops.empty());
  return lynx::validate_graph(g).to_string();
}

}  // namespace

PYBIND11_MODULE(_lynx, m) {
  m.doc() = "recomputation scheduling and 1F1B pipeline simulation toolkit";

  m.def("validate", &validate_file, py::arg("path"), py::arg("lenient") = false,
        "Validate a profile; returns an empty string when well-formed.");
  m.def("schedule", &schedule_json, py::arg("path"), py::arg("mode") = "heu",
        py::arg("stage") = 0, py::arg("time_limit_ms") = 10000, py::arg("lenient") = false,
        "Plan recomputation for one stage; returns schedule/plan JSON.");
  m.def("partition", &partition_json, py::arg("path"), py::arg("mode") = "heu",
        py::arg("time_limit_ms") = 10000, py::arg("lenient") = false,
        "Search a balanced layer partition; returns partition JSON.");
  m.def("simulate", &simulate_json, py::arg("path"), py::arg("mode") = "heu",
        py::arg("layers_per_stage") = std::vector<int>{}, py::arg("p2p_us") = "0",
        py::arg("time_limit_ms") = 10000, py::arg("lenient") = false,
        "Simulate one 1F1B iteration; returns report JSON.");
  m.def("serialize_profile",
        [](const std::string& path, bool lenient) {
          return lynx::serialize_profile(load(path, lenient));
        },
        py::arg("path"), py::arg("lenient") = false, "Canonical profile serialization.");

#ifdef VERSION_INFO
  m.attr("__version__") = VERSION_INFO;
#else
  m.attr("__version__") = "dev";
#endif
}
