#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdlib>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "arena/bench.hpp"
#include "arena/institutions.hpp"
#include "arena/model.hpp"
#include "arena/remote.hpp"
#include "arena/runtime.hpp"
#include "arena/sweep.hpp"

// Python face of the arena. Everything crosses the boundary as plain dicts
// and lists; the object model stays on the C++ side.

namespace py = pybind11;
using namespace arena;

namespace {

py::dict spec_dict(const model::GovernanceSpec& spec) {
  py::dict d;
  d["id"] = spec.id;
  d["pattern"] = model::to_string(spec.pattern);
  d["entry"] = spec.entry_stage;
  d["default_budget"] = spec.default_budget;
  py::list agent_list;
  for (const model::Agent& a : spec.agents) {
    py::dict ad;
    ad["id"] = a.id;
    ad["role"] = model::to_string(a.role);
    agent_list.append(ad);
  }
  d["agents"] = agent_list;
  py::list stage_list;
  for (const model::Stage& s : spec.stages) {
    py::dict sd;
    sd["id"] = s.id;
    sd["kind"] = model::to_string(s.kind);
    if (!s.agent.empty()) sd["agent"] = s.agent;
    if (s.cluster) {
      sd["members"] = s.cluster->members;
      sd["required"] = s.cluster->required;
    }
    if (s.consensus) {
      sd["voters"] = s.consensus->voters;
      sd["rule"] = model::to_string(s.consensus->rule);
      sd["threshold"] = s.consensus->threshold;
    }
    py::dict tr;
    for (const std::string& token : s.transition_order) {
      tr[py::str(token)] = s.transitions.at(token);
    }
    sd["transitions"] = tr;
    stage_list.append(sd);
  }
  d["stages"] = stage_list;
  py::list feature_list;
  for (const model::FeatureConfig& f : spec.features) {
    feature_list.append(model::to_string(f.kind));
  }
  d["features"] = feature_list;
  return d;
}

py::dict summary_dict(const model::SpecSummary& s) {
  py::dict d;
  d["id"] = s.id;
  d["pattern"] = model::to_string(s.pattern);
  d["stages"] = s.stage_count;
  d["agents"] = s.agent_count;
  d["gates"] = s.gate_count;
  d["cluster_members"] = s.cluster_member_count;
  d["voters"] = s.voter_count;
  d["rho"] = s.gate_density;
  d["rho_display"] = s.gate_density_display;
  d["monitor"] = s.monitor_agent;
  return d;
}

runtime::VoteValue vote_from_string(const std::string& s) {
  if (s == "yes") return runtime::VoteValue::yes;
  if (s == "no") return runtime::VoteValue::no;
  if (s == "abstain") return runtime::VoteValue::abstain;
  throw std::invalid_argument("vote must be yes, no or abstain, got '" + s + "'");
}

py::dict run_task_impl(const std::string& spec_path, const std::string& task_path, uint64_t seed,
                       int budget, const std::string& adapter, double gate_approve,
                       const std::string& endpoint, const std::string& model_name) {
  model::GovernanceSpec spec = model::load_spec(spec_path);
  bench::BenchTask task = bench::load_task(task_path);
  bench::ToolRegistry registry;
  bench::Sandbox sandbox;
  sandbox.reset(task);
  runtime::TaskInput input = bench::make_task_input(task, registry, sandbox);
  runtime::RuntimeConfig cfg;
  cfg.budget = budget;
  cfg.seed = seed;

  std::unique_ptr<agents::Backend> backend;
  if (adapter == "scripted") {
    backend = std::make_unique<agents::ScriptedBackend>(bench::make_task_script(spec, task));
  } else if (adapter == "stochastic") {
    agents::StochasticPolicy policy;
    policy.gate_approve_prob = gate_approve;
    policy.seed = seed;
    backend = std::make_unique<agents::StochasticBackend>(policy);
  } else if (adapter == "remote") {
    remote::AdapterConfig rc;
    if (!endpoint.empty()) {
      rc.endpoint = endpoint;
    } else if (const char* env = std::getenv("ARENA_ENDPOINT")) {
      rc.endpoint = env;
    }
    rc.model = model_name;
    backend = std::make_unique<remote::RemoteBackend>(rc);
  } else {
    throw std::invalid_argument("unknown adapter '" + adapter + "'");
  }

  runtime::TaskState state;
  {
    py::gil_scoped_release release;
    state = runtime::run(spec, input, cfg, *backend);
  }
  const double score = bench::score(task, state, sandbox);
  std::ostringstream trace;
  runtime::write_trace(trace, spec, input, seed, state);

  py::dict d;
  d["spec"] = spec.id;
  d["task"] = task.id;
  d["seed"] = seed;
  d["status"] = runtime::to_string(state.status);
  d["score"] = score;
  d["steps"] = state.dispatched_steps;
  d["prompt_tokens"] = state.prompt_tokens;
  d["completion_tokens"] = state.completion_tokens;
  d["gate_loop"] = runtime::detect_gate_loop_failure(state);
  d["error"] = state.error_message;
  d["trace"] = trace.str();
  return d;
}

py::dict cell_dict(const sweep::CellResult& cell) {
  py::dict d;
  d["family"] = cell.family;
  d["m"] = cell.m;
  d["g"] = cell.g;
  d["rho"] = cell.rho;
  d["p"] = cell.p;
  d["budget"] = cell.budget;
  d["guard"] = cell.guard;
  d["trials"] = cell.trials;
  d["mean_steps"] = cell.mean_steps;
  d["var_steps"] = cell.var_steps;
  d["failure_rate"] = cell.failure_rate;
  d["mean_gate_visits"] = cell.mean_gate_visits;
  d["completion_rate"] = cell.completion_rate;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "governance topology arena";
  m.attr("__version__") = "0.1.0";

  py::register_exception<model::LoadError>(m, "LoadError", PyExc_ValueError);
  py::register_exception<bench::TaskLoadError>(m, "TaskLoadError", PyExc_ValueError);
  py::register_exception<sweep::PlanError>(m, "PlanError", PyExc_ValueError);

  m.def(
      "load_spec",
      [](const std::string& path) { return spec_dict(model::load_spec(path)); },
      py::arg("path"), "Load a governance spec and return its object graph.");

  m.def(
      "validate",
      [](const std::string& path) {
        model::ValidationReport report = model::validate(model::load_spec(path));
        py::list out;
        for (const model::Violation& v : report.violations) {
          py::dict d;
          d["stage"] = v.stage_id;
          d["rule"] = v.rule;
          d["message"] = v.message;
          out.append(d);
        }
        return out;
      },
      py::arg("path"), "Validate a spec file; returns a list of violations, empty when clean.");

  m.def(
      "summarize",
      [](const std::string& path) { return summary_dict(model::summarize(model::load_spec(path))); },
      py::arg("path"), "Shape summary of a spec: counts, gate density, monitor.");

  m.def(
      "catalog",
      [](const std::string& institutions_dir) {
        institutions::Catalog cat = institutions::catalog(institutions_dir);
        py::list out;
        for (const institutions::CatalogEntry& e : cat.entries) {
          py::dict d;
          d["id"] = e.id;
          d["path"] = e.spec_path.string();
          out.append(d);
        }
        return out;
      },
      py::arg("institutions_dir"), "List the shipped governance topologies.");

  m.def("run_task", &run_task_impl, py::arg("spec"), py::arg("task"), py::arg("seed") = 1,
        py::arg("budget") = 0, py::arg("adapter") = "scripted", py::arg("gate_approve") = 0.5,
        py::arg("endpoint") = "", py::arg("model") = "default",
        "Run one task through a spec and return the scored record plus trace text.");

  m.def(
      "tally",
      [](const std::vector<std::string>& votes, const std::string& rule, double threshold,
         const std::optional<std::vector<double>>& weights) {
        auto parsed_rule = model::consensus_rule_from_string(rule);
        if (!parsed_rule) throw std::invalid_argument("unknown consensus rule '" + rule + "'");
        std::vector<runtime::VoteValue> vv;
        vv.reserve(votes.size());
        for (const std::string& v : votes) vv.push_back(vote_from_string(v));
        runtime::TallyOutcome outcome =
            runtime::tally(vv, *parsed_rule, threshold, weights ? &*weights : nullptr);
        return outcome == runtime::TallyOutcome::approve ? "approve" : "reject";
      },
      py::arg("votes"), py::arg("rule") = "majority", py::arg("threshold") = 0.5,
      py::arg("weights") = py::none(),
      "Aggregate yes/no/abstain votes under a consensus rule.");

  m.def(
      "generate_topology",
      [](const std::string& family, int m, const std::vector<int>& gates) {
        sweep::TopologySpec topo;
        topo.family = family;
        topo.m = m;
        topo.gate_positions = gates;
        model::GovernanceSpec spec = sweep::generate_topology(topo);
        py::dict d = spec_dict(spec);
        d["summary"] = summary_dict(model::summarize(spec));
        return d;
      },
      py::arg("family"), py::arg("m"), py::arg("gates") = std::vector<int>{},
      "Synthesize a linear chain topology (family pipeline or gated).");

  m.def(
      "run_sweep",
      [](const std::string& plan_path, int parallel) {
        sweep::SweepPlan plan = sweep::load_plan(plan_path);
        if (parallel > 0) plan.parallel = parallel;
        sweep::SweepResult result;
        {
          py::gil_scoped_release release;
          result = sweep::run_sweep(plan);
        }
        py::list out;
        for (const sweep::CellResult& cell : result.cells) out.append(cell_dict(cell));
        return out;
      },
      py::arg("plan"), py::arg("parallel") = 0,
      "Execute a sweep plan file and return one dict per grid cell.");
}
