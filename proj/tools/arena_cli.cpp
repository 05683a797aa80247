#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "arena/bench.hpp"
#include "arena/institutions.hpp"
#include "arena/model.hpp"
#include "arena/remote.hpp"
#include "arena/runtime.hpp"
#include "arena/sweep.hpp"

// Exit codes: 0 success, 1 validation violations, 2 runtime error, 3 bad
// usage. Data goes to stdout, diagnostics to stderr.

namespace {

namespace fs = std::filesystem;
using namespace arena;

fs::path resolve(const fs::path& workdir, const fs::path& p) {
  return p.is_absolute() ? p : workdir / p;
}

// Accepts a spec.yaml path, a directory holding one, or a catalog id.
fs::path spec_file(const fs::path& workdir, const std::string& arg) {
  fs::path p = resolve(workdir, arg);
  if (fs::is_directory(p)) return p / "spec.yaml";
  if (fs::exists(p)) return p;
  fs::path catalog = workdir / "institutions" / arg / "spec.yaml";
  if (fs::exists(catalog)) return catalog;
  return p;
}

fs::path task_file(const fs::path& workdir, const std::string& arg) {
  fs::path p = resolve(workdir, arg);
  if (fs::exists(p) && !fs::is_directory(p)) return p;
  fs::path corpus = workdir / "tasks" / (arg + ".yaml");
  if (fs::exists(corpus)) return corpus;
  return p;
}

struct AdapterFlags {
  std::string adapter = "scripted";
  double gate_approve = 0.5;
  std::string endpoint;
  std::string model = "default";
};

void add_adapter_flags(CLI::App* cmd, AdapterFlags& flags) {
  cmd->add_option("--adapter", flags.adapter, "agent backend")
      ->check(CLI::IsMember({"scripted", "stochastic", "remote"}));
  cmd->add_option("--gate-approve", flags.gate_approve,
                  "gate approval probability for the stochastic backend");
  cmd->add_option("--endpoint", flags.endpoint,
                  "chat-completions endpoint for the remote backend (or ARENA_ENDPOINT)");
  cmd->add_option("--model", flags.model, "model name sent to the remote backend");
}

remote::AdapterConfig remote_config(const AdapterFlags& flags) {
  remote::AdapterConfig cfg;
  if (!flags.endpoint.empty()) {
    cfg.endpoint = flags.endpoint;
  } else if (const char* env = std::getenv("ARENA_ENDPOINT")) {
    cfg.endpoint = env;
  }
  cfg.model = flags.model;
  return cfg;
}

int cmd_validate(const fs::path& workdir, const std::vector<std::string>& args) {
  int worst = 0;
  for (const std::string& arg : args) {
    const fs::path path = spec_file(workdir, arg);
    model::GovernanceSpec spec;
    try {
      spec = model::load_spec(path);
    } catch (const model::LoadError& e) {
      std::cerr << "error: " << e.what() << "\n";
      worst = std::max(worst, e.kind() == model::LoadErrorKind::io ? 2 : 1);
      continue;
    }
    std::cout << model::render_summary(model::summarize(spec)) << "\n";
    model::ValidationReport report = model::validate(spec);
    for (const model::Violation& v : report.violations) {
      std::cout << "violation";
      if (!v.stage_id.empty()) std::cout << " [" << v.stage_id << "]";
      std::cout << " " << v.rule << ": " << v.message << "\n";
    }
    if (!report.ok()) worst = std::max(worst, 1);
  }
  return worst;
}

int cmd_run(const fs::path& workdir, const std::string& spec_arg, const std::string& task_arg,
            const AdapterFlags& flags, uint64_t seed, int budget, const fs::path& out_dir,
            bool interactive, const std::string& confirm_default) {
  model::GovernanceSpec spec = model::load_spec(spec_file(workdir, spec_arg));
  bench::BenchTask task = bench::load_task(task_file(workdir, task_arg));

  bench::Sandbox sandbox;
  sandbox.reset(task);
  bench::ToolRegistry registry;
  runtime::TaskInput input = bench::make_task_input(task, registry, sandbox);

  runtime::RuntimeConfig rc;
  rc.budget = budget;
  rc.seed = seed;
  rc.interactive = interactive;
  rc.confirm_default = confirm_default;

  std::unique_ptr<agents::Backend> backend;
  if (flags.adapter == "scripted") {
    backend = std::make_unique<agents::ScriptedBackend>(bench::make_task_script(spec, task));
  } else if (flags.adapter == "stochastic") {
    agents::StochasticPolicy policy;
    policy.gate_approve_prob = flags.gate_approve;
    policy.seed = seed;
    backend = std::make_unique<agents::StochasticBackend>(policy);
  } else {
    backend = std::make_unique<remote::RemoteBackend>(remote_config(flags));
  }

  runtime::TaskState state = runtime::run(spec, input, rc, *backend);

  fs::create_directories(out_dir);
  const fs::path trace_path = out_dir / runtime::trace_filename(spec.id, task.id, seed);
  std::ofstream trace(trace_path);
  runtime::write_trace(trace, spec, input, seed, state);

  char score_buf[32];
  std::snprintf(score_buf, sizeof(score_buf), "%.4f", bench::score(task, state, sandbox));
  std::cout << "spec=" << spec.id << " task=" << task.id << " seed=" << seed
            << " status=" << runtime::to_string(state.status) << " score=" << score_buf
            << " steps=" << state.dispatched_steps << " prompt_tokens=" << state.prompt_tokens
            << " completion_tokens=" << state.completion_tokens
            << " gate_loop=" << (runtime::detect_gate_loop_failure(state) ? 1 : 0) << "\n";
  std::cout << "trace=" << trace_path.string() << "\n";

  if (state.status == runtime::RunStatus::error) {
    std::cerr << "error: " << state.error_message << "\n";
    return 2;
  }
  return 0;
}

int cmd_bench(const fs::path& workdir, const std::vector<std::string>& specs,
              const std::vector<std::string>& tasks, const AdapterFlags& flags,
              const std::vector<uint64_t>& seeds, int budget, int parallel,
              const fs::path& out_dir) {
  bench::SuiteConfig config;
  config.spec_ids = specs;
  config.institutions_dir = workdir / "institutions";
  config.tasks_dir = workdir / "tasks";
  config.task_ids = tasks;
  if (!seeds.empty()) config.seeds = seeds;
  config.budget = budget;
  config.parallel = parallel;
  config.out_dir = out_dir;
  if (flags.adapter == "stochastic") {
    config.backend = bench::BackendKind::stochastic;
    config.policy.gate_approve_prob = flags.gate_approve;
  } else if (flags.adapter == "remote") {
    config.backend = bench::BackendKind::remote;
    config.remote_config = remote_config(flags);
  } else {
    config.backend = bench::BackendKind::scripted;
  }

  bench::SuiteResult result = bench::run_suite(config);
  std::cout << bench::render_table(bench::aggregate(result.records));
  std::cerr << "wrote " << result.results_csv.string() << "\n";
  return 0;
}

int cmd_sweep(const fs::path& workdir, const std::string& plan_arg, int parallel,
              const fs::path& out_dir) {
  sweep::SweepPlan plan = sweep::load_plan(resolve(workdir, plan_arg));
  if (parallel > 0) plan.parallel = parallel;
  sweep::SweepResult result = sweep::run_sweep(plan);
  fs::create_directories(out_dir);
  const fs::path csv = out_dir / "sweep.csv";
  sweep::write_sweep_csv(csv, result);
  std::cout << sweep::render_summary(result);
  std::cerr << "wrote " << csv.string() << "\n";
  return 0;
}

int cmd_report(const fs::path& workdir, const std::string& csv_arg) {
  std::vector<bench::RunRecord> records = bench::read_results_csv(resolve(workdir, csv_arg));
  std::cout << bench::render_table(bench::aggregate(records));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"governance topology arena"};
  app.require_subcommand(1);

  std::string workdir = ".";
  app.add_option("--workdir", workdir, "root for relative paths");

  auto* validate = app.add_subcommand("validate", "check specs and print their shape");
  std::vector<std::string> validate_args;
  validate->add_option("specs", validate_args, "spec files, directories, or catalog ids")
      ->required();

  auto* run = app.add_subcommand("run", "execute one task through one spec");
  std::string run_spec, run_task;
  AdapterFlags run_flags;
  uint64_t run_seed = 1;
  int run_budget = 0;
  std::string run_out = ".";
  bool interactive = false;
  std::string confirm_default = "proceed";
  run->add_option("--spec", run_spec)->required();
  run->add_option("--task", run_task)->required();
  add_adapter_flags(run, run_flags);
  run->add_option("--seed", run_seed);
  run->add_option("--budget", run_budget, "step budget, 0 uses the spec default");
  run->add_option("--out", run_out, "directory for the trace file");
  run->add_flag("--interactive", interactive, "prompt on human-confirmation stages");
  run->add_option("--confirm-default", confirm_default, "unattended confirmation reply")
      ->check(CLI::IsMember({"proceed", "abort"}));

  auto* bench_cmd = app.add_subcommand("bench", "run a suite and aggregate scores");
  std::vector<std::string> bench_specs, bench_tasks;
  AdapterFlags bench_flags;
  std::vector<uint64_t> bench_seeds;
  int bench_budget = 0;
  int bench_parallel = 1;
  std::string bench_out = "bench_out";
  bench_cmd->add_option("--specs", bench_specs, "catalog ids")->required()->delimiter(',');
  bench_cmd->add_option("--tasks", bench_tasks, "task ids, default the whole corpus")
      ->delimiter(',');
  add_adapter_flags(bench_cmd, bench_flags);
  bench_cmd->add_option("--seeds", bench_seeds)->delimiter(',');
  bench_cmd->add_option("--budget", bench_budget);
  bench_cmd->add_option("--parallel", bench_parallel);
  bench_cmd->add_option("--out", bench_out, "directory for results.csv and traces");

  auto* sweep_cmd = app.add_subcommand("sweep", "run a topology sweep plan");
  std::string sweep_plan;
  int sweep_parallel = 0;
  std::string sweep_out = ".";
  sweep_cmd->add_option("--plan", sweep_plan)->required();
  sweep_cmd->add_option("--parallel", sweep_parallel, "override the plan's worker count");
  sweep_cmd->add_option("--out", sweep_out, "directory for sweep.csv");

  auto* report = app.add_subcommand("report", "render the aggregate table for a results file");
  std::string report_csv;
  report->add_option("results", report_csv, "results.csv path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 3;
  }

  const fs::path root = fs::path(workdir);
  try {
    if (validate->parsed()) return cmd_validate(root, validate_args);
    if (run->parsed()) {
      return cmd_run(root, run_spec, run_task, run_flags, run_seed, run_budget,
                     resolve(root, run_out), interactive, confirm_default);
    }
    if (bench_cmd->parsed()) {
      return cmd_bench(root, bench_specs, bench_tasks, bench_flags, bench_seeds, bench_budget,
                       bench_parallel, resolve(root, bench_out));
    }
    if (sweep_cmd->parsed()) {
      return cmd_sweep(root, sweep_plan, sweep_parallel, resolve(root, sweep_out));
    }
    if (report->parsed()) return cmd_report(root, report_csv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 3;
}
