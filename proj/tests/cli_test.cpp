#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "support/paths.hpp"

namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch_root() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "arena_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

CliResult cli(const std::string& args) {
  static int counter = 0;
  const fs::path out = scratch_root() / ("out" + std::to_string(counter));
  const fs::path err = scratch_root() / ("err" + std::to_string(counter));
  ++counter;
  const std::string cmd = std::string(ARENA_CLI_PATH) + " " + args + " > " + out.string() +
                          " 2> " + err.string();
  const int rc = std::system(cmd.c_str());
  CliResult result;
  result.code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  result.out = slurp(out);
  result.err = slurp(err);
  return result;
}

std::string workdir_flag() { return "--workdir " + repo_root().string(); }

std::string first_line(const std::string& text) {
  return text.substr(0, text.find('\n'));
}

// Drops the wall_ms column, the only timing-dependent field in a results file.
std::string strip_wall(const std::string& csv) {
  std::stringstream in(csv);
  std::string line, out;
  while (std::getline(in, line)) {
    std::vector<std::string> cols;
    std::stringstream ls(line);
    std::string col;
    while (std::getline(ls, col, ',')) cols.push_back(col);
    if (cols.size() == 8) {
      cols.erase(cols.begin() + 6);
      line.clear();
      for (size_t i = 0; i < cols.size(); ++i) line += (i ? "," : "") + cols[i];
    }
    out += line + "\n";
  }
  return out;
}

}  // namespace

TEST_CASE("validate prints the shape line and accepts ids, files and directories") {
  CliResult byDir = cli(workdir_flag() + " validate institutions/tang");
  CHECK(byDir.code == 0);
  CHECK(byDir.out.find("rho=0.17") != std::string::npos);
  CHECK(byDir.out.find("pattern=gated_pipeline") != std::string::npos);

  CliResult byId = cli(workdir_flag() + " validate us_federal");
  CHECK(byId.code == 0);
  CHECK(byId.out.find("rho=0.56") != std::string::npos);

  CliResult byFile = cli(workdir_flag() + " validate institutions/sas/spec.yaml");
  CHECK(byFile.code == 0);
  CHECK(byFile.out.find("sas pattern=pipeline") != std::string::npos);

  CliResult all = cli(workdir_flag() +
                      " validate sas qin_han soviet mongol tang us_federal edo athens");
  CHECK(all.code == 0);
}

TEST_CASE("validate reports violations with exit 1 and missing files with exit 2") {
  const fs::path dir = scratch_root() / "broken";
  fs::create_directories(dir);
  std::ofstream(dir / "soul.md") << "do the work\n";
  std::ofstream(dir / "spec.yaml") << R"(id: broken
pattern: pipeline
agents:
  - {id: a, role: executor, soul_prompt: soul.md}
stages:
  - {id: s1, kind: single, agent: a, transitions: {next: s2}}
  - {id: s2, kind: gate, agent: a, transitions: {approve: s3, reject: s1}}
  - {id: s3, kind: terminal}
)";
  CliResult broken = cli("validate " + (dir / "spec.yaml").string());
  CHECK(broken.code == 1);
  CHECK(broken.out.find("pattern_pipeline") != std::string::npos);
  CHECK(broken.out.find("violation") != std::string::npos);

  CliResult missing = cli("validate /nonexistent/spec.yaml");
  CHECK(missing.code == 2);
  CHECK(missing.err.find("error") != std::string::npos);
}

TEST_CASE("run writes a trace and prints replayable metrics") {
  const fs::path out_a = scratch_root() / "run_a";
  const fs::path out_b = scratch_root() / "run_b";
  const std::string base = workdir_flag() +
                           " run --spec sas --task echo01 --adapter scripted --seed 7 --out ";
  CliResult a = cli(base + out_a.string());
  CHECK(a.code == 0);
  const std::string metrics = first_line(a.out);
  CHECK(metrics.find("spec=sas") != std::string::npos);
  CHECK(metrics.find("status=done") != std::string::npos);
  CHECK(metrics.find("steps=1") != std::string::npos);
  CHECK(metrics.find("score=1.0000") != std::string::npos);
  CHECK(fs::exists(out_a / "sas__echo01__7.trace.jsonl"));

  CliResult b = cli(base + out_b.string());
  CHECK(first_line(b.out) == metrics);
  CHECK(slurp(out_a / "sas__echo01__7.trace.jsonl") ==
        slurp(out_b / "sas__echo01__7.trace.jsonl"));
}

TEST_CASE("run under the stochastic adapter replays bit-for-bit per seed") {
  const std::string base = workdir_flag() +
                           " run --spec tang --task status01 --adapter stochastic "
                           "--gate-approve 0.5 --budget 16 --out " +
                           (scratch_root() / "stoch").string();
  CliResult a = cli(base + " --seed 5");
  CliResult b = cli(base + " --seed 5");
  CHECK(a.code == b.code);
  CHECK(first_line(a.out) == first_line(b.out));
  CliResult c = cli(base + " --seed 6");
  CHECK(c.code == 0);
}

TEST_CASE("a confirmation feature honors the unattended default") {
  const fs::path dir = scratch_root() / "confirm";
  fs::create_directories(dir);
  std::ofstream(dir / "soul.md") << "hold the line\n";
  std::ofstream(dir / "spec.yaml") << R"(id: checkpointed
pattern: gated_pipeline
agents:
  - {id: clerk, role: executor, soul_prompt: soul.md}
  - {id: warden, role: gatekeeper, soul_prompt: soul.md}
stages:
  - {id: draft, kind: single, agent: clerk, transitions: {next: review}}
  - {id: review, kind: gate, agent: warden, transitions: {approve: fin, reject: draft}}
  - {id: fin, kind: terminal}
features:
  - kind: human_confirmation
)";
  const std::string base = workdir_flag() + " run --spec " + (dir / "spec.yaml").string() +
                           " --task status01 --adapter stochastic --gate-approve 1.0 --out " +
                           (scratch_root() / "confirm_out").string();
  CliResult proceed = cli(base + " --confirm-default proceed");
  CHECK(proceed.code == 0);
  CHECK(first_line(proceed.out).find("status=done") != std::string::npos);

  CliResult abort = cli(base + " --confirm-default abort");
  CHECK(abort.code == 2);
  CHECK(abort.err.find("operator abort") != std::string::npos);
}

TEST_CASE("bad usage exits 3 and load failures exit 2") {
  CHECK(cli("").code == 3);
  CHECK(cli("conquer").code == 3);
  CHECK(cli(workdir_flag() + " run --task echo01").code == 3);
  CHECK(cli(workdir_flag() + " run --spec sas --task echo01 --adapter psychic").code == 3);
  CHECK(cli(workdir_flag() + " run --spec ghost --task echo01").code == 2);
  CHECK(cli(workdir_flag() + " run --spec sas --task ghost").code == 2);
  CHECK(cli(workdir_flag() + " report /nonexistent/results.csv").code == 2);
  CHECK(cli(workdir_flag() + " sweep --plan /nonexistent/plan.yaml").code == 2);
}

TEST_CASE("bench produces a stable results file and report re-renders it") {
  const fs::path out_a = scratch_root() / "bench_a";
  const fs::path out_b = scratch_root() / "bench_b";
  const std::string base = workdir_flag() +
                           " bench --specs sas,tang --tasks calc01 --adapter scripted "
                           "--seeds 1,2 --parallel 2 --out ";
  CliResult a = cli(base + out_a.string());
  CHECK(a.code == 0);
  CHECK(a.out.find("tang") != std::string::npos);
  CHECK(a.out.find("100.0") != std::string::npos);
  CHECK(first_line(slurp(out_a / "results.csv")) ==
        "spec_id,task_id,seed,score,steps,tokens,wall_ms,gate_loop");

  size_t traces = 0;
  for (const auto& e : fs::directory_iterator(out_a / "traces")) {
    (void)e;
    ++traces;
  }
  CHECK(traces == 4);

  CliResult b = cli(base + out_b.string());
  CHECK(b.out == a.out);
  CHECK(strip_wall(slurp(out_a / "results.csv")) == strip_wall(slurp(out_b / "results.csv")));

  CliResult rep = cli("report " + (out_a / "results.csv").string());
  CHECK(rep.code == 0);
  CHECK(rep.out == a.out);
}

TEST_CASE("sweep renders the grid and writes identical csv bytes on replay") {
  const fs::path plan = scratch_root() / "plan.yaml";
  std::ofstream(plan) << R"(topologies:
  - {family: gated, m: 6, gates: [2]}
  - {family: pipeline, m: 6}
reject_probs: [0.5]
budgets: [10]
guards: [0]
trials: 150
seed: 9
parallel: 2
)";
  const fs::path out_a = scratch_root() / "sweep_a";
  const fs::path out_b = scratch_root() / "sweep_b";
  CliResult a = cli("sweep --plan " + plan.string() + " --out " + out_a.string());
  CHECK(a.code == 0);
  CHECK(a.out.find("gated_m6_g1") != std::string::npos);
  CHECK(a.out.find("pipeline_m6") != std::string::npos);
  CHECK(first_line(slurp(out_a / "sweep.csv")) ==
        "family,m,g,rho,p,B,k,trials,mean_steps,var_steps,failure_rate,mean_gate_visits");

  CliResult b = cli("sweep --plan " + plan.string() + " --out " + out_b.string());
  CHECK(b.out == a.out);
  CHECK(slurp(out_a / "sweep.csv") == slurp(out_b / "sweep.csv"));
}
