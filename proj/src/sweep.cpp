#include "arena/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include "arena/agents.hpp"
#include "arena/runtime.hpp"
#include "yaml-cpp/yaml.h"

namespace arena::sweep {

namespace fs = std::filesystem;

namespace {

uint64_t splitmix64(uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

uint64_t trial_seed(uint64_t base, size_t cell, int trial) {
  return splitmix64(splitmix64(base + 0x632be59bd9b4e019ULL * (cell + 1)) +
                    static_cast<uint64_t>(trial));
}

void check_topology(const TopologySpec& topo) {
  if (!topo.spec_path.empty()) {
    if (!topo.family.empty() || topo.m != 0 || !topo.gate_positions.empty()) {
      throw PlanError("a topology names either a spec file or a generated family, not both");
    }
    return;
  }
  if (topo.family != "pipeline" && topo.family != "gated") {
    throw PlanError("unknown topology family '" + topo.family + "'");
  }
  if (topo.m < 2) throw PlanError("chain length must be at least 2");
  if (topo.family == "pipeline") {
    if (!topo.gate_positions.empty()) throw PlanError("pipeline family takes no gate positions");
    return;
  }
  if (topo.gate_positions.empty()) {
    throw PlanError("gated family needs at least one gate position");
  }
  std::vector<int> sorted = topo.gate_positions;
  std::sort(sorted.begin(), sorted.end());
  for (size_t i = 0; i < sorted.size(); ++i) {
    if (sorted[i] < 2 || sorted[i] > topo.m - 1) {
      throw PlanError("gate position " + std::to_string(sorted[i]) +
                      " is not interior to a chain of " + std::to_string(topo.m));
    }
    if (i > 0 && sorted[i] == sorted[i - 1]) {
      throw PlanError("duplicate gate position " + std::to_string(sorted[i]));
    }
  }
}

}  // namespace

model::GovernanceSpec generate_topology(const TopologySpec& topo) {
  check_topology(topo);
  if (!topo.spec_path.empty()) return model::load_spec(topo.spec_path);

  std::vector<bool> is_gate(static_cast<size_t>(topo.m) + 1, false);
  for (int pos : topo.gate_positions) is_gate[static_cast<size_t>(pos)] = true;

  std::ostringstream yaml;
  yaml << "id: " << topo.family << "_m" << topo.m;
  if (topo.family == "gated") yaml << "_g" << topo.gate_positions.size();
  yaml << "\n";
  yaml << "pattern: " << (topo.family == "gated" ? "gated_pipeline" : "pipeline") << "\n";
  yaml << "agents:\n";
  yaml << "  - {id: worker, role: executor, soul_prompt: none}\n";
  if (topo.family == "gated") {
    yaml << "  - {id: reviewer, role: gatekeeper, soul_prompt: none}\n";
  }
  yaml << "stages:\n";
  for (int pos = 1; pos <= topo.m; ++pos) {
    const std::string id = "s" + std::to_string(pos);
    const std::string next = "s" + std::to_string(pos + 1);
    const std::string prev = "s" + std::to_string(pos - 1);
    if (pos == topo.m) {
      yaml << "  - {id: " << id << ", kind: terminal}\n";
    } else if (is_gate[static_cast<size_t>(pos)]) {
      yaml << "  - {id: " << id << ", kind: gate, agent: reviewer, transitions: {approve: "
           << next << ", reject: " << prev << "}}\n";
    } else {
      yaml << "  - {id: " << id << ", kind: single, agent: worker, transitions: {next: " << next
           << "}}\n";
    }
  }

  model::GovernanceSpec spec = model::load_spec_text(yaml.str(), fs::path("."), false);
  model::ValidationReport report = model::validate(spec);
  if (!report.ok()) {
    throw PlanError("generated topology fails validation: " + report.violations.front().message);
  }
  return spec;
}

SweepPlan load_plan(const fs::path& path) {
  YAML::Node root;
  try {
    root = YAML::LoadFile(path.string());
  } catch (const YAML::Exception& e) {
    throw PlanError("plan file " + path.string() + ": " + e.what());
  }
  if (!root.IsMap()) throw PlanError("plan file " + path.string() + ": top level must be a mapping");

  SweepPlan plan;
  YAML::Node topologies = root["topologies"];
  if (!topologies || !topologies.IsSequence() || topologies.size() == 0) {
    throw PlanError("plan needs a non-empty 'topologies' list");
  }
  for (const auto& t : topologies) {
    TopologySpec topo;
    if (YAML::Node s = t["spec"]) {
      topo.spec_path = path.parent_path() / s.as<std::string>();
    } else {
      topo.family = t["family"] ? t["family"].as<std::string>() : "";
      topo.m = t["m"] ? t["m"].as<int>() : 0;
      if (YAML::Node g = t["gates"]) {
        for (const auto& pos : g) topo.gate_positions.push_back(pos.as<int>());
      }
    }
    check_topology(topo);
    plan.topologies.push_back(std::move(topo));
  }

  auto doubles = [&](const char* key, std::vector<double>& out) {
    YAML::Node v = root[key];
    if (!v) return;
    if (!v.IsSequence()) throw PlanError(std::string("'") + key + "' must be a list");
    for (const auto& item : v) out.push_back(item.as<double>());
  };
  auto ints = [&](const char* key, std::vector<int>& out) {
    YAML::Node v = root[key];
    if (!v) return;
    if (!v.IsSequence()) throw PlanError(std::string("'") + key + "' must be a list");
    for (const auto& item : v) out.push_back(item.as<int>());
  };
  doubles("reject_probs", plan.reject_probs);
  ints("budgets", plan.budgets);
  ints("guards", plan.guards);
  if (plan.reject_probs.empty()) throw PlanError("plan needs a non-empty 'reject_probs' list");
  if (plan.budgets.empty()) plan.budgets.push_back(0);
  if (plan.guards.empty()) plan.guards.push_back(0);
  for (double p : plan.reject_probs) {
    if (p < 0.0 || p > 1.0) throw PlanError("reject probabilities must lie in [0, 1]");
  }
  for (int b : plan.budgets) {
    if (b < 0) throw PlanError("budgets must be non-negative");
  }
  for (int k : plan.guards) {
    if (k < 0) throw PlanError("guard thresholds must be non-negative");
  }

  if (YAML::Node t = root["trials"]) plan.trials = t.as<int>();
  if (plan.trials < 1) throw PlanError("'trials' must be at least 1");
  if (YAML::Node s = root["seed"]) plan.base_seed = s.as<uint64_t>();
  if (YAML::Node p = root["parallel"]) plan.parallel = p.as<int>();
  return plan;
}

namespace {

struct Cell {
  model::GovernanceSpec spec;
  double p = 0.0;
  int budget = 0;
  int guard = 0;
};

struct TrialStat {
  long long steps = 0;
  int gate_visits = 0;
  bool done = false;
  bool gate_loop = false;
};

TrialStat run_trial(const Cell& cell, uint64_t seed) {
  runtime::TaskInput probe;
  probe.id = "probe";
  probe.instructions = "carry the probe task through every stage of the chain";

  runtime::RuntimeConfig rc;
  rc.budget = cell.budget;
  rc.seed = seed;

  agents::StochasticPolicy policy;
  policy.gate_approve_prob = 1.0 - cell.p;
  policy.seed = seed;
  agents::StochasticBackend backend(policy);

  runtime::TaskState state = runtime::run(cell.spec, probe, rc, backend);

  TrialStat stat;
  stat.steps = state.dispatched_steps;
  stat.done = state.status == runtime::RunStatus::done;
  stat.gate_loop = runtime::detect_gate_loop_failure(state);
  for (const runtime::Event& e : state.history) {
    if (e.kind == model::StageKind::gate) ++stat.gate_visits;
  }
  return stat;
}

}  // namespace

SweepResult run_sweep(const SweepPlan& plan) {
  if (plan.trials < 1) throw PlanError("'trials' must be at least 1");
  if (plan.topologies.empty() || plan.reject_probs.empty() || plan.budgets.empty() ||
      plan.guards.empty()) {
    throw PlanError("the sweep grid is empty");
  }

  std::vector<Cell> cells;
  for (const TopologySpec& topo : plan.topologies) {
    model::GovernanceSpec base = generate_topology(topo);
    for (double p : plan.reject_probs) {
      for (int budget : plan.budgets) {
        for (int guard : plan.guards) {
          Cell cell{base, p, budget, guard};
          if (guard > 0) {
            model::FeatureConfig f;
            f.kind = model::FeatureKind::loop_guard;
            f.max_consecutive_rejects = guard;
            cell.spec.features.push_back(f);
          }
          cells.push_back(std::move(cell));
        }
      }
    }
  }

  std::vector<TrialStat> stats(cells.size() * static_cast<size_t>(plan.trials));
  std::atomic<size_t> cursor{0};
  auto worker = [&]() {
    for (;;) {
      const size_t i = cursor.fetch_add(1);
      if (i >= stats.size()) return;
      const size_t cell_idx = i / static_cast<size_t>(plan.trials);
      const int trial = static_cast<int>(i % static_cast<size_t>(plan.trials));
      stats[i] = run_trial(cells[cell_idx], trial_seed(plan.base_seed, cell_idx, trial));
    }
  };
  const int threads = std::max(1, plan.parallel);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  SweepResult result;
  for (size_t c = 0; c < cells.size(); ++c) {
    const Cell& cell = cells[c];
    const model::SpecSummary summary = model::summarize(cell.spec);
    CellResult row;
    row.family = summary.id;
    row.m = summary.stage_count;
    row.g = summary.gate_count;
    row.rho = summary.gate_density;
    row.p = cell.p;
    row.budget = cell.budget;
    row.guard = cell.guard;
    row.trials = plan.trials;

    double steps_sq = 0.0;
    for (int t = 0; t < plan.trials; ++t) {
      const TrialStat& s = stats[c * static_cast<size_t>(plan.trials) + static_cast<size_t>(t)];
      row.mean_steps += static_cast<double>(s.steps);
      steps_sq += static_cast<double>(s.steps) * static_cast<double>(s.steps);
      row.mean_gate_visits += s.gate_visits;
      if (s.done) row.completion_rate += 1.0;
      if (s.gate_loop) row.failure_rate += 1.0;
    }
    const double n = plan.trials;
    row.mean_steps /= n;
    row.var_steps = steps_sq / n - row.mean_steps * row.mean_steps;
    row.failure_rate /= n;
    row.completion_rate /= n;
    row.mean_gate_visits = row.g == 0 ? 0.0 : row.mean_gate_visits / (n * row.g);
    result.cells.push_back(std::move(row));
  }
  return result;
}

const char* const kSweepHeader =
    "family,m,g,rho,p,B,k,trials,mean_steps,var_steps,failure_rate,mean_gate_visits";

void write_sweep_csv(const fs::path& path, const SweepResult& result) {
  std::ofstream out(path);
  if (!out) throw PlanError("cannot write " + path.string());
  out << kSweepHeader << "\n";
  for (const CellResult& c : result.cells) {
    char buf[192];
    std::snprintf(buf, sizeof(buf), "%s,%d,%d,%.4f,%g,%d,%d,%d,%.4f,%.4f,%.4f,%.4f",
                  c.family.c_str(), c.m, c.g, c.rho, c.p, c.budget, c.guard, c.trials,
                  c.mean_steps, c.var_steps, c.failure_rate, c.mean_gate_visits);
    out << buf << "\n";
  }
}

std::string render_summary(const SweepResult& result) {
  std::string out =
      "family            m  g    rho     p   B  k  trials   steps  fail%  visits\n";
  for (const CellResult& c : result.cells) {
    char buf[192];
    std::snprintf(buf, sizeof(buf), "%-15s %3d %2d %6.3f %5.2f %3d %2d %7d %7.2f %6.1f %7.2f\n",
                  c.family.c_str(), c.m, c.g, c.rho, c.p, c.budget, c.guard, c.trials,
                  c.mean_steps, 100.0 * c.failure_rate, c.mean_gate_visits);
    out += buf;
  }
  return out;
}

}  // namespace arena::sweep
