// Release gate for the arena. Each numbered criterion runs against the shipped
// catalog, corpus and plans, prints one [PASS]/[FAIL] line with its wall time,
// and any failure (including a blown time budget) makes the process exit
// nonzero. Keep these checks self-contained: expectations are written out
// literally here rather than imported from the code under test.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "arena/bench.hpp"
#include "arena/institutions.hpp"
#include "arena/model.hpp"
#include "arena/remote.hpp"
#include "arena/runtime.hpp"
#include "arena/stub_server.hpp"
#include "arena/sweep.hpp"
#include "support/paths.hpp"

using namespace arena;
namespace fs = std::filesystem;

namespace {

struct Check {
  std::vector<std::string> failures;
  void expect(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
};

fs::path scratch_dir(const std::string& leaf) {
  fs::path dir = fs::temp_directory_path() / "arena_acceptance" / leaf;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int gate_dispatches(const runtime::TaskState& state) {
  int n = 0;
  for (const runtime::Event& e : state.history) {
    if (e.kind == model::StageKind::gate) ++n;
  }
  return n;
}

// ---------------------------------------------------------------- criterion 1

void catalog_shape_parity(Check& c) {
  struct Row {
    const char* id;
    model::Pattern pattern;
    int stages, agents, gates, members, voters;
    const char* density;
    const char* monitor;
  };
  const Row rows[] = {
      {"sas", model::Pattern::pipeline, 2, 1, 0, 0, 0, "0.00", ""},
      {"qin_han", model::Pattern::pipeline, 5, 5, 0, 0, 0, "0.00", "yushi"},
      {"soviet", model::Pattern::pipeline, 6, 5, 0, 0, 0, "0.00", ""},
      {"mongol", model::Pattern::pipeline, 7, 6, 0, 0, 0, "0.00", ""},
      {"tang", model::Pattern::gated_pipeline, 6, 10, 1, 6, 0, "0.17", ""},
      {"us_federal", model::Pattern::gated_pipeline, 9, 8, 5, 0, 0, "0.56", ""},
      {"edo", model::Pattern::autonomous_cluster, 5, 8, 0, 4, 0, "0.00", "metsuke"},
      {"athens", model::Pattern::consensus, 5, 10, 0, 0, 7, "0.00", ""},
  };
  for (const Row& row : rows) {
    model::GovernanceSpec spec = institutions::load_institution(institutions_dir(), row.id);
    model::SpecSummary s = model::summarize(spec);
    const std::string id = row.id;
    c.expect(s.pattern == row.pattern, id + ": pattern mismatch");
    c.expect(s.stage_count == row.stages, id + ": stage count");
    c.expect(s.agent_count == row.agents, id + ": agent count");
    c.expect(s.gate_count == row.gates, id + ": gate count");
    c.expect(s.cluster_member_count == row.members, id + ": cluster member count");
    c.expect(s.voter_count == row.voters, id + ": voter count");
    c.expect(s.gate_density_display == row.density, id + ": gate density display");
    const double rho = static_cast<double>(row.gates) / row.stages;
    c.expect(std::fabs(s.gate_density - rho) < 1e-12, id + ": gate density value");
    c.expect(s.monitor_enabled == (row.monitor[0] != '\0'), id + ": monitor flag");
    c.expect(s.monitor_agent == row.monitor, id + ": monitor agent");
  }
}

// ---------------------------------------------------------------- criterion 2

const char* kAgentsAG = R"(agents:
  - {id: a, role: executor, soul_prompt: none.md}
  - {id: g, role: gatekeeper, soul_prompt: none.md}
)";

void validator_accepts_catalog_rejects_mutations(Check& c) {
  institutions::Catalog cat = institutions::catalog(institutions_dir());
  c.expect(cat.entries.size() == 8, "catalog lists eight specs");
  for (const institutions::CatalogEntry& entry : cat.entries) {
    model::GovernanceSpec spec = model::load_spec(entry.spec_path);
    model::ValidationReport report = model::validate(spec);
    c.expect(report.ok(), entry.id + ": shipped spec must validate clean");
  }

  struct Mutation {
    const char* rule;
    std::string yaml;
  };
  const std::string ag(kAgentsAG);
  const std::vector<Mutation> mutations = {
      {"terminal_count", "id: m1\npattern: pipeline\n" + ag +
                             R"(stages:
  - {id: s1, kind: single, agent: a, transitions: {next: t1}}
  - {id: t1, kind: terminal}
  - {id: t2, kind: terminal}
)"},
      {"transitions_single", "id: m2\npattern: pipeline\n" + ag +
                                 R"(stages:
  - {id: s1, kind: single, agent: a, transitions: {}}
  - {id: t, kind: terminal}
)"},
      {"transitions_gate", "id: m3\npattern: gated_pipeline\n" + ag +
                               R"(stages:
  - {id: s1, kind: single, agent: a, transitions: {next: g1}}
  - {id: g1, kind: gate, agent: g, transitions: {approve: t}}
  - {id: t, kind: terminal}
)"},
      {"transitions_terminal", "id: m4\npattern: pipeline\n" + ag +
                                   R"(stages:
  - {id: s1, kind: single, agent: a, transitions: {next: t}}
  - {id: t, kind: terminal, transitions: {next: s1}}
)"},
      {"transitions_cluster", R"(id: m5
pattern: autonomous_cluster
agents:
  - {id: orch, role: orchestrator, soul_prompt: none.md}
  - {id: w1, role: executor, soul_prompt: none.md}
stages:
  - {id: s1, kind: single, agent: orch, transitions: {next: c1}}
  - {id: c1, kind: cluster, cluster: {members: [w1]}, transitions: {success: t}}
  - {id: t, kind: terminal}
)"},
      {"transitions_consensus", R"(id: m6
pattern: consensus
agents:
  - {id: p, role: proposer, soul_prompt: none.md}
  - {id: v1, role: voter, soul_prompt: none.md}
stages:
  - {id: s1, kind: single, agent: p, transitions: {next: v}}
  - {id: v, kind: consensus, consensus: {voters: [v1]}, transitions: {approve: t}}
  - {id: t, kind: terminal}
)"},
      {"gate_reject_target", "id: m7\npattern: gated_pipeline\n" + ag +
                                 R"(stages:
  - {id: s1, kind: single, agent: a, transitions: {next: g1}}
  - {id: g1, kind: gate, agent: g, transitions: {approve: s2, reject: s2}}
  - {id: s2, kind: single, agent: a, transitions: {next: t}}
  - {id: t, kind: terminal}
)"},
      {"consensus_voters", R"(id: m8
pattern: consensus
agents:
  - {id: p, role: proposer, soul_prompt: none.md}
stages:
  - {id: s1, kind: single, agent: p, transitions: {next: v}}
  - {id: v, kind: consensus, consensus: {voters: []}, transitions: {approve: t, reject: s1}}
  - {id: t, kind: terminal}
)"},
      {"consensus_threshold", R"(id: m9
pattern: consensus
agents:
  - {id: p, role: proposer, soul_prompt: none.md}
  - {id: v1, role: voter, soul_prompt: none.md}
stages:
  - {id: s1, kind: single, agent: p, transitions: {next: v}}
  - {id: v, kind: consensus, consensus: {voters: [v1], threshold: 1.5},
     transitions: {approve: t, reject: s1}}
  - {id: t, kind: terminal}
)"},
      {"consensus_weights", R"(id: m10
pattern: consensus
agents:
  - {id: p, role: proposer, soul_prompt: none.md}
  - {id: v1, role: voter, soul_prompt: none.md}
  - {id: v2, role: voter, soul_prompt: none.md}
stages:
  - {id: s1, kind: single, agent: p, transitions: {next: v}}
  - {id: v, kind: consensus,
     consensus: {voters: [v1, v2], rule: weighted, weights: {v1: 1.0}},
     transitions: {approve: t, reject: s1}}
  - {id: t, kind: terminal}
)"},
      {"cluster_members", R"(id: m11
pattern: autonomous_cluster
agents:
  - {id: orch, role: orchestrator, soul_prompt: none.md}
stages:
  - {id: s1, kind: single, agent: orch, transitions: {next: c1}}
  - {id: c1, kind: cluster, cluster: {members: []},
     transitions: {success: t, failure: t}}
  - {id: t, kind: terminal}
)"},
      {"cluster_required", R"(id: m12
pattern: autonomous_cluster
agents:
  - {id: orch, role: orchestrator, soul_prompt: none.md}
  - {id: w1, role: executor, soul_prompt: none.md}
  - {id: w2, role: executor, soul_prompt: none.md}
stages:
  - {id: s1, kind: single, agent: orch, transitions: {next: c1}}
  - {id: c1, kind: cluster, cluster: {members: [w1], required: [w2]},
     transitions: {success: t, failure: t}}
  - {id: t, kind: terminal}
)"},
      {"loop_guard_k", "id: m13\npattern: pipeline\n" + ag +
                           R"(stages:
  - {id: s1, kind: single, agent: a, transitions: {next: t}}
  - {id: t, kind: terminal}
features:
  - {kind: loop_guard, params: {k: 0}}
)"},
      {"monitor_role", "id: m14\npattern: pipeline\n" + ag +
                           R"(stages:
  - {id: s1, kind: single, agent: a, transitions: {next: t}}
  - {id: t, kind: terminal}
features:
  - {kind: monitor, params: {agent: a}}
)"},
      {"unreachable_stage", "id: m15\npattern: gated_pipeline\n" + ag +
                                R"(stages:
  - {id: s1, kind: single, agent: a, transitions: {next: g1}}
  - {id: g1, kind: gate, agent: g, transitions: {approve: t, reject: s1}}
  - {id: orphan, kind: single, agent: a, transitions: {next: t}}
  - {id: t, kind: terminal}
)"},
      {"pattern_pipeline", "id: m16\npattern: pipeline\n" + ag +
                               R"(stages:
  - {id: s1, kind: single, agent: a, transitions: {next: g1}}
  - {id: g1, kind: gate, agent: g, transitions: {approve: t, reject: s1}}
  - {id: t, kind: terminal}
)"},
      {"pattern_gated", "id: m17\npattern: gated_pipeline\n" + ag +
                            R"(stages:
  - {id: s1, kind: single, agent: a, transitions: {next: t}}
  - {id: t, kind: terminal}
)"},
      {"pattern_gated_cycle", "id: m18\npattern: gated_pipeline\n" + ag +
                                  R"(stages:
  - {id: s1, kind: single, agent: a, transitions: {next: s2}}
  - {id: s2, kind: single, agent: a, transitions: {next: s1, escape: g1}}
  - {id: g1, kind: gate, agent: g, transitions: {approve: t, reject: s1}}
  - {id: t, kind: terminal}
)"},
  };
  c.expect(mutations.size() >= 12, "at least twelve mutations");
  for (const Mutation& m : mutations) {
    model::GovernanceSpec spec = model::load_spec_text(m.yaml, ".", false);
    model::ValidationReport report = model::validate(spec);
    c.expect(!report.ok(), std::string(m.rule) + ": mutation must not validate");
    c.expect(report.has_rule(m.rule), std::string(m.rule) + ": named rule must fire");
  }
}

// ---------------------------------------------------------------- criterion 3

void scripted_dispatch_counts(Check& c) {
  auto run_one = [&](const std::string& id, long long want) {
    model::GovernanceSpec spec = institutions::load_institution(institutions_dir(), id);
    bench::BenchTask task = bench::load_task(tasks_dir() / "echo01.yaml");
    bench::ToolRegistry registry;
    bench::Sandbox sandbox;
    sandbox.reset(task);
    runtime::TaskInput input = bench::make_task_input(task, registry, sandbox);
    agents::ScriptedBackend backend(bench::make_task_script(spec, task));
    runtime::RuntimeConfig cfg;
    cfg.seed = 1;
    runtime::TaskState state = runtime::run(spec, input, cfg, backend);
    c.expect(state.status == runtime::RunStatus::done, id + ": run completes");
    c.expect(state.dispatched_steps == want,
             id + ": expected " + std::to_string(want) + " dispatches, saw " +
                 std::to_string(state.dispatched_steps));
  };
  run_one("sas", 1);
  run_one("qin_han", 4);
}

// ---------------------------------------------------------------- criterion 4

void gate_loop_detection_and_guard(Check& c) {
  model::GovernanceSpec tang = institutions::load_institution(institutions_dir(), "tang");
  runtime::TaskInput probe;
  probe.id = "probe";
  probe.instructions = "carry one directive through";
  agents::StochasticPolicy policy;
  policy.gate_approve_prob = 0.0;
  policy.member_success_prob = 1.0;
  policy.seed = 11;
  runtime::RuntimeConfig cfg;
  cfg.budget = 32;
  cfg.seed = 11;

  {
    agents::StochasticBackend backend(policy);
    runtime::TaskState state = runtime::run(tang, probe, cfg, backend);
    c.expect(state.status == runtime::RunStatus::budget_exhausted,
             "always-reject run must exhaust the budget");
    c.expect(runtime::detect_gate_loop_failure(state), "gate loop failure must be detected");
    c.expect(gate_dispatches(state) == 16,
             "expected 16 gate dispatches, saw " + std::to_string(gate_dispatches(state)));
  }

  {
    model::GovernanceSpec guarded = tang;
    model::FeatureConfig guard;
    guard.kind = model::FeatureKind::loop_guard;
    guard.max_consecutive_rejects = 3;
    guarded.features.push_back(guard);
    agents::StochasticBackend backend(policy);
    runtime::TaskState state = runtime::run(guarded, probe, cfg, backend);
    c.expect(state.status == runtime::RunStatus::done, "guarded run must complete");
    std::vector<const runtime::Event*> gates;
    for (const runtime::Event& e : state.history) {
      if (e.kind == model::StageKind::gate) gates.push_back(&e);
    }
    c.expect(gates.size() == 3,
             "expected exactly 3 gate dispatches, saw " + std::to_string(gates.size()));
    if (gates.size() == 3) {
      c.expect(gates[0]->decision == "reject" && gates[1]->decision == "reject",
               "first two gate verdicts stay organic rejects");
      c.expect(gates[2]->raw_decision == "reject" && gates[2]->decision == "approve" &&
                   gates[2]->override_source == "loop_guard",
               "third consecutive reject must be commuted by the guard");
    }
    c.expect(!runtime::detect_gate_loop_failure(state), "guarded run is not a loop failure");
  }
}

// ---------------------------------------------------------------- criterion 5

void consensus_tally_exhaustive(Check& c) {
  using runtime::TallyOutcome;
  using runtime::VoteValue;
  const int voters = 7;
  int majority_bad = 0, unanimity_bad = 0, total = 1;
  for (int i = 0; i < voters; ++i) total *= 3;
  std::vector<VoteValue> votes(voters);
  for (int code = 0; code < total; ++code) {
    int x = code, yes = 0, no = 0;
    for (int i = 0; i < voters; ++i) {
      const int d = x % 3;
      x /= 3;
      votes[i] = d == 0 ? VoteValue::yes : d == 1 ? VoteValue::no : VoteValue::abstain;
      if (d == 0) ++yes;
      if (d == 1) ++no;
    }
    const TallyOutcome want_majority =
        (yes + no > 0 && yes > no) ? TallyOutcome::approve : TallyOutcome::reject;
    const TallyOutcome want_unanimity =
        (no == 0 && yes > 0) ? TallyOutcome::approve : TallyOutcome::reject;
    if (runtime::tally(votes, model::ConsensusRule::majority, 0.5) != want_majority) {
      ++majority_bad;
    }
    if (runtime::tally(votes, model::ConsensusRule::unanimity, 0.5) != want_unanimity) {
      ++unanimity_bad;
    }
  }
  c.expect(majority_bad == 0,
           std::to_string(majority_bad) + " majority mismatches across " + std::to_string(total));
  c.expect(unanimity_bad == 0, std::to_string(unanimity_bad) + " unanimity mismatches across " +
                                   std::to_string(total));

  std::mt19937_64 rng(4242);
  std::uniform_int_distribution<int> size_dist(1, 9);
  std::uniform_int_distribution<int> vote_dist(0, 2);
  std::uniform_real_distribution<double> weight_dist(0.05, 2.0);
  std::uniform_real_distribution<double> threshold_dist(0.1, 0.9);
  int weighted_bad = 0, checked = 0;
  for (int t = 0; t < 1000; ++t) {
    const int n = size_dist(rng);
    std::vector<VoteValue> v(n);
    std::vector<double> w(n);
    double yes_w = 0.0, no_w = 0.0;
    for (int i = 0; i < n; ++i) {
      const int d = vote_dist(rng);
      v[i] = d == 0 ? VoteValue::yes : d == 1 ? VoteValue::no : VoteValue::abstain;
      w[i] = weight_dist(rng);
      if (d == 0) yes_w += w[i];
      if (d == 1) no_w += w[i];
    }
    const double threshold = threshold_dist(rng);
    const double denom = yes_w + no_w;
    if (denom > 0.0 && std::fabs(yes_w / denom - threshold) < 1e-9) continue;
    const TallyOutcome want = (denom > 0.0 && yes_w / denom > threshold)
                                  ? TallyOutcome::approve
                                  : TallyOutcome::reject;
    ++checked;
    if (runtime::tally(v, model::ConsensusRule::weighted, threshold, &w) != want) ++weighted_bad;
  }
  c.expect(weighted_bad == 0, std::to_string(weighted_bad) + " weighted mismatches");
  c.expect(checked >= 990, "nearly all random cases land away from the threshold boundary");
}

// ---------------------------------------------------------------- criterion 6

void cluster_aggregation_exhaustive(Check& c) {
  model::GovernanceSpec edo = institutions::load_institution(institutions_dir(), "edo");
  const model::Stage* cluster = nullptr;
  for (const model::Stage& s : edo.stages) {
    if (s.kind == model::StageKind::cluster) cluster = &s;
  }
  if (!cluster || !cluster->cluster || cluster->cluster->members.size() != 4) {
    c.expect(false, "edo must carry one cluster stage with four members");
    return;
  }
  const std::vector<std::string>& members = cluster->cluster->members;
  for (int mask = 0; mask < 16; ++mask) {
    agents::Script script;
    for (size_t i = 0; i < members.size(); ++i) {
      const bool ok = mask & (1 << i);
      script.on(cluster->id, members[i],
                {agents::decision_response(ok ? "success" : "failure")});
    }
    agents::ScriptedBackend backend(std::move(script));
    std::vector<agents::ContextBundle> bundles(members.size());
    agents::StageOutcome outcome = runtime::run_cluster(edo, *cluster, bundles, backend);
    const std::string want = mask == 15 ? "success" : "failure";
    c.expect(outcome.decision == want,
             "mask " + std::to_string(mask) + ": expected " + want + ", saw " + outcome.decision);
    c.expect(outcome.sub_events.size() == 4, "mask " + std::to_string(mask) + ": four sub events");
  }
}

// ---------------------------------------------------------------- criterion 7

void gate_retry_geometric_law(Check& c) {
  sweep::SweepPlan plan;
  sweep::TopologySpec topo;
  topo.family = "gated";
  topo.m = 4;
  topo.gate_positions = {2};
  plan.topologies = {topo};
  plan.reject_probs = {0.2, 0.5, 0.8};
  plan.budgets = {128};
  plan.guards = {0};
  plan.trials = 10000;
  plan.base_seed = 29;
  plan.parallel = 4;
  sweep::SweepResult result = sweep::run_sweep(plan);
  c.expect(result.cells.size() == 3, "one cell per reject probability");
  for (const sweep::CellResult& cell : result.cells) {
    const double p = cell.p;
    const double want = 1.0 / (1.0 - p);
    const double se = std::sqrt(p / ((1.0 - p) * (1.0 - p) * cell.trials));
    char buf[160];
    std::snprintf(buf, sizeof buf, "p=%.1f: visits %.4f vs %.4f (3se=%.4f)", p,
                  cell.mean_gate_visits, want, 3 * se);
    c.expect(std::fabs(cell.mean_gate_visits - want) <= 3 * se, buf);
  }
}

// ---------------------------------------------------------------- criterion 8

void gate_density_failure_frontier(Check& c) {
  sweep::SweepPlan plan = sweep::load_plan(repo_root() / "plans" / "frontier.yaml");
  c.expect(plan.trials == 10000, "frontier plan runs 10000 trials per cell");
  sweep::SweepResult result = sweep::run_sweep(plan);
  c.expect(result.cells.size() == 4, "one cell per gate count");
  if (result.cells.size() != 4) return;
  for (size_t i = 0; i < result.cells.size(); ++i) {
    c.expect(result.cells[i].g == static_cast<int>(i) + 1, "cells ordered by gate count");
    if (i > 0) {
      c.expect(result.cells[i].failure_rate >= result.cells[i - 1].failure_rate,
               "failure rate must not drop when gates are added");
    }
  }
  const double p1 = result.cells.front().failure_rate;
  const double p4 = result.cells.back().failure_rate;
  const double n = result.cells.front().trials;
  const double pooled = (p1 + p4) / 2.0;
  const double z = (p4 - p1) / std::sqrt(pooled * (1.0 - pooled) * (2.0 / n));
  char buf[120];
  std::snprintf(buf, sizeof buf, "z=%.2f for %.4f vs %.4f", z, p1, p4);
  c.expect(z >= 2.326, std::string("densest vs sparsest not significant at 0.01: ") + buf);
}

// ---------------------------------------------------------------- criterion 9

void replay_determinism(Check& c) {
  bench::SuiteConfig cfg;
  cfg.spec_ids = {"tang", "athens"};
  cfg.institutions_dir = institutions_dir();
  cfg.tasks_dir = tasks_dir();
  cfg.task_ids = {"calc01", "status01"};
  cfg.seeds = {3, 4};
  cfg.backend = bench::BackendKind::stochastic;
  cfg.policy.gate_approve_prob = 0.6;
  cfg.parallel = 2;
  cfg.out_dir = scratch_dir("replay_a");
  bench::SuiteResult a = bench::run_suite(cfg);

  cfg.parallel = 1;
  cfg.out_dir = scratch_dir("replay_b");
  bench::SuiteResult b = bench::run_suite(cfg);

  c.expect(a.records.size() == 8 && b.records.size() == 8, "eight runs per suite");
  if (a.records.size() != b.records.size()) return;
  for (size_t i = 0; i < a.records.size(); ++i) {
    const bench::RunRecord& ra = a.records[i];
    const bench::RunRecord& rb = b.records[i];
    const std::string tag = ra.spec_id + "/" + ra.task_id + "/" + std::to_string(ra.seed);
    c.expect(ra.spec_id == rb.spec_id && ra.task_id == rb.task_id && ra.seed == rb.seed,
             tag + ": row identity");
    c.expect(ra.status == rb.status && ra.score == rb.score && ra.steps == rb.steps &&
                 ra.prompt_tokens == rb.prompt_tokens &&
                 ra.completion_tokens == rb.completion_tokens && ra.gate_loop == rb.gate_loop,
             tag + ": metrics replay");
    const std::string trace = runtime::trace_filename(ra.spec_id, ra.task_id, ra.seed);
    const fs::path ta = a.results_csv.parent_path() / "traces" / trace;
    const fs::path tb = b.results_csv.parent_path() / "traces" / trace;
    c.expect(fs::exists(ta) && fs::exists(tb), tag + ": trace files present");
    c.expect(slurp(ta) == slurp(tb), tag + ": trace bytes replay");
  }

  auto strip_wall = [](const std::string& csv) {
    std::stringstream in(csv);
    std::string line, out;
    while (std::getline(in, line)) {
      int commas = 0;
      size_t start = 0, end = line.size();
      for (size_t i = 0; i < line.size(); ++i) {
        if (line[i] != ',') continue;
        ++commas;
        if (commas == 6) start = i;
        if (commas == 7) end = i;
      }
      if (commas == 7) line = line.substr(0, start) + line.substr(end);
      out += line + "\n";
    }
    return out;
  };
  c.expect(strip_wall(slurp(a.results_csv)) == strip_wall(slurp(b.results_csv)),
           "results rows replay modulo wall time");
}

// --------------------------------------------------------------- criterion 10

void remote_adapter_contract(Check& c) {
  remote::StubLlmServer server;
  remote::AdapterConfig config;
  config.endpoint = server.endpoint();
  config.model = "acceptance";
  config.max_retries = 3;
  config.retry_backoff_ms = 1;
  config.timeout_ms = 5000;

  {
    remote::RemoteBackend backend(config);
    remote::StubReply reply;
    reply.content = "inspected\ndecision: approve";
    reply.prompt_tokens = 42;
    reply.completion_tokens = 7;
    server.enqueue(reply);
    agents::ContextBundle bundle;
    bundle.soul_prompt = "You audit ledgers.";
    bundle.stage_context = "instructions: audit the quarter\n";
    bundle.tool_schemas.push_back({"ledger", "Reads the ledger.", nlohmann::json::object()});
    bundle.format_instructions = "End with a decision line.";
    agents::DispatchInfo info;
    info.stage_id = "audit";
    info.agent_id = "auditor";
    agents::AgentResponse r = backend.chat(bundle, info);
    c.expect(r.text == reply.content, "reply text passes through");
    c.expect(r.prompt_tokens == 42 && r.completion_tokens == 7, "usage passes through");
    auto reqs = server.requests();
    c.expect(reqs.size() == 1, "one request on the wire");
    if (!reqs.empty()) {
      const nlohmann::json& body = reqs[0].body;
      c.expect(body.at("model") == "acceptance", "model field");
      c.expect(body.at("messages").size() == 2, "system plus user message");
      c.expect(body["messages"][0].at("role") == "system" &&
                   body["messages"][0].at("content") == bundle.soul_prompt,
               "identity rides the system message");
      const std::string user = body["messages"][1].at("content").get<std::string>();
      c.expect(body["messages"][1].at("role") == "user" &&
                   user.find("audit the quarter") != std::string::npos &&
                   user.find("End with a decision line.") != std::string::npos,
               "context and format ride the user message");
      c.expect(body.contains("tools") &&
                   body["tools"][0].at("function").at("name") == "ledger",
               "tool schemas ride the tools array");
    }
  }

  {
    const char* yaml = R"(id: wire
pattern: gated_pipeline
agents:
  - {id: a, role: executor, soul_prompt: none.md}
  - {id: g, role: gatekeeper, soul_prompt: none.md}
stages:
  - {id: draft, kind: single, agent: a, transitions: {next: review}}
  - {id: review, kind: gate, agent: g, transitions: {approve: fin, reject: draft}}
  - {id: fin, kind: terminal}
)";
    model::GovernanceSpec spec = model::load_spec_text(yaml, ".", false);
    remote::StubReply first;
    first.content = "drafted.\ndecision: next";
    first.prompt_tokens = 11;
    first.completion_tokens = 3;
    remote::StubReply second;
    second.content = "holds up.\ndecision: approve";
    second.prompt_tokens = 9;
    second.completion_tokens = 2;
    server.enqueue(first);
    server.enqueue(second);
    remote::RemoteBackend backend(config);
    runtime::TaskInput probe;
    probe.id = "probe";
    probe.instructions = "draft and review";
    runtime::RuntimeConfig rcfg;
    rcfg.seed = 1;
    runtime::TaskState state = runtime::run(spec, probe, rcfg, backend);
    c.expect(state.status == runtime::RunStatus::done, "remote-driven run completes");
    c.expect(state.dispatched_steps == 2, "two dispatches");
    c.expect(state.history.size() == 2 && state.history[1].decision == "approve",
             "decision lines parse into verdicts");
    c.expect(state.prompt_tokens == 20 && state.completion_tokens == 5,
             "usage accumulates onto the run");
  }

  {
    remote::RemoteBackend backend(config);
    const size_t before = server.request_count();
    server.fail_next(429, 1);
    server.fail_next(503, 1);
    remote::StubReply recovered;
    recovered.content = "decision: next";
    server.enqueue(recovered);
    agents::DispatchInfo info;
    info.stage_id = "s";
    info.agent_id = "a";
    agents::AgentResponse r = backend.chat({}, info);
    c.expect(r.text == "decision: next", "retryable statuses are retried to success");
    c.expect(backend.stats().retries == 2, "two retries recorded");
    c.expect(server.request_count() == before + 3, "three requests on the wire");
  }

  {
    remote::AdapterConfig capped = config;
    capped.max_retries = 2;
    remote::RemoteBackend backend(capped);
    const size_t before = server.request_count();
    server.fail_next(503, 5);
    agents::DispatchInfo info;
    info.stage_id = "s";
    info.agent_id = "a";
    bool threw = false;
    try {
      backend.chat({}, info);
    } catch (const remote::RemoteError& e) {
      threw = e.kind() == remote::RemoteErrorKind::http_status && e.status() == 503;
    }
    c.expect(threw, "exhausted retries surface the status error");
    c.expect(server.request_count() == before + 3, "initial try plus two retries, then stop");
    c.expect(backend.stats().failures == 1, "failure recorded");
  }
}

// --------------------------------------------------------------- criterion 11

void aggregate_accounting(Check& c) {
  auto rec = [](const char* spec, const char* task, uint64_t seed, const char* status,
                double score, long long steps, long long pt, long long ct, bool loop) {
    bench::RunRecord r;
    r.spec_id = spec;
    r.task_id = task;
    r.seed = seed;
    r.status = status;
    r.score = score;
    r.steps = steps;
    r.prompt_tokens = pt;
    r.completion_tokens = ct;
    r.wall_ms = 5;
    r.gate_loop = loop;
    return r;
  };
  const std::vector<bench::RunRecord> records = {
      rec("alpha", "t1", 1, "done", 0.0, 3, 100, 20, false),
      rec("alpha", "t2", 1, "done", 0.25, 4, 110, 25, false),
      rec("alpha", "t3", 1, "done", 1.0, 5, 120, 30, true),
      rec("beta", "t1", 1, "error", 0.0001, 6, 130, 35, false),
      rec("beta", "t2", 2, "done", 0.5, 7, 140, 40, false),
      rec("beta", "t3", 3, "done", 0.0, 8, 150, 45, false),
  };
  std::vector<bench::SpecAggregate> direct = bench::aggregate(records);
  c.expect(direct.size() == 2, "two spec aggregates");
  if (direct.size() != 2) return;
  c.expect(direct[0].spec_id == "alpha" && direct[0].zero_count == 1,
           "only the exact zero counts for alpha");
  c.expect(direct[1].spec_id == "beta" && direct[1].zero_count == 1,
           "0.0001 is not a zero score");

  const fs::path csv = scratch_dir("accounting") / "results.csv";
  bench::write_results_csv(csv, records);
  std::vector<bench::RunRecord> back = bench::read_results_csv(csv);
  c.expect(back.size() == records.size(), "row round trip");
  std::vector<bench::SpecAggregate> agg = bench::aggregate(back);
  for (const bench::SpecAggregate& a : agg) {
    double score_sum = 0.0, step_sum = 0.0;
    long long tokens = 0;
    int runs = 0, zeros = 0;
    for (const bench::RunRecord& r : back) {
      if (r.spec_id != a.spec_id) continue;
      ++runs;
      score_sum += r.score;
      step_sum += static_cast<double>(r.steps);
      tokens += r.prompt_tokens + r.completion_tokens;
      if (r.score == 0.0) ++zeros;
    }
    c.expect(a.runs == runs, a.spec_id + ": run count from csv");
    c.expect(a.mean_score == score_sum / runs, a.spec_id + ": mean score recomputes exactly");
    c.expect(a.mean_steps == step_sum / runs, a.spec_id + ": mean steps recompute exactly");
    c.expect(a.total_tokens == tokens, a.spec_id + ": token total recomputes exactly");
    c.expect(a.zero_count == zeros, a.spec_id + ": zero count recomputes exactly");
  }
  for (size_t i = 0; i < records.size(); ++i) {
    c.expect(back[i].score == records[i].score, "four-decimal scores survive the csv");
  }
}

struct Criterion {
  const char* name;
  double limit_s;
  std::function<void(Check&)> fn;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"catalog_shape_parity", 1.0, catalog_shape_parity},
      {"validator_accepts_catalog_rejects_mutations", 1.0,
       validator_accepts_catalog_rejects_mutations},
      {"scripted_dispatch_counts", 1.0, scripted_dispatch_counts},
      {"gate_loop_detection_and_guard", 1.0, gate_loop_detection_and_guard},
      {"consensus_tally_exhaustive", 5.0, consensus_tally_exhaustive},
      {"cluster_aggregation_exhaustive", 1.0, cluster_aggregation_exhaustive},
      {"gate_retry_geometric_law", 30.0, gate_retry_geometric_law},
      {"gate_density_failure_frontier", 120.0, gate_density_failure_frontier},
      {"replay_determinism", 5.0, replay_determinism},
      {"remote_adapter_contract", 5.0, remote_adapter_contract},
      {"aggregate_accounting", 1.0, aggregate_accounting},
  };

  int failed = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    const Criterion& crit = criteria[i];
    Check check;
    const auto start = std::chrono::steady_clock::now();
    try {
      crit.fn(check);
    } catch (const std::exception& e) {
      check.failures.push_back(std::string("exception: ") + e.what());
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (elapsed > crit.limit_s) {
      std::ostringstream ss;
      ss << "took " << elapsed << "s, budget " << crit.limit_s << "s";
      check.failures.push_back(ss.str());
    }
    const bool ok = check.failures.empty();
    if (!ok) ++failed;
    std::printf("[%s] %zu %s (%.2fs)\n", ok ? "PASS" : "FAIL", i + 1, crit.name, elapsed);
    for (const std::string& f : check.failures) {
      std::printf("       - %s\n", f.c_str());
    }
  }
  if (failed > 0) {
    std::printf("%d of %zu criteria failed\n", failed, criteria.size());
    return 1;
  }
  std::printf("all %zu criteria pass\n", criteria.size());
  return 0;
}
