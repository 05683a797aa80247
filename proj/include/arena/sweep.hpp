#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "arena/model.hpp"

// Monte Carlo mapping of topology shape against outcome: generated chains
// (or authored specs) are swept over a grid of gate reject probability,
// step budget and loop-guard threshold, one stochastic run per trial.

namespace arena::sweep {

class PlanError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Either a generated chain (family pipeline/gated) or an authored spec file.
struct TopologySpec {
  std::string family;               // "pipeline" | "gated"; empty with spec_path
  int m = 0;                        // chain length, terminal included
  std::vector<int> gate_positions;  // 1-based, interior (2 .. m-1)
  std::filesystem::path spec_path;
};

// Linear chain of m stages ending at the terminal; listed positions become
// gates whose rejects fall back exactly one stage.
model::GovernanceSpec generate_topology(const TopologySpec& topo);

struct SweepPlan {
  std::vector<TopologySpec> topologies;
  std::vector<double> reject_probs;
  std::vector<int> budgets;  // 0 picks up each spec's default
  std::vector<int> guards;   // loop_guard threshold, 0 = no guard
  int trials = 1;
  uint64_t base_seed = 1;
  int parallel = 1;
};

SweepPlan load_plan(const std::filesystem::path& path);

struct CellResult {
  std::string family;  // generated family name, or the authored spec id
  int m = 0;
  int g = 0;
  double rho = 0.0;
  double p = 0.0;
  int budget = 0;
  int guard = 0;
  int trials = 0;
  double mean_steps = 0.0;
  double var_steps = 0.0;
  double failure_rate = 0.0;      // exhausted runs that saw a gate reject
  double mean_gate_visits = 0.0;  // per gate stage, over all trials
  double completion_rate = 0.0;
};

struct SweepResult {
  std::vector<CellResult> cells;
};

// Cells enumerate topologies x reject_probs x budgets x guards in plan
// order; per-trial seeds derive from (base seed, cell index, trial index),
// so results do not depend on scheduling.
SweepResult run_sweep(const SweepPlan& plan);

extern const char* const kSweepHeader;
void write_sweep_csv(const std::filesystem::path& path, const SweepResult& result);
std::string render_summary(const SweepResult& result);

}  // namespace arena::sweep
