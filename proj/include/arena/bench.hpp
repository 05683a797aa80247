#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "arena/agents.hpp"
#include "arena/remote.hpp"
#include "arena/runtime.hpp"

// Task corpus and scoring: sandboxed tools, rubric evaluation, and the suite
// runner that drives a batch of (spec, task, seed) runs into results.csv.

namespace arena::bench {

class TaskLoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RubricCheck {
  std::string kind;  // final_status | artifact_contains | tool_called |
                     // tool_result_contains | kv_equals
  std::string status;
  std::string file;
  std::string needle;
  std::string name;
  std::string key;
  std::string value;
  double weight = 0.0;
};

struct BenchTask {
  std::string id;
  std::string instructions;
  std::vector<std::string> tags;
  std::vector<std::string> tools;
  std::map<std::string, std::string> seed_files;
  std::map<std::string, std::string> fixtures;
  std::vector<agents::ToolCall> solution_tool_calls;
  std::string solution_text;
  std::vector<RubricCheck> rubric;
  std::filesystem::path source_path;
};

BenchTask load_task(const std::filesystem::path& path);
// Every *.yaml under the directory, sorted by task id.
std::vector<BenchTask> load_tasks(const std::filesystem::path& dir);

struct ToolInvocation {
  std::string name;
  nlohmann::json arguments;
  std::string result;
};

// Per-run scratch world the tools act on. Nothing escapes it.
struct Sandbox {
  std::map<std::string, std::string> kv;
  std::map<std::string, std::string> files;
  std::map<std::string, std::string> fixtures;
  std::vector<ToolInvocation> log;

  void reset(const BenchTask& task);
};

class ToolRegistry {
 public:
  ToolRegistry();
  const std::vector<std::string>& names() const { return names_; }
  bool has(const std::string& name) const;
  agents::ToolSchema schema(const std::string& name) const;  // throws on unknown
  // Dispatches and logs. Tool misuse comes back as an "error: ..." result
  // rather than an exception, so a bad call never sinks the run.
  std::string invoke(Sandbox& sandbox, const agents::ToolCall& call);

 private:
  std::vector<std::string> names_;
};

// Infix arithmetic over + - * / with parentheses and unary minus.
std::string evaluate_arithmetic(const std::string& expr);

struct CheckResult {
  std::string kind;
  bool passed = false;
  double weight = 0.0;
  std::string detail;
};

double score(const BenchTask& task, const runtime::TaskState& state, const Sandbox& sandbox,
             std::vector<CheckResult>* breakdown = nullptr);

// Scripted playback that carries the task's packaged solution through a
// spec: gates approve, members succeed, voters assent, and the first
// executor-bound single stage performs the solution tool calls.
agents::Script make_task_script(const model::GovernanceSpec& spec, const BenchTask& task);
const model::Stage* solution_stage(const model::GovernanceSpec& spec);

runtime::TaskInput make_task_input(const BenchTask& task, ToolRegistry& registry,
                                   Sandbox& sandbox);

struct RunRecord {
  std::string spec_id;
  std::string task_id;
  uint64_t seed = 0;
  std::string status;
  double score = 0.0;
  long long steps = 0;
  long long prompt_tokens = 0;
  long long completion_tokens = 0;
  long long wall_ms = 0;
  bool gate_loop = false;
};

// The CSV carries one tokens column (prompt + completion); status and the
// token split exist on in-memory records only. Rows read back leave status
// empty and report the total under prompt_tokens.
extern const char* const kResultsHeader;
void write_results_csv(const std::filesystem::path& path, const std::vector<RunRecord>& records);
std::vector<RunRecord> read_results_csv(const std::filesystem::path& path);

struct SpecAggregate {
  std::string spec_id;
  int runs = 0;
  double mean_score = 0.0;
  double mean_steps = 0.0;
  long long total_tokens = 0;  // prompt + completion
  int zero_count = 0;          // scores that are exactly 0
  double gate_loop_rate = 0.0;
  double done_rate = 0.0;      // meaningful for in-memory records only
};

std::vector<SpecAggregate> aggregate(const std::vector<RunRecord>& records);
std::string render_table(const std::vector<SpecAggregate>& aggregates);

enum class BackendKind { scripted, stochastic, remote };

struct SuiteConfig {
  std::vector<std::string> spec_ids;  // resolved against institutions_dir
  std::filesystem::path institutions_dir;
  std::filesystem::path tasks_dir;
  std::vector<std::string> task_ids;  // empty: the whole corpus
  std::vector<uint64_t> seeds = {1};
  BackendKind backend = BackendKind::scripted;
  agents::StochasticPolicy policy;
  remote::AdapterConfig remote_config;
  int budget = 0;
  int parallel = 1;
  std::filesystem::path out_dir;  // results.csv plus traces/
};

struct SuiteResult {
  std::vector<RunRecord> records;
  std::filesystem::path results_csv;
};

SuiteResult run_suite(const SuiteConfig& config);

// Stream mixer for per-run stochastic seeds.
uint64_t mix_seed(uint64_t seed, const std::string& spec_id, const std::string& task_id);

}  // namespace arena::bench
