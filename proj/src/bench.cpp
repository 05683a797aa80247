#include "arena/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include "yaml-cpp/yaml.h"

namespace arena::bench {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void task_error(const fs::path& path, const std::string& message) {
  throw TaskLoadError("task file " + path.string() + ": " + message);
}

std::string yaml_str(const YAML::Node& node, const char* key, const fs::path& path) {
  YAML::Node v = node[key];
  if (!v || !v.IsScalar()) task_error(path, std::string("missing or non-scalar '") + key + "'");
  return v.as<std::string>();
}

std::map<std::string, std::string> yaml_str_map(const YAML::Node& node, const char* key,
                                                const fs::path& path) {
  std::map<std::string, std::string> out;
  YAML::Node v = node[key];
  if (!v) return out;
  if (!v.IsMap()) task_error(path, std::string("'") + key + "' must be a mapping");
  for (const auto& kv : v) {
    out[kv.first.as<std::string>()] = kv.second.as<std::string>();
  }
  return out;
}

std::vector<std::string> yaml_str_list(const YAML::Node& node, const char* key,
                                       const fs::path& path) {
  std::vector<std::string> out;
  YAML::Node v = node[key];
  if (!v) return out;
  if (!v.IsSequence()) task_error(path, std::string("'") + key + "' must be a list");
  for (const auto& item : v) out.push_back(item.as<std::string>());
  return out;
}

nlohmann::json yaml_to_json_args(const YAML::Node& node, const fs::path& path) {
  if (!node.IsMap()) task_error(path, "tool call 'args' must be a mapping");
  nlohmann::json out = nlohmann::json::object();
  for (const auto& kv : node) {
    out[kv.first.as<std::string>()] = kv.second.as<std::string>();
  }
  return out;
}

const std::vector<std::string>& check_kinds() {
  static const std::vector<std::string> kinds = {
      "final_status", "artifact_contains", "tool_called", "tool_result_contains", "kv_equals"};
  return kinds;
}

std::string arg_as_string(const nlohmann::json& args, const char* key) {
  if (!args.contains(key)) throw std::runtime_error(std::string("missing argument '") + key + "'");
  const nlohmann::json& v = args[key];
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  return v.dump();
}

// --- arithmetic -------------------------------------------------------------

struct ExprParser {
  const std::string& text;
  size_t pos = 0;

  void skip() {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  }
  bool eat(char c) {
    skip();
    if (pos < text.size() && text[pos] == c) {
      ++pos;
      return true;
    }
    return false;
  }
  double expr() {
    double v = term();
    for (;;) {
      if (eat('+')) v += term();
      else if (eat('-')) v -= term();
      else return v;
    }
  }
  double term() {
    double v = factor();
    for (;;) {
      if (eat('*')) v *= factor();
      else if (eat('/')) {
        double d = factor();
        if (d == 0.0) throw std::runtime_error("division by zero");
        v /= d;
      } else {
        return v;
      }
    }
  }
  double factor() {
    if (eat('-')) return -factor();
    if (eat('(')) {
      double v = expr();
      if (!eat(')')) throw std::runtime_error("missing ')'");
      return v;
    }
    return number();
  }
  double number() {
    skip();
    const size_t start = pos;
    while (pos < text.size() &&
           (std::isdigit(static_cast<unsigned char>(text[pos])) || text[pos] == '.')) {
      ++pos;
    }
    if (pos == start) {
      throw std::runtime_error("expected a number at position " + std::to_string(start));
    }
    return std::stod(text.substr(start, pos - start));
  }
};

}  // namespace

std::string evaluate_arithmetic(const std::string& expr) {
  try {
    ExprParser parser{expr};
    const double v = parser.expr();
    parser.skip();
    if (parser.pos != expr.size()) {
      throw std::runtime_error("unexpected input at position " + std::to_string(parser.pos));
    }
    if (!std::isfinite(v)) throw std::runtime_error("result is not finite");
    if (std::fabs(v) < 9e15 && std::fabs(v - std::llround(v)) < 1e-9) {
      return std::to_string(std::llround(v));
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
  } catch (const std::exception& e) {
    return std::string("error: ") + e.what();
  }
}

// --- tasks ------------------------------------------------------------------

BenchTask load_task(const fs::path& path) {
  YAML::Node root;
  try {
    root = YAML::LoadFile(path.string());
  } catch (const YAML::Exception& e) {
    task_error(path, e.what());
  }
  if (!root.IsMap()) task_error(path, "top level must be a mapping");

  BenchTask task;
  task.source_path = path;
  task.id = yaml_str(root, "id", path);
  task.instructions = yaml_str(root, "instructions", path);
  task.tags = yaml_str_list(root, "tags", path);
  task.tools = yaml_str_list(root, "tools", path);
  task.seed_files = yaml_str_map(root, "seed_files", path);
  task.fixtures = yaml_str_map(root, "fixtures", path);

  ToolRegistry registry;
  for (const std::string& t : task.tools) {
    if (!registry.has(t)) task_error(path, "unknown tool '" + t + "'");
  }

  if (YAML::Node sol = root["solution"]) {
    if (!sol.IsMap()) task_error(path, "'solution' must be a mapping");
    if (YAML::Node calls = sol["tool_calls"]) {
      if (!calls.IsSequence()) task_error(path, "'solution.tool_calls' must be a list");
      for (const auto& c : calls) {
        agents::ToolCall call;
        call.name = yaml_str(c, "name", path);
        if (std::find(task.tools.begin(), task.tools.end(), call.name) == task.tools.end()) {
          task_error(path, "solution calls '" + call.name + "' which the task does not provide");
        }
        call.arguments =
            c["args"] ? yaml_to_json_args(c["args"], path) : nlohmann::json::object();
        task.solution_tool_calls.push_back(std::move(call));
      }
    }
    if (YAML::Node t = sol["text"]) task.solution_text = t.as<std::string>();
  }

  YAML::Node rubric = root["rubric"];
  if (!rubric || !rubric.IsSequence() || rubric.size() == 0) {
    task_error(path, "'rubric' must be a non-empty list");
  }
  double weight_sum = 0.0;
  for (const auto& r : rubric) {
    RubricCheck check;
    check.kind = yaml_str(r, "check", path);
    if (std::find(check_kinds().begin(), check_kinds().end(), check.kind) ==
        check_kinds().end()) {
      task_error(path, "unknown rubric check '" + check.kind + "'");
    }
    YAML::Node w = r["weight"];
    if (!w || !w.IsScalar()) task_error(path, "rubric check missing 'weight'");
    check.weight = w.as<double>();
    if (check.weight <= 0.0) task_error(path, "rubric weights must be positive");
    weight_sum += check.weight;

    if (check.kind == "final_status") {
      check.status = yaml_str(r, "status", path);
      if (check.status != "done" && check.status != "budget_exhausted" &&
          check.status != "error") {
        task_error(path, "final_status expects done, budget_exhausted or error");
      }
    } else if (check.kind == "artifact_contains") {
      check.file = yaml_str(r, "file", path);
      check.needle = yaml_str(r, "needle", path);
    } else if (check.kind == "tool_called") {
      check.name = yaml_str(r, "name", path);
    } else if (check.kind == "tool_result_contains") {
      check.name = yaml_str(r, "name", path);
      check.needle = yaml_str(r, "needle", path);
    } else {  // kv_equals
      check.key = yaml_str(r, "key", path);
      check.value = yaml_str(r, "value", path);
    }
    task.rubric.push_back(std::move(check));
  }
  if (std::fabs(weight_sum - 1.0) > 1e-6) {
    task_error(path, "rubric weights must sum to 1");
  }
  return task;
}

std::vector<BenchTask> load_tasks(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw TaskLoadError("task directory not found: " + dir.string());
  }
  std::vector<fs::path> paths;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() == ".yaml") paths.push_back(entry.path());
  }
  std::sort(paths.begin(), paths.end());
  std::vector<BenchTask> tasks;
  for (const fs::path& p : paths) tasks.push_back(load_task(p));
  std::sort(tasks.begin(), tasks.end(),
            [](const BenchTask& a, const BenchTask& b) { return a.id < b.id; });
  for (size_t i = 1; i < tasks.size(); ++i) {
    if (tasks[i].id == tasks[i - 1].id) {
      throw TaskLoadError("duplicate task id '" + tasks[i].id + "' under " + dir.string());
    }
  }
  return tasks;
}

// --- sandbox and tools ------------------------------------------------------

void Sandbox::reset(const BenchTask& task) {
  kv.clear();
  files = task.seed_files;
  fixtures = task.fixtures;
  log.clear();
}

ToolRegistry::ToolRegistry()
    : names_({"echo", "calculator", "kv_store", "file_read", "file_write", "web_lookup"}) {}

bool ToolRegistry::has(const std::string& name) const {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

agents::ToolSchema ToolRegistry::schema(const std::string& name) const {
  auto prop = [](const char* key, const char* desc) {
    return nlohmann::json{{key, {{"type", "string"}, {"description", desc}}}};
  };
  auto params = [](nlohmann::json properties, std::vector<std::string> required) {
    return nlohmann::json{{"type", "object"},
                          {"properties", std::move(properties)},
                          {"required", std::move(required)}};
  };
  if (name == "echo") {
    return {"echo", "Repeat the given text back unchanged.",
            params(prop("text", "text to repeat"), {"text"})};
  }
  if (name == "calculator") {
    return {"calculator", "Evaluate an arithmetic expression (+ - * / and parentheses).",
            params(prop("expr", "expression to evaluate"), {"expr"})};
  }
  if (name == "kv_store") {
    nlohmann::json properties;
    properties["op"] = {{"type", "string"}, {"description", "get, set, del or list"}};
    properties["key"] = {{"type", "string"}};
    properties["value"] = {{"type", "string"}};
    return {"kv_store", "Read and write the run's key-value store.",
            params(std::move(properties), {"op"})};
  }
  if (name == "file_read") {
    return {"file_read", "Read a file from the run workspace.",
            params(prop("path", "workspace path"), {"path"})};
  }
  if (name == "file_write") {
    nlohmann::json properties;
    properties["path"] = {{"type", "string"}};
    properties["content"] = {{"type", "string"}};
    return {"file_write", "Write a file into the run workspace.",
            params(std::move(properties), {"path", "content"})};
  }
  if (name == "web_lookup") {
    return {"web_lookup", "Look a topic up in the reference index.",
            params(prop("query", "topic to look up"), {"query"})};
  }
  throw std::out_of_range("unknown tool '" + name + "'");
}

namespace {

std::string lowercase(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string run_tool(Sandbox& sandbox, const agents::ToolCall& call) {
  const nlohmann::json& args = call.arguments;
  if (call.name == "echo") return arg_as_string(args, "text");
  if (call.name == "calculator") return evaluate_arithmetic(arg_as_string(args, "expr"));
  if (call.name == "kv_store") {
    const std::string op = arg_as_string(args, "op");
    if (op == "set") {
      sandbox.kv[arg_as_string(args, "key")] = arg_as_string(args, "value");
      return "ok";
    }
    if (op == "get") {
      auto it = sandbox.kv.find(arg_as_string(args, "key"));
      return it == sandbox.kv.end() ? "error: no such key" : it->second;
    }
    if (op == "del") {
      sandbox.kv.erase(arg_as_string(args, "key"));
      return "ok";
    }
    if (op == "list") {
      std::string out;
      for (const auto& [k, v] : sandbox.kv) {
        if (!out.empty()) out += "\n";
        out += k + "=" + v;
      }
      return out.empty() ? "(empty)" : out;
    }
    throw std::runtime_error("unknown op '" + op + "'");
  }
  if (call.name == "file_read") {
    const std::string path = arg_as_string(args, "path");
    auto it = sandbox.files.find(path);
    if (it == sandbox.files.end()) throw std::runtime_error("no such file '" + path + "'");
    return it->second;
  }
  if (call.name == "file_write") {
    const std::string path = arg_as_string(args, "path");
    const std::string content = arg_as_string(args, "content");
    sandbox.files[path] = content;
    return "wrote " + std::to_string(content.size()) + " bytes to " + path;
  }
  if (call.name == "web_lookup") {
    const std::string query = lowercase(arg_as_string(args, "query"));
    for (const auto& [key, result] : sandbox.fixtures) {
      const std::string k = lowercase(key);
      if (k == query || query.find(k) != std::string::npos ||
          k.find(query) != std::string::npos) {
        return result;
      }
    }
    return "no results";
  }
  throw std::runtime_error("unknown tool '" + call.name + "'");
}

}  // namespace

std::string ToolRegistry::invoke(Sandbox& sandbox, const agents::ToolCall& call) {
  std::string result;
  try {
    result = run_tool(sandbox, call);
  } catch (const std::exception& e) {
    result = std::string("error: ") + e.what();
  }
  sandbox.log.push_back({call.name, call.arguments, result});
  return result;
}

// --- scoring ----------------------------------------------------------------

double score(const BenchTask& task, const runtime::TaskState& state, const Sandbox& sandbox,
             std::vector<CheckResult>* breakdown) {
  double total = 0.0;
  for (const RubricCheck& check : task.rubric) {
    bool passed = false;
    std::string detail;
    if (check.kind == "final_status") {
      passed = runtime::to_string(state.status) == check.status;
      detail = "status " + runtime::to_string(state.status);
    } else if (check.kind == "artifact_contains") {
      auto it = sandbox.files.find(check.file);
      passed = it != sandbox.files.end() && it->second.find(check.needle) != std::string::npos;
      detail = it == sandbox.files.end() ? "file missing" : "file present";
    } else if (check.kind == "tool_called") {
      passed = std::any_of(sandbox.log.begin(), sandbox.log.end(),
                           [&](const ToolInvocation& t) { return t.name == check.name; });
    } else if (check.kind == "tool_result_contains") {
      passed = std::any_of(sandbox.log.begin(), sandbox.log.end(), [&](const ToolInvocation& t) {
        return t.name == check.name && t.result.find(check.needle) != std::string::npos;
      });
    } else if (check.kind == "kv_equals") {
      auto it = sandbox.kv.find(check.key);
      passed = it != sandbox.kv.end() && it->second == check.value;
    }
    if (passed) total += check.weight;
    if (breakdown) breakdown->push_back({check.kind, passed, check.weight, detail});
  }
  return std::min(total, 1.0);
}

// --- scripted solutions -----------------------------------------------------

const model::Stage* solution_stage(const model::GovernanceSpec& spec) {
  const model::Stage* first_single = nullptr;
  for (const model::Stage& s : spec.stages) {
    if (s.kind != model::StageKind::single) continue;
    if (!first_single) first_single = &s;
    const model::Agent* agent = spec.find_agent(s.agent);
    if (agent && agent->role == model::Role::executor) return &s;
  }
  return first_single;
}

namespace {

std::string advance_token(const model::Stage& stage) {
  if (stage.has_transition(model::decisions::next)) return model::decisions::next;
  return stage.transition_order.empty() ? std::string(model::decisions::next)
                                        : stage.transition_order.front();
}

}  // namespace

agents::Script make_task_script(const model::GovernanceSpec& spec, const BenchTask& task) {
  agents::Script script;
  const model::Stage* target = solution_stage(spec);

  for (const model::Stage& s : spec.stages) {
    switch (s.kind) {
      case model::StageKind::gate:
        script.stage_default(s.id, agents::decision_response(model::decisions::approve));
        break;
      case model::StageKind::cluster:
        script.stage_default(s.id, agents::decision_response(model::decisions::success));
        break;
      case model::StageKind::consensus:
        script.stage_default(s.id, agents::decision_response(model::decisions::vote_yes));
        break;
      case model::StageKind::single:
        if (s.transitions.size() > 1) {
          script.stage_default(s.id, agents::decision_response(advance_token(s)));
        } else {
          script.stage_default(s.id, agents::text_response("advanced the work at " + s.id));
        }
        break;
      case model::StageKind::terminal:
        break;
    }
  }

  if (target) {
    std::vector<agents::AgentResponse> steps;
    for (const agents::ToolCall& call : task.solution_tool_calls) {
      steps.push_back(agents::tool_call_response({call}));
    }
    std::string text = task.solution_text.empty() ? "task complete" : task.solution_text;
    if (target->transitions.size() > 1) {
      text += "\ndecision: " + advance_token(*target);
    }
    steps.push_back(agents::text_response(std::move(text)));
    script.on(target->id, target->agent, std::move(steps));
  }
  return script;
}

runtime::TaskInput make_task_input(const BenchTask& task, ToolRegistry& registry,
                                   Sandbox& sandbox) {
  runtime::TaskInput input;
  input.id = task.id;
  input.instructions = task.instructions;
  for (const std::string& name : task.tools) input.tools.push_back(registry.schema(name));
  std::vector<std::string> allowed = task.tools;
  input.tool_exec = [&registry, &sandbox, allowed](const agents::ToolCall& call) {
    if (std::find(allowed.begin(), allowed.end(), call.name) == allowed.end()) {
      const std::string result = "error: tool '" + call.name + "' not available";
      sandbox.log.push_back({call.name, call.arguments, result});
      return result;
    }
    return registry.invoke(sandbox, call);
  };
  return input;
}

// --- results ----------------------------------------------------------------

const char* const kResultsHeader = "spec_id,task_id,seed,score,steps,tokens,wall_ms,gate_loop";

void write_results_csv(const fs::path& path, const std::vector<RunRecord>& records) {
  std::ofstream out(path);
  if (!out) throw TaskLoadError("cannot write " + path.string());
  out << kResultsHeader << "\n";
  for (const RunRecord& r : records) {
    char score_buf[32];
    std::snprintf(score_buf, sizeof(score_buf), "%.4f", r.score);
    out << r.spec_id << ',' << r.task_id << ',' << r.seed << ',' << score_buf << ',' << r.steps
        << ',' << (r.prompt_tokens + r.completion_tokens) << ',' << r.wall_ms << ','
        << (r.gate_loop ? 1 : 0) << "\n";
  }
}

std::vector<RunRecord> read_results_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw TaskLoadError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kResultsHeader) {
    throw TaskLoadError("unrecognized results header in " + path.string());
  }
  std::vector<RunRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, ',')) cols.push_back(col);
    if (cols.size() != 8) throw TaskLoadError("malformed results row: " + line);
    RunRecord r;
    r.spec_id = cols[0];
    r.task_id = cols[1];
    r.seed = std::stoull(cols[2]);
    r.score = std::stod(cols[3]);
    r.steps = std::stoll(cols[4]);
    r.prompt_tokens = std::stoll(cols[5]);
    r.wall_ms = std::stoll(cols[6]);
    r.gate_loop = cols[7] == "1";
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<SpecAggregate> aggregate(const std::vector<RunRecord>& records) {
  std::vector<SpecAggregate> out;
  auto find = [&](const std::string& id) -> SpecAggregate& {
    for (SpecAggregate& a : out) {
      if (a.spec_id == id) return a;
    }
    out.push_back({});
    out.back().spec_id = id;
    return out.back();
  };
  for (const RunRecord& r : records) {
    SpecAggregate& a = find(r.spec_id);
    ++a.runs;
    a.mean_score += r.score;
    a.mean_steps += static_cast<double>(r.steps);
    a.total_tokens += r.prompt_tokens + r.completion_tokens;
    if (r.score == 0.0) ++a.zero_count;
    if (r.gate_loop) a.gate_loop_rate += 1.0;
    if (r.status == "done") a.done_rate += 1.0;
  }
  for (SpecAggregate& a : out) {
    if (a.runs == 0) continue;
    a.mean_score /= a.runs;
    a.mean_steps /= a.runs;
    a.gate_loop_rate /= a.runs;
    a.done_rate /= a.runs;
  }
  return out;
}

std::string render_table(const std::vector<SpecAggregate>& aggregates) {
  std::string out = "spec          runs  score  steps      tokens  zeros  loop%\n";
  for (const SpecAggregate& a : aggregates) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-12s %5d %6.1f %6.1f %11lld %6d %6.1f\n", a.spec_id.c_str(),
                  a.runs, 100.0 * a.mean_score, a.mean_steps, a.total_tokens, a.zero_count,
                  100.0 * a.gate_loop_rate);
    out += buf;
  }
  return out;
}

// --- suite runner -----------------------------------------------------------

uint64_t mix_seed(uint64_t seed, const std::string& spec_id, const std::string& task_id) {
  uint64_t h = 1469598103934665603ULL;
  auto eat = [&](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ULL;
    }
  };
  eat(spec_id);
  h ^= 0x2f;
  h *= 1099511628211ULL;
  eat(task_id);
  uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (h | 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

SuiteResult run_suite(const SuiteConfig& config) {
  std::vector<BenchTask> corpus = load_tasks(config.tasks_dir);
  std::vector<BenchTask> tasks;
  if (config.task_ids.empty()) {
    tasks = std::move(corpus);
  } else {
    for (const std::string& id : config.task_ids) {
      auto it = std::find_if(corpus.begin(), corpus.end(),
                             [&](const BenchTask& t) { return t.id == id; });
      if (it == corpus.end()) throw TaskLoadError("no task '" + id + "' in the corpus");
      tasks.push_back(*it);
    }
  }

  std::vector<model::GovernanceSpec> specs;
  for (const std::string& id : config.spec_ids) {
    specs.push_back(model::load_spec(config.institutions_dir / id / "spec.yaml"));
  }

  struct Unit {
    const model::GovernanceSpec* spec;
    const BenchTask* task;
    uint64_t seed;
  };
  std::vector<Unit> units;
  for (const model::GovernanceSpec& spec : specs) {
    for (const BenchTask& task : tasks) {
      for (uint64_t seed : config.seeds) units.push_back({&spec, &task, seed});
    }
  }

  const fs::path trace_dir = config.out_dir / "traces";
  fs::create_directories(trace_dir);

  std::vector<RunRecord> records(units.size());
  std::atomic<size_t> cursor{0};

  auto worker = [&]() {
    for (;;) {
      const size_t i = cursor.fetch_add(1);
      if (i >= units.size()) return;
      const Unit& unit = units[i];

      Sandbox sandbox;
      sandbox.reset(*unit.task);
      ToolRegistry registry;
      runtime::TaskInput input = make_task_input(*unit.task, registry, sandbox);

      runtime::RuntimeConfig rc;
      rc.budget = config.budget;
      rc.seed = unit.seed;

      std::unique_ptr<agents::Backend> backend;
      switch (config.backend) {
        case BackendKind::scripted:
          backend = std::make_unique<agents::ScriptedBackend>(
              make_task_script(*unit.spec, *unit.task));
          break;
        case BackendKind::stochastic: {
          agents::StochasticPolicy policy = config.policy;
          policy.seed = mix_seed(unit.seed, unit.spec->id, unit.task->id);
          backend = std::make_unique<agents::StochasticBackend>(policy);
          break;
        }
        case BackendKind::remote:
          backend = std::make_unique<remote::RemoteBackend>(config.remote_config);
          break;
      }

      runtime::TaskState state = runtime::run(*unit.spec, input, rc, *backend);

      std::ofstream trace(trace_dir /
                          runtime::trace_filename(unit.spec->id, unit.task->id, unit.seed));
      runtime::write_trace(trace, *unit.spec, input, unit.seed, state);

      RunRecord record;
      record.spec_id = unit.spec->id;
      record.task_id = unit.task->id;
      record.seed = unit.seed;
      record.status = runtime::to_string(state.status);
      record.score = score(*unit.task, state, sandbox);
      record.steps = state.dispatched_steps;
      record.prompt_tokens = state.prompt_tokens;
      record.completion_tokens = state.completion_tokens;
      record.wall_ms = state.wall_clock.count();
      record.gate_loop = runtime::detect_gate_loop_failure(state);
      records[i] = std::move(record);
    }
  };

  const int threads = std::max(1, config.parallel);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  SuiteResult result;
  result.records = std::move(records);
  result.results_csv = config.out_dir / "results.csv";
  write_results_csv(result.results_csv, result.records);
  return result;
}

}  // namespace arena::bench
