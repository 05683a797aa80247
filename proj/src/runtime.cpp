#include "arena/runtime.hpp"

#include <algorithm>
#include <chrono>
#include <ostream>
#include <sstream>

namespace arena::runtime {

std::string to_string(RunStatus s) {
  switch (s) {
    case RunStatus::running: return "running";
    case RunStatus::done: return "done";
    case RunStatus::budget_exhausted: return "budget_exhausted";
    case RunStatus::error: return "error";
  }
  return "?";
}

namespace {

std::string first_line(const std::string& text, size_t limit = 100) {
  size_t pos = 0;
  while (pos < text.size()) {
    size_t end = text.find('\n', pos);
    std::string line = text.substr(pos, end == std::string::npos ? std::string::npos : end - pos);
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) {
      if (line.size() > limit) line = line.substr(0, limit);
      return line;
    }
    if (end == std::string::npos) break;
    pos = end + 1;
  }
  return "";
}

std::string outcome_summary(const agents::StageOutcome& o) {
  if (o.kind == model::StageKind::cluster) {
    int ok = 0, bad = 0;
    for (const agents::SubEvent& s : o.sub_events) {
      if (s.decision == model::decisions::success) ++ok;
      else ++bad;
    }
    return "members: " + std::to_string(ok) + " success, " + std::to_string(bad) + " failure";
  }
  if (o.kind == model::StageKind::consensus) {
    int yes = 0, no = 0, abst = 0;
    for (const agents::SubEvent& s : o.sub_events) {
      if (s.decision == model::decisions::vote_yes) ++yes;
      else if (s.decision == model::decisions::vote_no) ++no;
      else if (s.decision == model::decisions::abstain) ++abst;
    }
    return "votes: " + std::to_string(yes) + " yes, " + std::to_string(no) + " no, " +
           std::to_string(abst) + " abstain";
  }
  return first_line(o.response_text);
}

Event make_event(int step, const agents::StageOutcome& o) {
  Event ev;
  ev.step = step;
  ev.stage_id = o.stage_id;
  ev.kind = o.kind;
  ev.agents = o.agents;
  ev.raw_decision = o.raw_decision;
  ev.decision = o.decision;
  ev.override_source = o.override_source;
  ev.overrides = o.overrides;
  ev.prompt_tokens = o.prompt_tokens;
  ev.completion_tokens = o.completion_tokens;
  ev.sub_events = o.sub_events;
  ev.summary = outcome_summary(o);
  return ev;
}

}  // namespace

TallyOutcome tally(const std::vector<VoteValue>& votes, model::ConsensusRule rule, double threshold,
                   const std::vector<double>* weights) {
  if (rule == model::ConsensusRule::unanimity) {
    bool any_yes = false;
    for (VoteValue v : votes) {
      if (v == VoteValue::no) return TallyOutcome::reject;
      if (v == VoteValue::yes) any_yes = true;
    }
    return any_yes ? TallyOutcome::approve : TallyOutcome::reject;
  }
  double yes = 0.0, no = 0.0;
  for (size_t i = 0; i < votes.size(); ++i) {
    double w = 1.0;
    if (rule == model::ConsensusRule::weighted && weights && i < weights->size()) {
      w = (*weights)[i];
    }
    if (votes[i] == VoteValue::yes) yes += w;
    else if (votes[i] == VoteValue::no) no += w;
  }
  const double denom = yes + no;
  if (denom <= 0.0) return TallyOutcome::reject;
  return (yes / denom > threshold) ? TallyOutcome::approve : TallyOutcome::reject;
}

agents::StageOutcome run_consensus(const model::GovernanceSpec& spec, const model::Stage& stage,
                                   std::vector<agents::ContextBundle> bundles,
                                   agents::Backend& backend) {
  const model::ConsensusConfig& cfg = *stage.consensus;
  agents::StageOutcome outcome;
  outcome.stage_id = stage.id;
  outcome.kind = stage.kind;
  outcome.agents = cfg.voters;

  std::vector<agents::DispatchInfo> infos;
  for (size_t i = 0; i < cfg.voters.size(); ++i) {
    agents::DispatchInfo info;
    info.stage_id = stage.id;
    info.agent_id = cfg.voters[i];
    info.kind = stage.kind;
    info.member_index = static_cast<int>(i);
    infos.push_back(info);
  }
  std::vector<agents::AgentResponse> responses = backend.chat_many(bundles, infos);

  std::vector<VoteValue> votes;
  std::vector<double> weights;
  std::string joined_text;
  (void)spec;
  for (size_t i = 0; i < responses.size(); ++i) {
    const agents::AgentResponse& resp = responses[i];
    outcome.prompt_tokens += resp.prompt_tokens;
    outcome.completion_tokens += resp.completion_tokens;
    if (!joined_text.empty()) joined_text += "\n";
    joined_text += resp.text;

    agents::SubEvent sub;
    sub.agent = cfg.voters[i];
    sub.prompt_tokens = resp.prompt_tokens;
    sub.completion_tokens = resp.completion_tokens;

    agents::ParsedDecision parsed = agents::parse_decision(resp, stage, agents::ParseMode::voter);
    if (parsed.ok) {
      sub.decision = parsed.token;
      sub.summary = first_line(resp.text);
      if (parsed.token == model::decisions::vote_yes) votes.push_back(VoteValue::yes);
      else if (parsed.token == model::decisions::vote_no) votes.push_back(VoteValue::no);
      else votes.push_back(VoteValue::abstain);
    } else if (cfg.error_handling == model::VoteErrorHandling::abstain) {
      sub.decision = model::decisions::abstain;
      sub.summary = parsed.error;
      votes.push_back(VoteValue::abstain);
    } else {
      sub.decision = "";
      sub.summary = parsed.error;
      votes.push_back(VoteValue::abstain);
      if (!outcome.parse_failure) {
        outcome.parse_failure = true;
        outcome.parse_error = "voter '" + cfg.voters[i] + "': " + parsed.error;
      }
    }
    auto wit = cfg.weights.find(cfg.voters[i]);
    weights.push_back(wit == cfg.weights.end() ? 1.0 : wit->second);
    outcome.sub_events.push_back(std::move(sub));
  }
  outcome.response_text = joined_text;
  if (!outcome.parse_failure) {
    TallyOutcome t = tally(votes, cfg.rule, cfg.threshold, &weights);
    outcome.raw_decision =
        t == TallyOutcome::approve ? model::decisions::approve : model::decisions::reject;
    outcome.decision = outcome.raw_decision;
  }
  return outcome;
}

agents::StageOutcome run_cluster(const model::GovernanceSpec& spec, const model::Stage& stage,
                                 std::vector<agents::ContextBundle> bundles,
                                 agents::Backend& backend) {
  const model::ClusterConfig& cfg = *stage.cluster;
  agents::StageOutcome outcome;
  outcome.stage_id = stage.id;
  outcome.kind = stage.kind;
  outcome.agents = cfg.members;
  (void)spec;

  std::vector<agents::DispatchInfo> infos;
  for (size_t i = 0; i < cfg.members.size(); ++i) {
    agents::DispatchInfo info;
    info.stage_id = stage.id;
    info.agent_id = cfg.members[i];
    info.kind = stage.kind;
    info.member_index = static_cast<int>(i);
    infos.push_back(info);
  }
  std::vector<agents::AgentResponse> responses = backend.chat_many(bundles, infos);

  std::map<std::string, bool> member_ok;
  std::string joined_text;
  for (size_t i = 0; i < responses.size(); ++i) {
    const agents::AgentResponse& resp = responses[i];
    outcome.prompt_tokens += resp.prompt_tokens;
    outcome.completion_tokens += resp.completion_tokens;
    if (!joined_text.empty()) joined_text += "\n";
    joined_text += resp.text;

    agents::SubEvent sub;
    sub.agent = cfg.members[i];
    sub.prompt_tokens = resp.prompt_tokens;
    sub.completion_tokens = resp.completion_tokens;

    agents::ParsedDecision parsed = agents::parse_decision(resp, stage);
    bool ok = parsed.ok && parsed.token == model::decisions::success;
    sub.decision = ok ? model::decisions::success : model::decisions::failure;
    sub.summary = parsed.ok ? first_line(resp.text) : parsed.error;
    member_ok[cfg.members[i]] = ok;
    outcome.sub_events.push_back(std::move(sub));
  }
  outcome.response_text = joined_text;

  bool all_required = true;
  for (const std::string& r : cfg.required) {
    if (!member_ok[r]) all_required = false;
  }
  outcome.raw_decision =
      all_required ? model::decisions::success : model::decisions::failure;
  outcome.decision = outcome.raw_decision;
  return outcome;
}

bool resolve_decision(const agents::StageOutcome& outcome, const model::Stage& stage,
                      std::string& next_stage, std::string& error) {
  if (!outcome.forced_next.empty()) {
    next_stage = outcome.forced_next;
    return true;
  }
  if (outcome.parse_failure) {
    error = outcome.parse_error.empty() ? "unresolved decision" : outcome.parse_error;
    return false;
  }
  auto it = stage.transitions.find(outcome.decision);
  if (it == stage.transitions.end()) {
    error = "decision '" + outcome.decision + "' has no transition at stage '" + stage.id + "'";
    return false;
  }
  next_stage = it->second;
  return true;
}

bool detect_gate_loop_failure(const TaskState& state) {
  if (state.status != RunStatus::budget_exhausted) return false;
  return std::any_of(state.history.begin(), state.history.end(), [](const Event& e) {
    return e.kind == model::StageKind::gate && e.raw_decision == model::decisions::reject;
  });
}

TaskState run(const model::GovernanceSpec& spec, const TaskInput& task,
              const RuntimeConfig& config, agents::Backend& backend) {
  const auto t0 = std::chrono::steady_clock::now();

  TaskState state;
  state.task_id = task.id;
  state.instructions = task.instructions;
  state.current_stage = spec.entry_stage;

  features::FeatureEngine engine(spec, &backend, &config);
  const int budget = config.budget > 0 ? config.budget : spec.default_budget;
  agents::PromptOptions popts;
  popts.history_window = config.history_window;

  auto push_event = [&](Event ev) {
    state.history.push_back(std::move(ev));
    ++state.dispatched_steps;
  };

  for (int step = 1; step <= budget; ++step) {
    const model::Stage* stage = spec.find_stage(state.current_stage);
    if (!stage) {
      state.status = RunStatus::error;
      state.error_message = "run reached unknown stage '" + state.current_stage + "'";
      break;
    }
    if (stage->kind == model::StageKind::terminal) {
      state.status = RunStatus::done;
      break;
    }

    // Assemble one bundle per dispatched agent.
    std::vector<agents::ContextBundle> bundles;
    std::vector<agents::DispatchInfo> infos;
    std::vector<std::string> roster;
    if (stage->kind == model::StageKind::cluster) {
      roster = stage->cluster->members;
    } else if (stage->kind == model::StageKind::consensus) {
      roster = stage->consensus->voters;
    } else {
      roster = {stage->agent};
    }
    bool assembled = true;
    for (size_t i = 0; i < roster.size(); ++i) {
      const model::Agent* agent = spec.find_agent(roster[i]);
      if (!agent) {
        assembled = false;
        break;
      }
      agents::ContextBundle b = assemble_prompt(state, *stage, spec, state.shared, *agent, popts);
      if (stage->kind == model::StageKind::single || stage->kind == model::StageKind::gate) {
        b.tool_schemas = task.tools;
      }
      bundles.push_back(std::move(b));
      agents::DispatchInfo info;
      info.stage_id = stage->id;
      info.agent_id = roster[i];
      info.kind = stage->kind;
      info.member_index = roster.size() > 1 ? static_cast<int>(i) : -1;
      infos.push_back(info);
    }
    if (!assembled) {
      state.status = RunStatus::error;
      state.error_message = "stage '" + stage->id + "' references an unknown agent";
      break;
    }

    engine.before_stage(state, *stage, bundles);
    if (engine.abort_requested()) {
      state.status = RunStatus::error;
      state.error_message = "operator abort at stage '" + stage->id + "'";
      break;
    }

    agents::StageOutcome outcome;
    outcome.stage_id = stage->id;
    outcome.kind = stage->kind;
    bool backend_failed = false;
    try {
      switch (stage->kind) {
        case model::StageKind::cluster:
          outcome = run_cluster(spec, *stage, std::move(bundles), backend);
          break;
        case model::StageKind::consensus:
          outcome = run_consensus(spec, *stage, std::move(bundles), backend);
          break;
        default: {
          agents::ContextBundle& bundle = bundles[0];
          agents::AgentResponse resp;
          int rounds = 0;
          for (;;) {
            resp = backend.chat(bundle, infos[0]);
            outcome.prompt_tokens += resp.prompt_tokens;
            outcome.completion_tokens += resp.completion_tokens;
            if (resp.tool_calls.empty() || !task.tool_exec ||
                rounds >= config.max_tool_rounds) {
              break;
            }
            ++rounds;
            for (const agents::ToolCall& call : resp.tool_calls) {
              std::string result;
              try {
                result = task.tool_exec(call);
              } catch (const std::exception& e) {
                result = std::string("error: ") + e.what();
              }
              bundle.stage_context +=
                  "tool " + call.name + " " + call.arguments.dump() + " -> " + result + "\n";
            }
          }
          outcome.agents = {stage->agent};
          outcome.response_text = resp.text;
          agents::ParsedDecision parsed = agents::parse_decision(resp, *stage);
          if (parsed.ok) {
            outcome.raw_decision = parsed.token;
            outcome.decision = parsed.token;
          } else {
            outcome.parse_failure = true;
            outcome.parse_error = parsed.error;
          }
          break;
        }
      }
    } catch (const std::exception& e) {
      backend_failed = true;
      outcome.agents = roster;
      outcome.parse_failure = true;
      outcome.parse_error = std::string("backend failure: ") + e.what();
    }

    state.prompt_tokens += outcome.prompt_tokens;
    state.completion_tokens += outcome.completion_tokens;

    if (backend_failed) {
      Event ev = make_event(step, outcome);
      ev.summary = outcome.parse_error;
      push_event(std::move(ev));
      state.status = RunStatus::error;
      state.error_message = outcome.parse_error;
      break;
    }

    engine.after_stage(state, *stage, outcome);

    std::string next, error;
    if (!resolve_decision(outcome, *stage, next, error)) {
      Event ev = make_event(step, outcome);
      ev.summary = error;
      push_event(std::move(ev));
      state.status = RunStatus::error;
      state.error_message = error;
      break;
    }
    Event ev = make_event(step, outcome);
    ev.next_stage = next;
    push_event(std::move(ev));
    state.current_stage = next;
  }

  if (state.status == RunStatus::running) state.status = RunStatus::budget_exhausted;
  state.wall_clock = std::chrono::duration_cast<std::chrono::milliseconds>(
      std::chrono::steady_clock::now() - t0);
  return state;
}

std::string trace_filename(const std::string& spec_id, const std::string& task_id, uint64_t seed) {
  return spec_id + "__" + task_id + "__" + std::to_string(seed) + ".trace.jsonl";
}

namespace {

nlohmann::json event_json(const Event& e) {
  nlohmann::json j;
  j["type"] = "event";
  j["step"] = e.step;
  j["stage"] = e.stage_id;
  j["kind"] = model::to_string(e.kind);
  j["agents"] = e.agents;
  j["raw_decision"] = e.raw_decision;
  j["decision"] = e.decision;
  if (!e.override_source.empty()) j["override_source"] = e.override_source;
  if (!e.overrides.empty()) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& [feature, token] : e.overrides) {
      arr.push_back({{"feature", feature}, {"decision", token}});
    }
    j["overrides"] = arr;
  }
  j["next"] = e.next_stage;
  j["prompt_tokens"] = e.prompt_tokens;
  j["completion_tokens"] = e.completion_tokens;
  j["summary"] = e.summary;
  if (!e.sub_events.empty()) {
    nlohmann::json arr = nlohmann::json::array();
    for (const agents::SubEvent& s : e.sub_events) {
      arr.push_back({{"agent", s.agent},
                     {"decision", s.decision},
                     {"prompt_tokens", s.prompt_tokens},
                     {"completion_tokens", s.completion_tokens},
                     {"summary", s.summary}});
    }
    j["sub_events"] = arr;
  }
  return j;
}

}  // namespace

void write_trace(std::ostream& out, const model::GovernanceSpec& spec, const TaskInput& task,
                 uint64_t seed, const TaskState& state) {
  nlohmann::json header;
  header["type"] = "run_header";
  header["spec"] = spec.id;
  header["pattern"] = model::to_string(spec.pattern);
  header["task"] = task.id;
  header["seed"] = seed;
  header["entry"] = spec.entry_stage;
  out << header.dump() << "\n";

  size_t note_idx = 0;
  auto flush_notes = [&](int up_to_step) {
    while (note_idx < state.notes.size() && state.notes[note_idx].after_step <= up_to_step) {
      const MonitorNote& n = state.notes[note_idx];
      nlohmann::json j;
      j["type"] = "monitor_note";
      j["after_step"] = n.after_step;
      j["agent"] = n.agent;
      j["text"] = n.text;
      j["prompt_tokens"] = n.prompt_tokens;
      j["completion_tokens"] = n.completion_tokens;
      out << j.dump() << "\n";
      ++note_idx;
    }
  };

  for (const Event& e : state.history) {
    out << event_json(e).dump() << "\n";
    flush_notes(e.step);
  }
  flush_notes(1 << 30);

  nlohmann::json summary;
  summary["type"] = "summary";
  summary["spec"] = spec.id;
  summary["task"] = task.id;
  summary["seed"] = seed;
  summary["status"] = to_string(state.status);
  summary["final_stage"] = state.current_stage;
  summary["dispatched_steps"] = state.dispatched_steps;
  summary["prompt_tokens"] = state.prompt_tokens;
  summary["completion_tokens"] = state.completion_tokens;
  summary["gate_loop_failure"] = detect_gate_loop_failure(state);
  if (!state.error_message.empty()) summary["error"] = state.error_message;
  out << summary.dump() << "\n";
}

}  // namespace arena::runtime
