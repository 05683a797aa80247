#include "arena/features.hpp"

#include <algorithm>
#include <iostream>

#include "arena/runtime.hpp"

namespace arena::features {

namespace {

std::string first_line(const std::string& text) {
  size_t pos = 0;
  while (pos < text.size()) {
    size_t end = text.find('\n', pos);
    std::string line = text.substr(pos, end == std::string::npos ? std::string::npos : end - pos);
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) return line;
    if (end == std::string::npos) break;
    pos = end + 1;
  }
  return "";
}

agents::ContextBundle monitor_bundle(const model::Agent& monitor, const model::Stage& stage,
                                     const agents::StageOutcome& outcome, model::MonitorMode mode) {
  agents::ContextBundle bundle;
  bundle.soul_prompt = monitor.soul_prompt;
  std::string ctx = "instructions: observe stage outcomes and flag governance anomalies\n";
  ctx += "last event:\n  " + stage.id + " (" + model::to_string(stage.kind) + ") -> " +
         (outcome.parse_failure ? std::string("<unparsed>") : outcome.raw_decision);
  std::string head = first_line(outcome.response_text);
  if (!head.empty()) ctx += ": " + head;
  ctx += "\n";
  bundle.stage_context = ctx;
  if (mode == model::MonitorMode::warn) {
    bundle.format_instructions =
        "If the outcome looks anomalous, reply with one short warning line; "
        "otherwise reply with an empty message.";
  } else {
    std::string tokens;
    for (const std::string& t : stage.transition_tokens()) tokens += " " + t;
    bundle.format_instructions =
        "To override the stage decision, conclude with a line 'decision: <token>' "
        "choosing one of:" + tokens + ". Otherwise reply with an empty message.";
  }
  return bundle;
}

}  // namespace

FeatureEngine::FeatureEngine(const model::GovernanceSpec& spec, agents::Backend* backend,
                             const runtime::RuntimeConfig* config)
    : spec_(spec), backend_(backend), config_(config) {}

bool FeatureEngine::active(model::FeatureKind kind) const {
  return std::any_of(spec_.features.begin(), spec_.features.end(),
                     [&](const model::FeatureConfig& f) { return f.kind == kind; });
}

bool FeatureEngine::confirm(const model::Stage& stage) {
  if (config_ && config_->confirm_fn) return config_->confirm_fn(stage);
  if (config_ && config_->interactive) {
    std::cerr << "confirm stage '" << stage.id << "'? [y/N] " << std::flush;
    std::string answer;
    if (!std::getline(std::cin, answer)) return false;
    return !answer.empty() && (answer[0] == 'y' || answer[0] == 'Y');
  }
  return !config_ || config_->confirm_default == "proceed";
}

void FeatureEngine::before_stage(runtime::TaskState& state, const model::Stage& stage,
                                 std::vector<agents::ContextBundle>& bundles) {
  (void)state;
  for (const model::FeatureConfig& f : spec_.features) {
    switch (f.kind) {
      case model::FeatureKind::monitor:
        if (!pending_warning_.empty()) {
          for (agents::ContextBundle& b : bundles) {
            b.stage_context = pending_warning_ + "\n" + b.stage_context;
          }
          pending_warning_.clear();
        }
        break;
      case model::FeatureKind::system_protocol:
        for (agents::ContextBundle& b : bundles) {
          if (!b.format_instructions.empty()) b.format_instructions += "\n";
          b.format_instructions += "protocol: " + f.protocol_text;
        }
        break;
      case model::FeatureKind::human_confirmation: {
        bool designated = f.confirm_stages.empty()
                              ? stage.kind == model::StageKind::gate
                              : std::find(f.confirm_stages.begin(), f.confirm_stages.end(),
                                          stage.id) != f.confirm_stages.end();
        if (designated && !confirm(stage)) abort_requested_ = true;
        break;
      }
      default:
        break;
    }
  }
}

void FeatureEngine::run_monitor(runtime::TaskState& state, const model::Stage& stage,
                                agents::StageOutcome& outcome, const model::FeatureConfig& cfg) {
  const model::Agent* monitor = spec_.find_agent(cfg.monitor_agent);
  if (!monitor || !backend_) return;

  agents::ContextBundle bundle = monitor_bundle(*monitor, stage, outcome, cfg.monitor_mode);
  agents::DispatchInfo info;
  info.stage_id = stage.id;
  info.agent_id = monitor->id;
  info.kind = stage.kind;
  info.purpose = agents::DispatchPurpose::monitor;
  agents::AgentResponse response = backend_->chat(bundle, info);

  runtime::MonitorNote note;
  note.after_step = static_cast<int>(state.history.size()) + 1;  // the in-flight step
  note.agent = monitor->id;
  note.prompt_tokens = response.prompt_tokens;
  note.completion_tokens = response.completion_tokens;

  std::string body = first_line(response.text);
  if (cfg.monitor_mode == model::MonitorMode::warn) {
    if (!body.empty()) pending_warning_ = body;
    note.text = body;
  } else {
    // Only an explicit decision line counts as an override; the bare
    // single-edge default would otherwise fire on every silent reply.
    if (agents::find_decision_line(response.text)) {
      agents::ParsedDecision parsed = agents::parse_decision(response, stage);
      if (parsed.ok && (parsed.token != outcome.decision || outcome.parse_failure)) {
        outcome.decision = parsed.token;
        outcome.parse_failure = false;
        outcome.overrides.emplace_back("monitor", parsed.token);
        outcome.override_source = "monitor";
      }
    }
    note.text = body;
  }
  state.notes.push_back(std::move(note));
  state.prompt_tokens += response.prompt_tokens;
  state.completion_tokens += response.completion_tokens;
}

void FeatureEngine::after_stage(runtime::TaskState& state, const model::Stage& stage,
                                agents::StageOutcome& outcome) {
  for (const model::FeatureConfig& f : spec_.features) {
    switch (f.kind) {
      case model::FeatureKind::monitor:
        run_monitor(state, stage, outcome, f);
        break;
      case model::FeatureKind::shared_state:
        for (const auto& [key, value] : agents::find_set_directives(outcome.response_text)) {
          state.shared.values[key] = value;
        }
        break;
      case model::FeatureKind::loop_guard: {
        if (stage.kind != model::StageKind::gate) break;
        int& count = guard_.consecutive_rejects[stage.id];
        if (outcome.raw_decision == model::decisions::reject) {
          ++count;
          if (count >= f.max_consecutive_rejects) {
            outcome.decision = model::decisions::approve;
            outcome.overrides.emplace_back("loop_guard", model::decisions::approve);
            outcome.override_source = "loop_guard";
            count = 0;
          }
        } else {
          count = 0;
        }
        break;
      }
      case model::FeatureKind::emergency_handler:
        if (outcome.parse_failure) {
          outcome.forced_next = f.fallback_stage;
          outcome.decision = "emergency";
          outcome.overrides.emplace_back("emergency_handler", "emergency");
          outcome.override_source = "emergency_handler";
          outcome.parse_failure = false;
        }
        break;
      default:
        break;
    }
  }
}

}  // namespace arena::features
