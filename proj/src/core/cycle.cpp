#include "kolb/core/cycle.hpp"

#include "kolb/util/error.hpp"
#include "kolb/util/hash.hpp"

namespace kolb::core {

namespace {

constexpr std::size_t kHistoryWindow = 3;

std::vector<const HistoryEntry*> stage_history(const InternalState& state, const std::string& stage) {
  std::vector<const HistoryEntry*> out;
  for (const auto& h : state.history()) {
    if (stage.empty() || h.stage == stage) out.push_back(&h);
  }
  return out;
}

std::string render_history(const std::vector<const HistoryEntry*>& entries) {
  if (entries.empty()) return "none";
  std::string out;
  std::size_t start = entries.size() > kHistoryWindow ? entries.size() - kHistoryWindow : 0;
  for (std::size_t i = start; i < entries.size(); ++i) {
    const auto& h = *entries[i];
    out += "### Attempt " + std::to_string(i + 1) + " (" + (h.success() ? "passed" : "failed") + ")\n";
    if (h.action_kind == ActionKind::emit_code) {
      out += "```python\n" + h.action_content + "\n```\n";
    } else {
      out += h.action_content + "\n";
    }
    out += "Feedback (" + to_string(h.feedback.kind()) + "):\n" + h.feedback.body() + "\n";
  }
  return out;
}

std::string render_summaries(const InternalState& state) {
  std::string out;
  for (const auto& a : state.abstractions()) {
    out += "## " + a.source + "\n" + a.text + "\n\n";
  }
  return out.empty() ? "none" : out;
}

}  // namespace

ActionRequest make_action_request(ActionKind kind, std::string template_id) {
  ActionRequest r;
  r.kind = kind;
  r.template_id = std::move(template_id);
  switch (kind) {
    case ActionKind::emit_code:
      r.parse.kind = llm::ParseKind::fenced_code_block;
      break;
    case ActionKind::emit_structured:
      r.parse.kind = llm::ParseKind::structured_mapping;
      break;
    case ActionKind::emit_text:
      r.parse.kind = llm::ParseKind::raw_text;
      break;
    case ActionKind::select_subset:
      r.parse.kind = llm::ParseKind::structured_mapping;
      r.parse.required_keys = {"selected"};
      break;
  }
  return r;
}

llm::SlotMap build_context(const InternalState& state, const llm::SlotMap& extra) {
  llm::SlotMap slots;
  const std::string stage = extra.count("stage_id") ? extra.at("stage_id") : std::string{};
  auto entries = stage_history(state, stage);
  slots["task"] = state.task_spec().description;
  for (const auto& [k, v] : state.task_spec().metadata) slots["meta_" + k] = v;
  slots["summaries"] = render_summaries(state);
  slots["history"] = render_history(entries);
  slots["last_error"] = "none";
  slots["last_code"] = "none";
  for (auto it = entries.rbegin(); it != entries.rend(); ++it) {
    if (!(*it)->success()) {
      slots["last_error"] = (*it)->feedback.body();
      if ((*it)->action_kind == ActionKind::emit_code) slots["last_code"] = (*it)->action_content;
      break;
    }
  }
  for (const auto& [k, v] : state.scratch()) slots[k] = v;
  for (const auto& [k, v] : extra) slots[k] = v;
  return slots;
}

InternalState compose_intrinsics(std::span<const IntrinsicStep> steps, const InternalState& state,
                                 const CycleContext& ctx) {
  if (steps.empty()) throw ConfigError("compose_intrinsics: empty intrinsic chain");
  for (const auto& step : steps) {
    if (step.output_slot.empty()) throw ConfigError("intrinsic step " + step.name + " has no output slot");
    ctx.templates.get(step.prompt_template_id);
  }
  InternalState next = state;
  for (const auto& step : steps) {
    const auto& tmpl = ctx.templates.get(step.prompt_template_id);
    std::string prompt = llm::render_prompt(tmpl, build_context(next, ctx.extra));
    next.set_scratch(step.output_slot, ctx.gateway.complete(prompt, tmpl.id()));
  }
  return next;
}

ActionResult act(const InternalState& state, const ActionRequest& request, const CycleContext& ctx) {
  const auto& tmpl = ctx.templates.get(request.template_id);
  const std::string prompt = llm::render_prompt(tmpl, build_context(state, ctx.extra));
  std::string raw = ctx.gateway.complete(prompt, tmpl.id());
  auto reprompt = [&](const std::string& err) {
    std::string retry = prompt +
                        "\n\n# Formatting error\nYour previous response could not be used: " + err +
                        ". Reply again and follow the required output format exactly.";
    return ctx.gateway.complete(retry, tmpl.id());
  };
  auto parsed = llm::parse_structured(raw, request.parse, reprompt);
  ActionResult result;
  result.kind = request.kind;
  result.content = parsed.raw;
  result.attempts = parsed.attempts;
  if (request.kind != ActionKind::emit_text) result.parsed = parsed.value;
  return result;
}

InternalState integrate_feedback(const InternalState& state, const ActionResult& action, const Feedback& fb,
                                 const std::string& stage) {
  InternalState next = state;
  HistoryEntry entry;
  entry.stage = stage;
  entry.action_kind = action.kind;
  entry.action_content = (action.kind == ActionKind::emit_code && action.parsed && action.parsed->is_string())
                             ? action.parsed->get<std::string>()
                             : action.content;
  entry.action_digest = sha256_hex(action.content);
  entry.feedback = fb;
  entry.feedback_digest = sha256_hex(canonical_dump(fb.to_json()));
  next.append_history(std::move(entry));
  return next;
}

CycleResult run_cycle(const InternalState& state, std::span<const IntrinsicStep> steps, const ActionRequest& request,
                      const EnvCallback& env, const CycleContext& ctx, EpisodeTrace* trace) {
  CycleRecord record;
  record.step = state.step_index();
  record.stage = ctx.stage;
  record.before_digest = state.digest();
  record.action_kind = request.kind;

  auto fail_record = [&](const std::exception& e) {
    if (!trace) return;
    record.error = e.what();
    trace->append(record);
  };

  try {
    InternalState refined = steps.empty() ? state : compose_intrinsics(steps, state, ctx);
    for (const auto& step : steps) record.intrinsic_outputs[step.output_slot] = refined.scratch().at(step.output_slot);
    ActionResult action = act(refined, request, ctx);
    record.action_content = action.content;

    std::optional<Feedback> fb;
    try {
      fb = env(action);
    } catch (const TimeoutError& e) {
      fb = Feedback::exec_log(false, std::string("timeout: ") + e.what());
    }
    InternalState next = integrate_feedback(refined, action, *fb, ctx.stage);
    record.feedback = *fb;
    record.after_digest = next.digest();
    if (trace) trace->append(record);
    return CycleResult{std::move(next), *fb, std::move(action)};
  } catch (const std::exception& e) {
    fail_record(e);
    throw;
  }
}

}  // namespace kolb::core
