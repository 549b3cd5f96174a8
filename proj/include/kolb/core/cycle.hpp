#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>

#include "kolb/core/state.hpp"
#include "kolb/core/trace.hpp"
#include "kolb/llm/gateway.hpp"
#include "kolb/llm/parse.hpp"
#include "kolb/llm/prompt_template.hpp"

namespace kolb::core {

// Provider handle plus stage-level context slots shared by every prompt in
// a cycle.
struct CycleContext {
  llm::Gateway& gateway;
  const llm::TemplateCatalog& templates;
  llm::SlotMap extra;
  std::string stage;  // recorded into history and the trace
};

struct ActionRequest {
  ActionKind kind = ActionKind::emit_text;
  std::string template_id;
  llm::ParseSpec parse;  // defaulted from `kind` by make_action_request
};

ActionRequest make_action_request(ActionKind kind, std::string template_id);

// Slots every template can reference: task, summaries, history, last_error,
// last_code and each scratch key. `extra` wins on collisions.
llm::SlotMap build_context(const InternalState& state, const llm::SlotMap& extra);

// Runs the chain in order; step k sees the scratch written by steps < k.
// History and step_index are left untouched.
InternalState compose_intrinsics(std::span<const IntrinsicStep> steps, const InternalState& state,
                                 const CycleContext& ctx);

// Renders, completes and parses one extrinsic action. Malformed output is
// reprompted with the formatting error appended (FormatError when the
// parse budget is spent).
ActionResult act(const InternalState& state, const ActionRequest& request, const CycleContext& ctx);

// Appends (action, feedback) to history and advances the step counter.
InternalState integrate_feedback(const InternalState& state, const ActionResult& action, const Feedback& fb,
                                 const std::string& stage = {});

using EnvCallback = std::function<Feedback(const ActionResult&)>;

struct CycleResult {
  InternalState state;
  Feedback feedback;
  ActionResult action;
};

// compose_intrinsics -> act -> environment -> integrate_feedback. A
// TimeoutError thrown by the environment becomes a failed exec_log
// feedback; other errors propagate after a partial record is traced.
CycleResult run_cycle(const InternalState& state, std::span<const IntrinsicStep> steps, const ActionRequest& request,
                      const EnvCallback& env, const CycleContext& ctx, EpisodeTrace* trace = nullptr);

}  // namespace kolb::core
