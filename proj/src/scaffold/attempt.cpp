#include <algorithm>

#include "kolb/scaffold/scaffold.hpp"
#include "kolb/util/error.hpp"
#include "kolb/util/hash.hpp"

namespace kolb::scaffold {

using core::ActionKind;
using core::Feedback;
using core::InternalState;

double ScaffoldEnv::time_limit() const { return std::min(exec_time_cap, budget.remaining()); }

exec::ExecResult ScaffoldEnv::run(const std::string& code, const std::map<std::string, std::string>& env) {
  exec::ExecRequest req;
  req.code = code;
  req.working_dir = workspace.root;
  req.interpreter = interpreter;
  req.time_limit = time_limit();
  req.env = exec_env;
  for (const auto& [k, v] : env) req.env[k] = v;
  if (auto it = env.find("KOLB_SCRIPT"); it != env.end()) req.script_name = it->second;
  if (!(req.time_limit > 0.0)) throw EpisodeError("runtime budget exhausted");
  exec::ExecResult r = executor.execute(req);
  budget.charge(r.duration);
  return r;
}

std::optional<Modalities> modalities_from_state(const InternalState& state) {
  const auto& abs = state.abstractions();
  for (auto it = abs.rbegin(); it != abs.rend(); ++it) {
    if (it->source != kModalitiesSource) continue;
    try {
      return Modalities::from_json(Json::parse(it->text));
    } catch (const std::exception&) {
      return std::nullopt;
    }
  }
  return std::nullopt;
}

namespace {

void traced(InternalState& s, ScaffoldEnv& env, const std::string& stage, const std::string& note,
            const std::function<void(InternalState&)>& fn) {
  InternalState before = env.trace ? s : InternalState();
  fn(s);
  if (env.trace) env.trace->append_update(stage, before, s, note);
}

std::optional<std::string> validate_understanding(const Json& j) {
  for (const char* k : {"task_summary", "data_summary"}) {
    if (!j.contains(k) || !j.at(k).is_string() || j.at(k).get<std::string>().empty()) {
      return std::string("'") + k + "' must be a non-empty string";
    }
  }
  return std::nullopt;
}

std::optional<std::string> validate_modalities(const Json& j) {
  try {
    if (!Modalities::from_json(j).any()) return std::string("at least one modality must be true");
  } catch (const ConfigError& e) {
    return std::string(e.what());
  }
  return std::nullopt;
}

std::string stage_title(const StageSpec& stage) {
  std::string t = stage.stage_id;
  std::replace(t.begin(), t.end(), '_', ' ');
  return t;
}

Feedback default_environment(const StageSpec& stage, const core::ActionResult& action, ScaffoldEnv& env) {
  if (stage.action_kind != ActionKind::emit_code) return Feedback::structured(true, action.content);
  const std::string code = action.parsed && action.parsed->is_string() ? action.parsed->get<std::string>() : "";
  if (!stage.code_file.empty()) write_text_file(env.workspace.path(stage.code_file), code);
  std::string log;
  if (stage.execute_code) {
    if (env.budget.exhausted()) return Feedback::exec_log(false, "runtime budget exhausted");
    std::map<std::string, std::string> extra_env;
    if (!stage.code_file.empty()) extra_env["KOLB_SCRIPT"] = stage.code_file;
    exec::ExecResult r = env.run(code, extra_env);
    if (!r.ok()) {
      std::string head = r.timed_out ? "Execution timed out after " + format_double(r.duration) + "s"
                                     : "Execution failed with exit status " + std::to_string(r.exit_status);
      return Feedback::exec_log(false, head + "\n" + r.log());
    }
    log = r.log();
  }
  UnitTestRequest ut;
  ut.test_id = *stage.unit_test_id;
  ut.workspace = &env.workspace;
  ut.executor = &env.executor;
  ut.interpreter = env.interpreter;
  ut.time_limit = env.time_limit();
  if (!(ut.time_limit > 0.0)) return Feedback::unit_test(false, "runtime budget exhausted before the unit test");
  UnitTestResult res = run_unit_test(ut);
  env.budget.charge(res.exec_duration);
  if (res.feedback.success() || log.empty()) return res.feedback;
  return Feedback::unit_test(false, res.feedback.body() + "\n\nScript output:\n" + log);
}

void default_success(const StageSpec& stage, const core::ActionResult& action, InternalState& s, ScaffoldEnv& env) {
  switch (stage.name) {
    case StageKind::competition_understanding: {
      const Json& j = *action.parsed;
      s.add_abstraction({"task_summary", j.at("task_summary").get<std::string>()});
      s.add_abstraction({"data_summary", j.at("data_summary").get<std::string>()});
      write_text_file(env.workspace.path("summary_task.md"), j.at("task_summary").get<std::string>() + "\n");
      write_text_file(env.workspace.path("summary_data.md"), j.at("data_summary").get<std::string>() + "\n");
      break;
    }
    case StageKind::modality_identification: {
      Modalities m = Modalities::from_json(*action.parsed);
      s.add_abstraction({kModalitiesSource, canonical_dump(m.to_json())});
      if (auto it = s.scratch().find("setup_plan"); it != s.scratch().end()) {
        s.add_abstraction({"setup_plan", it->second});
        write_text_file(env.workspace.path("summary_plan.md"), it->second + "\n");
      }
      break;
    }
    case StageKind::create_solution_summary:
      s.add_abstraction({kSolutionSummarySource, trim(action.content)});
      break;
    default:
      break;
  }
}

}  // namespace

AttemptOutput attempt_stage(const StageSpec& stage, const InternalState& state, ScaffoldEnv& env,
                            const StageHooks& hooks) {
  if (stage.retry_budget < 1) throw ConfigError("stage " + stage.stage_id + ": retry_budget must be >= 1");
  const double used_at_start = env.budget.used();
  AttemptOutput out{StageOutcome{stage.stage_id, StageStatus::failed, 0, 0.0}, state, std::nullopt};
  InternalState& s = out.state;

  llm::SlotMap extra = env.extra;
  extra["stage_id"] = stage.stage_id;
  extra["stage_name"] = stage_title(stage);
  extra["stage_instructions"] = stage.instructions;
  extra["data_dir"] = env.workspace.data_dir;
  if (!extra.count("data_listing")) extra["data_listing"] = env.workspace.data_listing();
  core::CycleContext ctx{env.gateway, env.templates, extra, stage.stage_id};

  core::ActionRequest req = core::make_action_request(stage.action_kind, stage.action_template);
  if (stage.name == StageKind::competition_understanding) req.parse.validate = validate_understanding;
  if (stage.name == StageKind::modality_identification) req.parse.validate = validate_modalities;

  traced(s, env, stage.stage_id, "stage entry", [](InternalState& st) {
    for (const char* k : {"stage_plan", "stage_identify", "error_analysis"}) {
      if (!st.scratch().count(k)) st.set_scratch(k, "none");
    }
  });

  core::EnvCallback callback = [&](const core::ActionResult& a) {
    return hooks.environment ? hooks.environment(stage, a, env) : default_environment(stage, a, env);
  };

  bool passed = false;
  for (int attempt = 1; attempt <= stage.retry_budget && !passed; ++attempt) {
    out.outcome.attempts = attempt;
    if (env.budget.exhausted()) {
      out.last_feedback = Feedback::exec_log(false, "runtime budget exhausted before attempt " + std::to_string(attempt));
      continue;
    }
    std::vector<core::IntrinsicStep> chain;
    if (attempt > 1 && stage.action_kind == ActionKind::emit_code) chain = env.error_chain;
    chain.insert(chain.end(), stage.intrinsic_chain.begin(), stage.intrinsic_chain.end());
    try {
      core::CycleResult r = core::run_cycle(s, chain, req, callback, ctx, env.trace);
      s = std::move(r.state);
      out.last_feedback = r.feedback;
      if (r.feedback.success()) {
        traced(s, env, stage.stage_id, "stage success update", [&](InternalState& st) {
          default_success(stage, r.action, st, env);
          if (hooks.on_success) hooks.on_success(stage, r.action, st, env);
        });
        passed = true;
      }
    } catch (const FormatError& e) {
      Feedback fb = Feedback::structured(false, std::string("malformed response: ") + e.what());
      out.last_feedback = fb;
      traced(s, env, stage.stage_id, "format failure", [&](InternalState& st) {
        core::HistoryEntry h;
        h.stage = stage.stage_id;
        h.action_kind = stage.action_kind;
        h.action_digest = sha256_hex("");
        h.feedback = fb;
        h.feedback_digest = sha256_hex(canonical_dump(fb.to_json()));
        st.append_history(std::move(h));
      });
    }
  }
  out.outcome.status = passed ? StageStatus::success : StageStatus::failed;
  out.outcome.wall_time = env.budget.used() - used_at_start;
  traced(s, env, stage.stage_id, "stage transition", [](InternalState& st) { st.clear_scratch(); });
  return out;
}

}  // namespace kolb::scaffold
