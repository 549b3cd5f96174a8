#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kolb/core/cycle.hpp"
#include "kolb/exec/sandbox.hpp"
#include "kolb/llm/gateway.hpp"
#include "kolb/llm/prompt_template.hpp"
#include "kolb/scaffold/stage.hpp"
#include "kolb/scaffold/unit_tests.hpp"
#include "kolb/scaffold/workspace.hpp"

namespace kolb::scaffold {

// Seconds of execution time a phase may consume. Only executor durations
// are charged, so the figure is reproducible under simulation.
class RuntimeBudget {
 public:
  explicit RuntimeBudget(double total = 0.0) : total_(total) {}
  double total() const { return total_; }
  double used() const { return used_; }
  double remaining() const { return used_ >= total_ ? 0.0 : total_ - used_; }
  bool exhausted() const { return remaining() <= 0.0; }
  void charge(double seconds) { used_ += seconds > 0.0 ? seconds : 0.0; }

 private:
  double total_;
  double used_ = 0.0;
};

struct ScaffoldEnv {
  ScaffoldEnv(llm::Gateway& gw, const llm::TemplateCatalog& tc, exec::Executor& ex, const Workspace& ws,
              RuntimeBudget& rb, core::EpisodeTrace* tr = nullptr)
      : gateway(gw), templates(tc), executor(ex), workspace(ws), budget(rb), trace(tr) {}

  llm::Gateway& gateway;
  const llm::TemplateCatalog& templates;
  exec::Executor& executor;
  const Workspace& workspace;
  RuntimeBudget& budget;
  core::EpisodeTrace* trace = nullptr;
  std::vector<std::string> interpreter{"python3"};
  double exec_time_cap = 36000.0;  // per execution, before the budget clamp
  std::map<std::string, std::string> exec_env;
  llm::SlotMap extra;  // competition-level prompt slots
  // Prepended to the chain of a code stage on every retry.
  std::vector<core::IntrinsicStep> error_chain{
      {"error_code", core::IntrinsicKind::think, "analyse_error", "error_analysis"}};

  // Time limit for the next execution.
  double time_limit() const;
  // Runs code in the workspace and charges its duration.
  exec::ExecResult run(const std::string& code, const std::map<std::string, std::string>& env = {});
};

struct StageHooks {
  // Replaces the default environment for the stage's action.
  std::function<core::Feedback(const StageSpec&, const core::ActionResult&, ScaffoldEnv&)> environment;
  // Runs after the default success update of a passing attempt.
  std::function<void(const StageSpec&, const core::ActionResult&, core::InternalState&, ScaffoldEnv&)> on_success;
};
using HookTable = std::map<std::string, StageHooks>;  // by stage id

struct AttemptOutput {
  StageOutcome outcome;
  core::InternalState state;
  std::optional<core::Feedback> last_feedback;
};

// Up to retry_budget Kolb cycles. Every failing attempt leaves its code and
// log in history so the next chain sees them; retries of code stages run
// the error chain first. Attempts made after the runtime budget is spent
// fail without calling the provider.
AttemptOutput attempt_stage(const StageSpec& stage, const core::InternalState& state, ScaffoldEnv& env,
                            const StageHooks& hooks = {});

// Abstraction sources written by the built-in success updates.
inline constexpr const char* kModalitiesSource = "modalities";
inline constexpr const char* kSolutionSummarySource = "solution_summary";
std::optional<Modalities> modalities_from_state(const core::InternalState& state);

// Scheduler, separated from the stage runner so it can be driven by
// synthetic attempt functions.
struct ScheduleEvent {
  enum class Type { attempt, skip, meta, reset } type = Type::attempt;
  std::string id;  // stage id, or group id for meta/reset
  StageStatus status = StageStatus::not_reached;
  int attempts = 0;
  Json to_json() const;
};

struct DriverHooks {
  std::function<std::pair<StageOutcome, core::InternalState>(const StageSpec&, const core::InternalState&)> attempt;
  std::function<core::Feedback(const MetaGroup&, const core::InternalState&)> meta;
  // Read once, after the modality-identification stage succeeds.
  std::function<std::optional<Modalities>(const core::InternalState&)> modalities;
  // Lets the next pass of the group see the meta-test failure.
  std::function<void(const MetaGroup&, const core::Feedback&, core::InternalState&)> on_meta_failure;
};

struct ScheduleResult {
  OutcomeMap outcomes;
  std::map<std::string, GroupOutcome> groups;
  std::vector<ScheduleEvent> events;
  std::optional<std::string> terminal_failure;  // stage or group id
  std::optional<Modalities> modalities;
  core::InternalState state;
  bool complete() const { return !terminal_failure; }
  // Outcomes in graph order, not_reached filled in for the given phase.
  std::vector<StageOutcome> ordered(const StageGraph& graph, std::optional<Phase> phase = std::nullopt) const;
};

ScheduleResult run_schedule(const StageGraph& graph, core::InternalState state, const DriverHooks& hooks,
                            std::optional<Phase> phase = std::nullopt, std::optional<Modalities> modalities = {},
                            OutcomeMap prior = {});

struct StageStats {
  std::string stage_id;
  int success = 0;
  int failed = 0;
  int not_reached = 0;
  int skipped = 0;
  std::optional<double> success_rate;  // over runs that reached the stage
};

struct OutcomeReport {
  std::vector<StageStats> stages;
  int runs = 0;
  int complete_runs = 0;
  double overall_rate = 0.0;
  Json to_json() const;
  std::string to_text() const;
};

// Per-stage status distribution across runs. A run is complete when no
// stage failed or went unreached. Throws ConfigError on zero runs.
OutcomeReport stage_outcome_report(const std::vector<std::vector<StageOutcome>>& runs);

struct GraphOptions {
  int stage_retry_budget = 5;
  int group_retry_budget = 2;
};

// Workspace scaffold: understanding, modalities, train maps (meta-tested),
// test maps (meta-tested), submission format, metric.
StageGraph workspace_graph(const GraphOptions& options = {});

// One solution-design round for non-tabular competitions: per-modality
// feature engineering and embedders, class imbalance, model head and the
// solution summary.
StageGraph solution_design_graph(const GraphOptions& options = {}, int round = 1);

// Summary and ensemble stages shared by both solution routes.
StageSpec solution_summary_stage(const std::string& stage_id, int retry_budget = 5);
StageSpec ensemble_stage(int retry_budget = 5);

struct SetupResult {
  ScheduleResult schedule;
  std::vector<WorkspaceArtifact> artifacts;
  std::vector<StageOutcome> outcomes;  // graph order
};

// Drives a graph with attempt_stage and the workspace meta tests.
SetupResult run_scaffold(const StageGraph& graph, core::InternalState state, ScaffoldEnv& env,
                         const HookTable& hooks = {}, std::optional<Phase> phase = std::nullopt,
                         std::optional<Modalities> modalities = {});

}  // namespace kolb::scaffold
