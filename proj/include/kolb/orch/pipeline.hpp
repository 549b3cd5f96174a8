#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "kolb/core/trace.hpp"
#include "kolb/eval/leaderboard.hpp"
#include "kolb/exec/sandbox.hpp"
#include "kolb/llm/gateway.hpp"
#include "kolb/llm/prompt_template.hpp"
#include "kolb/orch/bundle.hpp"
#include "kolb/orch/config.hpp"
#include "kolb/orch/training.hpp"
#include "kolb/scaffold/scaffold.hpp"
#include "kolb/tree/tree.hpp"

namespace kolb::orch {

// Everything one competition run owns. Budgets are scaled seconds of
// executor time, so simulated runs account deterministically.
class RunContext {
 public:
  RunContext(RunConfig config, CompetitionBundle bundle, std::filesystem::path run_root);
  // Test seam: caller-supplied provider and executor.
  RunContext(RunConfig config, CompetitionBundle bundle, std::filesystem::path run_root,
             std::shared_ptr<llm::Provider> provider, std::unique_ptr<exec::Executor> executor);

  const RunConfig& config() const { return config_; }
  const CompetitionBundle& bundle() const { return bundle_; }
  const std::filesystem::path& root() const { return root_; }
  const scaffold::Workspace& workspace() const { return workspace_; }
  llm::Gateway& gateway() { return *gateway_; }
  const llm::TemplateCatalog& templates() const { return templates_; }
  exec::Executor& executor() { return *executor_; }
  core::EpisodeTrace& trace() { return trace_; }
  scaffold::RuntimeBudget& scaffold_budget() { return scaffold_budget_; }
  scaffold::RuntimeBudget& open_ended_budget() { return open_budget_; }

  // Environment over the scaffold budget, with the competition slots set.
  scaffold::ScaffoldEnv scaffold_env();
  // Writes the cassette in record mode; no-op otherwise.
  void save_cassette() const;

 private:
  void init(std::shared_ptr<llm::Provider> provider, std::unique_ptr<exec::Executor> executor);
  RunConfig config_;
  CompetitionBundle bundle_;
  std::filesystem::path root_;
  scaffold::Workspace workspace_;
  llm::TemplateCatalog templates_ = llm::TemplateCatalog::with_defaults();
  std::unique_ptr<llm::Gateway> gateway_;
  std::unique_ptr<exec::Executor> executor_;
  core::EpisodeTrace trace_;
  scaffold::RuntimeBudget scaffold_budget_;
  scaffold::RuntimeBudget open_budget_;
};

struct SetupOutcome {
  bool complete = false;
  std::optional<std::string> terminal_failure;
  std::vector<scaffold::StageOutcome> outcomes;  // graph order
  std::map<std::string, scaffold::GroupOutcome> meta;  // meta-tested groups
  std::vector<scaffold::WorkspaceArtifact> artifacts;
  std::optional<scaffold::Modalities> modalities;
  core::InternalState state;
};

// Workspace scaffold followed by the data-loader meta tests. A terminal
// failure leaves the partial workspace in place.
SetupOutcome run_setup(RunContext& ctx);

// One submission candidate produced during the scaffold phase.
struct ScaffoldSolution {
  std::string id;    // e.g. r1_search, r1_cv, tool_ridge, blend_3, ensemble
  std::string kind;  // search | cv | tta | tool | blend | ensemble
  std::filesystem::path submission;   // relative to the run root
  std::filesystem::path validation;   // validation predictions, same root
  std::optional<double> score;        // engine-computed validation metric
  std::string note;
  Json to_json() const;
};

struct SolveEvent {
  std::string type;  // trial | denied | blend | ensemble | phase
  std::string detail;
  Json to_json() const { return Json{{"type", type}, {"detail", detail}}; }
};

struct SolveOutcome {
  bool ok = false;
  std::string failure;
  std::vector<scaffold::StageOutcome> outcomes;
  std::vector<ScaffoldSolution> solutions;
  tree::AbstractionSeed seeds;
  std::vector<SolveEvent> events;
  std::optional<tree::SearchResult> search;
  std::string open_ended_skipped;  // reason when the tree phase did not run
  std::vector<std::filesystem::path> exported;  // relative to the run root
  double scaffold_time = 0.0;
  double open_ended_time = 0.0;
};

// Scaffold solutions (deep design rounds or the tabular tool route),
// blending from the blend_after-th valid solution, the ensemble stage,
// then the solution tree over the open-ended budget. Exports up to the
// tree's retained count of best submissions.
SolveOutcome run_solve(RunContext& ctx, const SetupOutcome& setup);

struct EvaluationBlock {
  std::vector<eval::SubmissionRecord> records;
  eval::Selection selection;
  double quantile = 0.0;
  int rank = 0;
  int teams = 0;
  eval::Medal medal = eval::Medal::none;
  Json to_json() const;
};

// Scores each submission on the public and private splits, then greedy
// selection, quantile and medal. nullopt without submissions or when the
// bundle has no leaderboard or answers.
std::optional<EvaluationBlock> evaluate_submissions(const CompetitionBundle& bundle,
                                                    const std::vector<std::filesystem::path>& submissions);

struct RunManifest {
  Json body = Json::object();
  std::string hash;  // SHA-256 over the canonical body

  void seal();
  void save(const std::filesystem::path& path) const;
  static RunManifest load(const std::filesystem::path& path);
  // hash matches the body.
  bool verify() const;
};

RunManifest build_manifest(RunContext& ctx, const SetupOutcome& setup, const std::optional<SolveOutcome>& solve,
                           const std::optional<EvaluationBlock>& evaluation);

// Deterministic run directory name from config, bundle and seed.
std::string run_id(const RunConfig& config, const CompetitionBundle& bundle);

struct FullRun {
  SetupOutcome setup;
  std::optional<SolveOutcome> solve;
  std::optional<EvaluationBlock> evaluation;
  RunManifest manifest;
};

// setup, then solve and evaluate when the previous step succeeded; writes
// manifest.json (and the cassette when recording) under the run root.
FullRun run_all(RunContext& ctx, bool solve = true);

}  // namespace kolb::orch
