#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kolb/core/state.hpp"
#include "kolb/util/json_io.hpp"

namespace kolb::scaffold {

// The thirteen stage kinds a scaffold is assembled from.
enum class StageKind {
  competition_understanding,
  modality_identification,
  create_maps,
  select_metric,
  create_submission_format,
  feature_engineering,
  create_embedders,
  class_imbalance,
  create_target_transform,
  create_model_head,
  create_solution_summary,
  ensemble,
  error_code,
};
std::string to_string(StageKind k);
StageKind parse_stage_kind(const std::string& s);

enum class Phase { workspace, solution };
std::string to_string(Phase p);

struct Modalities {
  bool tabular = false;
  bool image = false;
  bool text = false;
  bool tabular_only() const { return tabular && !image && !text; }
  bool any() const { return tabular || image || text; }
  Json to_json() const;
  static Modalities from_json(const Json& j);
  bool operator==(const Modalities&) const = default;
};

using Applicability = std::function<bool(const Modalities&)>;

struct StageSpec {
  std::string stage_id;
  StageKind name = StageKind::create_maps;
  Phase phase = Phase::workspace;
  // Absent means the stage always applies and may run before modalities
  // are known.
  Applicability applicable_when;
  std::vector<core::IntrinsicStep> intrinsic_chain;
  core::ActionKind action_kind = core::ActionKind::emit_code;
  std::string action_template;
  std::optional<std::string> unit_test_id;
  int retry_budget = 5;
  std::optional<std::string> group_id;
  // Stage ids that must be success or skipped first. Empty means every
  // earlier stage in graph order.
  std::vector<std::string> predecessors;
  // Rendered into the stage_instructions prompt slot.
  std::string instructions;
  // File the emitted code is saved under, relative to the workspace.
  std::string code_file;
  // Run the saved code as a script before the unit test. Library-style
  // artifacts (metric, transform, submission format) are only imported by
  // the test harness.
  bool execute_code = true;
  // Files the stage produces, for meta tests and artifact bookkeeping.
  std::vector<std::string> outputs;
};

struct MetaGroup {
  std::string group_id;
  std::string meta_test_id;
  // Re-entries allowed after the first failing meta test.
  int retry_budget = 2;
  // Members need not be contiguous in graph order.
  bool reenterable = false;
};

// Ordered stages plus meta-test groups. validate() enforces the structural
// invariants; it is called by every consumer before scheduling.
class StageGraph {
 public:
  void add(StageSpec stage);
  void add_group(MetaGroup group);
  const std::vector<StageSpec>& stages() const { return stages_; }
  const std::map<std::string, MetaGroup>& groups() const { return groups_; }
  const StageSpec* find(const std::string& stage_id) const;
  std::size_t index_of(const std::string& stage_id) const;
  std::vector<const StageSpec*> members(const std::string& group_id) const;
  // Resolved predecessor ids of a stage.
  std::vector<std::string> predecessors_of(const StageSpec& stage) const;
  // Throws ConfigError naming the first violated invariant.
  void validate() const;

 private:
  std::vector<StageSpec> stages_;
  std::map<std::string, MetaGroup> groups_;
};

enum class StageStatus { success, failed, not_reached, skipped };
std::string to_string(StageStatus s);
StageStatus parse_stage_status(const std::string& s);

struct StageOutcome {
  std::string stage_id;
  StageStatus status = StageStatus::not_reached;
  int attempts = 0;
  double wall_time = 0.0;  // runtime-budget seconds consumed
  Json to_json() const;
  static StageOutcome from_json(const Json& j);
};

struct GroupOutcome {
  std::string group_id;
  StageStatus status = StageStatus::not_reached;
  int attempts = 0;
  std::string last_body;
  Json to_json() const;
};

using OutcomeMap = std::map<std::string, StageOutcome>;

struct AdvanceResult {
  enum class Kind { stage, phase_complete, terminal_failure } kind = Kind::phase_complete;
  const StageSpec* stage = nullptr;
  std::vector<const StageSpec*> skipped;  // newly skipped on the way
  std::string failed_stage;
};

bool resolved(const OutcomeMap& outcomes, const std::string& stage_id);

// First unresolved applicable stage, optionally restricted to one phase.
// Inapplicable stages met on the way are reported in `skipped` (the caller
// records them). A failed stage yields terminal_failure naming it.
AdvanceResult advance(const StageGraph& graph, const OutcomeMap& outcomes,
                      const std::optional<Modalities>& modalities, std::optional<Phase> phase = std::nullopt);

}  // namespace kolb::scaffold
