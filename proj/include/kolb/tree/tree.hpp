#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "kolb/core/state.hpp"
#include "kolb/exec/sandbox.hpp"
#include "kolb/scaffold/scaffold.hpp"
#include "kolb/util/json_io.hpp"

namespace kolb::tree {

enum class NodeKind { draft, improve, debug };
enum class NodeStatus { valid, buggy, unevaluated };

std::string to_string(NodeKind k);
std::string to_string(NodeStatus s);
NodeKind parse_node_kind(const std::string& s);
NodeStatus parse_node_status(const std::string& s);

struct MetricReading {
  double value = 0.0;
  core::Direction direction = core::Direction::maximize;
  std::string source;  // log line the value was read from, or "review"
};

struct SolutionNode {
  int node_id = -1;
  std::optional<int> parent;
  NodeKind kind = NodeKind::draft;
  std::string code;
  std::optional<exec::ExecResult> exec;
  std::optional<MetricReading> metric;
  NodeStatus status = NodeStatus::unevaluated;
  int debug_depth = 0;
  std::string note;  // format or timeout trace for buggy nodes
  std::optional<std::string> submission;  // path relative to the tree dir

  Json to_json() const;
  static SolutionNode from_json(const Json& j);
};

struct TreePolicy {
  int n_max = 5000;
  double tau_node = 32400.0;
  int n_draft = 5;
  int max_debug_depth = 3;
  double p_debug = 0.5;
  std::uint64_t rng_seed = 0;
  int retained = 4;    // exported submissions

  // tau_node = 3/16 of the total runtime.
  static TreePolicy for_runtime(double total_runtime_s, std::uint64_t seed = 0);
  void validate() const;
};

// One scaffold solution abstracted for the draft prompts.
struct SeedSummary {
  std::string summary;
  Json scores = Json::object();  // submission file -> validation score
};
using AbstractionSeed = std::vector<SeedSummary>;

// "## Summary of Past Submissions" block; empty string for no seeds.
std::string render_past_submissions(const AbstractionSeed& seeds);

class SolutionTree {
 public:
  SolutionTree() = default;
  explicit SolutionTree(std::optional<core::Direction> direction) : direction_(direction) {}

  // Assigns the id and checks the structural invariants against the
  // parent (ConfigError on violation).
  int add(SolutionNode node, int max_debug_depth = 3);
  // Replaces an existing node, re-checking its invariants.
  void update(const SolutionNode& node, int max_debug_depth = 3);

  const std::vector<SolutionNode>& nodes() const { return nodes_; }
  const SolutionNode& node(int id) const;
  std::size_t size() const { return nodes_.size(); }
  int draft_count() const;
  bool has_children(int id) const;

  // Direction of the first metric recorded unless fixed at construction.
  std::optional<core::Direction> direction() const { return direction_; }

  // First violated invariant, if any.
  std::optional<std::string> verify(int max_debug_depth = 3) const;

  std::string digest() const;
  void save(const std::filesystem::path& path) const;
  static SolutionTree load(const std::filesystem::path& path);

 private:
  void check(const SolutionNode& n, int max_debug_depth) const;
  std::vector<SolutionNode> nodes_;
  std::optional<core::Direction> direction_;
};

// Valid node with the best metric; ties go to the earliest node.
const SolutionNode* best_node(const SolutionTree& tree);
// Up to k valid nodes with a metric and a submission, best first.
std::vector<const SolutionNode*> top_nodes(const SolutionTree& tree, int k);

struct TreeAction {
  enum class Kind { new_draft, debug, improve, stop };
  Kind kind = Kind::stop;
  std::optional<int> target;
  std::string reason;  // set for stop
};

std::string to_string(TreeAction::Kind k);

// Uniform draw in [0,1) from the top 53 bits, identical across standard
// libraries.
double unit_draw(std::mt19937_64& rng);

// Draws once from `rng` per call. Steps are expansions so far.
TreeAction select_next_action(const SolutionTree& tree, const TreePolicy& policy, std::mt19937_64& rng,
                              int steps, double remaining_runtime);

// Shared prompt and execution context for the search.
struct TreeEnv {
  scaffold::ScaffoldEnv& env;
  TreePolicy policy;
  std::filesystem::path tree_dir;  // node scripts, submissions, tree.jsonl
  std::string metric_hint;         // competition metric name, "" if unknown
};

// Generates code for a draft without executing it. A format failure yields
// a buggy node carrying the failure trace.
SolutionNode generate_node(const TreeAction& action, const SolutionTree& tree, TreeEnv& tenv,
                           const std::string& past_submissions, int steps);

// Executes an unevaluated node with time limit tau_node and records the
// result. Nodes already buggy are left untouched.
void evaluate_node(SolutionNode& node, SolutionTree& tree, TreeEnv& tenv);

// Classifies an executed node. A non-zero exit or a kill is buggy without
// asking the gateway; a success review without a finite metric leaves the
// node valid but not improvable.
void record_result(SolutionNode& node, TreeEnv& tenv);

// Adds up to n_draft - draft_count unevaluated drafts.
std::vector<int> seed_drafts(SolutionTree& tree, const AbstractionSeed& seeds, TreeEnv& tenv);

// generate_node + evaluate_node, appended to the tree.
int expand_node(const TreeAction& action, SolutionTree& tree, TreeEnv& tenv, int steps);

struct SearchResult {
  SolutionTree tree;
  int steps = 0;
  std::string stop_reason;
  std::vector<std::filesystem::path> exported;  // retained submissions, best first
};

// Seeds, evaluates the drafts, then expands until select_next_action
// stops. Persists tree.jsonl and exports the retained submissions.
SearchResult run_search(const AbstractionSeed& seeds, TreeEnv& tenv);

}  // namespace kolb::tree
