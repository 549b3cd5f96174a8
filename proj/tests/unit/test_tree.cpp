#include <gtest/gtest.h>

#include <regex>

#include "kolb/llm/providers.hpp"
#include "kolb/tree/tree.hpp"
#include "kolb/util/error.hpp"
#include "kolb/util/hash.hpp"
#include "temp_dir.hpp"

using namespace kolb;
using namespace kolb::tree;

namespace {

// Code carries its own outcome: "# outcome: ok <score>", "# outcome: fail"
// or "# outcome: hang".
class OutcomeExecutor : public exec::Executor {
 public:
  exec::ExecResult execute(const exec::ExecRequest& req) override {
    requests.push_back(req);
    exec::ExecResult r;
    r.duration = 10.0;
    std::smatch m;
    static const std::regex ok(R"(# outcome: ok ([-0-9.eE+]+))");
    if (std::regex_search(req.code, m, ok)) {
      r.stdout_tail = "epoch 1\nValidation RMSLE: " + m[1].str() + "\n";
      write_text_file(req.working_dir / "submission.csv", "id,y\n1,0\n");
    } else if (req.code.find("# outcome: hang") != std::string::npos) {
      r.timed_out = true;
      r.exit_status = 137;
      r.duration = req.time_limit;
      r.stderr_tail = "[killed]";
    } else {
      r.exit_status = 1;
      r.stderr_tail = "Traceback (most recent call last):\n  File \"x.py\", line 3\nKeyError: 'target'";
    }
    return r;
  }
  std::size_t spawn_count() const override { return 0; }
  std::vector<exec::ExecRequest> requests;
};

// Review replies read the metric back out of the log.
std::string review_from_log(const std::string& prompt, const std::string& direction = "minimize") {
  std::smatch m;
  static const std::regex val(R"(Validation RMSLE: ([-0-9.eE+]+))");
  if (std::regex_search(prompt, m, val)) {
    return R"({"success": true, "metric": )" + m[1].str() + R"(, "direction": ")" + direction + "\"}";
  }
  return R"({"success": false, "metric": null, "direction": null})";
}

std::string fenced(const std::string& body) { return "```python\n" + body + "\n```"; }

struct Rig {
  kolb::testing::TempDir dir;
  scaffold::Workspace ws;
  std::shared_ptr<llm::Provider> provider;
  llm::Gateway gateway;
  llm::TemplateCatalog templates = llm::TemplateCatalog::with_defaults();
  OutcomeExecutor executor;
  scaffold::RuntimeBudget budget;
  scaffold::ScaffoldEnv env;
  TreeEnv tenv;
  std::vector<llm::CompletionRequest> seen;

  Rig(std::function<std::string(const llm::CompletionRequest&)> gen, double total = 172800.0, TreePolicy policy = {})
      : ws(make_ws(dir)),
        provider(std::make_shared<llm::FunctionProvider>([this, gen](const llm::CompletionRequest& r) {
          seen.push_back(r);
          if (r.template_id == "tree_review") return review_from_log(r.prompt);
          return gen(r);
        })),
        gateway(provider, llm::GatewayOptions{}),
        budget(total),
        env(gateway, templates, executor, ws, budget),
        tenv{env, policy, dir / "tree", "RMSLE"} {
    env.extra["task"] = "Predict house prices.";
    if (policy.tau_node == TreePolicy{}.tau_node) tenv.policy.tau_node = total * 3.0 / 16.0;
  }
  static scaffold::Workspace make_ws(const kolb::testing::TempDir& d) {
    std::filesystem::create_directories(d / "data");
    write_text_file(d / "sample_submission.csv", "id,y\n1,0\n");
    return scaffold::Workspace::create(d / "ws", d / "data", d / "sample_submission.csv");
  }
  std::vector<std::string> prompts(const std::string& id) const {
    std::vector<std::string> out;
    for (const auto& r : seen) {
      if (r.template_id == id) out.push_back(r.prompt);
    }
    return out;
  }
};

SolutionNode valid_draft(double metric, core::Direction d = core::Direction::maximize) {
  SolutionNode n;
  n.status = NodeStatus::valid;
  n.metric = MetricReading{metric, d, "test"};
  n.submission = "x.csv";
  return n;
}

SolutionNode buggy(NodeKind kind, std::optional<int> parent, int depth) {
  SolutionNode n;
  n.kind = kind;
  n.parent = parent;
  n.debug_depth = depth;
  n.status = NodeStatus::buggy;
  return n;
}

}  // namespace

TEST(Policy, NodeLimitIsThreeSixteenthsOfRuntime) {
  EXPECT_DOUBLE_EQ(TreePolicy::for_runtime(172800.0).tau_node, 32400.0);
  // Two-day tabular budget: 9 h per node; four days: 18 h.
  EXPECT_DOUBLE_EQ(TreePolicy::for_runtime(2 * 86400.0).tau_node, 9 * 3600.0);
  EXPECT_DOUBLE_EQ(TreePolicy::for_runtime(4 * 86400.0).tau_node, 18 * 3600.0);
  TreePolicy p;
  EXPECT_EQ(p.n_max, 5000);
  EXPECT_EQ(p.n_draft, 5);
  EXPECT_EQ(p.max_debug_depth, 3);
  EXPECT_DOUBLE_EQ(p.p_debug, 0.5);
  EXPECT_EQ(p.retained, 4);
  p.p_debug = 1.5;
  EXPECT_THROW(p.validate(), ConfigError);
}

TEST(SeedDrafts, EveryDraftPromptCarriesAllSeeds) {
  Rig rig([](const llm::CompletionRequest&) { return fenced("# outcome: ok 0.5"); });
  AbstractionSeed seeds = {{"gradient boosting on raw columns", {{"submission.csv", 0.51}}},
                           {"target-encoded categorical features", {{"submission.csv", 0.47}}},
                           {"log-target ridge blend", {{"submission.csv", 0.45}}}};
  SolutionTree tree;
  auto ids = seed_drafts(tree, seeds, rig.tenv);
  ASSERT_EQ(ids.size(), 5u);
  auto prompts = rig.prompts("tree_draft");
  ASSERT_EQ(prompts.size(), 5u);
  for (const auto& p : prompts) {
    EXPECT_NE(p.find("Past Submissions"), std::string::npos);
    for (const auto& s : seeds) EXPECT_NE(p.find(s.summary), std::string::npos);
  }
  for (const auto& n : tree.nodes()) EXPECT_EQ(n.status, NodeStatus::unevaluated);
  // Budget met: no further drafts.
  EXPECT_TRUE(seed_drafts(tree, seeds, rig.tenv).empty());
  EXPECT_EQ(rig.prompts("tree_draft").size(), 5u);
}

TEST(SeedDrafts, EmptySeedsRunUnseeded) {
  Rig rig([](const llm::CompletionRequest&) { return fenced("# outcome: ok 0.5"); });
  SolutionTree tree;
  EXPECT_EQ(seed_drafts(tree, {}, rig.tenv).size(), 5u);
  for (const auto& p : rig.prompts("tree_draft")) EXPECT_EQ(p.find("Past Submissions"), std::string::npos);
}

TEST(SeedDrafts, FormatFailureMarksNodeBuggy) {
  Rig rig([](const llm::CompletionRequest&) { return std::string("no code here"); });
  SolutionTree tree;
  seed_drafts(tree, {}, rig.tenv);
  for (const auto& n : tree.nodes()) {
    EXPECT_EQ(n.status, NodeStatus::buggy);
    EXPECT_NE(n.note.find("format failure"), std::string::npos);
  }
  // First request plus 5 reprompts per draft.
  EXPECT_EQ(rig.prompts("tree_draft").size(), 30u);
}

TEST(Select, ForcedDebugPicksMostRecentEligibleBuggyNode) {
  SolutionTree t;
  t.add(buggy(NodeKind::draft, std::nullopt, 0));
  t.add(buggy(NodeKind::debug, 0, 1));
  t.add(buggy(NodeKind::debug, 1, 2));
  TreePolicy p;
  p.p_debug = 1.0;
  std::mt19937_64 rng(1);
  auto a = select_next_action(t, p, rng, 3, 1e9);
  EXPECT_EQ(a.kind, TreeAction::Kind::debug);
  EXPECT_EQ(a.target, 2);
  // At the depth limit the node is no longer eligible.
  t.add(buggy(NodeKind::debug, 2, 3));
  a = select_next_action(t, p, rng, 4, 1e9);
  EXPECT_EQ(a.kind, TreeAction::Kind::new_draft);
}

TEST(Select, NoBuggyNodesImprovesBest) {
  SolutionTree t;
  t.add(valid_draft(0.7));
  t.add(valid_draft(0.9));
  t.add(valid_draft(0.8));
  TreePolicy p;
  p.p_debug = 1.0;
  std::mt19937_64 rng(1);
  auto a = select_next_action(t, p, rng, 3, 1e9);
  EXPECT_EQ(a.kind, TreeAction::Kind::improve);
  EXPECT_EQ(a.target, 1);
}

TEST(Select, RngBelowPDebugChoosesDebugOtherwiseImprove) {
  SolutionTree t;
  t.add(valid_draft(0.7));
  t.add(buggy(NodeKind::draft, std::nullopt, 0));
  TreePolicy p;
  std::mt19937_64 probe(42);
  const double u = unit_draw(probe);
  std::mt19937_64 rng(42);
  auto a = select_next_action(t, p, rng, 2, 1e9);
  EXPECT_EQ(a.kind, u < 0.5 ? TreeAction::Kind::debug : TreeAction::Kind::improve);
  int debug = 0;
  for (int i = 0; i < 4000; ++i) debug += select_next_action(t, p, rng, 2, 1e9).kind == TreeAction::Kind::debug;
  EXPECT_NEAR(debug / 4000.0, 0.5, 0.04);
}

TEST(Select, StopsOnIterationsAndReserve) {
  SolutionTree t;
  for (int i = 0; i < 5; ++i) t.add(buggy(NodeKind::draft, std::nullopt, 0));
  TreePolicy p;
  std::mt19937_64 rng(1);
  EXPECT_EQ(select_next_action(t, p, rng, 5000, 1e9).kind, TreeAction::Kind::stop);
  EXPECT_EQ(select_next_action(t, p, rng, 5, 2 * p.tau_node - 1).kind, TreeAction::Kind::stop);
  EXPECT_EQ(select_next_action(t, p, rng, 5, 2 * p.tau_node).kind, TreeAction::Kind::debug);
  SolutionTree empty;
  EXPECT_EQ(select_next_action(empty, p, rng, 0, 1e9).kind, TreeAction::Kind::new_draft);
}

TEST(Expand, DebugPromptCarriesParentCodeAndStderr) {
  int calls = 0;
  Rig rig([&](const llm::CompletionRequest&) {
    return fenced(calls++ == 0 ? "import pandas\n# outcome: fail" : "# outcome: ok 0.4");
  });
  SolutionTree tree;
  int d = expand_node({TreeAction::Kind::new_draft, std::nullopt, ""}, tree, rig.tenv, 0);
  ASSERT_EQ(tree.node(d).status, NodeStatus::buggy);
  int fix = expand_node({TreeAction::Kind::debug, d, ""}, tree, rig.tenv, 1);
  auto p = rig.prompts("tree_debug");
  ASSERT_EQ(p.size(), 1u);
  EXPECT_NE(p[0].find("import pandas\n# outcome: fail"), std::string::npos);
  EXPECT_NE(p[0].find("KeyError: 'target'"), std::string::npos);
  EXPECT_EQ(tree.node(fix).debug_depth, 1);
  EXPECT_EQ(tree.node(fix).status, NodeStatus::valid);
}

TEST(Expand, ImprovePromptCarriesBestCodeAndMetric) {
  Rig rig([](const llm::CompletionRequest& r) {
    return fenced(r.template_id == "tree_draft" ? "# best so far\n# outcome: ok 0.41" : "# outcome: ok 0.39");
  });
  SolutionTree tree;
  int d = expand_node({TreeAction::Kind::new_draft, std::nullopt, ""}, tree, rig.tenv, 0);
  expand_node({TreeAction::Kind::improve, d, ""}, tree, rig.tenv, 1);
  auto p = rig.prompts("tree_improve");
  ASSERT_EQ(p.size(), 1u);
  EXPECT_NE(p[0].find("# best so far"), std::string::npos);
  EXPECT_NE(p[0].find("0.41"), std::string::npos);
  EXPECT_EQ(best_node(tree)->metric->value, 0.39);
}

TEST(Expand, ExecutionUsesNodeLimitAndTimeoutIsBuggy) {
  Rig rig([](const llm::CompletionRequest&) { return fenced("# outcome: hang"); });
  SolutionTree tree;
  int id = expand_node({TreeAction::Kind::new_draft, std::nullopt, ""}, tree, rig.tenv, 0);
  ASSERT_EQ(rig.executor.requests.size(), 1u);
  EXPECT_DOUBLE_EQ(rig.executor.requests[0].time_limit, 32400.0);
  const auto& n = tree.node(id);
  EXPECT_EQ(n.status, NodeStatus::buggy);
  EXPECT_NE(n.note.find("timeout"), std::string::npos);
  EXPECT_LE(n.exec->duration, rig.tenv.policy.tau_node);
  EXPECT_TRUE(rig.prompts("tree_review").empty());
}

TEST(RecordResult, ReadsMetricAndDirectionFromReview) {
  Rig rig([](const llm::CompletionRequest&) { return fenced("# outcome: ok 0.41"); });
  SolutionTree tree;
  int id = expand_node({TreeAction::Kind::new_draft, std::nullopt, ""}, tree, rig.tenv, 0);
  const auto& n = tree.node(id);
  ASSERT_EQ(n.status, NodeStatus::valid);
  EXPECT_DOUBLE_EQ(n.metric->value, 0.41);
  EXPECT_EQ(n.metric->direction, core::Direction::minimize);
  EXPECT_EQ(n.metric->source, "Validation RMSLE: 0.41");
  ASSERT_TRUE(n.submission);
  EXPECT_TRUE(std::filesystem::exists(rig.tenv.tree_dir / *n.submission));
}

TEST(RecordResult, SuccessWithoutMetricIsValidButNotImprovable) {
  auto provider = std::make_shared<llm::ScriptedProvider>(std::vector<llm::ScriptedProvider::Entry>{
      {"tree_draft", fenced("# outcome: ok 0.3")},
      {"tree_review", R"({"success": true, "metric": "n/a", "direction": null})"}});
  Rig rig([](const llm::CompletionRequest&) { return std::string(); });
  llm::Gateway gw(provider, llm::GatewayOptions{});
  scaffold::ScaffoldEnv env(gw, rig.templates, rig.executor, rig.ws, rig.budget);
  TreeEnv tenv{env, rig.tenv.policy, rig.tenv.tree_dir, ""};
  SolutionTree tree;
  int id = expand_node({TreeAction::Kind::new_draft, std::nullopt, ""}, tree, tenv, 0);
  EXPECT_EQ(tree.node(id).status, NodeStatus::valid);
  EXPECT_FALSE(tree.node(id).metric);
  EXPECT_EQ(best_node(tree), nullptr);
}

TEST(RecordResult, TracebackIsBuggy) {
  Rig rig([](const llm::CompletionRequest&) { return fenced("# outcome: fail"); });
  SolutionTree tree;
  int id = expand_node({TreeAction::Kind::new_draft, std::nullopt, ""}, tree, rig.tenv, 0);
  EXPECT_EQ(tree.node(id).status, NodeStatus::buggy);
  EXPECT_FALSE(tree.node(id).metric);
}

TEST(BestNode, Examples) {
  EXPECT_EQ(best_node(SolutionTree{}), nullptr);
  SolutionTree t;
  t.add(valid_draft(0.8));
  t.add(valid_draft(0.9));
  EXPECT_EQ(best_node(t)->node_id, 1);
  SolutionTree tie;
  tie.add(valid_draft(0.9));
  tie.add(valid_draft(0.9));
  EXPECT_EQ(best_node(tie)->node_id, 0);
  SolutionTree mn;
  mn.add(valid_draft(0.41, core::Direction::minimize));
  mn.add(valid_draft(0.39, core::Direction::minimize));
  EXPECT_EQ(best_node(mn)->metric->value, 0.39);
}

TEST(BestNode, TopNodesKeepsFourBestFirst) {
  SolutionTree t;
  for (double v : {0.3, 0.9, 0.5, 0.7, 0.1, 0.8}) t.add(valid_draft(v));
  auto top = top_nodes(t, 4);
  ASSERT_EQ(top.size(), 4u);
  EXPECT_EQ(top[0]->metric->value, 0.9);
  EXPECT_EQ(top[1]->metric->value, 0.8);
  EXPECT_EQ(top[3]->metric->value, 0.5);
}

TEST(Tree, AddRejectsInvariantViolations) {
  SolutionTree t;
  t.add(valid_draft(0.5));
  EXPECT_THROW(t.add(buggy(NodeKind::debug, 0, 1)), ConfigError);  // parent not buggy
  t.add(buggy(NodeKind::draft, std::nullopt, 0));
  auto imp = buggy(NodeKind::improve, 1, 0);
  EXPECT_THROW(t.add(imp), ConfigError);  // parent not valid
  EXPECT_THROW(t.add(buggy(NodeKind::debug, 1, 2)), ConfigError);  // depth skips
  auto d = buggy(NodeKind::draft, 0, 0);
  EXPECT_THROW(t.add(d), ConfigError);  // draft with parent
  SolutionNode nan = valid_draft(std::nan(""));
  EXPECT_THROW(t.add(nan), ConfigError);
}

TEST(Tree, SaveLoadRoundTrip) {
  kolb::testing::TempDir dir;
  SolutionTree t;
  t.add(valid_draft(0.5));
  t.add(buggy(NodeKind::draft, std::nullopt, 0));
  t.add(buggy(NodeKind::debug, 1, 1));
  t.save(dir / "tree.jsonl");
  auto back = SolutionTree::load(dir / "tree.jsonl");
  EXPECT_EQ(back.digest(), t.digest());
  auto recs = read_jsonl(dir / "tree.jsonl");
  int edges = 0;
  for (const auto& r : recs) edges += r.at("type") == "edge";
  EXPECT_EQ(edges, 1);
}

TEST(TreeProperty, StructuralAndBudgetInvariantsOverRandomSequences) {
  std::mt19937_64 outer(7);
  for (int seq = 0; seq < 10000; ++seq) {
    TreePolicy p;
    p.n_max = 5 + static_cast<int>(outer() % 30);
    p.n_draft = 1 + static_cast<int>(outer() % 6);
    p.max_debug_depth = 1 + static_cast<int>(outer() % 3);
    p.p_debug = unit_draw(outer);
    std::mt19937_64 rng(outer());
    SolutionTree t;
    int steps = 0;
    while (true) {
      auto a = select_next_action(t, p, rng, steps, 1e9);
      if (a.kind == TreeAction::Kind::stop) break;
      SolutionNode n;
      if (a.kind == TreeAction::Kind::new_draft) {
        n.kind = NodeKind::draft;
      } else {
        n.kind = a.kind == TreeAction::Kind::debug ? NodeKind::debug : NodeKind::improve;
        n.parent = a.target;
        n.debug_depth = a.kind == TreeAction::Kind::debug ? t.node(*a.target).debug_depth + 1 : 0;
      }
      if (unit_draw(rng) < 0.5) {
        n.status = NodeStatus::valid;
        if (unit_draw(rng) < 0.9) n.metric = MetricReading{unit_draw(rng), core::Direction::maximize, "x"};
      } else {
        n.status = NodeStatus::buggy;
      }
      ASSERT_NO_THROW(t.add(n, p.max_debug_depth)) << "sequence " << seq;
      ++steps;
      ASSERT_FALSE(t.verify(p.max_debug_depth).has_value()) << *t.verify(p.max_debug_depth);
    }
    ASSERT_LE(static_cast<int>(t.size()), p.n_max);
    ASSERT_LE(t.draft_count(), p.n_draft);
  }
}

namespace {

std::string det_gen(const llm::CompletionRequest& r) {
  // Deterministic function of the prompt: a hash picks the outcome.
  const auto h = sha256_hex(r.prompt);
  const int v = std::stoi(h.substr(0, 4), nullptr, 16);
  if (v % 3 == 0) return fenced("# outcome: fail\n# " + h.substr(0, 8));
  return fenced("# outcome: ok " + std::to_string(0.3 + (v % 1000) / 10000.0) + "\n# " + h.substr(0, 8));
}

}  // namespace

TEST(Search, BudgetsHoldAndRunsAreDeterministic) {
  TreePolicy p;
  p.n_max = 40;
  p.rng_seed = 99;
  std::string digest;
  for (int run = 0; run < 2; ++run) {
    Rig rig(det_gen, 172800.0, p);
    rig.tenv.policy.tau_node = 3600.0;
    auto res = run_search({{"seed summary", {{"submission.csv", 0.4}}}}, rig.tenv);
    EXPECT_LE(res.steps, p.n_max);
    EXPECT_LE(res.tree.draft_count(), p.n_draft);
    EXPECT_FALSE(res.tree.verify().has_value());
    EXPECT_EQ(res.stop_reason, "iteration limit reached");
    EXPECT_LE(res.exported.size(), 4u);
    EXPECT_FALSE(res.exported.empty());
    for (const auto& r : rig.executor.requests) EXPECT_LE(r.time_limit, rig.tenv.policy.tau_node);
    EXPECT_TRUE(std::filesystem::exists(rig.tenv.tree_dir / "tree.jsonl"));
    if (run == 0) {
      digest = res.tree.digest();
    } else {
      EXPECT_EQ(res.tree.digest(), digest);
    }
  }
}

TEST(Search, StopsWhenRuntimeReserveIsReached) {
  Rig rig(det_gen, 100.0);
  rig.tenv.policy.tau_node = 20.0;
  auto res = run_search({}, rig.tenv);
  EXPECT_EQ(res.stop_reason, "remaining runtime below the reserve");
  // Each run charges 10 s; expansion stops once less than 40 s remain.
  EXPECT_GE(rig.budget.remaining(), 30.0);
}
