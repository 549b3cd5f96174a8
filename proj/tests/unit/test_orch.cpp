#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <set>

#include "kolb/eval/metric.hpp"
#include "kolb/orch/ablation.hpp"
#include "kolb/orch/drivers.hpp"
#include "kolb/orch/pipeline.hpp"
#include "kolb/orch/report.hpp"
#include "kolb/util/csv.hpp"
#include "kolb/util/error.hpp"
#include "temp_dir.hpp"

using namespace kolb;
using namespace kolb::orch;
namespace fs = std::filesystem;
using kolb::testing::TempDir;

namespace {

const fs::path kFix = KOLB_FIXTURES;

struct Run {
  RunConfig cfg;
  CompetitionBundle bundle;
  std::unique_ptr<RunContext> ctx;
  FullRun result;
};

Run run_fixture(const std::string& variant, const std::string& bundle, const fs::path& root, bool solve = true,
                const std::string& cassette = "") {
  Run r;
  r.cfg = RunConfig::load(kFix / variant / "config.json");
  if (!cassette.empty()) apply_cassette_flag(r.cfg, cassette);
  r.bundle = ingest_bundle(kFix / bundle / "bundle");
  r.ctx = std::make_unique<RunContext>(r.cfg, r.bundle, root);
  r.result = run_all(*r.ctx, solve);
  return r;
}

std::map<std::string, scaffold::StageOutcome> by_id(const std::vector<scaffold::StageOutcome>& v) {
  std::map<std::string, scaffold::StageOutcome> m;
  for (const auto& o : v) m[o.stage_id] = o;
  return m;
}

bool python_has(const std::string& module) {
  return std::system(("python3 -c 'import " + module + "' >/dev/null 2>&1").c_str()) == 0;
}

}  // namespace

// ---- configuration -------------------------------------------------------

TEST(Config, UnknownKeysAreRejectedWithTheirPath) {
  try {
    RunConfig::from_json(Json{{"sead", 3}});
    FAIL() << "accepted a misspelled key";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("config.sead"), std::string::npos) << e.what();
  }
  try {
    RunConfig::from_json(Json{{"budget", {{"training", {{"n_trails", 3}}}}}});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("budget.training.n_trails"), std::string::npos) << e.what();
  }
  EXPECT_THROW(RunConfig::from_json(Json{{"executor", {{"kind", "docker"}}}}), ConfigError);
  EXPECT_THROW(RunConfig::from_json(Json{{"search", {{"strategy", "bayes"}}}}), ConfigError);
}

TEST(Config, RelativePathsResolveAgainstTheConfigFile) {
  auto c = RunConfig::from_json(Json{{"executor", {{"kind", "simulated"}, {"sim_script", "s.jsonl"}}},
                                     {"provider", {{"kind", "script"}, {"script_path", "p.jsonl"}}}},
                                "/x/y");
  EXPECT_EQ(c.sim_script, fs::path("/x/y/s.jsonl"));
  EXPECT_EQ(c.provider.script_path, "/x/y/p.jsonl");
}

TEST(Config, DigestTracksBehaviourNotLocation) {
  auto a = RunConfig::load(kFix / "tabular/config.json");
  auto b = a;
  b.run_dir = "/elsewhere";
  apply_cassette_flag(b, "record:/tmp/some.jsonl");
  EXPECT_EQ(a.digest(), b.digest());
  b.seed += 1;
  EXPECT_NE(a.digest(), b.digest());
  auto c = a;
  c.budget.training.n_trials = 5;
  EXPECT_NE(a.digest(), c.digest());
  EXPECT_THROW(apply_cassette_flag(c, "rewind:x"), ConfigError);
}

TEST(Config, BudgetSharesByClass) {
  BudgetPolicy p;
  EXPECT_DOUBLE_EQ(p.total(CompetitionClass::tabular), 2 * kDay);
  EXPECT_DOUBLE_EQ(p.scaffold_share(CompetitionClass::tabular), kDay);
  EXPECT_DOUBLE_EQ(p.total(CompetitionClass::cv), 4 * kDay);
  EXPECT_DOUBLE_EQ(p.scaffold_share(CompetitionClass::nlp), 2 * kDay);
  EXPECT_DOUBLE_EQ(p.open_ended_share(CompetitionClass::cv), 2 * kDay);
  EXPECT_DOUBLE_EQ(p.scaled(p.total(CompetitionClass::tabular)), 2 * kDay / 1440.0);
  p.scale = 0;
  EXPECT_THROW(p.validate(), ConfigError);
}

// ---- bundles -------------------------------------------------------------

namespace {

void copy_bundle(const fs::path& to) {
  fs::copy(kFix / "tabular/bundle", to, fs::copy_options::recursive);
}

}  // namespace

TEST(Bundle, MissingFieldIsNamed) {
  TempDir t;
  copy_bundle(t / "b");
  auto j = read_json_file(t / "b/manifest.json");
  j.erase("metric");
  write_json_file(t / "b/manifest.json", j);
  try {
    ingest_bundle(t / "b");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("missing field \"metric\""), std::string::npos) << e.what();
  }
}

TEST(Bundle, SampleSubmissionIsRequiredButAnswersAreOptional) {
  TempDir t;
  copy_bundle(t / "b");
  fs::remove(t / "b/leaderboard.csv");
  auto b = ingest_bundle(t / "b");
  EXPECT_FALSE(b.evaluation_enabled());
  ASSERT_EQ(b.warnings.size(), 1u);
  EXPECT_NE(b.warnings[0].find("leaderboard.csv"), std::string::npos);
  EXPECT_FALSE(evaluate_submissions(b, {t / "b/sample_submission.csv"}).has_value());
  fs::remove(t / "b/sample_submission.csv");
  EXPECT_THROW(ingest_bundle(t / "b"), ConfigError);
}

// ---- training budget ------------------------------------------------------

TEST(TrainingBudget, TwentyFirstSearchTrialIsDenied) {
  TrainingCaps caps;
  TrainingBudget b(caps, 25.0);
  for (int t = 1; t <= 20; ++t) ASSERT_TRUE(b.admit({TrialKind::search, t, 30, 25.0}).admitted) << t;
  auto d = b.admit({TrialKind::search, 21, 30, 25.0});
  EXPECT_FALSE(d.admitted);
  EXPECT_EQ(d.reason, "trial 21 exceeds n_trials 20");
}

TEST(TrainingBudget, FiveFoldsOnceEachAfterASuccessfulSearch) {
  TrainingCaps caps;
  TrainingBudget b(caps, 25.0);
  const auto folds = fold_schedule(caps, 25.0);
  ASSERT_EQ(folds.size(), 5u);
  EXPECT_FALSE(b.admit(folds[0]).admitted);
  b.record_search_result(true);
  for (const auto& f : folds) EXPECT_TRUE(b.admit(f).admitted) << f.index;
  EXPECT_FALSE(b.admit(folds[2]).admitted);
  EXPECT_FALSE(b.admit({TrialKind::fold, 5, 30, 25.0}).admitted);
  EXPECT_FALSE(b.admit({TrialKind::tta, 0, 31, 25.0}).admitted);
  EXPECT_FALSE(b.admit({TrialKind::tta, 0, 30, 26.0}).admitted);
  EXPECT_TRUE(b.admit({TrialKind::tta, 3, 30, 25.0}).admitted);
}

TEST(TrainingBudget, StrategiesStayInsideTheSearchSpace) {
  TrainingCaps caps;
  const std::set<std::string> opts(caps.optimizers.begin(), caps.optimizers.end());
  for (const char* name : {"random", "local"}) {
    auto s = make_search(name, caps, 42, core::Direction::maximize);
    auto again = make_search(name, caps, 42, core::Direction::maximize);
    std::vector<TrialObservation> seen;
    for (int i = 0; i < 500; ++i) {
      auto p = s->propose(seen);
      auto q = again->propose(seen);
      ASSERT_EQ(p.learning_rate, q.learning_rate);
      ASSERT_GE(p.learning_rate, caps.lr_min * (1 - 1e-12));
      ASSERT_LE(p.learning_rate, caps.lr_max * (1 + 1e-12));
      ASSERT_TRUE(opts.count(p.optimizer)) << p.optimizer;
      seen.push_back({p, i % 3 == 0 ? std::nullopt : std::optional<double>(-std::abs(std::log10(p.learning_rate) + 3))});
    }
  }
}

TEST(TrainingBudget, LocalSearchConcentratesNearTheIncumbent) {
  TrainingCaps caps;
  auto s = make_local_search(caps, 9, core::Direction::maximize);
  std::vector<TrialObservation> seen;
  // Score peaks at lr = 1e-3.
  for (int i = 0; i < 20; ++i) {
    auto p = s->propose(seen);
    seen.push_back({p, -std::abs(std::log10(p.learning_rate) + 3)});
  }
  double best = -1e9;
  for (const auto& o : seen) best = std::max(best, *o.score);
  EXPECT_GT(best, -0.5);
}

// ---- end-to-end runs on fixtures -------------------------------------------

TEST(Setup, TabularWorkspaceHasNineArtifactsAndPassingTests) {
  TempDir t;
  auto r = run_fixture("tabular", "tabular", t / "run", false);
  ASSERT_TRUE(r.result.setup.complete) << r.result.manifest.body.dump(2);
  EXPECT_EQ(r.result.setup.artifacts.size(), 9u);
  for (const auto& a : r.result.setup.artifacts) {
    EXPECT_TRUE(fs::exists(r.ctx->workspace().path(a.path))) << a.path;
  }
  auto o = by_id(r.result.setup.outcomes);
  EXPECT_EQ(o.at("train_img_input_map").status, scaffold::StageStatus::skipped);
  EXPECT_EQ(o.at("metric").status, scaffold::StageStatus::success);
  EXPECT_FALSE(r.result.solve.has_value());
  EXPECT_TRUE(fs::exists(t / "run/manifest.json"));
  EXPECT_TRUE(r.result.manifest.verify());
}

TEST(Setup, RetriesAreVisibleInTheManifest) {
  TempDir t;
  auto r = run_fixture("tabular_retry", "tabular", t / "run", false);
  ASSERT_TRUE(r.result.setup.complete);
  auto o = by_id(r.result.setup.outcomes);
  EXPECT_EQ(o.at("train_target_map").attempts, 3);
  EXPECT_EQ(o.at("train_target_map").status, scaffold::StageStatus::success);
  const auto m = RunManifest::load(t / "run/manifest.json");
  bool seen = false;
  for (const auto& s : m.body.at("setup").at("outcomes")) {
    if (s.at("stage_id") == "train_target_map") seen = s.at("attempts") == 3;
  }
  EXPECT_TRUE(seen);
  EXPECT_TRUE(m.verify());
}

TEST(Setup, ExhaustedBudgetWritesAFailedManifest) {
  TempDir t;
  auto r = run_fixture("tabular_budget", "tabular", t / "run");
  const auto m = RunManifest::load(t / "run/manifest.json");
  EXPECT_EQ(m.body.at("status"), "failed");
  EXPECT_TRUE(m.body.at("setup").at("terminal_failure").is_string());
  EXPECT_FALSE(r.result.solve.has_value());
  EXPECT_TRUE(m.verify());
  const auto& bud = m.body.at("budgets");
  EXPECT_LE(bud.at("used").at("scaffold").get<double>(), bud.at("scaled").at("scaffold").get<double>() + 1e-9);
}

TEST(Solve, TabularToolRouteBlendsFromTheThirdValidSolution) {
  TempDir t;
  auto r = run_fixture("tabular", "tabular", t / "run");
  ASSERT_TRUE(r.result.solve && r.result.solve->ok) << r.result.manifest.body.dump(2);
  const auto& s = *r.result.solve;
  int valid_base = 0;
  bool blended = false;
  for (const auto& sol : s.solutions) {
    if (sol.kind == "blend") {
      EXPECT_EQ(valid_base, 3) << "first blend after " << valid_base << " valid solutions";
      blended = true;
      break;
    }
    if (sol.score) ++valid_base;
  }
  EXPECT_TRUE(blended);
  std::set<std::string> ids;
  for (const auto& sol : s.solutions) ids.insert(sol.id);
  for (const char* id : {"tool_ridge", "tool_knn", "tool_mean", "blend_3", "ensemble"}) EXPECT_TRUE(ids.count(id)) << id;
  ASSERT_EQ(s.seeds.size(), 1u);
  EXPECT_NE(s.seeds[0].summary.find("Ridge"), std::string::npos);
}

TEST(Solve, ExportedSubmissionsAreTheBestFourAndEvaluate) {
  TempDir t;
  auto r = run_fixture("tabular", "tabular", t / "run");
  ASSERT_TRUE(r.result.solve && r.result.solve->ok);
  const auto& ex = r.result.solve->exported;
  ASSERT_EQ(ex.size(), 4u);
  const auto metric = eval::metric_or_mse("rmse");
  double best_scaffold = 1e300;
  for (const auto& s : r.result.solve->solutions) {
    if (s.score) best_scaffold = std::min(best_scaffold, *s.score);
  }
  // The best scaffold solution leads unless a tree node reviewed better.
  const auto& top = r.result.solve->search->tree;
  double best_tree = 1e300;
  for (const auto* n : tree::top_nodes(top, 1)) best_tree = n->metric->value;
  EXPECT_NE(ex[0].filename().string().find(best_scaffold <= best_tree ? "rank1_" : "node"), std::string::npos);
  for (const auto& p : ex) EXPECT_TRUE(fs::exists(t / "run" / p)) << p;
  ASSERT_TRUE(r.result.evaluation);
  const auto& ev = *r.result.evaluation;
  EXPECT_EQ(ev.records.size(), 4u);
  EXPECT_EQ(ev.selection.selected.size(), 2u);
  EXPECT_GE(ev.quantile, 0.0);
  EXPECT_LE(ev.quantile, 100.0);
  EXPECT_EQ(ev.teams, 60);
  (void)metric;
}

TEST(Solve, ImageDeepRouteTrainsFoldsAndTta) {
  TempDir t;
  auto r = run_fixture("image", "image", t / "run");
  ASSERT_TRUE(r.result.solve && r.result.solve->ok) << r.result.manifest.body.dump(2);
  const auto& s = *r.result.solve;
  std::set<std::string> ids;
  for (const auto& sol : s.solutions) ids.insert(sol.id);
  for (int k = 1; k <= 3; ++k) {
    for (const char* kind : {"_search", "_cv", "_tta"}) {
      EXPECT_TRUE(ids.count("r" + std::to_string(k) + kind)) << k << kind;
    }
  }
  int denied = 0, folds = 0, tta = 0;
  for (const auto& e : s.events) {
    if (e.type == "denied" && e.detail.find("trial 21 exceeds n_trials 20") != std::string::npos) ++denied;
    if (e.type == "trial" && e.detail.find(" fold ") != std::string::npos) ++folds;
    if (e.type == "trial" && e.detail.find(" tta ") != std::string::npos) ++tta;
  }
  EXPECT_EQ(denied, 3);
  EXPECT_EQ(folds, 15);
  EXPECT_EQ(tta, 12);
  EXPECT_EQ(s.seeds.size(), 3u);
  auto o = by_id(s.outcomes);
  EXPECT_EQ(o.at("embedder_img_r2").status, scaffold::StageStatus::success);
  EXPECT_EQ(o.at("embedder_tab_r2").status, scaffold::StageStatus::skipped);
}

TEST(Solve, PhasesAreIsolatedAndBudgetsConserved) {
  TempDir t;
  auto r = run_fixture("image", "image", t / "run");
  ASSERT_TRUE(r.result.solve && r.result.solve->ok);
  const auto& s = *r.result.solve;
  // Every scaffold-phase event precedes the tree, and the ensemble is the
  // last scaffold stage.
  std::size_t resolved = s.events.size(), started = s.events.size();
  for (std::size_t i = 0; i < s.events.size(); ++i) {
    if (s.events[i].detail == "scaffold phase resolved") resolved = i;
    if (s.events[i].detail.rfind("open-ended phase started", 0) == 0) started = i;
  }
  ASSERT_LT(resolved, started);
  for (std::size_t i = started; i < s.events.size(); ++i) EXPECT_EQ(s.events[i].type, "phase");
  EXPECT_EQ(s.outcomes.back().stage_id, "ensemble");
  ASSERT_TRUE(s.search);
  EXPECT_GT(s.search->tree.size(), 0u);
  // Tree drafts saw the scaffold summaries.
  EXPECT_EQ(s.seeds.size(), 3u);

  auto& ctx = *r.ctx;
  EXPECT_DOUBLE_EQ(s.scaffold_time, ctx.scaffold_budget().used());
  EXPECT_LE(ctx.scaffold_budget().used(), ctx.scaffold_budget().total());
  EXPECT_LE(ctx.open_ended_budget().used(), ctx.open_ended_budget().total());
  const double total = ctx.config().budget.scaled(ctx.config().budget.total(CompetitionClass::cv));
  EXPECT_LE(ctx.scaffold_budget().used() + ctx.open_ended_budget().used(), total);
  EXPECT_TRUE(r.result.manifest.body.at("budgets").at("within_total").get<bool>());
}

TEST(Replay, RecordedRunReplaysToTheSameManifestHash) {
  TempDir t;
  const auto cas = (t / "cassette.jsonl").string();
  auto rec = run_fixture("tabular", "tabular", t / "rec", true, "record:" + cas);
  ASSERT_TRUE(fs::exists(cas));
  auto rep = run_fixture("tabular", "tabular", t / "rep", true, "replay:" + cas);
  EXPECT_EQ(rec.result.manifest.hash, rep.result.manifest.hash);
  EXPECT_EQ(rep.result.manifest.body.at("status"), "complete");
  auto again = run_fixture("tabular", "tabular", t / "again");
  EXPECT_EQ(again.result.manifest.hash, rec.result.manifest.hash);
  // Manifests carry no absolute paths.
  EXPECT_EQ(rec.result.manifest.body.dump().find(t.path().string()), std::string::npos);
}

TEST(Replay, MissingCassetteEntryFailsTheRun) {
  TempDir t;
  write_text_file(t / "empty.jsonl", "");
  auto r = run_fixture("tabular", "tabular", t / "run", true, "replay:" + (t / "empty.jsonl").string());
  EXPECT_EQ(r.result.manifest.body.at("status"), "failed");
  EXPECT_NE(r.result.manifest.body.value("failure", "").find("replay"), std::string::npos)
      << r.result.manifest.body.value("failure", "");
}

TEST(Replay, ImageRunIsDeterministic) {
  TempDir t;
  auto a = run_fixture("image", "image", t / "a");
  auto b = run_fixture("image", "image", t / "b");
  EXPECT_EQ(a.result.manifest.hash, b.result.manifest.hash);
}

TEST(Manifest, TamperingIsDetected) {
  TempDir t;
  auto r = run_fixture("tabular", "tabular", t / "run", false);
  auto m = RunManifest::load(t / "run/manifest.json");
  EXPECT_TRUE(m.verify());
  m.body["seeds"]["run"] = 99;
  EXPECT_FALSE(m.verify());
}

// ---- report ---------------------------------------------------------------

TEST(Report, TablesAndSkippedComparison) {
  TempDir t;
  auto r = run_fixture("tabular", "tabular", t / "run");
  ReportInputs in;
  in.rows = rows_from_manifests({r.result.manifest});
  in.stage_runs = {stage_outcomes_of(r.result.manifest)};
  auto s = emit_report(in, t / "rep");
  EXPECT_TRUE(s.comparison_skipped.has_value());
  EXPECT_TRUE(s.stages.has_value());
  for (const char* f : {"results.csv", "quantiles.csv", "medal_counts.csv", "stage_outcomes.json", "summary.md"}) {
    EXPECT_TRUE(fs::exists(t / "rep" / f)) << f;
  }
  EXPECT_FALSE(fs::exists(t / "rep/ratings.csv"));
  const auto res = read_csv(t / "rep/results.csv");
  ASSERT_EQ(res.rows.size(), 1u);
  EXPECT_EQ(res.rows[0][*res.column("method")], "kolb");
}

TEST(Report, ComparisonAndRatingsWhenInputsAllow) {
  TempDir t;
  write_text_file(t / "results.csv",
                  "method,competition_id,quantile,medal\n"
                  "a,c1,90,gold\na,c2,85,silver\na,c3,95,gold\na,c4,88,bronze\n"
                  "b,c1,60,none\nb,c2,55,none\nb,c3,50,none\nb,c4,58,none\n"
                  "c,c1,30,none\nc,c2,20,none\nc,c3,25,none\nc,c4,10,none\n");
  write_text_file(t / "contests.csv",
                  "competition_id,participant,rank,timestamp\n"
                  "c1,a,1,1\nc1,b,2,1\nc1,c,3,1\nc2,a,1,2\nc2,c,2,2\nc2,b,3,2\n");
  ReportInputs in;
  in.rows = load_result_rows(t / "results.csv");
  in.contests = t / "contests.csv";
  auto s = emit_report(in, t / "rep");
  ASSERT_TRUE(s.comparison.has_value());
  EXPECT_EQ(s.comparison->methods.size(), 3u);
  EXPECT_LT(s.comparison->average_ranks[0], s.comparison->average_ranks[2]);
  ASSERT_TRUE(s.ratings.has_value());
  EXPECT_GT(s.ratings->state.at("a").mu, s.ratings->state.at("b").mu);
  EXPECT_TRUE(fs::exists(t / "rep/comparison.json"));
  EXPECT_TRUE(fs::exists(t / "rep/difficulty.csv"));
  const auto mc = read_csv(t / "rep/medal_counts.csv");
  EXPECT_EQ(mc.rows[0][*mc.column("gold")], "2");
}

// ---- seeding ablation -------------------------------------------------------

TEST(Ablation, SeededTreesFindBetterSolutions) {
  TempDir t;
  AblationOptions o;
  ASSERT_GE(o.pairs, 100);
  tree::AbstractionSeed seeds{{"gradient boosting on target-encoded categoricals", Json{{"a/submission.csv", 0.7}}}};
  auto r = run_seeding_ablation(o, seeds, t.path());
  ASSERT_EQ(r.seeded.size(), 100u);
  EXPECT_GT(r.mean_seeded, r.mean_unseeded);
  EXPECT_GT(r.welch.t, 0.0);
  EXPECT_LT(r.welch.p, 0.05);
}

TEST(Ablation, EqualDraftQualityGivesIdenticalPairs) {
  TempDir t;
  AblationOptions o;
  o.pairs = 10;
  o.seeded_mean = o.unseeded_mean;
  tree::AbstractionSeed seeds{{"summary", Json::object()}};
  auto r = run_seeding_ablation(o, seeds, t.path());
  EXPECT_EQ(r.seeded, r.unseeded);
}

// ---- engine-side drivers under a real interpreter ----------------------------

namespace {

void tabular_workspace(const fs::path& ws, int n_train, int n_test) {
  fs::create_directories(ws);
  std::string in = "id,x1,x2\n", tg = "id,price\n", te = "id,x1,x2\n", sample = "id,price\n", valid = "id\n";
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  for (int i = 0; i < n_train; ++i) {
    const double a = nd(rng), b = nd(rng);
    in += std::to_string(i) + "," + format_double(a) + "," + format_double(b) + "\n";
    tg += std::to_string(i) + "," + format_double(10 + 3 * a - 2 * b + 0.1 * nd(rng)) + "\n";
    if (i % 5 == 0) valid += std::to_string(i) + "\n";
  }
  for (int i = 0; i < n_test; ++i) {
    te += std::to_string(1000 + i) + "," + format_double(nd(rng)) + "," + format_double(nd(rng)) + "\n";
    sample += std::to_string(1000 + i) + ",0\n";
  }
  write_text_file(ws / "train_tab_input_map.csv", in);
  write_text_file(ws / "train_tab_target_map.csv", tg);
  write_text_file(ws / "test_tab_input_map.csv", te);
  write_text_file(ws / "sample_submission.csv", sample);
  write_text_file(ws / "_valid_ids.csv", valid);
}

double valid_rmse(const fs::path& ws, const fs::path& valid) {
  const auto targets = eval::read_predictions(ws / "train_tab_target_map.csv");
  const auto p = eval::read_predictions(valid);
  eval::PredictionTable t;
  t.id_column = targets.id_column;
  t.columns = targets.columns;
  std::set<std::string> keep(p.ids.begin(), p.ids.end());
  for (std::size_t r = 0; r < targets.rows(); ++r) {
    if (!keep.count(targets.ids[r])) continue;
    t.ids.push_back(targets.ids[r]);
    t.values.push_back(targets.at(r, 0));
  }
  return eval::metric_or_mse("rmse").fn(t, eval::align_to(t, p));
}

}  // namespace

TEST(Drivers, TabularBaselineRunsUnderPython) {
  if (!python_has("pandas")) GTEST_SKIP() << "python3 with pandas unavailable";
  TempDir t;
  tabular_workspace(t / "ws", 100, 12);
  exec::ProcessExecutor ex;
  std::map<std::string, double> rmse;
  for (const char* preset : {"ridge", "knn", "mean"}) {
    exec::ExecRequest req;
    req.code = kTabularBaseline;
    req.working_dir = t / "ws";
    req.time_limit = 120;
    req.env = {{"KOLB_OUT", std::string("out_") + preset}, {"KOLB_PRESET", preset}};
    auto r = ex.execute(req);
    ASSERT_TRUE(r.ok()) << r.log();
    const auto sub = eval::read_predictions(t / "ws" / ("out_" + std::string(preset)) / "submission.csv",
                                            std::vector<std::string>{"id", "price"});
    EXPECT_EQ(sub.rows(), 12u);
    rmse[preset] = valid_rmse(t / "ws", t / "ws" / ("out_" + std::string(preset)) / "valid.csv");
  }
  EXPECT_LT(rmse["ridge"], 0.5);
  EXPECT_LT(rmse["ridge"], rmse["knn"]);
  EXPECT_LT(rmse["knn"], rmse["mean"]);
}

TEST(Drivers, TrainDriverHonoursTheModuleContract) {
  if (!python_has("torch") || !python_has("pandas")) GTEST_SKIP() << "python3 with torch and pandas unavailable";
  TempDir t;
  tabular_workspace(t / "ws", 60, 8);
  write_text_file(t / "ws/code_feature_engineering_tab.py",
                  "def transform(df):\n    return df.to_numpy(dtype='float32')\n");
  write_text_file(t / "ws/code_embedder_tab.py",
                  "import torch\n"
                  "class E(torch.nn.Module):\n"
                  "    def __init__(self, d):\n"
                  "        super().__init__()\n"
                  "        self.lin = torch.nn.Linear(d, 8)\n"
                  "        self.out_dim = 8\n"
                  "    def forward(self, x):\n"
                  "        return torch.relu(self.lin(x))\n"
                  "def make_embedder(example):\n    return E(example.shape[1])\n");
  write_text_file(t / "ws/code_model_head.py",
                  "import torch\n"
                  "def make_head(in_dim, n_targets):\n    return torch.nn.Linear(in_dim, n_targets)\n"
                  "def loss_fn(pred, target):\n    return torch.nn.functional.mse_loss(pred, target)\n");
  write_text_file(t / "ws/code_submission_format.py", "def format_submission(preds):\n    return preds\n");
  exec::ProcessExecutor ex;
  for (const char* mode : {"search", "fold"}) {
    exec::ExecRequest req;
    req.code = kTrainDriver;
    req.working_dir = t / "ws";
    req.time_limit = 300;
    req.env = {{"KOLB_OUT", std::string("out_") + mode}, {"KOLB_MODE", mode}, {"KOLB_MAX_EPOCHS", "40"},
               {"KOLB_LR", "0.01"}, {"KOLB_FOLD", "1"}};
    auto r = ex.execute(req);
    ASSERT_TRUE(r.ok()) << r.log();
    EXPECT_NE(r.stdout_tail.find("done " + std::string(mode)), std::string::npos);
    const auto out = t / "ws" / ("out_" + std::string(mode));
    EXPECT_EQ(eval::read_predictions(out / "submission.csv", std::vector<std::string>{"id", "price"}).rows(), 8u);
    EXPECT_EQ(eval::read_predictions(out / "valid.csv").rows(), 12u);
  }
}
