#include <gtest/gtest.h>

#include "kolb/core/cycle.hpp"
#include "kolb/llm/providers.hpp"
#include "kolb/util/error.hpp"
#include "temp_dir.hpp"

using namespace kolb;
using namespace kolb::core;

namespace {

struct Harness {
  std::shared_ptr<llm::ScriptedProvider> provider;
  llm::Gateway gateway;
  llm::TemplateCatalog templates;
  explicit Harness(std::vector<llm::ScriptedProvider::Entry> entries)
      : provider(std::make_shared<llm::ScriptedProvider>(std::move(entries))),
        gateway(provider, llm::GatewayOptions{}) {
    templates.add(llm::PromptTemplate("think", "Think about {task}"));
    templates.add(llm::PromptTemplate("plan", "Plan given {thought}"));
    templates.add(llm::PromptTemplate("code", "Write code. Last error: {last_error}"));
  }
  CycleContext ctx(std::string stage = "s") { return CycleContext{gateway, templates, {}, std::move(stage)}; }
};

InternalState fresh() { return InternalState(TaskSpec{"predict prices", {{"metric", "rmse"}}}); }

}  // namespace

TEST(Feedback, BodyCappedAtTruncationLimit) {
  std::string big(kTruncationCap * 3, 'x');
  big += "TAIL";
  auto fb = Feedback::exec_log(false, big);
  EXPECT_EQ(fb.body().size(), kTruncationCap);
  EXPECT_EQ(fb.body().substr(fb.body().size() - 4), "TAIL");
}

TEST(Feedback, JsonRoundTripKeepsScore) {
  auto fb = Feedback::validation_score(true, "ok", Score{0.41, Direction::minimize});
  auto back = Feedback::from_json(fb.to_json());
  ASSERT_TRUE(back.score());
  EXPECT_DOUBLE_EQ(back.score()->value, 0.41);
  EXPECT_EQ(back.score()->direction, Direction::minimize);
}

TEST(State, HistoryAdvancesStepAndTracksBestScore) {
  auto s = fresh();
  for (double v : {0.5, 0.3, 0.4}) {
    HistoryEntry e;
    e.feedback = Feedback::validation_score(true, "", Score{v, Direction::minimize});
    s.append_history(e);
  }
  EXPECT_EQ(s.step_index(), 3u);
  EXPECT_DOUBLE_EQ(s.best_score()->value, 0.3);
  EXPECT_EQ(s.scores().size(), 3u);
}

TEST(State, DigestStableAcrossJsonRoundTrip) {
  auto s = fresh();
  s.set_scratch("plan", "p");
  s.add_abstraction({"task_summary", "sum"});
  HistoryEntry e;
  e.feedback = Feedback::unit_test(false, "boom");
  s.append_history(e);
  auto back = InternalState::from_json(s.to_json());
  EXPECT_EQ(back.digest(), s.digest());
  s.set_scratch("plan", "q");
  EXPECT_NE(back.digest(), s.digest());
}

TEST(Direction, ParsesSynonyms) {
  EXPECT_EQ(parse_direction("maximise"), Direction::maximize);
  EXPECT_EQ(parse_direction("min"), Direction::minimize);
  EXPECT_THROW(parse_direction("sideways"), ConfigError);
  EXPECT_TRUE(better(2, 1, Direction::maximize));
  EXPECT_TRUE(better(1, 2, Direction::minimize));
  EXPECT_FALSE(better(1, 1, Direction::minimize));
}

TEST(Intrinsics, ChainFeedsLaterStepsAndLeavesHistory) {
  Harness h({{"think", "T1"}, {"plan", "P1"}});
  std::vector<IntrinsicStep> steps = {{"think", IntrinsicKind::think, "think", "thought"},
                                      {"plan", IntrinsicKind::plan, "plan", "plan"}};
  auto ctx = h.ctx();
  auto out = compose_intrinsics(steps, fresh(), ctx);
  EXPECT_EQ(out.scratch().at("thought"), "T1");
  EXPECT_EQ(out.scratch().at("plan"), "P1");
  EXPECT_EQ(out.step_index(), 0u);
  auto reqs = h.provider->requests();
  ASSERT_EQ(reqs.size(), 2u);
  EXPECT_EQ(reqs[1].prompt, "Plan given T1");
}

TEST(Intrinsics, EmptyChainOrUnknownTemplateIsConfigError) {
  Harness h({});
  auto ctx = h.ctx();
  std::vector<IntrinsicStep> none;
  EXPECT_THROW(compose_intrinsics(none, fresh(), ctx), ConfigError);
  std::vector<IntrinsicStep> bad = {{"x", IntrinsicKind::think, "nope", "y"}};
  EXPECT_THROW(compose_intrinsics(bad, fresh(), ctx), ConfigError);
}

TEST(Cycle, DigestsChainAcrossCycles) {
  Harness h({{"think", "T"}, {"plan", "P"}, {"code", "```python\nprint(1)\n```"}});
  std::vector<IntrinsicStep> steps = {{"think", IntrinsicKind::think, "think", "thought"},
                                      {"plan", IntrinsicKind::plan, "plan", "plan"}};
  auto req = make_action_request(ActionKind::emit_code, "code");
  EpisodeTrace trace("ep");
  auto ctx = h.ctx();
  InternalState s = fresh();
  int n = 0;
  EnvCallback env = [&](const ActionResult& a) {
    EXPECT_EQ(a.parsed->get<std::string>(), "print(1)");
    ++n;
    return Feedback::exec_log(n >= 3, "Traceback: attempt " + std::to_string(n));
  };
  for (int i = 0; i < 3; ++i) s = run_cycle(s, steps, req, env, ctx, &trace).state;
  EXPECT_EQ(s.step_index(), 3u);
  EXPECT_TRUE(trace.digests_chain());
  EXPECT_EQ(trace.cycles().size(), 3u);
  EXPECT_EQ(trace.cycles()[0].intrinsic_outputs.at("plan"), "P");
  // The second attempt's action prompt carries the first failure.
  bool saw = false;
  for (const auto& r : h.provider->requests()) saw |= r.prompt.find("Traceback: attempt 1") != std::string::npos;
  EXPECT_TRUE(saw);
  EXPECT_EQ(s.history()[0].action_content, "print(1)");
}

TEST(Cycle, TimeoutBecomesFailedFeedback) {
  Harness h({llm::ScriptedProvider::Entry{"code", "```\nwhile True: pass\n```"}});
  auto ctx = h.ctx();
  auto req = make_action_request(ActionKind::emit_code, "code");
  EnvCallback env = [](const ActionResult&) -> Feedback { throw TimeoutError("exceeded 1s"); };
  auto r = run_cycle(fresh(), {}, req, env, ctx);
  EXPECT_FALSE(r.feedback.success());
  EXPECT_NE(r.feedback.body().find("timeout"), std::string::npos);
}

TEST(Cycle, EnvironmentFailureIsTracedAndRethrown) {
  Harness h({llm::ScriptedProvider::Entry{"code", "```\nx\n```"}});
  auto ctx = h.ctx();
  EpisodeTrace trace;
  auto req = make_action_request(ActionKind::emit_code, "code");
  EnvCallback env = [](const ActionResult&) -> Feedback { throw SpawnError("no interpreter"); };
  EXPECT_THROW(run_cycle(fresh(), {}, req, env, ctx, &trace), SpawnError);
  ASSERT_EQ(trace.cycles().size(), 1u);
  EXPECT_NE(trace.cycles()[0].error.find("no interpreter"), std::string::npos);
  EXPECT_TRUE(trace.digests_chain());
}

TEST(Cycle, SelectSubsetRequiresSelectedKey) {
  Harness h({{"code", R"({"other": 1})"}, {"code", R"({"selected": ["a"]})"}});
  auto ctx = h.ctx();
  auto req = make_action_request(ActionKind::select_subset, "code");
  auto a = act(fresh(), req, ctx);
  EXPECT_EQ(a.attempts, 2);
  EXPECT_EQ(a.parsed->at("selected")[0], "a");
}

TEST(Context, HistoryWindowIsStageScoped) {
  auto s = fresh();
  for (int i = 0; i < 5; ++i) {
    HistoryEntry e;
    e.stage = i % 2 ? "b" : "a";
    e.action_content = "act" + std::to_string(i);
    e.feedback = Feedback::unit_test(false, "err" + std::to_string(i));
    s.append_history(e);
  }
  auto slots = build_context(s, {{"stage_id", "a"}});
  EXPECT_EQ(slots.at("last_error"), "err4");
  EXPECT_EQ(slots.at("history").find("act1"), std::string::npos);
  EXPECT_NE(slots.at("history").find("act0"), std::string::npos);
  EXPECT_EQ(slots.at("meta_metric"), "rmse");
}

TEST(Trace, SerializeLoadRoundTrip) {
  kolb::testing::TempDir dir;
  EpisodeTrace t("ep1");
  auto a = fresh();
  auto b = a;
  b.set_scratch("k", "v");
  t.append_update("setup", a, b, "scratch");
  t.set_terminal_status("success");
  auto path = t.write(dir.path());
  EXPECT_EQ(path.filename().string().rfind("ep1-", 0), 0u);
  auto back = EpisodeTrace::load(path);
  EXPECT_EQ(back.digest(), t.digest());
  EXPECT_EQ(back.terminal_status(), "success");
}
