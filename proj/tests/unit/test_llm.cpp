#include <gtest/gtest.h>

#include "kolb/llm/gateway.hpp"
#include "kolb/llm/parse.hpp"
#include "kolb/llm/prompt_template.hpp"
#include "kolb/llm/providers.hpp"
#include "kolb/util/error.hpp"
#include "temp_dir.hpp"

using namespace kolb;
using namespace kolb::llm;

TEST(Template, RendersSlotsInOnePass) {
  PromptTemplate t("t", "Plan: {plan} / Task: {task}");
  // A slot value that looks like a placeholder is copied verbatim.
  auto out = render_prompt(t, {{"plan", "{task}"}, {"task", "X"}});
  EXPECT_EQ(out, "Plan: {task} / Task: X");
}

TEST(Template, UnboundSlotNamesTheSlot) {
  PromptTemplate t("draft", "Hello {who}");
  try {
    render_prompt(t, {});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("'who'"), std::string::npos);
  }
}

TEST(Template, LiteralBracesAndJsonSurvive) {
  PromptTemplate t("t", R"(Reply {"a": 1} or {{x}} with {v})");
  EXPECT_EQ(t.required_slots(), std::vector<std::string>{"v"});
  EXPECT_EQ(render_prompt(t, {{"v", "1"}}), R"(Reply {"a": 1} or {x} with 1)");
}

TEST(Template, DeclaredSlotsMustCoverPlaceholders) {
  EXPECT_THROW(PromptTemplate("t", "{a} {b}", {"a"}), ConfigError);
  EXPECT_NO_THROW(PromptTemplate("t", "{a}", {"a", "extra"}));
}

TEST(Template, DefaultsCoverStageAndTreePrompts) {
  auto cat = TemplateCatalog::with_defaults();
  for (const char* id : {"understand_competition", "write_stage_code", "analyse_error", "tree_draft", "tree_improve",
                         "tree_debug", "tree_review", "select_ensemble"}) {
    EXPECT_TRUE(cat.contains(id)) << id;
  }
  EXPECT_THROW(cat.get("missing"), ConfigError);
}

TEST(Template, OverridesReplaceBuiltins) {
  kolb::testing::TempDir dir;
  write_text_file(dir / "o.json", R"({"tree_review": "Log: {exec_log}", "custom": {"body": "{a}", "required_slots": ["a"]}})");
  auto cat = TemplateCatalog::with_defaults();
  cat.load_overrides(dir / "o.json");
  EXPECT_EQ(cat.get("tree_review").body(), "Log: {exec_log}");
  EXPECT_TRUE(cat.contains("custom"));
}

TEST(Parse, FencedBlockDropsLanguageTag) {
  auto code = extract_fenced_block("text\n```python\nprint(1)\n```\nmore");
  ASSERT_TRUE(code);
  EXPECT_EQ(*code, "print(1)");
  EXPECT_FALSE(extract_fenced_block("no fence"));
  EXPECT_EQ(count_fenced_blocks("```\na\n```\ntext\n```py\nb\n```\n"), 2u);
}

TEST(Parse, MappingFromBareOrFencedJson) {
  ParseSpec spec;
  spec.kind = ParseKind::structured_mapping;
  spec.required_keys = {"success"};
  auto a = parse_structured(R"(Sure: {"success": true} done)", spec, nullptr);
  EXPECT_TRUE(a.value.at("success").get<bool>());
  auto b = parse_structured("```json\n{\"success\": false}\n```", spec, nullptr);
  EXPECT_FALSE(b.value.at("success").get<bool>());
}

TEST(Parse, RetriesUntilWellFormed) {
  ParseSpec spec;
  spec.kind = ParseKind::structured_mapping;
  int calls = 0;
  auto out = parse_structured("garbage", spec, [&](const std::string& err) {
    EXPECT_FALSE(err.empty());
    return ++calls < 3 ? std::string("still bad") : std::string(R"({"k": 1})");
  });
  EXPECT_EQ(out.attempts, 4);
  EXPECT_EQ(out.value.at("k"), 1);
}

TEST(Parse, BudgetOfFiveRetriesThenFormatError) {
  ParseSpec spec;
  spec.kind = ParseKind::fenced_code_block;
  int calls = 0;
  try {
    parse_structured("nothing", spec, [&](const std::string&) {
      ++calls;
      return std::string("still nothing");
    });
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(calls, 5);
    EXPECT_EQ(e.attempt_digests().size(), 6u);
  }
}

TEST(Parse, ValidatorRejectionCountsAsMalformed) {
  ParseSpec spec;
  spec.kind = ParseKind::structured_mapping;
  spec.validate = [](const Json& j) -> std::optional<std::string> {
    if (!j.at("v").is_number()) return "v must be numeric";
    return std::nullopt;
  };
  auto out = parse_structured(R"({"v": "x"})", spec, [](const std::string& err) {
    EXPECT_NE(err.find("numeric"), std::string::npos);
    return std::string(R"({"v": 2})");
  });
  EXPECT_EQ(out.attempts, 2);
}

TEST(Cassette, RecordThenReplayWithoutProvider) {
  kolb::testing::TempDir dir;
  auto scripted = std::make_shared<ScriptedProvider>(
      std::vector<ScriptedProvider::Entry>{{"a", "first"}, {"a", "second"}, {"*", "other"}});
  Gateway rec(scripted, GatewayOptions{CassetteMode::record});
  EXPECT_EQ(rec.complete("p1", "a"), "first");
  EXPECT_EQ(rec.complete("p1", "a"), "second");
  EXPECT_EQ(rec.complete("p2", "b"), "other");
  rec.cassette().save(dir / "c.jsonl");

  Gateway rep(nullptr, GatewayOptions{CassetteMode::replay}, Cassette::load(dir / "c.jsonl"));
  EXPECT_EQ(rep.complete("p1", "a"), "first");
  EXPECT_EQ(rep.complete("p1", "a"), "second");
  EXPECT_EQ(rep.complete("p2", "b"), "other");
  EXPECT_EQ(rep.provider_calls(), 0u);
  EXPECT_THROW(rep.complete("p1", "a"), ReplayMissError);
}

TEST(Cassette, MissNamesFingerprint) {
  Gateway rep(nullptr, GatewayOptions{CassetteMode::replay});
  try {
    rep.complete("unknown", "t");
    FAIL();
  } catch (const ReplayMissError& e) {
    EXPECT_EQ(e.fingerprint(), Cassette::fingerprint("unknown"));
  }
}

TEST(Gateway, RetriesTransportErrorsThenGivesUp) {
  int calls = 0;
  auto flaky = std::make_shared<FunctionProvider>([&](const CompletionRequest&) -> std::string {
    if (++calls < 3) throw TransportError("503");
    return "ok";
  });
  Gateway g(flaky, GatewayOptions{CassetteMode::passthrough, 3});
  EXPECT_EQ(g.complete("p", "t"), "ok");
  EXPECT_EQ(calls, 3);

  auto dead = std::make_shared<FunctionProvider>([](const CompletionRequest&) -> std::string {
    throw TransportError("down");
  });
  Gateway g2(dead, GatewayOptions{CassetteMode::passthrough, 2});
  EXPECT_THROW(g2.complete("p", "t"), EpisodeError);
  EXPECT_EQ(g2.provider_calls(), 3u);
}

TEST(Gateway, NoProviderOutsideReplayIsConfigError) {
  EXPECT_THROW(Gateway(nullptr, GatewayOptions{CassetteMode::record}), ConfigError);
}

namespace {
class FakeTransport : public HttpTransport {
 public:
  HttpResponse next;
  std::string last_body;
  std::map<std::string, std::string> last_headers;
  HttpResponse post(const std::string&, const std::string& body, const std::map<std::string, std::string>& headers,
                    double) override {
    last_body = body;
    last_headers = headers;
    return next;
  }
};
}  // namespace

TEST(HttpProvider, WireFormatAndStatusMapping) {
  ProviderConfig cfg;
  cfg.kind = "http";
  cfg.endpoint = "http://localhost:1/v1/chat/completions";
  cfg.model = "m";
  cfg.api_key_env = "KOLB_TEST_KEY_UNSET";
  auto transport = std::make_shared<FakeTransport>();
  HttpChatProvider p(cfg, transport);
  transport->next = {200, R"({"choices":[{"message":{"role":"assistant","content":"hi"}}]})"};
  EXPECT_EQ(p.complete({"hello", "t"}), "hi");
  auto body = Json::parse(transport->last_body);
  EXPECT_EQ(body.at("model"), "m");
  EXPECT_EQ(body.at("messages")[0].at("content"), "hello");
  EXPECT_EQ(body.at("temperature"), 0.0);

  transport->next = {429, "slow down"};
  EXPECT_THROW(p.complete({"hello", "t"}), TransportError);
  transport->next = {400, "bad"};
  EXPECT_THROW(p.complete({"hello", "t"}), EpisodeError);
}

TEST(ProviderConfig, DigestTracksSamplingAndRoundTrips) {
  ProviderConfig a;
  a.model = "m";
  ProviderConfig b = a;
  EXPECT_EQ(a.digest(), b.digest());
  b.temperature = 0.5;
  EXPECT_NE(a.digest(), b.digest());
  EXPECT_EQ(ProviderConfig::from_json(a.to_json()).digest(), a.digest());
}

TEST(ScriptedProvider, LastEntryRepeats) {
  ScriptedProvider p({{"t", "1"}, {"t", "2"}});
  EXPECT_EQ(p.complete({"x", "t"}), "1");
  EXPECT_EQ(p.complete({"x", "t"}), "2");
  EXPECT_EQ(p.complete({"x", "t"}), "2");
  EXPECT_THROW(p.complete({"x", "unknown"}), EpisodeError);
}
