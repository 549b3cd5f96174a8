#include <gtest/gtest.h>

#include <fstream>

#include "kolb/exec/sandbox.hpp"
#include "kolb/util/error.hpp"
#include "kolb/util/hash.hpp"
#include "temp_dir.hpp"

using namespace kolb;
using namespace kolb::exec;

namespace {
ExecRequest make(const kolb::testing::TempDir& dir, std::string code, double limit = 10.0) {
  ExecRequest r;
  r.code = std::move(code);
  r.working_dir = dir.path();
  r.time_limit = limit;
  return r;
}
}  // namespace

TEST(Process, CapturesStdoutAndExitStatus) {
  kolb::testing::TempDir dir;
  ProcessExecutor ex;
  auto r = ex.execute(make(dir, "print('ok')"));
  EXPECT_EQ(r.exit_status, 0);
  EXPECT_EQ(r.stdout_tail, "ok\n");
  EXPECT_FALSE(r.timed_out);
  auto bad = ex.execute(make(dir, "import sys\nsys.stderr.write('boom')\nsys.exit(3)"));
  EXPECT_EQ(bad.exit_status, 3);
  EXPECT_EQ(bad.stderr_tail, "boom");
  EXPECT_EQ(ex.spawn_count(), 2u);
}

TEST(Process, KillsAtTimeLimit) {
  kolb::testing::TempDir dir;
  ProcessExecutor ex;
  auto r = ex.execute(make(dir, "while True:\n    pass\n", 1.0));
  EXPECT_TRUE(r.timed_out);
  EXPECT_GE(r.duration, 1.0);
  EXPECT_LT(r.duration, 5.0);
  EXPECT_NE(r.exit_status, 0);
  EXPECT_FALSE(r.ok());
}

TEST(Process, KillsChildProcessesToo) {
  kolb::testing::TempDir dir;
  ProcessExecutor ex;
  auto r = ex.execute(make(dir, "import subprocess\nsubprocess.run(['sleep', '30'])\n", 1.0));
  EXPECT_TRUE(r.timed_out);
  EXPECT_LT(r.duration, 5.0);
}

TEST(Process, TruncatesLargeStreamKeepingTail) {
  kolb::testing::TempDir dir;
  ProcessExecutor ex;
  auto r = ex.execute(make(dir, "import sys\nsys.stderr.write('x' * (1 << 20) + 'FINAL-BYTES')\n"));
  EXPECT_TRUE(r.truncated);
  EXPECT_LE(r.stderr_tail.size(), kTruncationCap);
  EXPECT_EQ(r.stderr_tail.substr(r.stderr_tail.size() - 11), "FINAL-BYTES");
}

TEST(Process, RunsInWorkingDirAndPassesEnv) {
  kolb::testing::TempDir dir;
  ProcessExecutor ex;
  auto req = make(dir, "import os\nopen('out.txt','w').write(os.environ['KOLB_X'])\nprint(os.getcwd())");
  req.env["KOLB_X"] = "42";
  auto r = ex.execute(req);
  ASSERT_EQ(r.exit_status, 0) << r.stderr_tail;
  std::ifstream in(dir / "out.txt");
  std::string v;
  in >> v;
  EXPECT_EQ(v, "42");
}

TEST(Process, ParentDirectoryWriteIsContained) {
  kolb::testing::TempDir outer;
  auto inner = outer.path() / "work";
  std::filesystem::create_directories(inner);
  ProcessExecutor ex;
  ExecRequest req;
  req.working_dir = inner;
  req.code = "open('../escape.txt', 'w').write('x')\n";
  auto r = ex.execute(req);
  if (!ex.confinement_active()) GTEST_SKIP() << "kernel does not support write confinement";
  EXPECT_NE(r.exit_status, 0);
  EXPECT_FALSE(std::filesystem::exists(outer.path() / "escape.txt"));
  EXPECT_NE(r.stderr_tail.find("PermissionError"), std::string::npos);
}

TEST(Process, SpawnFailureIsDistinctFromCodeFailure) {
  kolb::testing::TempDir dir;
  ProcessExecutor ex;
  auto req = make(dir, "print(1)");
  req.interpreter = {"kolb-no-such-interpreter"};
  EXPECT_THROW(ex.execute(req), SpawnError);
  req.interpreter = {"/nonexistent/python"};
  EXPECT_THROW(ex.execute(req), SpawnError);
}

TEST(Process, RejectsInvalidRequests) {
  kolb::testing::TempDir dir;
  ProcessExecutor ex;
  EXPECT_THROW(ex.execute(make(dir, "", 0.0)), ConfigError);
  auto req = make(dir, "");
  req.working_dir = dir / "missing";
  EXPECT_THROW(ex.execute(req), ConfigError);
}

TEST(Simulated, MatchesByOrdinalHashAndTag) {
  kolb::testing::TempDir dir;
  SimScript script = SimScript::from_json_lines({
      Json::parse(R"({"ordinal": 1, "result": {"exit_status": 1, "stderr": "fail-1"}})"),
      Json::parse(R"({"code_sha256": ")" + sha256_hex("print(2)") + R"(", "result": {"stdout": "hash-hit"}})"),
      Json::parse(R"({"tag": "train", "result": {"stdout": "tagged"}, "files": {"out/${RUN}.csv": "id\n1\n"}})"),
  });
  SimulatedExecutor ex(script);
  auto r1 = ex.execute(make(dir, "anything"));
  EXPECT_EQ(r1.exit_status, 1);
  EXPECT_EQ(ex.execute(make(dir, "print(2)")).stdout_tail, "hash-hit");
  auto req = make(dir, "# sim-tag: train\nfit()");
  req.env["RUN"] = "r7";
  EXPECT_EQ(ex.execute(req).stdout_tail, "tagged");
  EXPECT_TRUE(std::filesystem::exists(dir / "out/r7.csv"));
  EXPECT_EQ(ex.spawn_count(), 0u);
  EXPECT_EQ(ex.calls(), 3u);
}

TEST(Simulated, OrdinalSequenceFailFailPass) {
  kolb::testing::TempDir dir;
  SimScript script;
  for (std::size_t i = 1; i <= 3; ++i) {
    SimEntry e;
    e.ordinal = i;
    e.result.exit_status = i < 3 ? 1 : 0;
    script.add(e);
  }
  SimulatedExecutor ex(script);
  EXPECT_FALSE(ex.execute(make(dir, "x")).ok());
  EXPECT_FALSE(ex.execute(make(dir, "x")).ok());
  EXPECT_TRUE(ex.execute(make(dir, "x")).ok());
}

TEST(Simulated, UncoveredRequestNamesHash) {
  kolb::testing::TempDir dir;
  SimulatedExecutor ex{SimScript{}};
  try {
    ex.execute(make(dir, "print(9)"));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find(sha256_hex("print(9)")), std::string::npos);
  }
}

TEST(Simulated, DurationAboveLimitIsTimeout) {
  kolb::testing::TempDir dir;
  SimEntry e;
  e.tag = "slow";
  e.result.duration = 50.0;
  e.files["never.txt"] = "x";
  SimScript script;
  script.add(e);
  auto r = execute_simulated(make(dir, "# sim-tag: slow", 10.0), script, 1);
  EXPECT_TRUE(r.timed_out);
  EXPECT_DOUBLE_EQ(r.duration, 10.0);
  EXPECT_NE(r.exit_status, 0);
  EXPECT_FALSE(std::filesystem::exists(dir / "never.txt"));
}

TEST(Simulated, OutputPathsMayNotEscape) {
  kolb::testing::TempDir dir;
  SimEntry e;
  e.tag = "esc";
  e.files["../x.txt"] = "x";
  SimScript script;
  script.add(e);
  EXPECT_THROW(execute_simulated(make(dir, "# sim-tag: esc"), script, 1), ConfigError);
}
