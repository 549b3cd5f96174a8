#pragma once

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kolb/util/json_io.hpp"
#include "kolb/util/text.hpp"

namespace kolb::exec {

struct ExecRequest {
  std::string code;
  std::filesystem::path working_dir;
  std::vector<std::string> interpreter{"python3"};
  std::string script_name = "_exec.py";  // written into working_dir
  double time_limit = 60.0;              // seconds, > 0
  std::map<std::string, std::string> env;
};

struct ExecResult {
  int exit_status = 0;
  std::string stdout_tail;
  std::string stderr_tail;
  double duration = 0.0;
  bool timed_out = false;
  bool truncated = false;

  bool ok() const { return exit_status == 0 && !timed_out; }
  // stderr then stdout, for feedback bodies.
  std::string log() const;
  Json to_json() const;
  static ExecResult from_json(const Json& j);
};

class Executor {
 public:
  virtual ~Executor() = default;
  // ConfigError for invalid requests, SpawnError when the interpreter
  // cannot be started. Code failures are reported in the result.
  virtual ExecResult execute(const ExecRequest& request) = 0;
  virtual std::size_t spawn_count() const = 0;
};

// Whether this kernel lets an unprivileged process confine its own writes.
int landlock_abi_version();

struct ProcessOptions {
  // Deny filesystem writes outside working_dir when the kernel allows it;
  // otherwise confinement is working-directory scoping only.
  bool confine_writes = true;
  bool inherit_env = true;
  std::size_t stream_cap = kTruncationCap;
};

// Spawns the interpreter in its own process group inside working_dir and
// kills the whole group at the time limit.
class ProcessExecutor : public Executor {
 public:
  explicit ProcessExecutor(ProcessOptions options = {}) : options_(options) {}
  ExecResult execute(const ExecRequest& request) override;
  std::size_t spawn_count() const override { return spawns_.load(); }
  bool confinement_active() const;

 private:
  ProcessOptions options_;
  std::atomic<std::size_t> spawns_{0};
};

// Scripted results for tests and desk-scale runs. An entry matches by
// call ordinal (1-based), by the SHA-256 of the code, or by a
// `# sim-tag: <name>` comment in the code, tried in that order. Entries
// may list files to materialize in working_dir; `${VAR}` in a path expands
// from the request env.
struct SimEntry {
  std::optional<std::size_t> ordinal;
  std::optional<std::string> code_sha256;
  std::optional<std::string> tag;
  ExecResult result;
  std::map<std::string, std::string> files;
};

class SimScript {
 public:
  static SimScript load(const std::filesystem::path& path);
  static SimScript from_json_lines(const std::vector<Json>& records);
  void add(SimEntry entry) { entries_.push_back(std::move(entry)); }
  const SimEntry* find(const ExecRequest& request, std::size_t ordinal) const;
  std::size_t size() const { return entries_.size(); }

 private:
  std::vector<SimEntry> entries_;
};

std::vector<std::string> code_tags(std::string_view code);

// Scripted result verbatim, except that a scripted duration above the
// request's time limit is reported as a timeout at the limit. Throws
// ConfigError naming the code hash when nothing matches.
ExecResult execute_simulated(const ExecRequest& request, const SimScript& script, std::size_t ordinal);

class SimulatedExecutor : public Executor {
 public:
  explicit SimulatedExecutor(SimScript script) : script_(std::move(script)) {}
  ExecResult execute(const ExecRequest& request) override;
  std::size_t spawn_count() const override { return 0; }
  std::size_t calls() const;

 private:
  SimScript script_;
  mutable std::mutex mu_;
  std::size_t calls_ = 0;
};

}  // namespace kolb::exec
