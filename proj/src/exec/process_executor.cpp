#include <fcntl.h>
#include <linux/landlock.h>
#include <poll.h>
#include <signal.h>
#include <sys/prctl.h>
#include <sys/stat.h>
#include <sys/syscall.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>

#include "kolb/exec/sandbox.hpp"
#include "kolb/util/error.hpp"

extern char** environ;

namespace kolb::exec {
namespace {

#ifndef LANDLOCK_ACCESS_FS_REFER
#define LANDLOCK_ACCESS_FS_REFER (1ULL << 13)
#endif
#ifndef LANDLOCK_ACCESS_FS_TRUNCATE
#define LANDLOCK_ACCESS_FS_TRUNCATE (1ULL << 14)
#endif

constexpr std::uint64_t kWriteAccessV1 =
    LANDLOCK_ACCESS_FS_WRITE_FILE | LANDLOCK_ACCESS_FS_REMOVE_DIR | LANDLOCK_ACCESS_FS_REMOVE_FILE |
    LANDLOCK_ACCESS_FS_MAKE_CHAR | LANDLOCK_ACCESS_FS_MAKE_DIR | LANDLOCK_ACCESS_FS_MAKE_REG |
    LANDLOCK_ACCESS_FS_MAKE_SOCK | LANDLOCK_ACCESS_FS_MAKE_FIFO | LANDLOCK_ACCESS_FS_MAKE_BLOCK |
    LANDLOCK_ACCESS_FS_MAKE_SYM;

std::uint64_t handled_writes(int abi) {
  std::uint64_t a = kWriteAccessV1;
  if (abi >= 2) a |= LANDLOCK_ACCESS_FS_REFER;
  if (abi >= 3) a |= LANDLOCK_ACCESS_FS_TRUNCATE;
  return a;
}

// Keeps the last `cap` bytes seen.
class TailBuffer {
 public:
  explicit TailBuffer(std::size_t cap) : cap_(cap) {}
  void append(const char* data, std::size_t n) {
    total_ += n;
    buf_.append(data, n);
    if (buf_.size() > 2 * cap_ + 4096) buf_.erase(0, buf_.size() - cap_ - 8);
  }
  bool truncated() const { return total_ > cap_; }
  std::string str() const { return tail_truncate(buf_, cap_); }

 private:
  std::size_t cap_;
  std::size_t total_ = 0;
  std::string buf_;
};

struct Fd {
  int fd = -1;
  Fd() = default;
  explicit Fd(int f) : fd(f) {}
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  ~Fd() { reset(); }
  void reset() {
    if (fd >= 0) ::close(fd);
    fd = -1;
  }
};

std::string resolve_program(const std::string& name, const std::map<std::string, std::string>& env) {
  if (name.find('/') != std::string::npos) return name;
  std::string path;
  if (auto it = env.find("PATH"); it != env.end()) {
    path = it->second;
  } else if (const char* p = std::getenv("PATH")) {
    path = p;
  } else {
    path = "/usr/local/bin:/usr/bin:/bin";
  }
  for (const auto& dir : split(path, ':')) {
    if (dir.empty()) continue;
    std::string candidate = dir + "/" + name;
    if (::access(candidate.c_str(), X_OK) == 0) return candidate;
  }
  throw SpawnError("interpreter not found on PATH: " + name);
}

// Returns a ruleset fd allowing writes only beneath `dirs`, or -1.
int build_ruleset(const std::vector<std::filesystem::path>& dirs) {
  int abi = landlock_abi_version();
  if (abi < 1) return -1;
  landlock_ruleset_attr attr{};
  attr.handled_access_fs = handled_writes(abi);
  int rs = static_cast<int>(::syscall(SYS_landlock_create_ruleset, &attr, sizeof(attr), 0));
  if (rs < 0) return -1;
  for (const auto& dir : dirs) {
    int pfd = ::open(dir.c_str(), O_PATH | O_CLOEXEC);
    if (pfd < 0) continue;
    landlock_path_beneath_attr pb{};
    pb.allowed_access = handled_writes(abi);
    pb.parent_fd = pfd;
    ::syscall(SYS_landlock_add_rule, rs, LANDLOCK_RULE_PATH_BENEATH, &pb, 0);
    ::close(pfd);
  }
  return rs;
}

[[noreturn]] void child_fail(int err_fd, int code) {
  ssize_t w = ::write(err_fd, &code, sizeof(code));
  (void)w;
  ::_exit(127);
}

}  // namespace

int landlock_abi_version() {
  long v = ::syscall(SYS_landlock_create_ruleset, nullptr, 0, LANDLOCK_CREATE_RULESET_VERSION);
  return v < 0 ? 0 : static_cast<int>(v);
}

bool ProcessExecutor::confinement_active() const {
  return options_.confine_writes && landlock_abi_version() >= 1;
}

ExecResult ProcessExecutor::execute(const ExecRequest& request) {
  namespace fs = std::filesystem;
  if (!(request.time_limit > 0.0)) throw ConfigError("exec: time limit must be positive");
  if (request.interpreter.empty()) throw ConfigError("exec: empty interpreter command");
  std::error_code ec;
  if (!fs::is_directory(request.working_dir, ec)) {
    throw ConfigError("exec: working directory does not exist: " + request.working_dir.string());
  }
  if (request.script_name.empty() || request.script_name.find('/') != std::string::npos) {
    throw ConfigError("exec: script name must be a bare file name");
  }
  const fs::path workdir = fs::absolute(request.working_dir);
  write_text_file(workdir / request.script_name, request.code);

  std::map<std::string, std::string> env_map;
  if (options_.inherit_env) {
    for (char** e = environ; e && *e; ++e) {
      std::string_view kv(*e);
      auto eq = kv.find('=');
      if (eq != std::string_view::npos) env_map[std::string(kv.substr(0, eq))] = std::string(kv.substr(eq + 1));
    }
  }
  env_map["TMPDIR"] = workdir.string();
  env_map["PYTHONDONTWRITEBYTECODE"] = "1";
  for (const auto& [k, v] : request.env) env_map[k] = v;

  const std::string program = resolve_program(request.interpreter.front(), env_map);
  std::vector<std::string> argv_s(request.interpreter.begin(), request.interpreter.end());
  argv_s.push_back(request.script_name);
  std::vector<char*> argv;
  for (auto& a : argv_s) argv.push_back(a.data());
  argv.push_back(nullptr);
  std::vector<std::string> env_s;
  for (const auto& [k, v] : env_map) env_s.push_back(k + "=" + v);
  std::vector<char*> envp;
  for (auto& e : env_s) envp.push_back(e.data());
  envp.push_back(nullptr);

  Fd ruleset(options_.confine_writes ? build_ruleset({workdir, "/dev"}) : -1);

  int out_p[2], err_p[2], st_p[2];
  if (::pipe2(out_p, O_CLOEXEC) != 0) throw SpawnError("exec: pipe failed");
  Fd out_r(out_p[0]), out_w(out_p[1]);
  if (::pipe2(err_p, O_CLOEXEC) != 0) throw SpawnError("exec: pipe failed");
  Fd err_r(err_p[0]), err_w(err_p[1]);
  if (::pipe2(st_p, O_CLOEXEC) != 0) throw SpawnError("exec: pipe failed");
  Fd st_r(st_p[0]), st_w(st_p[1]);

  const auto start = std::chrono::steady_clock::now();
  pid_t pid = ::fork();
  if (pid < 0) throw SpawnError(std::string("exec: fork failed: ") + std::strerror(errno));
  if (pid == 0) {
    ::setpgid(0, 0);
    int devnull = ::open("/dev/null", O_RDONLY);
    if (devnull >= 0) ::dup2(devnull, STDIN_FILENO);
    ::dup2(out_p[1], STDOUT_FILENO);
    ::dup2(err_p[1], STDERR_FILENO);
    if (::chdir(workdir.c_str()) != 0) child_fail(st_p[1], errno);
    if (ruleset.fd >= 0) {
      if (::prctl(PR_SET_NO_NEW_PRIVS, 1, 0, 0, 0) != 0) child_fail(st_p[1], errno);
      if (::syscall(SYS_landlock_restrict_self, ruleset.fd, 0) != 0) child_fail(st_p[1], errno);
    }
    ::execve(program.c_str(), argv.data(), envp.data());
    child_fail(st_p[1], errno);
  }
  ::setpgid(pid, pid);
  spawns_.fetch_add(1);
  out_w.reset();
  err_w.reset();
  st_w.reset();

  int child_errno = 0;
  ssize_t got;
  do {
    got = ::read(st_r.fd, &child_errno, sizeof(child_errno));
  } while (got < 0 && errno == EINTR);
  if (got == static_cast<ssize_t>(sizeof(child_errno))) {
    int status = 0;
    ::waitpid(pid, &status, 0);
    throw SpawnError("exec: could not start " + program + ": " + std::strerror(child_errno));
  }

  TailBuffer out_tail(options_.stream_cap), err_tail(options_.stream_cap);
  const auto deadline = start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                    std::chrono::duration<double>(request.time_limit));
  bool timed_out = false;
  char buf[65536];
  while (out_r.fd >= 0 || err_r.fd >= 0) {
    auto now = std::chrono::steady_clock::now();
    if (now >= deadline) {
      timed_out = true;
      ::kill(-pid, SIGKILL);
      break;
    }
    int wait_ms = static_cast<int>(
        std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count() + 1);
    pollfd fds[2];
    int n = 0;
    if (out_r.fd >= 0) fds[n++] = {out_r.fd, POLLIN, 0};
    if (err_r.fd >= 0) fds[n++] = {err_r.fd, POLLIN, 0};
    int pr = ::poll(fds, n, wait_ms);
    if (pr < 0) {
      if (errno == EINTR) continue;
      break;
    }
    for (int i = 0; i < n; ++i) {
      if (!(fds[i].revents & (POLLIN | POLLHUP | POLLERR))) continue;
      Fd& src = fds[i].fd == out_r.fd ? out_r : err_r;
      TailBuffer& dst = fds[i].fd == out_r.fd ? out_tail : err_tail;
      ssize_t r = ::read(src.fd, buf, sizeof(buf));
      if (r > 0) {
        dst.append(buf, static_cast<std::size_t>(r));
      } else if (r == 0 || (errno != EINTR && errno != EAGAIN)) {
        src.reset();
      }
    }
  }

  int status = 0;
  if (!timed_out) {
    // Streams closed; the child may still be running with them shut.
    while (true) {
      pid_t w = ::waitpid(pid, &status, WNOHANG);
      if (w == pid) break;
      if (std::chrono::steady_clock::now() >= deadline) {
        timed_out = true;
        ::kill(-pid, SIGKILL);
        break;
      }
      ::usleep(2000);
    }
  }
  if (timed_out) ::waitpid(pid, &status, 0);
  // Reap any group members left behind by the interpreter.
  ::kill(-pid, SIGKILL);

  ExecResult res;
  res.duration = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (timed_out) {
    res.exit_status = 128 + SIGKILL;
    res.duration = std::max(res.duration, request.time_limit);
  } else if (WIFEXITED(status)) {
    res.exit_status = WEXITSTATUS(status);
  } else if (WIFSIGNALED(status)) {
    res.exit_status = 128 + WTERMSIG(status);
  } else {
    res.exit_status = 255;
  }
  res.timed_out = timed_out;
  res.stdout_tail = out_tail.str();
  res.stderr_tail = err_tail.str();
  res.truncated = out_tail.truncated() || err_tail.truncated();
  if (timed_out) {
    res.stderr_tail = tail_truncate(res.stderr_tail + "\n[killed: exceeded time limit of " +
                                        format_double(request.time_limit) + "s]\n",
                                    options_.stream_cap);
  }
  return res;
}

}  // namespace kolb::exec
