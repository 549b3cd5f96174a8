#include <regex>

#include "kolb/exec/sandbox.hpp"
#include "kolb/util/error.hpp"
#include "kolb/util/hash.hpp"

namespace kolb::exec {

std::string ExecResult::log() const {
  std::string out;
  if (!stderr_tail.empty()) out += stderr_tail;
  if (!stdout_tail.empty()) {
    if (!out.empty() && out.back() != '\n') out += '\n';
    out += stdout_tail;
  }
  return out;
}

Json ExecResult::to_json() const {
  return Json{{"exit_status", exit_status}, {"stdout", stdout_tail}, {"stderr", stderr_tail},
              {"duration", duration},       {"timed_out", timed_out}, {"truncated", truncated}};
}

ExecResult ExecResult::from_json(const Json& j) {
  ExecResult r;
  r.exit_status = j.value("exit_status", 0);
  r.stdout_tail = j.value("stdout", std::string());
  r.stderr_tail = j.value("stderr", std::string());
  r.duration = j.value("duration", 0.0);
  r.timed_out = j.value("timed_out", false);
  r.truncated = j.value("truncated", false);
  return r;
}

std::vector<std::string> code_tags(std::string_view code) {
  static const std::regex re(R"(#\s*sim-tag:\s*([A-Za-z0-9_.:\-]+))");
  std::vector<std::string> tags;
  std::string s(code);
  for (auto it = std::sregex_iterator(s.begin(), s.end(), re); it != std::sregex_iterator(); ++it) {
    tags.push_back((*it)[1].str());
  }
  return tags;
}

SimScript SimScript::from_json_lines(const std::vector<Json>& records) {
  SimScript s;
  for (const auto& rec : records) {
    SimEntry e;
    if (rec.contains("ordinal")) e.ordinal = rec.at("ordinal").get<std::size_t>();
    if (rec.contains("code_sha256")) e.code_sha256 = rec.at("code_sha256").get<std::string>();
    if (rec.contains("tag")) e.tag = rec.at("tag").get<std::string>();
    if (!e.ordinal && !e.code_sha256 && !e.tag) {
      throw ConfigError("sim script entry needs one of ordinal, code_sha256, tag");
    }
    e.result = ExecResult::from_json(rec.value("result", Json::object()));
    const Json files = rec.value("files", Json::object());
    for (const auto& [path, content] : files.items()) {
      e.files[path] = content.get<std::string>();
    }
    s.add(std::move(e));
  }
  return s;
}

SimScript SimScript::load(const std::filesystem::path& path) { return from_json_lines(read_jsonl(path)); }

const SimEntry* SimScript::find(const ExecRequest& request, std::size_t ordinal) const {
  for (const auto& e : entries_) {
    if (e.ordinal && *e.ordinal == ordinal) return &e;
  }
  const std::string digest = sha256_hex(request.code);
  for (const auto& e : entries_) {
    if (e.code_sha256 && *e.code_sha256 == digest) return &e;
  }
  const auto tags = code_tags(request.code);
  for (const auto& tag : tags) {
    for (const auto& e : entries_) {
      if (e.tag && *e.tag == tag) return &e;
    }
  }
  return nullptr;
}

namespace {

std::string expand_env(const std::string& s, const std::map<std::string, std::string>& env, bool strict) {
  std::string out;
  for (std::size_t i = 0; i < s.size();) {
    if (s.compare(i, 2, "${") == 0) {
      auto close = s.find('}', i + 2);
      if (close == std::string::npos) {
        if (strict) throw ConfigError("sim script: unterminated ${ in " + s);
        out += s.substr(i);
        break;
      }
      std::string name = s.substr(i + 2, close - i - 2);
      auto it = env.find(name);
      if (it == env.end()) {
        if (strict) throw ConfigError("sim script: unset variable " + name + " in " + s);
        out += s.substr(i, close - i + 1);
        i = close + 1;
        continue;
      }
      out += it->second;
      i = close + 1;
    } else {
      out += s[i++];
    }
  }
  return out;
}

}  // namespace

ExecResult execute_simulated(const ExecRequest& request, const SimScript& script, std::size_t ordinal) {
  namespace fs = std::filesystem;
  if (!(request.time_limit > 0.0)) throw ConfigError("exec: time limit must be positive");
  const SimEntry* e = script.find(request, ordinal);
  if (!e) {
    auto tags = code_tags(request.code);
    throw ConfigError("simulated executor: no scripted result for call #" + std::to_string(ordinal) +
                      " (code sha256 " + sha256_hex(request.code) + ", tags [" + join(tags, ",") + "])");
  }
  ExecResult r = e->result;
  r.stdout_tail = tail_truncate(r.stdout_tail);
  r.stderr_tail = tail_truncate(r.stderr_tail);
  r.truncated = r.truncated || e->result.stdout_tail.size() > kTruncationCap ||
                e->result.stderr_tail.size() > kTruncationCap;
  if (r.duration > request.time_limit || r.timed_out) {
    r.timed_out = true;
    r.duration = request.time_limit;
    r.exit_status = 137;
    return r;
  }
  for (const auto& [raw_path, content] : e->files) {
    fs::path rel(expand_env(raw_path, request.env, true));
    if (rel.is_absolute()) throw ConfigError("sim script: absolute output path " + rel.string());
    for (const auto& part : rel) {
      if (part == "..") throw ConfigError("sim script: output path escapes working dir: " + rel.string());
    }
    write_text_file(request.working_dir / rel, expand_env(content, request.env, false));
  }
  return r;
}

ExecResult SimulatedExecutor::execute(const ExecRequest& request) {
  std::size_t ordinal;
  {
    std::lock_guard<std::mutex> lock(mu_);
    ordinal = ++calls_;
  }
  return execute_simulated(request, script_, ordinal);
}

std::size_t SimulatedExecutor::calls() const {
  std::lock_guard<std::mutex> lock(mu_);
  return calls_;
}

}  // namespace kolb::exec
