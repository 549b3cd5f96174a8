#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kolb/core/state.hpp"

namespace kolb::core {

// `type` is "cycle" for a Kolb cycle or "update" for a state change made
// between cycles (stage transition bookkeeping), so digests keep chaining.
struct CycleRecord {
  std::string type = "cycle";
  std::size_t step = 0;
  std::string stage;
  std::string before_digest;
  std::map<std::string, std::string> intrinsic_outputs;
  ActionKind action_kind = ActionKind::emit_text;
  std::string action_content;
  std::optional<Feedback> feedback;
  std::string after_digest;
  std::string error;  // non-empty for a cycle that aborted

  Json to_json() const;
  static CycleRecord from_json(const Json& j);
};

// Line-delimited record of an episode: one cycle per line, followed by a
// single {"terminal": status} line.
class EpisodeTrace {
 public:
  explicit EpisodeTrace(std::string episode_id = "episode") : episode_id_(std::move(episode_id)) {}

  const std::string& episode_id() const { return episode_id_; }
  const std::vector<CycleRecord>& cycles() const { return cycles_; }
  const std::string& terminal_status() const { return terminal_status_; }

  void append(CycleRecord record) { cycles_.push_back(std::move(record)); }
  void append_update(const std::string& stage, const InternalState& before, const InternalState& after,
                     const std::string& note);
  void set_terminal_status(std::string status) { terminal_status_ = std::move(status); }

  // after_t == before_{t+1} for every completed cycle.
  bool digests_chain() const;

  std::string serialize() const;
  std::string digest() const;
  // Writes <dir>/<episode_id>-<hash prefix>.jsonl and returns the path.
  std::filesystem::path write(const std::filesystem::path& dir) const;
  static EpisodeTrace load(const std::filesystem::path& path);

 private:
  std::string episode_id_;
  std::vector<CycleRecord> cycles_;
  std::string terminal_status_ = "running";
};

}  // namespace kolb::core
