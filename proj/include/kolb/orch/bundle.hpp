#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "kolb/core/state.hpp"
#include "kolb/orch/config.hpp"
#include "kolb/util/json_io.hpp"

namespace kolb::orch {

struct BundleManifest {
  std::string competition_id;
  std::string metric;
  core::Direction direction = core::Direction::minimize;
  int k_c = 2;
  std::optional<int> teams;  // defaults to the leaderboard size
  std::string deadline;
  CompetitionClass competition_class = CompetitionClass::tabular;
  Json to_json() const;
};

// Offline competition directory:
//   manifest.json, description.md, data/, sample_submission.csv,
//   leaderboard.csv (team, private_score), solution.csv (answers with a
//   Usage column).
struct CompetitionBundle {
  std::filesystem::path dir;
  BundleManifest manifest;
  std::string description;
  std::filesystem::path data_dir;
  std::filesystem::path sample_submission;
  std::optional<std::filesystem::path> leaderboard;
  std::optional<std::filesystem::path> solution;
  std::vector<std::string> warnings;

  bool evaluation_enabled() const { return leaderboard && solution; }
};

// ConfigError naming the first missing or malformed manifest field, or
// when the sample submission is absent or unparseable. A missing
// leaderboard or answer file only disables evaluation.
CompetitionBundle ingest_bundle(const std::filesystem::path& dir);

}  // namespace kolb::orch
