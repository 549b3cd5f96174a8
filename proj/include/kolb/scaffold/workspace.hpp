#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "kolb/core/state.hpp"
#include "kolb/util/json_io.hpp"

namespace kolb::scaffold {

// Per-run directory the agent's code runs in. Raw competition data is
// reachable through the relative `data` link so prompts never carry
// absolute paths.
struct Workspace {
  std::filesystem::path root;
  std::string data_dir = "data";
  std::string sample_submission = "sample_submission.csv";

  std::filesystem::path path(const std::string& rel) const { return root / rel; }
  // Creates root, links data_dir to `data_source` and copies the sample
  // submission in.
  static Workspace create(const std::filesystem::path& root, const std::filesystem::path& data_source,
                          const std::filesystem::path& sample_submission);
  // Sorted file listing of the data directory; CSV entries show their
  // header line.
  std::string data_listing(std::size_t max_entries = 200) const;
};

enum class ArtifactKind { input_map, target_map, transform_code, metric_code, submission_format_code, summary };
std::string to_string(ArtifactKind k);

struct WorkspaceArtifact {
  ArtifactKind kind = ArtifactKind::summary;
  std::optional<std::string> modality;  // tabular | image | text
  std::string split = "train";
  std::string path;  // relative to the workspace root
  Json to_json() const;
};

// Canonical map file names; `modality` is tab, img or txt.
std::string input_map_name(const std::string& split, const std::string& modality);
std::string target_map_name(const std::string& split, const std::string& modality = "tab");
inline constexpr const char* kTransformCode = "code_transform_tab_target_train.py";
inline constexpr const char* kMetricCode = "code_metric.py";
inline constexpr const char* kSubmissionFormatCode = "code_submission_format.py";

// Artifacts present on disk for the given stage outputs.
std::vector<WorkspaceArtifact> collect_artifacts(const Workspace& ws, const std::vector<std::string>& files);

}  // namespace kolb::scaffold
