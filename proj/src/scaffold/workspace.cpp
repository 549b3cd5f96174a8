#include "kolb/scaffold/workspace.hpp"

#include <algorithm>
#include <fstream>

#include "kolb/util/error.hpp"
#include "kolb/util/text.hpp"

namespace kolb::scaffold {

namespace fs = std::filesystem;

Workspace Workspace::create(const fs::path& root, const fs::path& data_source, const fs::path& sample_submission) {
  Workspace ws;
  ws.root = fs::absolute(root);
  fs::create_directories(ws.root);
  const fs::path link = ws.root / ws.data_dir;
  std::error_code ec;
  if (fs::is_symlink(link, ec) || fs::exists(link, ec)) fs::remove_all(link, ec);
  fs::create_directory_symlink(fs::absolute(data_source), link);
  if (!fs::exists(sample_submission)) {
    throw ConfigError("sample submission not found: " + sample_submission.string());
  }
  fs::copy_file(sample_submission, ws.root / ws.sample_submission, fs::copy_options::overwrite_existing);
  return ws;
}

std::string Workspace::data_listing(std::size_t max_entries) const {
  const fs::path base = root / data_dir;
  std::vector<std::string> files;
  std::error_code ec;
  for (auto it = fs::recursive_directory_iterator(base, fs::directory_options::follow_directory_symlink, ec);
       it != fs::recursive_directory_iterator(); it.increment(ec)) {
    if (ec) break;
    if (it->is_regular_file()) files.push_back(fs::relative(it->path(), root).generic_string());
  }
  std::sort(files.begin(), files.end());
  std::string out;
  std::size_t shown = 0;
  for (const auto& f : files) {
    if (shown++ == max_entries) {
      out += "... (" + std::to_string(files.size() - max_entries) + " more files)\n";
      break;
    }
    out += f;
    if (f.size() > 4 && f.compare(f.size() - 4, 4, ".csv") == 0) {
      std::ifstream in(root / f);
      std::string header;
      std::getline(in, header);
      if (!header.empty() && header.back() == '\r') header.pop_back();
      out += "  [columns: " + header + "]";
    }
    out += "\n";
  }
  return out.empty() ? "(no files)\n" : out;
}

std::string to_string(ArtifactKind k) {
  switch (k) {
    case ArtifactKind::input_map:
      return "input_map";
    case ArtifactKind::target_map:
      return "target_map";
    case ArtifactKind::transform_code:
      return "transform_code";
    case ArtifactKind::metric_code:
      return "metric_code";
    case ArtifactKind::submission_format_code:
      return "submission_format_code";
    case ArtifactKind::summary:
      return "summary";
  }
  return "summary";
}

Json WorkspaceArtifact::to_json() const {
  Json j{{"kind", to_string(kind)}, {"split", split}, {"path", path}};
  j["modality"] = modality ? Json(*modality) : Json(nullptr);
  return j;
}

std::string input_map_name(const std::string& split, const std::string& modality) {
  return split + "_" + modality + "_input_map.csv";
}

std::string target_map_name(const std::string& split, const std::string& modality) {
  return split + "_" + modality + "_target_map.csv";
}

namespace {

std::optional<std::string> modality_of(const std::string& file) {
  if (contains(file, "_tab_")) return std::string("tabular");
  if (contains(file, "_img_")) return std::string("image");
  if (contains(file, "_txt_")) return std::string("text");
  return std::nullopt;
}

}  // namespace

std::vector<WorkspaceArtifact> collect_artifacts(const Workspace& ws, const std::vector<std::string>& files) {
  std::vector<WorkspaceArtifact> out;
  for (const auto& f : files) {
    if (!fs::exists(ws.path(f))) continue;
    WorkspaceArtifact a;
    a.path = f;
    a.split = starts_with(f, "test_") ? "test" : "train";
    if (contains(f, "_input_map.csv")) {
      a.kind = ArtifactKind::input_map;
      a.modality = modality_of(f);
    } else if (contains(f, "_target_map.csv")) {
      a.kind = ArtifactKind::target_map;
      a.modality = modality_of(f);
    } else if (f == kTransformCode) {
      a.kind = ArtifactKind::transform_code;
      a.modality = std::string("tabular");
    } else if (f == kMetricCode) {
      a.kind = ArtifactKind::metric_code;
    } else if (f == kSubmissionFormatCode) {
      a.kind = ArtifactKind::submission_format_code;
    } else {
      a.kind = ArtifactKind::summary;
    }
    out.push_back(std::move(a));
  }
  return out;
}

}  // namespace kolb::scaffold
