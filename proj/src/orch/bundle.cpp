#include "kolb/orch/bundle.hpp"

#include "kolb/util/csv.hpp"
#include "kolb/util/error.hpp"

namespace kolb::orch {

Json BundleManifest::to_json() const {
  Json j{{"competition_id", competition_id},
         {"metric", metric},
         {"direction", core::to_string(direction)},
         {"k_c", k_c},
         {"deadline", deadline},
         {"class", to_string(competition_class)}};
  j["teams"] = teams ? Json(*teams) : Json();
  return j;
}

namespace {

std::string required_string(const Json& j, const char* key, const std::filesystem::path& at) {
  if (!j.contains(key)) throw ConfigError(at.string() + ": missing field \"" + key + "\"");
  if (!j.at(key).is_string() || j.at(key).get<std::string>().empty()) {
    throw ConfigError(at.string() + ": field \"" + key + "\" must be a non-empty string");
  }
  return j.at(key).get<std::string>();
}

int optional_positive(const Json& j, const char* key, const std::filesystem::path& at, int fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  if (!j.at(key).is_number_integer() || j.at(key).get<int>() < 1) {
    throw ConfigError(at.string() + ": field \"" + key + "\" must be a positive integer");
  }
  return j.at(key).get<int>();
}

}  // namespace

CompetitionBundle ingest_bundle(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw ConfigError("bundle directory not found: " + dir.string());
  CompetitionBundle b;
  b.dir = fs::absolute(dir);
  const fs::path mpath = b.dir / "manifest.json";
  if (!fs::exists(mpath)) throw ConfigError(mpath.string() + ": bundle manifest missing");
  Json j;
  try {
    j = read_json_file(mpath);
  } catch (const Json::exception& e) {
    throw ConfigError(mpath.string() + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError(mpath.string() + ": manifest must be an object");
  auto& m = b.manifest;
  m.competition_id = required_string(j, "competition_id", mpath);
  m.metric = required_string(j, "metric", mpath);
  try {
    m.direction = core::parse_direction(required_string(j, "direction", mpath));
  } catch (const ConfigError&) {
    throw ConfigError(mpath.string() + ": field \"direction\" must be maximize or minimize");
  }
  m.k_c = optional_positive(j, "k_c", mpath, 2);
  if (j.contains("teams") && !j.at("teams").is_null()) m.teams = optional_positive(j, "teams", mpath, 1);
  if (j.contains("deadline")) {
    if (!j.at("deadline").is_string()) throw ConfigError(mpath.string() + ": field \"deadline\" must be a string");
    m.deadline = j.at("deadline").get<std::string>();
  }
  try {
    m.competition_class = parse_competition_class(required_string(j, "class", mpath));
  } catch (const ConfigError& e) {
    if (std::string(e.what()).rfind(mpath.string(), 0) == 0) throw;
    throw ConfigError(mpath.string() + ": field \"class\" must be tabular, cv or nlp");
  }

  const fs::path desc = b.dir / "description.md";
  b.description = fs::exists(desc) ? read_text_file(desc) : "";
  if (b.description.empty()) b.warnings.push_back("description.md missing or empty");
  b.data_dir = b.dir / "data";
  if (!fs::is_directory(b.data_dir)) throw ConfigError(b.data_dir.string() + ": bundle data directory missing");
  b.sample_submission = b.dir / "sample_submission.csv";
  if (!fs::exists(b.sample_submission)) throw ConfigError(b.sample_submission.string() + ": sample submission missing");
  try {
    const auto t = read_csv(b.sample_submission);
    if (t.header.size() < 2 || t.rows.empty()) throw ConfigError("needs an id column, a target column and rows");
  } catch (const std::exception& e) {
    throw ConfigError(b.sample_submission.string() + ": unparseable sample submission: " + e.what());
  }
  if (fs::exists(b.dir / "leaderboard.csv")) {
    b.leaderboard = b.dir / "leaderboard.csv";
  } else {
    b.warnings.push_back("leaderboard.csv missing; evaluation disabled");
  }
  if (fs::exists(b.dir / "solution.csv")) {
    b.solution = b.dir / "solution.csv";
  } else {
    b.warnings.push_back("solution.csv missing; evaluation disabled");
  }
  return b;
}

}  // namespace kolb::orch
