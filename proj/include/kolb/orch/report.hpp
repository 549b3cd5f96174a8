#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "kolb/orch/pipeline.hpp"
#include "kolb/rating/elo_mmr.hpp"
#include "kolb/stats/tests.hpp"

namespace kolb::orch {

// One evaluated (method, competition) result. quantile and medal are
// absent for runs that produced no evaluation.
struct ResultRow {
  std::string method;
  std::string competition_id;
  std::string run_id;
  std::string status;
  std::optional<double> quantile;
  std::optional<int> rank;
  std::optional<int> teams;
  std::string medal = "none";
};

// Rows from run manifests; the method is the manifest's "label" or
// `default_label`.
std::vector<ResultRow> rows_from_manifests(const std::vector<RunManifest>& manifests,
                                           const std::string& default_label = "kolb");
// CSV with method, competition_id, quantile and optional medal columns.
std::vector<ResultRow> load_result_rows(const std::filesystem::path& path);

// Setup then solve stage outcomes recorded in a manifest.
std::vector<scaffold::StageOutcome> stage_outcomes_of(const RunManifest& manifest);

struct ReportInputs {
  std::vector<ResultRow> rows;
  std::vector<std::vector<scaffold::StageOutcome>> stage_runs;  // one entry per run
  std::optional<std::filesystem::path> contests;                // rating history CSV
  double alpha = 0.05;
};

struct ReportSummary {
  std::vector<std::filesystem::path> files;  // written, relative to out_dir
  std::optional<stats::ComparisonReport> comparison;
  std::optional<std::string> comparison_skipped;  // reason
  std::optional<scaffold::OutcomeReport> stages;
  std::optional<rating::RatingHistory> ratings;
};

// Writes summary.md plus plot-ready results.csv, quantiles.csv,
// medal_counts.csv and, when the inputs allow, stage_outcomes.json,
// comparison.json and ratings.csv / difficulty.csv. Methods are compared
// over the competitions every method has a quantile for, averaging
// repeated runs.
ReportSummary emit_report(const ReportInputs& inputs, const std::filesystem::path& out_dir);

}  // namespace kolb::orch
