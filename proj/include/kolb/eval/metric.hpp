#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kolb/core/state.hpp"

namespace kolb::eval {

// Row-major numeric table keyed by id, as read from a submission file.
struct PredictionTable {
  std::string id_column = "id";
  std::vector<std::string> columns;  // value columns
  std::vector<std::string> ids;
  std::vector<double> values;

  std::size_t rows() const { return ids.size(); }
  std::size_t width() const { return columns.size(); }
  double at(std::size_t r, std::size_t c) const { return values[r * columns.size() + c]; }
};

// First column is the id; every other column must be numeric. With
// `expected_header`, the header must match it exactly.
PredictionTable read_predictions(const std::filesystem::path& path,
                                 const std::optional<std::vector<std::string>>& expected_header = std::nullopt);
void write_predictions(const std::filesystem::path& path, const PredictionTable& t);

// Reorders `t` to `reference`'s id order. Throws ConfigError listing the
// offending ids when the id sets or value columns differ.
PredictionTable align_to(const PredictionTable& reference, const PredictionTable& t);

struct Metric {
  std::string name;
  core::Direction direction = core::Direction::minimize;
  // (targets, predictions) over the same rows and columns.
  std::function<double(const PredictionTable&, const PredictionTable&)> fn;
};

// Built-ins: mse, rmse, mae, rmsle, logloss, auc, accuracy. Names match
// case-insensitively, ignoring '-', '_' and spaces.
std::optional<Metric> find_metric(const std::string& name);
// find_metric, falling back to mse for unknown names.
Metric metric_or_mse(const std::string& name);

// Scores a submission against answers carrying a Usage column
// (Public/Private). Rows without Usage count as private.
struct SplitScore {
  double public_score = 0.0;
  double private_score = 0.0;
};
SplitScore score_split(const PredictionTable& submission, const std::filesystem::path& answers, const Metric& metric);

}  // namespace kolb::eval
