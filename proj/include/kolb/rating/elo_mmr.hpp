#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kolb/eval/leaderboard.hpp"

namespace kolb::rating {

struct RatingParams {
  double mu0 = 1500.0;
  double sigma0 = 350.0;
  double beta = 200.0;  // performance deviation
  void validate() const;
};

struct Rating {
  double mu = 1500.0;
  double sigma = 350.0;
  int contests = 0;
};

using RatingState = std::map<std::string, Rating>;

struct ContestResult {
  std::string competition_id;
  std::optional<double> timestamp;
  // (participant, rank); equal ranks tie, rank 1 is best.
  std::vector<std::pair<std::string, int>> ranking;
  void validate() const;
};

// The contest's field sorted by (rank, participant): the order every
// kernel sums in, so results do not depend on input order.
struct Field {
  std::vector<std::string> ids;
  std::vector<int> ranks;
  std::vector<double> mu;
  std::vector<double> delta;  // sqrt(3)/pi * sqrt(sigma^2 + beta^2)
};

Field make_field(const RatingState& state, const ContestResult& result, const RatingParams& params);

// Root of the logistic rank-consistency equation for every field member,
// bisected until the bracket cannot shrink. The serial version is the
// reference for the OpenMP kernel; both return identical bits.
std::vector<double> solve_performances_serial(const Field& f);
std::vector<double> solve_performances(const Field& f);

// Updates every participant from the pre-contest field. A contest with one
// participant leaves the state unchanged.
RatingState apply_contest(const RatingState& state, const ContestResult& result, const RatingParams& params = {});

struct RatingHistory {
  RatingState state;
  // Ratings of each contest's participants at its close.
  std::vector<std::map<std::string, Rating>> snapshots;
};

// ConfigError when timestamps are present and not non-decreasing.
RatingHistory rate_history(const std::vector<ContestResult>& contests, const RatingParams& params = {});

// CSV with competition_id, participant, rank and optional timestamp.
// Contests keep the order of their first row.
std::vector<ContestResult> load_contests(const std::filesystem::path& path);

// Medals per participant from the table applied to the contest's ranks,
// for contests that did not award any.
std::map<std::string, eval::Medal> infer_medals(const ContestResult& contest);

// Mean close-time rating over bronze-or-better finishers; nullopt with no
// medalists.
std::optional<double> competition_difficulty(const ContestResult& contest,
                                             const std::map<std::string, Rating>& snapshot,
                                             const std::map<std::string, eval::Medal>& medals);

}  // namespace kolb::rating
