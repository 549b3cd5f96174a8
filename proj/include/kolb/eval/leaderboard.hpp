#pragma once

#include <algorithm>
#include <filesystem>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kolb/core/state.hpp"

namespace kolb::eval {

using core::Direction;

struct LeaderboardSnapshot {
  std::vector<double> scores;  // final private score per team
  Direction direction = Direction::maximize;
  int k_c = 2;                 // final submissions a team may select

  std::size_t teams() const { return scores.size(); }
  // ConfigError unless N >= 1, k_c >= 1 and every score is finite.
  void validate() const;
};

// CSV with columns team, private_score and optionally public_score.
LeaderboardSnapshot load_leaderboard(const std::filesystem::path& path, Direction direction, int k_c);

struct SubmissionRecord {
  std::string submission_id;
  double public_score = 0.0;
  double private_score = 0.0;
};

struct Selection {
  std::vector<std::size_t> selected;  // indices into the input, best public first
  double final_private = 0.0;
};

// Top min(k_c, n) records by public score, ties by ascending id; the final
// score is the best private score among them. `private_of` is only called
// on selected records.
template <class Rec, class Pub, class Priv, class Id>
Selection greedy_select_by(std::span<const Rec> records, int k_c, Direction d, Pub public_of, Priv private_of,
                           Id id_of) {
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double pa = public_of(records[a]), pb = public_of(records[b]);
    if (pa != pb) return core::better(pa, pb, d);
    return id_of(records[a]) < id_of(records[b]);
  });
  const std::size_t take = std::min(order.size(), static_cast<std::size_t>(std::max(k_c, 0)));
  Selection s;
  s.selected.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take));
  for (std::size_t i = 0; i < s.selected.size(); ++i) {
    const double p = private_of(records[s.selected[i]]);
    if (i == 0 || core::better(p, s.final_private, d)) s.final_private = p;
  }
  return s;
}

// ConfigError for empty input, k_c < 1 or non-finite scores.
Selection greedy_select(const std::vector<SubmissionRecord>& records, int k_c, Direction d);

// 100 - 100 * |{i : s_i strictly better than final}| / N.
double quantile(double final_private, const LeaderboardSnapshot& board);

// Board scores sorted best first, for the batch kernels.
std::vector<double> sorted_best_first(const LeaderboardSnapshot& board);

// Quantile of every final score against one board. The serial version
// counts by brute force and is the reference for the parallel kernel,
// which binary-searches the sorted board under OpenMP.
std::vector<double> quantile_batch_serial(std::span<const double> finals, const LeaderboardSnapshot& board);
std::vector<double> quantile_batch(std::span<const double> finals, const LeaderboardSnapshot& board);

enum class RankMode { dense, competition };

// Rank the final score would take on the board. Ties share the best rank;
// dense counts distinct better scores, competition counts teams.
int rank_of(double final_private, const LeaderboardSnapshot& board, RankMode mode = RankMode::dense);

enum class Medal { none, bronze, silver, gold };
std::string to_string(Medal m);

// Medal table by team-count band. Percentages admit ranks up to
// floor(pct * teams); the extra-gold rule adds one slot per full 500 teams.
struct MedalRule {
  struct Thresholds {
    int gold = 0, silver = 0, bronze = 0;  // highest qualifying rank
  };
  Thresholds thresholds(int teams) const;
  // Nested thresholds gold <= silver <= bronze <= teams.
  void check(int teams) const;
};

// ConfigError unless 1 <= rank <= teams.
Medal medal_for(int rank, int teams, const MedalRule& rule = {});

}  // namespace kolb::eval
