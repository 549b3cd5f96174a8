#include "kolb/eval/leaderboard.hpp"

#include <cmath>

#include "kolb/util/csv.hpp"
#include "kolb/util/error.hpp"
#include "kolb/util/text.hpp"

namespace kolb::eval {

void LeaderboardSnapshot::validate() const {
  if (scores.empty()) throw ConfigError("leaderboard has no teams");
  if (k_c < 1) throw ConfigError("selection budget k_c must be at least 1");
  for (double s : scores) {
    if (!std::isfinite(s)) throw ConfigError("leaderboard score is not finite");
  }
}

LeaderboardSnapshot load_leaderboard(const std::filesystem::path& path, Direction direction, int k_c) {
  const auto t = read_csv(path);
  const auto col = t.column("private_score");
  if (!col || !t.column("team")) throw ConfigError(path.string() + ": leaderboard needs team and private_score columns");
  LeaderboardSnapshot b;
  b.direction = direction;
  b.k_c = k_c;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    double v = 0.0;
    if (!parse_double(t.rows[r][*col], v)) {
      throw ConfigError(path.string() + ": row " + std::to_string(r + 2) + " has a non-numeric private_score");
    }
    b.scores.push_back(v);
  }
  b.validate();
  return b;
}

Selection greedy_select(const std::vector<SubmissionRecord>& records, int k_c, Direction d) {
  if (records.empty()) throw ConfigError("greedy_select needs at least one submission");
  if (k_c < 1) throw ConfigError("selection budget k_c must be at least 1");
  for (const auto& r : records) {
    if (!std::isfinite(r.public_score) || !std::isfinite(r.private_score)) {
      throw ConfigError("submission " + r.submission_id + " has a non-finite score");
    }
  }
  return greedy_select_by(
      std::span<const SubmissionRecord>(records), k_c, d, [](const SubmissionRecord& r) { return r.public_score; },
      [](const SubmissionRecord& r) { return r.private_score; },
      [](const SubmissionRecord& r) -> const std::string& { return r.submission_id; });
}

double quantile(double final_private, const LeaderboardSnapshot& board) {
  board.validate();
  if (!std::isfinite(final_private)) throw ConfigError("final score is not finite");
  std::size_t better_count = 0;
  for (double s : board.scores) better_count += core::better(s, final_private, board.direction);
  return 100.0 - 100.0 * static_cast<double>(better_count) / static_cast<double>(board.teams());
}

std::vector<double> sorted_best_first(const LeaderboardSnapshot& board) {
  std::vector<double> s = board.scores;
  if (board.direction == Direction::maximize) {
    std::sort(s.begin(), s.end(), std::greater<>());
  } else {
    std::sort(s.begin(), s.end());
  }
  return s;
}

std::vector<double> quantile_batch_serial(std::span<const double> finals, const LeaderboardSnapshot& board) {
  std::vector<double> out(finals.size());
  for (std::size_t i = 0; i < finals.size(); ++i) out[i] = quantile(finals[i], board);
  return out;
}

std::vector<double> quantile_batch(std::span<const double> finals, const LeaderboardSnapshot& board) {
  board.validate();
  const std::vector<double> sorted = sorted_best_first(board);
  const double n = static_cast<double>(sorted.size());
  const bool maximize = board.direction == Direction::maximize;
  for (double f : finals) {
    if (!std::isfinite(f)) throw ConfigError("final score is not finite");
  }
  std::vector<double> out(finals.size());
  const auto count = static_cast<std::ptrdiff_t>(finals.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    const double f = finals[static_cast<std::size_t>(i)];
    // Strictly better scores form a prefix of the best-first order.
    auto it = maximize ? std::lower_bound(sorted.begin(), sorted.end(), f, std::greater<>())
                       : std::lower_bound(sorted.begin(), sorted.end(), f);
    const double better_count = static_cast<double>(it - sorted.begin());
    out[static_cast<std::size_t>(i)] = 100.0 - 100.0 * better_count / n;
  }
  return out;
}

int rank_of(double final_private, const LeaderboardSnapshot& board, RankMode mode) {
  board.validate();
  std::vector<double> better;
  for (double s : board.scores) {
    if (core::better(s, final_private, board.direction)) better.push_back(s);
  }
  if (mode == RankMode::competition) return static_cast<int>(better.size()) + 1;
  std::sort(better.begin(), better.end());
  return static_cast<int>(std::unique(better.begin(), better.end()) - better.begin()) + 1;
}

std::string to_string(Medal m) {
  switch (m) {
    case Medal::none: return "none";
    case Medal::bronze: return "bronze";
    case Medal::silver: return "silver";
    case Medal::gold: return "gold";
  }
  return "none";
}

MedalRule::Thresholds MedalRule::thresholds(int teams) const {
  if (teams < 1) throw ConfigError("team count must be at least 1");
  // Integer arithmetic keeps floor(pct * teams) exact.
  auto pct = [teams](int percent) { return teams * percent / 100; };
  const int extra_gold = 10 + teams / 500;
  Thresholds t;
  if (teams < 100) {
    t = {pct(10), pct(20), pct(40)};
  } else if (teams < 250) {
    t = {10, pct(20), pct(40)};
  } else if (teams < 1000) {
    t = {extra_gold, 50, 100};
  } else {
    t = {extra_gold, pct(5), pct(10)};
  }
  return t;
}

void MedalRule::check(int teams) const {
  const auto t = thresholds(teams);
  if (!(0 <= t.gold && t.gold <= t.silver && t.silver <= t.bronze && t.bronze <= teams)) {
    throw ConfigError("medal thresholds not nested for " + std::to_string(teams) + " teams");
  }
}

Medal medal_for(int rank, int teams, const MedalRule& rule) {
  if (teams < 1 || rank < 1 || rank > teams) {
    throw ConfigError("medal_for needs 1 <= rank <= teams, got rank " + std::to_string(rank) + " of " +
                      std::to_string(teams));
  }
  const auto t = rule.thresholds(teams);
  if (rank <= t.gold) return Medal::gold;
  if (rank <= t.silver) return Medal::silver;
  if (rank <= t.bronze) return Medal::bronze;
  return Medal::none;
}

}  // namespace kolb::eval
