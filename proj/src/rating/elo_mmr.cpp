#include "kolb/rating/elo_mmr.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "kolb/util/csv.hpp"
#include "kolb/util/error.hpp"
#include "kolb/util/text.hpp"

namespace kolb::rating {

void RatingParams::validate() const {
  if (!(sigma0 > 0.0) || !(beta > 0.0) || !std::isfinite(mu0)) {
    throw ConfigError("rating parameters need sigma0 > 0, beta > 0 and a finite mu0");
  }
}

void ContestResult::validate() const {
  std::set<std::string> seen;
  for (const auto& [id, rank] : ranking) {
    if (!seen.insert(id).second) throw ConfigError("participant " + id + " appears twice in " + competition_id);
    if (rank < 1) throw ConfigError("rank of " + id + " in " + competition_id + " must be at least 1");
  }
}

Field make_field(const RatingState& state, const ContestResult& result, const RatingParams& params) {
  auto entries = result.ranking;
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second < b.second : a.first < b.first;
  });
  Field f;
  const double scale = std::sqrt(3.0) / M_PI;
  for (const auto& [id, rank] : entries) {
    auto it = state.find(id);
    const double mu = it == state.end() ? params.mu0 : it->second.mu;
    const double sigma = it == state.end() ? params.sigma0 : it->second.sigma;
    f.ids.push_back(id);
    f.ranks.push_back(rank);
    f.mu.push_back(mu);
    f.delta.push_back(scale * std::sqrt(sigma * sigma + params.beta * params.beta));
  }
  return f;
}

namespace {

// Increasing in p. Opponents ranked at or below i pull p up, those at or
// above pull it down; i itself sits in both sums.
double consistency(const Field& f, std::size_t i, double p) {
  double s = 0.0;
  for (std::size_t j = 0; j < f.ids.size(); ++j) {
    const double x = std::tanh((p - f.mu[j]) / (2.0 * f.delta[j]));
    if (f.ranks[j] >= f.ranks[i]) s += (x - 1.0) / f.delta[j];
    if (f.ranks[j] <= f.ranks[i]) s += (x + 1.0) / f.delta[j];
  }
  return s;
}

double solve_one(const Field& f, std::size_t i) {
  const double lo_mu = *std::min_element(f.mu.begin(), f.mu.end());
  const double hi_mu = *std::max_element(f.mu.begin(), f.mu.end());
  const double span = *std::max_element(f.delta.begin(), f.delta.end()) * 64.0;
  double lo = lo_mu - span, hi = hi_mu + span;
  while (consistency(f, i, lo) > 0.0) lo -= span;
  while (consistency(f, i, hi) < 0.0) hi += span;
  for (int it = 0; it < 2000; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (consistency(f, i, mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

std::vector<double> solve_performances_serial(const Field& f) {
  std::vector<double> p(f.ids.size());
  for (std::size_t i = 0; i < f.ids.size(); ++i) p[i] = solve_one(f, i);
  return p;
}

std::vector<double> solve_performances(const Field& f) {
  std::vector<double> p(f.ids.size());
  const auto n = static_cast<std::ptrdiff_t>(f.ids.size());
#pragma omp parallel for schedule(dynamic, 8)
  for (std::ptrdiff_t i = 0; i < n; ++i) p[static_cast<std::size_t>(i)] = solve_one(f, static_cast<std::size_t>(i));
  return p;
}

RatingState apply_contest(const RatingState& state, const ContestResult& result, const RatingParams& params) {
  params.validate();
  result.validate();
  if (result.ranking.size() < 2) return state;
  const Field f = make_field(state, result, params);
  const auto perf = solve_performances(f);
  RatingState next = state;
  const double b2 = params.beta * params.beta;
  for (std::size_t i = 0; i < f.ids.size(); ++i) {
    auto it = state.find(f.ids[i]);
    Rating r = it == state.end() ? Rating{params.mu0, params.sigma0, 0} : it->second;
    const double s2 = r.sigma * r.sigma;
    const double w = s2 / (s2 + b2);
    r.mu = (1.0 - w) * r.mu + w * perf[i];
    r.sigma = std::sqrt(s2 * b2 / (s2 + b2));
    ++r.contests;
    next[f.ids[i]] = r;
  }
  return next;
}

RatingHistory rate_history(const std::vector<ContestResult>& contests, const RatingParams& params) {
  std::optional<double> last;
  for (const auto& c : contests) {
    if (!c.timestamp) continue;
    if (last && *c.timestamp < *last) {
      throw ConfigError("contest " + c.competition_id + " is out of time order");
    }
    last = c.timestamp;
  }
  RatingHistory h;
  for (const auto& c : contests) {
    h.state = apply_contest(h.state, c, params);
    std::map<std::string, Rating> snap;
    for (const auto& [id, rank] : c.ranking) {
      if (auto it = h.state.find(id); it != h.state.end()) snap[id] = it->second;
    }
    h.snapshots.push_back(std::move(snap));
  }
  return h;
}

std::vector<ContestResult> load_contests(const std::filesystem::path& path) {
  const auto t = read_csv(path);
  const auto cid = t.column("competition_id"), pid = t.column("participant"), rk = t.column("rank");
  const auto ts = t.column("timestamp");
  if (!cid || !pid || !rk) throw ConfigError(path.string() + ": needs competition_id, participant and rank columns");
  std::vector<ContestResult> out;
  std::map<std::string, std::size_t> index;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    auto [it, fresh] = index.emplace(row[*cid], out.size());
    if (fresh) out.push_back(ContestResult{row[*cid], std::nullopt, {}});
    auto& c = out[it->second];
    double rank = 0.0;
    if (!parse_double(row[*rk], rank) || rank != std::floor(rank)) {
      throw ConfigError(path.string() + ": row " + std::to_string(r + 2) + " has a non-integer rank");
    }
    c.ranking.emplace_back(row[*pid], static_cast<int>(rank));
    if (ts && !row[*ts].empty()) {
      double v = 0.0;
      if (!parse_double(row[*ts], v)) throw ConfigError(path.string() + ": bad timestamp on row " + std::to_string(r + 2));
      if (c.timestamp && *c.timestamp != v) throw ConfigError("contest " + c.competition_id + " has several timestamps");
      c.timestamp = v;
    }
  }
  for (const auto& c : out) c.validate();
  return out;
}

std::map<std::string, eval::Medal> infer_medals(const ContestResult& contest) {
  std::map<std::string, eval::Medal> out;
  const int teams = static_cast<int>(contest.ranking.size());
  for (const auto& [id, rank] : contest.ranking) out[id] = eval::medal_for(std::min(rank, teams), teams);
  return out;
}

std::optional<double> competition_difficulty(const ContestResult& contest,
                                             const std::map<std::string, Rating>& snapshot,
                                             const std::map<std::string, eval::Medal>& medals) {
  double sum = 0.0;
  int n = 0;
  for (const auto& [id, rank] : contest.ranking) {
    auto m = medals.find(id);
    if (m == medals.end() || m->second == eval::Medal::none) continue;
    auto r = snapshot.find(id);
    if (r == snapshot.end()) throw ConfigError("no close-time rating for medalist " + id);
    sum += r->second.mu;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

}  // namespace kolb::rating
