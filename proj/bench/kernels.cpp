// Parallel kernels against their serial references. Both sides compute
// identical results (checked in the unit tests); only time differs.

#include <benchmark/benchmark.h>

#include <numeric>
#include <random>

#include "kolb/eval/leaderboard.hpp"
#include "kolb/rating/elo_mmr.hpp"

using namespace kolb;

namespace {

struct QuantileCase {
  eval::LeaderboardSnapshot board;
  std::vector<double> finals;
};

QuantileCase quantile_case(std::int64_t teams, std::int64_t finals) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  QuantileCase c;
  c.board.direction = core::Direction::maximize;
  for (std::int64_t i = 0; i < teams; ++i) c.board.scores.push_back(u(rng));
  for (std::int64_t i = 0; i < finals; ++i) c.finals.push_back(u(rng));
  return c;
}

void BM_QuantileBatchSerial(benchmark::State& st) {
  const auto c = quantile_case(st.range(0), st.range(1));
  for (auto _ : st) benchmark::DoNotOptimize(eval::quantile_batch_serial(c.finals, c.board));
  st.SetItemsProcessed(st.iterations() * st.range(1));
}

void BM_QuantileBatch(benchmark::State& st) {
  const auto c = quantile_case(st.range(0), st.range(1));
  for (auto _ : st) benchmark::DoNotOptimize(eval::quantile_batch(c.finals, c.board));
  st.SetItemsProcessed(st.iterations() * st.range(1));
}

rating::Field elo_field(std::int64_t n) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> mu(1100, 1900), sigma(60, 350);
  rating::RatingState s;
  rating::ContestResult c{"bench", std::nullopt, {}};
  std::vector<int> ranks(static_cast<std::size_t>(n));
  std::iota(ranks.begin(), ranks.end(), 1);
  std::shuffle(ranks.begin(), ranks.end(), rng);
  for (std::int64_t i = 0; i < n; ++i) {
    const std::string id = "p" + std::to_string(i);
    s[id] = rating::Rating{mu(rng), sigma(rng), 1};
    c.ranking.emplace_back(id, ranks[static_cast<std::size_t>(i)]);
  }
  return rating::make_field(s, c, {});
}

void BM_EloSolveSerial(benchmark::State& st) {
  const auto f = elo_field(st.range(0));
  for (auto _ : st) benchmark::DoNotOptimize(rating::solve_performances_serial(f));
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

void BM_EloSolve(benchmark::State& st) {
  const auto f = elo_field(st.range(0));
  for (auto _ : st) benchmark::DoNotOptimize(rating::solve_performances(f));
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

}  // namespace

BENCHMARK(BM_QuantileBatchSerial)->Args({1000, 10000})->Args({5000, 100000})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_QuantileBatch)->Args({1000, 10000})->Args({5000, 100000})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EloSolveSerial)->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EloSolve)->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
