#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "kolb/stats/tests.hpp"
#include "kolb/tree/tree.hpp"

namespace kolb::orch {

// Paired tree searches with and without scaffold summaries. A synthetic
// provider draws draft quality from `seeded` when the draft prompt carries
// the past-submissions block and from `unseeded` otherwise, so any gap in
// the best scores has to travel through the prompts and the tree's own
// selection. Pair i uses the same random stream in both arms.
struct AblationOptions {
  int pairs = 100;
  std::uint64_t seed = 1;
  double seeded_mean = 0.70;
  double unseeded_mean = 0.60;
  double sd = 0.08;
  double bug_rate = 0.2;      // drafts and improvements that crash
  double runtime = 40.0;      // seconds per run; each node costs 1
};

struct AblationResult {
  std::vector<double> seeded;    // best validation score per run
  std::vector<double> unseeded;
  stats::WelchResult welch;      // seeded minus unseeded
  double mean_seeded = 0.0;
  double mean_unseeded = 0.0;
  Json to_json() const;
};

AblationResult run_seeding_ablation(const AblationOptions& options, const tree::AbstractionSeed& seeds,
                                    const std::filesystem::path& scratch);

}  // namespace kolb::orch
