#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "kolb/orch/config.hpp"

namespace kolb::orch {

struct HyperParams {
  double learning_rate = 1e-3;
  std::string optimizer = "Adam";
};

struct TrialObservation {
  HyperParams params;
  std::optional<double> score;  // absent for failed trials
};

// Proposes the next hyperparameter trial from the ones seen so far.
class SearchStrategy {
 public:
  virtual ~SearchStrategy() = default;
  virtual HyperParams propose(const std::vector<TrialObservation>& seen) = 0;
};

// Log-uniform learning rate, uniform optimiser.
std::unique_ptr<SearchStrategy> make_random_search(const TrainingCaps& caps, std::uint64_t seed);
// Random for the first few trials, then samples around the incumbent with
// a radius that shrinks as trials accumulate.
std::unique_ptr<SearchStrategy> make_local_search(const TrainingCaps& caps, std::uint64_t seed,
                                                  core::Direction direction);
std::unique_ptr<SearchStrategy> make_search(const std::string& name, const TrainingCaps& caps, std::uint64_t seed,
                                            core::Direction direction);

enum class TrialKind { search, fold, tta };
std::string to_string(TrialKind k);

struct TrialRequest {
  TrialKind kind = TrialKind::search;
  int index = 0;          // fold or TTA round for those kinds
  int epochs = 30;
  double max_time = 0.0;  // scaled seconds
};

struct Admission {
  bool admitted = false;
  std::string reason;  // set when denied
};

// Admission control for one solution's training. Search trials are capped
// at n_trials, each at max_epochs and max_time; folds are admitted once
// each, only after a search trial produced a configuration.
class TrainingBudget {
 public:
  TrainingBudget(TrainingCaps caps, double scaled_max_time);
  Admission admit(const TrialRequest& request);
  void record_search_result(bool produced_config) { have_config_ = have_config_ || produced_config; }
  int search_trials() const { return search_trials_; }
  double max_time() const { return max_time_; }
  const TrainingCaps& caps() const { return caps_; }

 private:
  TrainingCaps caps_;
  double max_time_;
  int search_trials_ = 0;
  bool have_config_ = false;
  std::vector<bool> folds_, tta_;
};

// Fold requests of the cross-validation stage, one per fold.
std::vector<TrialRequest> fold_schedule(const TrainingCaps& caps, double scaled_max_time);

}  // namespace kolb::orch
