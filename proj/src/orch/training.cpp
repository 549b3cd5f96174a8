#include "kolb/orch/training.hpp"

#include <cmath>

#include "kolb/util/error.hpp"

namespace kolb::orch {

namespace {

double draw(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

class RandomSearch : public SearchStrategy {
 public:
  RandomSearch(TrainingCaps caps, std::uint64_t seed) : caps_(std::move(caps)), rng_(seed) {}
  HyperParams propose(const std::vector<TrialObservation>&) override {
    const double lo = std::log(caps_.lr_min), hi = std::log(caps_.lr_max);
    HyperParams p;
    p.learning_rate = std::exp(lo + (hi - lo) * draw(rng_));
    p.optimizer = caps_.optimizers[static_cast<std::size_t>(draw(rng_) * caps_.optimizers.size())];
    return p;
  }

 private:
  TrainingCaps caps_;
  std::mt19937_64 rng_;
};

class LocalSearch : public SearchStrategy {
 public:
  LocalSearch(TrainingCaps caps, std::uint64_t seed, core::Direction d)
      : caps_(caps), random_(caps, seed ^ 0x9e3779b97f4a7c15ULL), rng_(seed), direction_(d) {}
  HyperParams propose(const std::vector<TrialObservation>& seen) override {
    const TrialObservation* best = nullptr;
    for (const auto& o : seen) {
      if (o.score && (!best || core::better(*o.score, *best->score, direction_))) best = &o;
    }
    constexpr std::size_t kWarmup = 4;
    if (!best || seen.size() < kWarmup) return random_.propose(seen);
    const double lo = std::log(caps_.lr_min), hi = std::log(caps_.lr_max);
    const double radius = (hi - lo) / (2.0 + static_cast<double>(seen.size() - kWarmup));
    HyperParams p;
    const double x = std::log(best->params.learning_rate) + radius * (2.0 * draw(rng_) - 1.0);
    p.learning_rate = std::exp(std::clamp(x, lo, hi));
    p.optimizer = draw(rng_) < 0.75
                      ? best->params.optimizer
                      : caps_.optimizers[static_cast<std::size_t>(draw(rng_) * caps_.optimizers.size())];
    return p;
  }

 private:
  TrainingCaps caps_;
  RandomSearch random_;
  std::mt19937_64 rng_;
  core::Direction direction_;
};

}  // namespace

std::unique_ptr<SearchStrategy> make_random_search(const TrainingCaps& caps, std::uint64_t seed) {
  return std::make_unique<RandomSearch>(caps, seed);
}

std::unique_ptr<SearchStrategy> make_local_search(const TrainingCaps& caps, std::uint64_t seed,
                                                  core::Direction direction) {
  return std::make_unique<LocalSearch>(caps, seed, direction);
}

std::unique_ptr<SearchStrategy> make_search(const std::string& name, const TrainingCaps& caps, std::uint64_t seed,
                                            core::Direction direction) {
  if (name == "random") return make_random_search(caps, seed);
  if (name == "local") return make_local_search(caps, seed, direction);
  throw ConfigError("unknown search strategy: " + name);
}

std::string to_string(TrialKind k) {
  switch (k) {
    case TrialKind::search: return "search";
    case TrialKind::fold: return "fold";
    case TrialKind::tta: return "tta";
  }
  return "search";
}

TrainingBudget::TrainingBudget(TrainingCaps caps, double scaled_max_time)
    : caps_(std::move(caps)),
      max_time_(scaled_max_time),
      folds_(static_cast<std::size_t>(caps_.k_folds), false),
      tta_(static_cast<std::size_t>(caps_.tta_rounds), false) {}

Admission TrainingBudget::admit(const TrialRequest& r) {
  if (r.epochs > caps_.max_epochs) {
    return {false, "epochs " + std::to_string(r.epochs) + " exceed max_epochs " + std::to_string(caps_.max_epochs)};
  }
  if (!(r.max_time > 0.0) || r.max_time > max_time_) return {false, "time limit outside (0, max_time]"};
  switch (r.kind) {
    case TrialKind::search:
      if (search_trials_ >= caps_.n_trials) {
        return {false, "trial " + std::to_string(search_trials_ + 1) + " exceeds n_trials " +
                           std::to_string(caps_.n_trials)};
      }
      ++search_trials_;
      return {true, ""};
    case TrialKind::fold:
    case TrialKind::tta: {
      auto& used = r.kind == TrialKind::fold ? folds_ : tta_;
      const char* what = r.kind == TrialKind::fold ? "fold" : "tta round";
      if (!have_config_) return {false, std::string(what) + " requested before any search trial succeeded"};
      if (r.index < 0 || r.index >= static_cast<int>(used.size())) {
        return {false, std::string(what) + " " + std::to_string(r.index) + " out of range"};
      }
      if (used[static_cast<std::size_t>(r.index)]) {
        return {false, std::string(what) + " " + std::to_string(r.index) + " already trained"};
      }
      used[static_cast<std::size_t>(r.index)] = true;
      return {true, ""};
    }
  }
  return {false, "unknown trial kind"};
}

std::vector<TrialRequest> fold_schedule(const TrainingCaps& caps, double scaled_max_time) {
  std::vector<TrialRequest> out;
  for (int k = 0; k < caps.k_folds; ++k) out.push_back({TrialKind::fold, k, caps.max_epochs, scaled_max_time});
  return out;
}

}  // namespace kolb::orch
