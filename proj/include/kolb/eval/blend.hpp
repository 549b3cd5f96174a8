#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kolb/eval/metric.hpp"

namespace kolb::eval {

enum class BlendMethod { mean, weighted_fit, small_network };
std::string to_string(BlendMethod m);
BlendMethod parse_blend_method(const std::string& s);

struct BlendConfig {
  BlendMethod method = BlendMethod::weighted_fit;
  std::vector<PredictionTable> candidates;  // validation predictions, >= 2
  PredictionTable targets;                  // validation targets
  Metric metric;
  std::uint64_t seed = 0;  // small_network initialisation
  int max_sweeps = 100;
  int hidden = 8;
  int epochs = 2000;
  double learning_rate = 0.05;
};

struct BlendResult {
  PredictionTable blended;      // on the validation rows
  std::vector<double> weights;  // simplex weights; network reports mean gate
  double metric_value = 0.0;
  double best_single = 0.0;     // best candidate's metric
  std::size_t best_index = 0;
  // Gating network parameters (small_network only).
  std::vector<double> network;

  // Applies the fitted combiner to aligned test-set predictions.
  PredictionTable apply(const std::vector<PredictionTable>& inputs) const;
  BlendMethod method = BlendMethod::mean;
  int hidden = 0;
};

// mean: uniform average. weighted_fit: coordinate descent over the simplex
// from the best single candidate, moving mass between pairs with a
// golden-section line search; only improving moves are kept.
// small_network: per-row softmax gate over the candidates from one tanh
// hidden layer, trained on squared error, so the output is always a convex
// combination of the inputs.
BlendResult blend(const BlendConfig& config);

}  // namespace kolb::eval
