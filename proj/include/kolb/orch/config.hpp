#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "kolb/eval/blend.hpp"
#include "kolb/llm/gateway.hpp"
#include "kolb/scaffold/scaffold.hpp"
#include "kolb/util/json_io.hpp"

namespace kolb::orch {

enum class CompetitionClass { tabular, cv, nlp };
std::string to_string(CompetitionClass c);
CompetitionClass parse_competition_class(const std::string& s);

inline constexpr double kDay = 86400.0;

// Caps on the engine-driven training of scaffold solutions, nominal
// seconds.
struct TrainingCaps {
  int max_epochs = 30;
  double max_time = 10 * 3600.0;
  int batch_size = 32;
  int n_trials = 20;
  int k_folds = 5;
  int blend_after = 3;
  int tta_rounds = 4;
  double lr_min = 1e-6;
  double lr_max = 1e-2;
  std::vector<std::string> optimizers{"Adam", "SGD", "AdamW"};
};

// Per-class runtime, split between the scaffold and open-ended phases.
// Every duration is divided by `scale` before use.
struct BudgetPolicy {
  double tabular_total = 2 * kDay;
  double tabular_scaffold = 1 * kDay;
  double deep_total = 4 * kDay;  // cv and nlp
  double deep_scaffold = 2 * kDay;
  double grace = 0.05;
  TrainingCaps training;
  double scale = 1440.0;  // days to minutes

  double total(CompetitionClass c) const;  // nominal
  double scaffold_share(CompetitionClass c) const;
  double open_ended_share(CompetitionClass c) const;
  double scaled(double nominal) const { return nominal / scale; }
  // ConfigError unless scale > 0 and each split lies within its total.
  void validate() const;
  Json to_json() const;
};

struct SearchConfig {
  std::string strategy = "random";  // random | local (model-based refinement)
  int solution_rounds = 3;           // design rounds on the deep route
  int tool_runs = 3;                 // tabular tool presets
  eval::BlendMethod blend_method = eval::BlendMethod::weighted_fit;
  double p_debug = 0.5;
  int n_draft = 5;
  int max_debug_depth = 3;
  int n_max = 5000;
};

struct RunConfig {
  llm::ProviderConfig provider;
  llm::CassetteMode cassette_mode = llm::CassetteMode::passthrough;
  std::filesystem::path cassette_path;
  std::uint64_t seed = 0;
  BudgetPolicy budget;
  scaffold::GraphOptions graph;
  SearchConfig search;
  // Executor: "process" runs the interpreter, "simulated" replays
  // sim_script.
  std::string executor = "process";
  std::filesystem::path sim_script;
  std::vector<std::string> interpreter{"python3"};
  bool confine_writes = true;
  // Script run for tabular-only competitions; empty uses the shipped
  // baseline.
  std::filesystem::path tabular_tool;
  std::filesystem::path run_dir = "runs";

  // Hash over everything that changes run behaviour. Paths enter by file
  // content; the cassette and run_dir are left out, so a recorded run and
  // its replay share a digest.
  std::string digest() const;
  Json to_json() const;
  // Unknown keys are an error so typos do not silently use defaults.
  static RunConfig from_json(const Json& j, const std::filesystem::path& base_dir = {});
  static RunConfig load(const std::filesystem::path& path);
};

// "<mode>:<path>", e.g. "replay:cassettes/tabular.jsonl".
void apply_cassette_flag(RunConfig& cfg, const std::string& flag);

}  // namespace kolb::orch
