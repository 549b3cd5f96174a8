#include "kolb/orch/ablation.hpp"

#include <mutex>
#include <random>
#include <regex>

#include "kolb/llm/providers.hpp"
#include "kolb/scaffold/scaffold.hpp"
#include "kolb/util/error.hpp"
#include "kolb/util/text.hpp"

namespace kolb::orch {

namespace fs = std::filesystem;

namespace {

std::optional<double> find_number(const std::string& text, const std::regex& re) {
  std::smatch m;
  if (!std::regex_search(text, m, re)) return std::nullopt;
  double v = 0.0;
  if (!parse_double(m[1].str(), v)) return std::nullopt;
  return v;
}

const std::regex kQuality(R"(# quality: ([-0-9.eE+]+))");
const std::regex kReported(R"(Validation score: ([-0-9.eE+]+))");

std::string program(double quality, bool crash) {
  return "```python\n# quality: " + format_double(quality) + (crash ? "\n# crash" : "") + "\ntrain()\n```";
}

// Code quality is written into the program so the executor and the
// improve/debug prompts can read it back.
class SyntheticProvider : public llm::Provider {
 public:
  SyntheticProvider(const AblationOptions& o, std::uint64_t stream) : o_(o), rng_(stream) {}

  std::string complete(const llm::CompletionRequest& r) override {
    std::normal_distribution<double> noise(0.0, o_.sd);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const bool crash = u(rng_) < o_.bug_rate;
    const double eps = noise(rng_);
    if (r.template_id == "tree_draft") {
      const bool seeded = r.prompt.find("Summary of Past Submissions") != std::string::npos;
      return program((seeded ? o_.seeded_mean : o_.unseeded_mean) + eps, crash);
    }
    if (r.template_id == "tree_improve") {
      const double base = find_number(r.prompt, kQuality).value_or(o_.unseeded_mean);
      return program(base + 0.25 * eps, crash);
    }
    if (r.template_id == "tree_debug") {
      return program(find_number(r.prompt, kQuality).value_or(o_.unseeded_mean), false);
    }
    if (r.template_id == "tree_review") {
      const auto v = find_number(r.prompt, kReported);
      Json j{{"success", v.has_value()}, {"direction", "maximize"}};
      j["metric"] = v ? Json(*v) : Json();
      return j.dump();
    }
    throw ConfigError("synthetic provider has no reply for template " + r.template_id);
  }

 private:
  AblationOptions o_;
  std::mt19937_64 rng_;
};

class OutcomeExecutor : public exec::Executor {
 public:
  exec::ExecResult execute(const exec::ExecRequest& req) override {
    exec::ExecResult r;
    r.duration = 1.0;
    if (req.code.find("# crash") != std::string::npos) {
      r.exit_status = 1;
      r.stderr_tail = "Traceback (most recent call last):\nRuntimeError: synthetic crash";
      return r;
    }
    const auto q = find_number(req.code, kQuality);
    if (!q) throw ConfigError("outcome executor: program carries no quality line");
    write_text_file(req.working_dir / "submission.csv", "id,target\n1," + format_double(*q) + "\n");
    r.stdout_tail = "Validation score: " + format_double(*q) + "\n";
    return r;
  }
  std::size_t spawn_count() const override { return 0; }
};

double best_score(const tree::SearchResult& res) {
  const auto top = tree::top_nodes(res.tree, 1);
  if (top.empty()) return 0.0;
  return top.front()->metric->value;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace

Json AblationResult::to_json() const {
  return Json{{"pairs", seeded.size()},
              {"mean_seeded", mean_seeded},
              {"mean_unseeded", mean_unseeded},
              {"welch", {{"t", welch.t}, {"dof", welch.dof}, {"p", welch.p}}},
              {"seeded", seeded},
              {"unseeded", unseeded}};
}

AblationResult run_seeding_ablation(const AblationOptions& o, const tree::AbstractionSeed& seeds,
                                    const fs::path& scratch) {
  if (o.pairs < 2) throw ConfigError("ablation needs at least two pairs");
  if (seeds.empty()) throw ConfigError("ablation needs at least one seed summary");
  auto templates = llm::TemplateCatalog::with_defaults();
  AblationResult res;
  for (int i = 0; i < o.pairs; ++i) {
    for (int arm = 0; arm < 2; ++arm) {
      const fs::path dir = scratch / ("arm" + std::to_string(arm));
      fs::remove_all(dir);
      fs::create_directories(dir / "ws");
      scaffold::Workspace ws;
      ws.root = dir / "ws";
      const std::uint64_t stream = o.seed * 0x100000001b3ULL + static_cast<std::uint64_t>(i);
      llm::Gateway gateway(std::make_shared<SyntheticProvider>(o, stream), llm::GatewayOptions{});
      OutcomeExecutor executor;
      scaffold::RuntimeBudget budget(o.runtime);
      scaffold::ScaffoldEnv env(gateway, templates, executor, ws, budget);
      env.extra["task"] = "synthetic task";
      tree::TreeEnv tenv{env, tree::TreePolicy::for_runtime(o.runtime, stream), dir / "tree", "score"};
      const auto search = tree::run_search(arm == 0 ? seeds : tree::AbstractionSeed{}, tenv);
      (arm == 0 ? res.seeded : res.unseeded).push_back(best_score(search));
    }
  }
  fs::remove_all(scratch / "arm0");
  fs::remove_all(scratch / "arm1");
  res.mean_seeded = mean(res.seeded);
  res.mean_unseeded = mean(res.unseeded);
  res.welch = stats::welch_t_test(res.seeded, res.unseeded);
  return res;
}

}  // namespace kolb::orch
