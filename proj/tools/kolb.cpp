#include <CLI11.hpp>

#include <iostream>

#include "kolb/orch/pipeline.hpp"
#include "kolb/orch/report.hpp"
#include "kolb/util/csv.hpp"
#include "kolb/util/error.hpp"

namespace fs = std::filesystem;
using namespace kolb;
using namespace kolb::orch;

namespace {

struct RunFlags {
  std::string bundle;
  std::string config;
  std::string cassette;
  std::optional<std::uint64_t> seed;
  std::optional<double> scale;
  std::string run_dir;
  std::string label;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("bundle", f.bundle, "Competition bundle directory")->required()->check(CLI::ExistingDirectory);
  cmd->add_option("--config", f.config, "Run configuration (JSON)")->check(CLI::ExistingFile);
  cmd->add_option("--cassette", f.cassette, "record:<path>, replay:<path> or passthrough");
  cmd->add_option("--seed", f.seed, "Overrides the configured seed");
  cmd->add_option("--scale", f.scale, "Divides every budget (1 = nominal days)");
  cmd->add_option("--run-dir", f.run_dir, "Exact run directory instead of <run_dir>/<competition>/<run id>");
  cmd->add_option("--label", f.label, "Method label recorded in the manifest");
}

int run(const RunFlags& f, bool solve) {
  RunConfig cfg = f.config.empty() ? RunConfig{} : RunConfig::load(f.config);
  if (!f.cassette.empty()) apply_cassette_flag(cfg, f.cassette);
  if (f.seed) cfg.seed = *f.seed;
  if (f.scale) cfg.budget.scale = *f.scale;
  auto bundle = ingest_bundle(f.bundle);
  for (const auto& w : bundle.warnings) std::cerr << "warning: " << w << "\n";
  const fs::path root = f.run_dir.empty()
                            ? cfg.run_dir / bundle.manifest.competition_id / run_id(cfg, bundle)
                            : fs::path(f.run_dir);
  RunContext ctx(cfg, bundle, root);
  auto r = run_all(ctx, solve);
  if (!f.label.empty()) {
    r.manifest.body["label"] = f.label;
    r.manifest.seal();
    r.manifest.save(root / "manifest.json");
  }
  const Json& b = r.manifest.body;
  std::cout << "run " << b.at("run_id").get<std::string>() << " " << b.at("status").get<std::string>() << "\n"
            << "root " << root.string() << "\nmanifest " << r.manifest.hash << "\n";
  for (const auto& o : r.setup.outcomes) {
    std::cout << "  " << o.stage_id << " " << scaffold::to_string(o.status) << " (" << o.attempts << ")\n";
  }
  if (r.solve) {
    for (const auto& p : r.solve->exported) std::cout << "submission " << p.generic_string() << "\n";
    if (!r.solve->ok) std::cout << "failure " << r.solve->failure << "\n";
  }
  if (r.evaluation) {
    std::cout << "quantile " << format_double(r.evaluation->quantile) << " rank " << r.evaluation->rank << "/"
              << r.evaluation->teams << " medal " << eval::to_string(r.evaluation->medal) << "\n";
  }
  if (b.contains("failure")) std::cout << "failure " << b.at("failure").get<std::string>() << "\n";
  return b.at("status") == "complete" ? 0 : 1;
}

std::vector<fs::path> expand_csvs(const std::vector<std::string>& args) {
  std::vector<fs::path> out;
  for (const auto& a : args) {
    if (fs::is_directory(a)) {
      std::vector<fs::path> in_dir;
      for (const auto& e : fs::directory_iterator(a)) {
        if (e.path().extension() == ".csv") in_dir.push_back(e.path());
      }
      std::sort(in_dir.begin(), in_dir.end());
      out.insert(out.end(), in_dir.begin(), in_dir.end());
    } else {
      out.emplace_back(a);
    }
  }
  return out;
}

std::vector<fs::path> expand_manifests(const std::vector<std::string>& args) {
  std::vector<fs::path> out;
  for (const auto& a : args) {
    if (!fs::is_directory(a)) {
      out.emplace_back(a);
      continue;
    }
    std::vector<fs::path> found;
    for (const auto& e : fs::recursive_directory_iterator(a)) {
      if (e.path().filename() == "manifest.json") found.push_back(e.path());
    }
    std::sort(found.begin(), found.end());
    out.insert(out.end(), found.begin(), found.end());
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scaffolded competition agent: setup, solve, evaluate, rate, report"};
  app.require_subcommand(1);

  RunFlags setup_f, solve_f;
  auto* setup = app.add_subcommand("setup", "Build and test the workspace only");
  add_run_flags(setup, setup_f);
  auto* solve = app.add_subcommand("solve", "Setup, scaffold solutions, tree search, export and evaluate");
  add_run_flags(solve, solve_f);

  std::string eval_bundle;
  std::vector<std::string> eval_subs;
  auto* evaluate = app.add_subcommand("evaluate", "Score submissions against a bundle's leaderboard");
  evaluate->add_option("bundle", eval_bundle, "Competition bundle directory")->required()->check(CLI::ExistingDirectory);
  evaluate->add_option("submissions", eval_subs, "Submission files or directories (merged)")->required();

  std::string contests, ratings_out;
  auto* rate = app.add_subcommand("rate", "Elo-MMR ratings over a contest history");
  rate->add_option("contests", contests, "CSV: competition_id, participant, rank[, timestamp]")
      ->required()
      ->check(CLI::ExistingFile);
  rate->add_option("--out", ratings_out, "Write ratings CSV here instead of stdout");

  std::vector<std::string> report_in;
  std::string report_out = "report", report_results, report_contests, report_label = "kolb";
  auto* report = app.add_subcommand("report", "Tables, stage statistics and method comparison");
  report->add_option("manifests", report_in, "manifest.json files or directories searched for them");
  report->add_option("--results", report_results, "Extra results CSV (method, competition_id, quantile, medal)")
      ->check(CLI::ExistingFile);
  report->add_option("--contests", report_contests, "Contest history CSV for ratings")->check(CLI::ExistingFile);
  report->add_option("--label", report_label, "Method label for manifests without one");
  report->add_option("--out", report_out, "Output directory");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*setup) return run(setup_f, false);
    if (*solve) return run(solve_f, true);
    if (*evaluate) {
      auto bundle = ingest_bundle(eval_bundle);
      if (!bundle.evaluation_enabled()) {
        for (const auto& w : bundle.warnings) std::cerr << "error: " << w << "\n";
        return 2;
      }
      auto ev = evaluate_submissions(bundle, expand_csvs(eval_subs));
      if (!ev) {
        std::cerr << "error: no submissions\n";
        return 2;
      }
      std::cout << ev->to_json().dump(2) << "\n";
      return 0;
    }
    if (*rate) {
      auto h = rating::rate_history(rating::load_contests(contests));
      CsvTable t{{"participant", "mu", "sigma", "contests"}, {}};
      for (const auto& [id, r] : h.state) {
        t.rows.push_back({id, format_double(r.mu), format_double(r.sigma), std::to_string(r.contests)});
      }
      if (ratings_out.empty()) {
        std::cout << format_csv(t);
      } else {
        write_csv(ratings_out, t);
      }
      return 0;
    }
    if (*report) {
      ReportInputs in;
      std::vector<RunManifest> manifests;
      for (const auto& p : expand_manifests(report_in)) {
        auto m = RunManifest::load(p);
        if (!m.verify()) std::cerr << "warning: " << p.string() << " does not match its hash\n";
        in.stage_runs.push_back(stage_outcomes_of(m));
        manifests.push_back(std::move(m));
      }
      in.rows = rows_from_manifests(manifests, report_label);
      if (!report_results.empty()) {
        auto extra = load_result_rows(report_results);
        in.rows.insert(in.rows.end(), extra.begin(), extra.end());
      }
      if (!report_contests.empty()) in.contests = fs::path(report_contests);
      if (in.rows.empty() && !in.contests) {
        std::cerr << "error: nothing to report\n";
        return 2;
      }
      auto s = emit_report(in, report_out);
      for (const auto& f : s.files) std::cout << (fs::path(report_out) / f).string() << "\n";
      if (s.comparison_skipped) std::cout << "comparison skipped: " << *s.comparison_skipped << "\n";
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
