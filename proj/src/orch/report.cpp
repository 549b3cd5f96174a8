#include "kolb/orch/report.hpp"

#include <map>
#include <set>
#include <sstream>

#include "kolb/util/csv.hpp"
#include "kolb/util/error.hpp"
#include "kolb/util/text.hpp"

namespace kolb::orch {

namespace fs = std::filesystem;

std::vector<ResultRow> rows_from_manifests(const std::vector<RunManifest>& manifests, const std::string& default_label) {
  std::vector<ResultRow> rows;
  for (const auto& m : manifests) {
    const Json& b = m.body;
    ResultRow r;
    r.method = b.value("label", default_label);
    r.competition_id = b.value("competition_id", "");
    r.run_id = b.value("run_id", "");
    r.status = b.value("status", "");
    const Json ev = b.value("evaluation", Json());
    if (ev.is_object()) {
      r.quantile = ev.at("quantile").get<double>();
      r.rank = ev.at("rank").get<int>();
      r.teams = ev.at("teams").get<int>();
      r.medal = ev.at("medal").get<std::string>();
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<ResultRow> load_result_rows(const fs::path& path) {
  const auto t = read_csv(path);
  const auto m = t.column("method"), c = t.column("competition_id"), q = t.column("quantile");
  if (!m || !c || !q) throw ConfigError(path.string() + ": results need method, competition_id and quantile columns");
  const auto medal = t.column("medal");
  std::vector<ResultRow> rows;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    ResultRow r;
    r.method = row[*m];
    r.competition_id = row[*c];
    r.status = "external";
    if (!row[*q].empty()) {
      double v = 0.0;
      if (!parse_double(row[*q], v)) {
        throw ConfigError(path.string() + ": row " + std::to_string(i + 2) + " has a non-numeric quantile");
      }
      r.quantile = v;
    }
    if (medal && !row[*medal].empty()) r.medal = row[*medal];
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<scaffold::StageOutcome> stage_outcomes_of(const RunManifest& manifest) {
  std::vector<scaffold::StageOutcome> out;
  for (const char* part : {"setup", "solve"}) {
    const Json p = manifest.body.value(part, Json());
    if (!p.is_object() || !p.contains("outcomes")) continue;
    for (const auto& o : p.at("outcomes")) out.push_back(scaffold::StageOutcome::from_json(o));
  }
  return out;
}

namespace {

std::string opt(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

void put(const fs::path& dir, const std::string& name, const std::string& text, ReportSummary& s) {
  write_text_file(dir / name, text);
  s.files.push_back(name);
}

}  // namespace

ReportSummary emit_report(const ReportInputs& in, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  ReportSummary s;
  std::ostringstream md;
  md << "# Report\n\n";

  CsvTable results{{"method", "competition_id", "run_id", "status", "quantile", "rank", "teams", "medal"}, {}};
  for (const auto& r : in.rows) {
    results.rows.push_back({r.method, r.competition_id, r.run_id, r.status, opt(r.quantile),
                            r.rank ? std::to_string(*r.rank) : "", r.teams ? std::to_string(*r.teams) : "", r.medal});
  }
  put(out_dir, "results.csv", format_csv(results), s);

  // Mean quantile per (method, competition) over evaluated runs.
  std::map<std::string, std::map<std::string, std::pair<double, int>>> cell;
  std::set<std::string> competitions;
  std::map<std::string, std::map<std::string, int>> medals;
  std::map<std::string, int> runs_of;
  for (const auto& r : in.rows) {
    ++runs_of[r.method];
    ++medals[r.method][r.medal];
    if (!r.quantile) continue;
    auto& c = cell[r.method][r.competition_id];
    c.first += *r.quantile;
    ++c.second;
    competitions.insert(r.competition_id);
  }
  CsvTable quant{{"method", "competition_id", "quantile", "runs"}, {}};
  for (const auto& [method, by] : cell) {
    for (const auto& [comp, c] : by) {
      quant.rows.push_back({method, comp, format_double(c.first / c.second), std::to_string(c.second)});
    }
  }
  put(out_dir, "quantiles.csv", format_csv(quant), s);

  CsvTable mc{{"method", "runs", "gold", "silver", "bronze", "any_medal_rate"}, {}};
  md << "| method | runs | mean quantile | gold | silver | bronze | any medal |\n|---|---|---|---|---|---|---|\n";
  for (const auto& [method, n] : runs_of) {
    auto& m = medals[method];
    const int any = m["gold"] + m["silver"] + m["bronze"];
    double qsum = 0.0;
    int qn = 0;
    for (const auto& [comp, c] : cell[method]) {
      qsum += c.first / c.second;
      ++qn;
    }
    mc.rows.push_back({method, std::to_string(n), std::to_string(m["gold"]), std::to_string(m["silver"]),
                       std::to_string(m["bronze"]), format_double(static_cast<double>(any) / n)});
    md << "| " << method << " | " << n << " | " << (qn ? format_double(qsum / qn) : "-") << " | " << m["gold"]
       << " | " << m["silver"] << " | " << m["bronze"] << " | " << format_double(100.0 * any / n) << "% |\n";
  }
  put(out_dir, "medal_counts.csv", format_csv(mc), s);

  if (!in.stage_runs.empty()) {
    s.stages = scaffold::stage_outcome_report(in.stage_runs);
    write_json_file(out_dir / "stage_outcomes.json", s.stages->to_json());
    s.files.push_back("stage_outcomes.json");
    md << "\n## Stage outcomes\n\n```\n" << s.stages->to_text() << "```\n";
  }

  // Competitions every method was evaluated on.
  stats::RankMatrix matrix;
  for (const auto& [method, by] : cell) matrix.methods.push_back(method);
  for (const auto& comp : competitions) {
    bool all = true;
    for (const auto& method : matrix.methods) all = all && cell[method].count(comp);
    if (all) matrix.tasks.push_back(comp);
  }
  if (matrix.methods.size() < 3 || matrix.tasks.size() < 2) {
    s.comparison_skipped = "needs at least 3 methods evaluated on at least 2 common competitions (have " +
                           std::to_string(matrix.methods.size()) + " methods, " + std::to_string(matrix.tasks.size()) +
                           " competitions)";
    md << "\n## Method comparison\n\nSkipped: " << *s.comparison_skipped << ".\n";
  } else {
    for (const auto& method : matrix.methods) {
      std::vector<double> row;
      for (const auto& comp : matrix.tasks) {
        const auto& c = cell[method][comp];
        row.push_back(c.first / c.second);
      }
      matrix.values.push_back(std::move(row));
    }
    s.comparison = stats::compare_methods(matrix, in.alpha);
    write_json_file(out_dir / "comparison.json", s.comparison->to_json());
    s.files.push_back("comparison.json");
    md << "\n## Method comparison\n\nFriedman chi2 = " << format_double(s.comparison->friedman.statistic)
       << ", p = " << format_double(s.comparison->friedman.p) << "\n\n```\n"
       << s.comparison->cd_diagram() << "```\n";
  }

  if (in.contests) {
    const auto contests = rating::load_contests(*in.contests);
    s.ratings = rating::rate_history(contests);
    CsvTable rt{{"participant", "mu", "sigma", "contests"}, {}};
    for (const auto& [id, r] : s.ratings->state) {
      rt.rows.push_back({id, format_double(r.mu), format_double(r.sigma), std::to_string(r.contests)});
    }
    put(out_dir, "ratings.csv", format_csv(rt), s);
    CsvTable dt{{"competition_id", "difficulty", "participants"}, {}};
    for (std::size_t i = 0; i < contests.size(); ++i) {
      const auto d = rating::competition_difficulty(contests[i], s.ratings->snapshots[i], rating::infer_medals(contests[i]));
      dt.rows.push_back({contests[i].competition_id, opt(d), std::to_string(contests[i].ranking.size())});
    }
    put(out_dir, "difficulty.csv", format_csv(dt), s);
    md << "\n## Ratings\n\n" << s.ratings->state.size() << " participants over " << contests.size()
       << " contests; see ratings.csv and difficulty.csv.\n";
  }

  put(out_dir, "summary.md", md.str(), s);
  return s;
}

}  // namespace kolb::orch
