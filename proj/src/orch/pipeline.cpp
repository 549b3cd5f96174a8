#include "kolb/orch/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "kolb/eval/blend.hpp"
#include "kolb/eval/metric.hpp"
#include "kolb/llm/providers.hpp"
#include "kolb/orch/drivers.hpp"
#include "kolb/util/csv.hpp"
#include "kolb/util/error.hpp"
#include "kolb/util/hash.hpp"

namespace kolb::orch {

namespace fs = std::filesystem;
using scaffold::StageOutcome;
using scaffold::StageStatus;

namespace {

std::unique_ptr<exec::Executor> make_executor(const RunConfig& cfg) {
  if (cfg.executor == "simulated") {
    return std::make_unique<exec::SimulatedExecutor>(exec::SimScript::load(cfg.sim_script));
  }
  exec::ProcessOptions opts;
  opts.confine_writes = cfg.confine_writes;
  return std::make_unique<exec::ProcessExecutor>(opts);
}

std::shared_ptr<llm::Provider> provider_for(const RunConfig& cfg) {
  if (cfg.cassette_mode == llm::CassetteMode::replay) return nullptr;
  return llm::make_provider(cfg.provider);
}

std::string rel(const fs::path& p, const fs::path& root) { return fs::relative(p, root).generic_string(); }

}  // namespace

RunContext::RunContext(RunConfig config, CompetitionBundle bundle, fs::path run_root)
    : config_(std::move(config)), bundle_(std::move(bundle)), root_(std::move(run_root)) {
  init(provider_for(config_), make_executor(config_));
}

RunContext::RunContext(RunConfig config, CompetitionBundle bundle, fs::path run_root,
                       std::shared_ptr<llm::Provider> provider, std::unique_ptr<exec::Executor> executor)
    : config_(std::move(config)), bundle_(std::move(bundle)), root_(std::move(run_root)) {
  init(std::move(provider), std::move(executor));
}

void RunContext::init(std::shared_ptr<llm::Provider> provider, std::unique_ptr<exec::Executor> executor) {
  config_.budget.validate();
  const auto cls = bundle_.manifest.competition_class;
  scaffold_budget_ = scaffold::RuntimeBudget(config_.budget.scaled(config_.budget.scaffold_share(cls)));
  open_budget_ = scaffold::RuntimeBudget(config_.budget.scaled(config_.budget.open_ended_share(cls)));
  trace_ = core::EpisodeTrace(bundle_.manifest.competition_id);
  // Only the subdirectories a run writes are cleared, never the root.
  for (const char* sub : {"workspace", "tree", "submissions", "traces"}) fs::remove_all(root_ / sub);
  fs::create_directories(root_);
  workspace_ = scaffold::Workspace::create(root_ / "workspace", bundle_.data_dir, bundle_.sample_submission);

  llm::Cassette cassette;
  if (config_.cassette_mode == llm::CassetteMode::replay) {
    if (!fs::exists(config_.cassette_path)) {
      throw ConfigError("replay cassette not found: " + config_.cassette_path.string());
    }
    cassette = llm::Cassette::load(config_.cassette_path);
  } else if (!provider) {
    throw ConfigError("no provider configured: set provider.kind or use --cassette replay:<path>");
  }
  if (config_.cassette_mode == llm::CassetteMode::record && config_.cassette_path.empty()) {
    throw ConfigError("record mode needs a cassette path");
  }
  llm::GatewayOptions opts;
  opts.mode = config_.cassette_mode;
  opts.requests_per_minute = config_.provider.requests_per_minute;
  gateway_ = std::make_unique<llm::Gateway>(std::move(provider), opts, std::move(cassette));
  executor_ = std::move(executor);
}

scaffold::ScaffoldEnv RunContext::scaffold_env() {
  scaffold::ScaffoldEnv env(*gateway_, templates_, *executor_, workspace_, scaffold_budget_, &trace_);
  env.interpreter = config_.interpreter;
  env.exec_time_cap = config_.budget.scaled(config_.budget.training.max_time);
  return env;
}

void RunContext::save_cassette() const {
  if (config_.cassette_mode != llm::CassetteMode::record) return;
  if (config_.cassette_path.has_parent_path()) fs::create_directories(config_.cassette_path.parent_path());
  gateway_->cassette().save(config_.cassette_path);
}

SetupOutcome run_setup(RunContext& ctx) {
  auto env = ctx.scaffold_env();
  const auto& m = ctx.bundle().manifest;
  core::TaskSpec task{ctx.bundle().description,
                      {{"competition_id", m.competition_id},
                       {"metric", m.metric},
                       {"direction", core::to_string(m.direction)}}};
  auto res = scaffold::run_scaffold(scaffold::workspace_graph(ctx.config().graph), core::InternalState(task), env, {},
                                    scaffold::Phase::workspace);
  SetupOutcome out;
  out.terminal_failure = res.schedule.terminal_failure;
  out.outcomes = res.outcomes;
  out.meta = res.schedule.groups;
  out.artifacts = res.artifacts;
  out.modalities = res.schedule.modalities;
  out.state = res.schedule.state;
  out.complete = res.schedule.complete() && out.modalities.has_value() &&
                 std::all_of(out.meta.begin(), out.meta.end(),
                             [](const auto& g) { return g.second.status == StageStatus::success; }) &&
                 std::all_of(out.outcomes.begin(), out.outcomes.end(), [](const StageOutcome& o) {
                   return o.status == StageStatus::success || o.status == StageStatus::skipped;
                 });
  return out;
}

Json ScaffoldSolution::to_json() const {
  Json j{{"id", id},
         {"kind", kind},
         {"submission", submission.generic_string()},
         {"validation", validation.generic_string()},
         {"note", note}};
  j["score"] = score ? Json(*score) : Json();
  return j;
}

namespace {

const char* const kValidIds = "_valid_ids.csv";
const char* const kRunsDir = "_runs";

// About a fifth of the ids, chosen by hash so fixture authors can
// reproduce the split without the engine.
bool is_validation_id(const std::string& id) {
  return std::stoi(sha256_hex("valid:" + id).substr(0, 2), nullptr, 16) < 0x33;
}

eval::PredictionTable select_rows(const eval::PredictionTable& t, const std::set<std::string>& keep) {
  eval::PredictionTable out;
  out.id_column = t.id_column;
  out.columns = t.columns;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    if (!keep.count(t.ids[r])) continue;
    out.ids.push_back(t.ids[r]);
    for (std::size_t c = 0; c < t.width(); ++c) out.values.push_back(t.at(r, c));
  }
  return out;
}

eval::PredictionTable average(const std::vector<eval::PredictionTable>& tables) {
  eval::PredictionTable out = tables.at(0);
  for (std::size_t k = 1; k < tables.size(); ++k) {
    const auto aligned = eval::align_to(out, tables[k]);
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += aligned.values[i];
  }
  for (auto& v : out.values) v /= static_cast<double>(tables.size());
  return out;
}

class Solver {
 public:
  Solver(RunContext& ctx, const SetupOutcome& setup)
      : ctx_(ctx),
        setup_(setup),
        cfg_(ctx.config()),
        metric_(eval::metric_or_mse(ctx.bundle().manifest.metric)),
        state_(setup.state) {}

  SolveOutcome run() {
    if (!setup_.complete) {
      out_.failure = "setup did not complete";
      return out_;
    }
    prepare_validation();
    if (setup_.modalities->tabular_only()) {
      tool_route();
    } else {
      deep_route();
    }
    ensemble();
    out_.scaffold_time = ctx_.scaffold_budget().used();
    event("phase", "scaffold phase resolved");
    open_ended();
    out_.open_ended_time = ctx_.open_ended_budget().used();
    export_submissions();
    out_.ok = !out_.exported.empty();
    if (!out_.ok) out_.failure = "no valid solution in either phase";
    return out_;
  }

 private:
  fs::path ws(const std::string& r) const { return ctx_.workspace().path(r); }

  void event(std::string type, std::string detail) { out_.events.push_back({std::move(type), std::move(detail)}); }

  void prepare_validation() {
    const auto target_map = ws(scaffold::target_map_name("train"));
    const auto all = eval::read_predictions(target_map);
    std::set<std::string> keep;
    for (const auto& id : all.ids) {
      if (is_validation_id(id)) keep.insert(id);
    }
    if (keep.empty() && !all.ids.empty()) keep.insert(*std::min_element(all.ids.begin(), all.ids.end()));
    if (keep.size() == all.ids.size() && keep.size() > 1) keep.erase(std::prev(keep.end()));
    targets_ = select_rows(all, keep);
    std::string csv = "id\n";
    for (const auto& id : targets_.ids) csv += id + "\n";
    write_text_file(ws(kValidIds), csv);
    const auto sample = read_csv(ctx_.bundle().sample_submission);
    sample_header_ = sample.header;
  }

  // Validation metric of a predictions file; nullopt with a reason when it
  // cannot be scored.
  std::optional<double> score(const fs::path& valid, std::string& note) const {
    try {
      const auto p = eval::align_to(targets_, eval::read_predictions(valid));
      const double v = metric_.fn(targets_, p);
      if (!std::isfinite(v)) {
        note = "validation metric is not finite";
        return std::nullopt;
      }
      return v;
    } catch (const std::exception& e) {
      note = std::string("validation predictions unusable: ") + e.what();
      return std::nullopt;
    }
  }

  bool submission_ok(const fs::path& sub, std::string& note) const {
    try {
      eval::read_predictions(sub, sample_header_);
      return true;
    } catch (const std::exception& e) {
      note = std::string("submission unusable: ") + e.what();
      return false;
    }
  }

  // Scores the run in `dir` (workspace-relative) and records it.
  const ScaffoldSolution* harvest(const std::string& id, const std::string& kind, const std::string& dir,
                                  const exec::ExecResult* r) {
    ScaffoldSolution s;
    s.id = id;
    s.kind = kind;
    s.submission = rel(ws(dir) / "submission.csv", ctx_.root());
    s.validation = rel(ws(dir) / "valid.csv", ctx_.root());
    if (r && !r->ok()) {
      s.note = r->timed_out ? "killed at the time limit" : "exit status " + std::to_string(r->exit_status);
    } else if (submission_ok(ws(dir) / "submission.csv", s.note)) {
      s.score = score(ws(dir) / "valid.csv", s.note);
    }
    return add(std::move(s));
  }

  const ScaffoldSolution* add(ScaffoldSolution s) {
    const bool base = s.kind != "blend" && s.kind != "ensemble";
    event(s.score ? "solution" : "invalid", s.id + (s.score ? " " + format_double(*s.score) : ": " + s.note));
    out_.solutions.push_back(std::move(s));
    const std::size_t idx = out_.solutions.size() - 1;
    if (base && out_.solutions[idx].score) maybe_blend();
    return &out_.solutions[idx];
  }

  std::vector<std::size_t> valid_base() const {
    std::vector<std::size_t> v;
    for (std::size_t i = 0; i < out_.solutions.size(); ++i) {
      const auto& s = out_.solutions[i];
      if (s.score && s.kind != "blend" && s.kind != "ensemble") v.push_back(i);
    }
    return v;
  }

  bool blend_into(const std::vector<std::size_t>& members, eval::BlendMethod method, const std::string& id,
                  const std::string& kind) {
    try {
      eval::BlendConfig bc;
      bc.method = method;
      bc.targets = targets_;
      bc.metric = metric_;
      bc.seed = cfg_.seed;
      std::vector<eval::PredictionTable> subs;
      for (auto i : members) {
        bc.candidates.push_back(eval::read_predictions(ctx_.root() / out_.solutions[i].validation));
        subs.push_back(eval::read_predictions(ctx_.root() / out_.solutions[i].submission));
      }
      const auto res = eval::blend(bc);
      const std::string dir = std::string(kRunsDir) + "/" + id;
      fs::create_directories(ws(dir));
      eval::write_predictions(ws(dir) / "valid.csv", res.blended);
      eval::write_predictions(ws(dir) / "submission.csv", res.apply(subs));
      std::string names;
      for (auto i : members) names += (names.empty() ? "" : ",") + out_.solutions[i].id;
      event(kind, id + " over " + names + " with " + eval::to_string(method));
      harvest(id, kind, dir, nullptr);
      return true;
    } catch (const std::exception& e) {
      event(kind, id + " failed: " + e.what());
      return false;
    }
  }

  void maybe_blend() {
    const auto members = valid_base();
    const auto need = static_cast<std::size_t>(cfg_.budget.training.blend_after);
    if (members.size() < need || members.size() == blended_count_) return;
    blended_count_ = members.size();
    blend_into(members, cfg_.search.blend_method, "blend_" + std::to_string(members.size()), "blend");
  }

  exec::ExecResult execute(const std::string& code, std::map<std::string, std::string> env) {
    auto senv = ctx_.scaffold_env();
    env["KOLB_SEED"] = std::to_string(cfg_.seed);
    return senv.run(code, env);
  }

  static std::string tags(const std::vector<std::string>& names) {
    std::string s;
    for (const auto& n : names) s += "# sim-tag: " + n + "\n";
    return s;
  }

  std::string summarise(const std::string& stage_id, const std::string& code, const std::string& log) {
    auto env = ctx_.scaffold_env();
    env.extra["last_code"] = code;
    env.extra["last_log"] = log.empty() ? "none" : log;
    auto a = scaffold::attempt_stage(scaffold::solution_summary_stage(stage_id, cfg_.graph.stage_retry_budget), state_,
                                     env);
    out_.outcomes.push_back(a.outcome);
    state_ = a.state;
    if (a.outcome.status != StageStatus::success) return "";
    const auto& abs = state_.abstractions();
    for (auto it = abs.rbegin(); it != abs.rend(); ++it) {
      if (it->source == scaffold::kSolutionSummarySource) return it->text;
    }
    return "";
  }

  void add_seed(const std::string& summary, const std::vector<std::string>& ids) {
    if (summary.empty()) return;
    tree::SeedSummary s{summary, Json::object()};
    for (const auto& sol : out_.solutions) {
      if (sol.score && std::find(ids.begin(), ids.end(), sol.id) != ids.end()) {
        s.scores[sol.id + "/submission.csv"] = *sol.score;
      }
    }
    out_.seeds.push_back(std::move(s));
  }

  void tool_route() {
    const std::string tool = cfg_.tabular_tool.empty() ? kTabularBaseline : read_text_file(cfg_.tabular_tool);
    static const char* const kPresets[] = {"ridge", "knn", "mean"};
    std::vector<std::string> ids;
    std::string best_log;
    std::optional<double> best;
    for (int i = 0; i < cfg_.search.tool_runs; ++i) {
      if (ctx_.scaffold_budget().exhausted()) {
        event("denied", "tool run " + std::to_string(i + 1) + ": scaffold budget exhausted");
        break;
      }
      std::string preset = kPresets[i % 3];
      const std::string id = "tool_" + preset + (i >= 3 ? std::to_string(i / 3 + 1) : "");
      const std::string dir = std::string(kRunsDir) + "/" + id;
      const auto r = execute(tags({"tool:tabular:" + preset, "tool:tabular"}) + tool,
                             {{"KOLB_OUT", dir}, {"KOLB_PRESET", preset}, {"KOLB_SCRIPT", "_tool.py"}});
      const auto* s = harvest(id, "tool", dir, &r);
      ids.push_back(id);
      if (s->score && (!best || core::better(*s->score, *best, metric_.direction))) {
        best = s->score;
        best_log = r.log();
      }
    }
    add_seed(summarise("solution_summary_tool", tool, best_log), ids);
  }

  void deep_route() {
    for (int round = 1; round <= cfg_.search.solution_rounds; ++round) {
      if (ctx_.scaffold_budget().exhausted()) {
        event("denied", "round " + std::to_string(round) + ": scaffold budget exhausted");
        break;
      }
      const auto full = scaffold::solution_design_graph(cfg_.graph, round);
      scaffold::StageGraph design;
      std::string summary_id;
      for (const auto& s : full.stages()) {
        if (s.name == scaffold::StageKind::create_solution_summary) {
          summary_id = s.stage_id;
        } else {
          design.add(s);
        }
      }
      auto env = ctx_.scaffold_env();
      auto res = scaffold::run_scaffold(design, state_, env, {}, scaffold::Phase::solution, setup_.modalities);
      out_.outcomes.insert(out_.outcomes.end(), res.outcomes.begin(), res.outcomes.end());
      state_ = res.schedule.state;
      if (!res.schedule.complete()) {
        event("round", "round " + std::to_string(round) + " design failed at " + *res.schedule.terminal_failure);
        break;
      }
      std::string code;
      for (const auto& s : design.stages()) {
        if (!s.code_file.empty() && fs::exists(ws(s.code_file))) {
          code += "# " + s.code_file + "\n" + read_text_file(ws(s.code_file)) + "\n";
        }
      }
      std::string log;
      const auto ids = train_round(round, log);
      add_seed(summarise(summary_id, code, log), ids);
    }
  }

  // Search trials, then folds of the best configuration, then TTA for image
  // inputs. Returns the ids of the solutions produced.
  std::vector<std::string> train_round(int round, std::string& best_log) {
    const auto& caps = cfg_.budget.training;
    const double max_time = cfg_.budget.scaled(caps.max_time);
    TrainingBudget budget(caps, max_time);
    auto strategy = make_search(cfg_.search.strategy, caps, cfg_.seed * 1000003ULL + static_cast<unsigned>(round),
                                metric_.direction);
    const std::string rtag = "train:r" + std::to_string(round);
    const std::string rdir = std::string(kRunsDir) + "/r" + std::to_string(round);
    std::vector<TrialObservation> seen;
    std::optional<std::size_t> best;
    std::vector<std::string> ids;
    auto base_env = [&](const std::string& mode, const std::string& dir) {
      return std::map<std::string, std::string>{{"KOLB_OUT", dir},
                                                {"KOLB_MODE", mode},
                                                {"KOLB_MAX_EPOCHS", std::to_string(caps.max_epochs)},
                                                {"KOLB_BATCH_SIZE", std::to_string(caps.batch_size)},
                                                {"KOLB_MAX_TIME", format_double(max_time)},
                                                {"KOLB_K_FOLDS", std::to_string(caps.k_folds)},
                                                {"KOLB_SCRIPT", "_train.py"}};
    };
    for (int t = 1;; ++t) {
      const auto adm = budget.admit({TrialKind::search, t, caps.max_epochs, max_time});
      if (!adm.admitted) {
        event("denied", rtag + " " + adm.reason);
        break;
      }
      if (ctx_.scaffold_budget().exhausted()) {
        event("denied", rtag + " trial " + std::to_string(t) + ": scaffold budget exhausted");
        break;
      }
      const auto hp = strategy->propose(seen);
      const std::string dir = rdir + "/search_" + std::to_string(t);
      auto env = base_env("search", dir);
      env["KOLB_LR"] = format_double(hp.learning_rate);
      env["KOLB_OPTIMIZER"] = hp.optimizer;
      const auto r = execute(tags({rtag + ":search:" + std::to_string(t), "train:search", "train"}) + kTrainDriver, env);
      std::string note;
      std::optional<double> sc;
      if (r.ok() && submission_ok(ws(dir) / "submission.csv", note)) sc = score(ws(dir) / "valid.csv", note);
      seen.push_back({hp, sc});
      event("trial", rtag + " search " + std::to_string(t) + " lr=" + format_double(hp.learning_rate) + " " +
                         hp.optimizer + (sc ? " score " + format_double(*sc) : " failed"));
      if (sc && (!best || core::better(*sc, *seen[*best].score, metric_.direction))) {
        best = seen.size() - 1;
        best_log = r.log();
      }
    }
    if (!best) return ids;
    budget.record_search_result(true);
    const std::string best_dir = rdir + "/search_" + std::to_string(*best + 1);
    const std::string sid = "r" + std::to_string(round) + "_search";
    harvest(sid, "search", best_dir, nullptr);
    ids.push_back(sid);

    const auto& hp = seen[*best].params;
    auto repeat = [&](TrialKind kind, int count, const std::string& mode, const std::string& sol_kind) {
      std::vector<eval::PredictionTable> valid, subs;
      for (int i = 0; i < count; ++i) {
        const auto adm = budget.admit({kind, i, caps.max_epochs, max_time});
        if (!adm.admitted || ctx_.scaffold_budget().exhausted()) {
          event("denied", rtag + " " + (adm.admitted ? mode + " " + std::to_string(i) + ": budget exhausted" : adm.reason));
          return;
        }
        const std::string dir = rdir + "/" + mode + "_" + std::to_string(i);
        auto env = base_env(mode, dir);
        env["KOLB_LR"] = format_double(hp.learning_rate);
        env["KOLB_OPTIMIZER"] = hp.optimizer;
        env[kind == TrialKind::fold ? "KOLB_FOLD" : "KOLB_TTA_ROUND"] = std::to_string(i);
        const auto r = execute(
            tags({rtag + ":" + mode + ":" + std::to_string(i), "train:" + mode, "train"}) + kTrainDriver, env);
        event("trial", rtag + " " + mode + " " + std::to_string(i) + (r.ok() ? "" : " failed"));
        if (!r.ok()) return;
        try {
          valid.push_back(eval::read_predictions(ws(dir) / "valid.csv"));
          subs.push_back(eval::read_predictions(ws(dir) / "submission.csv", sample_header_));
        } catch (const std::exception& e) {
          event("invalid", rtag + " " + mode + " " + std::to_string(i) + ": " + e.what());
          return;
        }
      }
      const std::string id = "r" + std::to_string(round) + "_" + sol_kind;
      const std::string dir = rdir + "/" + sol_kind;
      try {
        fs::create_directories(ws(dir));
        eval::write_predictions(ws(dir) / "valid.csv", average(valid));
        eval::write_predictions(ws(dir) / "submission.csv", average(subs));
      } catch (const std::exception& e) {
        event("invalid", id + ": " + e.what());
        return;
      }
      harvest(id, sol_kind, dir, nullptr);
      ids.push_back(id);
    };
    repeat(TrialKind::fold, caps.k_folds, "fold", "cv");
    if (setup_.modalities->image && caps.tta_rounds > 0) repeat(TrialKind::tta, caps.tta_rounds, "tta", "tta");
    return ids;
  }

  void ensemble() {
    std::vector<std::size_t> valid;
    std::string listing;
    for (std::size_t i = 0; i < out_.solutions.size(); ++i) {
      const auto& s = out_.solutions[i];
      if (!s.score) continue;
      valid.push_back(i);
      listing += "- " + s.id + " (" + s.kind + "): validation " + metric_.name + " = " + format_double(*s.score) + "\n";
    }
    if (valid.empty()) {
      event("ensemble", "no valid scaffold solution to ensemble");
      out_.outcomes.push_back(StageOutcome{"ensemble", StageStatus::not_reached, 0, 0.0});
      return;
    }
    auto env = ctx_.scaffold_env();
    env.extra["candidates"] = listing;
    scaffold::StageHooks hooks;
    hooks.environment = [&](const scaffold::StageSpec&, const core::ActionResult& a, scaffold::ScaffoldEnv&) {
      const Json& j = *a.parsed;
      if (!j.at("selected").is_array() || j.at("selected").empty()) {
        return core::Feedback::structured(false, "\"selected\" must be a non-empty list of candidate ids");
      }
      std::vector<std::size_t> members;
      for (const auto& v : j.at("selected")) {
        const std::string id = v.is_string() ? v.get<std::string>() : v.dump();
        auto it = std::find_if(valid.begin(), valid.end(), [&](std::size_t i) { return out_.solutions[i].id == id; });
        if (it == valid.end()) return core::Feedback::structured(false, "unknown or invalid candidate: " + id);
        if (std::find(members.begin(), members.end(), *it) == members.end()) members.push_back(*it);
      }
      eval::BlendMethod method = cfg_.search.blend_method;
      if (j.contains("method")) {
        try {
          method = eval::parse_blend_method(j.at("method").get<std::string>());
        } catch (const std::exception& e) {
          return core::Feedback::structured(false, e.what());
        }
      }
      if (members.size() == 1) {
        ScaffoldSolution s = out_.solutions[members[0]];
        s.id = "ensemble";
        s.kind = "ensemble";
        s.note = "single selection: " + out_.solutions[members[0]].id;
        add(std::move(s));
        return core::Feedback::structured(true, "selected " + out_.solutions[members[0]].id);
      }
      if (!blend_into(members, method, "ensemble", "ensemble") || !out_.solutions.back().score) {
        return core::Feedback::structured(false, "blending the selection failed");
      }
      return core::Feedback::structured(true, "ensemble blended with " + eval::to_string(method));
    };
    auto a = scaffold::attempt_stage(scaffold::ensemble_stage(cfg_.graph.stage_retry_budget), state_, env, hooks);
    out_.outcomes.push_back(a.outcome);
    state_ = a.state;
  }

  void open_ended() {
    const auto cls = ctx_.bundle().manifest.competition_class;
    auto policy = tree::TreePolicy::for_runtime(cfg_.budget.scaled(cfg_.budget.total(cls)), cfg_.seed);
    policy.n_draft = cfg_.search.n_draft;
    policy.max_debug_depth = cfg_.search.max_debug_depth;
    policy.p_debug = cfg_.search.p_debug;
    policy.n_max = cfg_.search.n_max;
    auto& budget = ctx_.open_ended_budget();
    if (budget.remaining() < 2.0 * policy.tau_node) {
      out_.open_ended_skipped = "open-ended budget below the reserve of two node limits";
      event("phase", "open-ended phase denied: " + out_.open_ended_skipped);
      return;
    }
    scaffold::ScaffoldEnv env(ctx_.gateway(), ctx_.templates(), ctx_.executor(), ctx_.workspace(), budget,
                              &ctx_.trace());
    env.interpreter = cfg_.interpreter;
    env.extra["task"] = ctx_.bundle().description;
    tree::TreeEnv tenv{env, policy, ctx_.root() / "tree", ctx_.bundle().manifest.metric};
    event("phase", "open-ended phase started with " + std::to_string(out_.seeds.size()) + " seed summaries");
    out_.search = tree::run_search(out_.seeds, tenv);
  }

  // Best submissions across both phases. Scaffold solutions rank by the
  // engine's validation metric, tree nodes by their reviewed metric; when
  // the two directions disagree tree nodes follow the scaffold ones.
  void export_submissions() {
    struct Cand {
      double value;
      core::Direction dir;
      fs::path path;
      std::string label;
    };
    std::vector<Cand> cands;
    for (const auto& s : out_.solutions) {
      if (s.score) cands.push_back({*s.score, metric_.direction, ctx_.root() / s.submission, s.id});
    }
    const std::size_t n_scaffold = cands.size();
    if (out_.search) {
      for (const auto* n : tree::top_nodes(out_.search->tree, out_.search->tree.nodes().size())) {
        cands.push_back({n->metric->value, n->metric->direction, ctx_.root() / "tree" / *n->submission,
                         "node" + std::to_string(n->node_id)});
      }
    }
    const bool comparable = std::all_of(cands.begin(), cands.end(), [&](const Cand& c) { return c.dir == metric_.direction; });
    std::vector<std::size_t> order(cands.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (!comparable) {
        const bool ta = a >= n_scaffold, tb = b >= n_scaffold;
        if (ta != tb) return !ta;
        if (ta) return false;  // top_nodes order already best first
      }
      return core::better(cands[a].value, cands[b].value, cands[a].dir);
    });
    const auto dir = ctx_.root() / "submissions";
    fs::create_directories(dir);
    const std::size_t keep = static_cast<std::size_t>(std::max(1, tree::TreePolicy{}.retained));
    for (std::size_t k = 0; k < order.size() && k < keep; ++k) {
      const auto& c = cands[order[k]];
      const auto dst = dir / ("rank" + std::to_string(k + 1) + "_" + c.label + ".csv");
      fs::copy_file(c.path, dst, fs::copy_options::overwrite_existing);
      out_.exported.push_back(rel(dst, ctx_.root()));
    }
  }

  RunContext& ctx_;
  const SetupOutcome& setup_;
  const RunConfig& cfg_;
  eval::Metric metric_;
  core::InternalState state_;
  SolveOutcome out_;
  eval::PredictionTable targets_;
  std::vector<std::string> sample_header_;
  std::size_t blended_count_ = 0;
};

}  // namespace

SolveOutcome run_solve(RunContext& ctx, const SetupOutcome& setup) { return Solver(ctx, setup).run(); }

Json EvaluationBlock::to_json() const {
  Json recs = Json::array();
  for (const auto& r : records) {
    recs.push_back({{"submission", r.submission_id}, {"public", r.public_score}, {"private", r.private_score}});
  }
  Json sel = Json::array();
  for (auto i : selection.selected) sel.push_back(records[i].submission_id);
  return Json{{"records", recs},        {"selected", sel}, {"final_private", selection.final_private},
              {"quantile", quantile},   {"rank", rank},    {"teams", teams},
              {"medal", eval::to_string(medal)}};
}

std::optional<EvaluationBlock> evaluate_submissions(const CompetitionBundle& bundle,
                                                    const std::vector<fs::path>& submissions) {
  if (!bundle.evaluation_enabled() || submissions.empty()) return std::nullopt;
  const auto& m = bundle.manifest;
  auto metric = eval::metric_or_mse(m.metric);
  EvaluationBlock ev;
  for (const auto& p : submissions) {
    const auto t = eval::read_predictions(p);
    const auto split = eval::score_split(t, *bundle.solution, metric);
    ev.records.push_back({p.filename().string(), split.public_score, split.private_score});
  }
  ev.selection = eval::greedy_select(ev.records, m.k_c, m.direction);
  const auto board = eval::load_leaderboard(*bundle.leaderboard, m.direction, m.k_c);
  ev.quantile = eval::quantile(ev.selection.final_private, board);
  ev.rank = eval::rank_of(ev.selection.final_private, board);
  ev.teams = m.teams.value_or(static_cast<int>(board.teams()));
  ev.medal = ev.rank <= ev.teams ? eval::medal_for(ev.rank, ev.teams) : eval::Medal::none;
  return ev;
}

void RunManifest::seal() { hash = sha256_hex(canonical_dump(body)); }

bool RunManifest::verify() const { return hash == sha256_hex(canonical_dump(body)); }

void RunManifest::save(const fs::path& path) const {
  Json j = body;
  j["hash"] = hash;
  write_json_file(path, j);
}

RunManifest RunManifest::load(const fs::path& path) {
  Json j = read_json_file(path);
  RunManifest m;
  if (!j.contains("hash")) throw ConfigError(path.string() + ": manifest has no hash");
  m.hash = j.at("hash").get<std::string>();
  j.erase("hash");
  m.body = std::move(j);
  return m;
}

std::string run_id(const RunConfig& config, const CompetitionBundle& bundle) {
  return bundle.manifest.competition_id + "-" +
         short_hash(config.digest() + canonical_dump(bundle.manifest.to_json()) + sha256_hex(bundle.description), 12);
}

namespace {

Json outcomes_json(const std::vector<StageOutcome>& v) {
  Json a = Json::array();
  for (const auto& o : v) a.push_back(o.to_json());
  return a;
}

}  // namespace

RunManifest build_manifest(RunContext& ctx, const SetupOutcome& setup, const std::optional<SolveOutcome>& solve,
                           const std::optional<EvaluationBlock>& evaluation) {
  const auto& cfg = ctx.config();
  const auto& b = ctx.bundle();
  const auto cls = b.manifest.competition_class;
  Json j;
  j["run_id"] = run_id(cfg, b);
  j["competition_id"] = b.manifest.competition_id;
  j["bundle"] = b.manifest.to_json();
  j["seeds"] = {{"run", cfg.seed}, {"tree", cfg.seed}};
  j["config_digest"] = cfg.digest();
  j["provider_digest"] = cfg.provider.digest();
  const double used_s = ctx.scaffold_budget().used(), used_o = ctx.open_ended_budget().used();
  const double total_scaled = cfg.budget.scaled(cfg.budget.total(cls));
  j["budgets"] = {{"class", to_string(cls)},
                  {"scale", cfg.budget.scale},
                  {"nominal",
                   {{"total", cfg.budget.total(cls)},
                    {"scaffold", cfg.budget.scaffold_share(cls)},
                    {"open_ended", cfg.budget.open_ended_share(cls)}}},
                  {"scaled",
                   {{"total", total_scaled},
                    {"scaffold", ctx.scaffold_budget().total()},
                    {"open_ended", ctx.open_ended_budget().total()}}},
                  {"used", {{"scaffold", used_s}, {"open_ended", used_o}}},
                  {"within_total", used_s + used_o <= total_scaled * (1.0 + cfg.budget.grace)}};
  Json arts = Json::array();
  for (const auto& a : setup.artifacts) arts.push_back(a.to_json());
  Json meta = Json::object();
  for (const auto& [id, g] : setup.meta) {
    meta[id] = {{"status", scaffold::to_string(g.status)}, {"attempts", g.attempts}};
  }
  j["setup"] = {{"complete", setup.complete},
                {"outcomes", outcomes_json(setup.outcomes)},
                {"meta", meta},
                {"artifacts", arts},
                {"modalities", setup.modalities ? setup.modalities->to_json() : Json()},
                {"terminal_failure", setup.terminal_failure ? Json(*setup.terminal_failure) : Json()}};
  if (solve) {
    Json sols = Json::array(), events = Json::array(), seeds = Json::array(), exported = Json::array();
    for (const auto& s : solve->solutions) sols.push_back(s.to_json());
    for (const auto& e : solve->events) events.push_back(e.to_json());
    for (const auto& s : solve->seeds) seeds.push_back({{"summary", s.summary}, {"scores", s.scores}});
    for (const auto& p : solve->exported) exported.push_back(p.generic_string());
    Json tree_j;
    if (solve->search) {
      tree_j = {{"digest", solve->search->tree.digest()},
                {"nodes", solve->search->tree.size()},
                {"steps", solve->search->steps},
                {"stop_reason", solve->search->stop_reason}};
    }
    j["solve"] = {{"ok", solve->ok},
                  {"failure", solve->failure},
                  {"outcomes", outcomes_json(solve->outcomes)},
                  {"solutions", sols},
                  {"events", events},
                  {"seeds", seeds},
                  {"tree", tree_j},
                  {"open_ended_skipped", solve->open_ended_skipped},
                  {"exported", exported},
                  {"time", {{"scaffold", solve->scaffold_time}, {"open_ended", solve->open_ended_time}}}};
  } else {
    j["solve"] = Json();
  }
  j["evaluation"] = evaluation ? evaluation->to_json() : Json();
  j["trace_digest"] = ctx.trace().digest();
  j["llm_calls"] = ctx.gateway().transcript().size();
  const bool ok = setup.complete && (!solve || solve->ok);
  j["status"] = ok ? "complete" : "failed";
  j["warnings"] = b.warnings;
  RunManifest m;
  m.body = std::move(j);
  m.seal();
  return m;
}

FullRun run_all(RunContext& ctx, bool solve) {
  FullRun r;
  std::string failure;
  try {
    r.setup = run_setup(ctx);
    if (solve && r.setup.complete) {
      r.solve = run_solve(ctx, r.setup);
      if (r.solve->ok) {
        std::vector<fs::path> subs;
        for (const auto& p : r.solve->exported) subs.push_back(ctx.root() / p);
        r.evaluation = evaluate_submissions(ctx.bundle(), subs);
      }
    }
  } catch (const EpisodeError& e) {
    failure = e.what();
  } catch (const ReplayMissError& e) {
    failure = e.what();
  } catch (const FormatError& e) {
    failure = e.what();
  } catch (const SpawnError& e) {
    failure = e.what();
  } catch (const TransportError& e) {
    failure = e.what();
  } catch (const TimeoutError& e) {
    failure = e.what();
  }
  ctx.trace().set_terminal_status(failure.empty() && r.setup.complete ? "complete" : "failed");
  r.manifest = build_manifest(ctx, r.setup, r.solve, r.evaluation);
  if (!failure.empty()) {
    r.manifest.body["status"] = "failed";
    r.manifest.body["failure"] = failure;
    r.manifest.seal();
  }
  r.manifest.save(ctx.root() / "manifest.json");
  ctx.trace().write(ctx.root() / "traces");
  ctx.save_cassette();
  return r;
}

}  // namespace kolb::orch
