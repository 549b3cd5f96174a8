#include <iomanip>
#include <set>
#include <sstream>

#include "kolb/scaffold/scaffold.hpp"
#include "kolb/util/error.hpp"

namespace kolb::scaffold {

Json ScheduleEvent::to_json() const {
  static const char* names[] = {"attempt", "skip", "meta", "reset"};
  return Json{{"type", names[static_cast<int>(type)]}, {"id", id}, {"status", to_string(status)}, {"attempts", attempts}};
}

std::vector<StageOutcome> ScheduleResult::ordered(const StageGraph& graph, std::optional<Phase> phase) const {
  std::vector<StageOutcome> out;
  for (const auto& s : graph.stages()) {
    if (phase && s.phase != *phase) continue;
    auto it = outcomes.find(s.stage_id);
    out.push_back(it != outcomes.end() ? it->second : StageOutcome{s.stage_id, StageStatus::not_reached, 0, 0.0});
  }
  return out;
}

namespace {

bool will_skip(const StageSpec& s, const std::optional<Modalities>& m) {
  return s.applicable_when && m && !s.applicable_when(*m);
}

}  // namespace

ScheduleResult run_schedule(const StageGraph& graph, core::InternalState state, const DriverHooks& hooks,
                            std::optional<Phase> phase, std::optional<Modalities> modalities, OutcomeMap prior) {
  graph.validate();
  if (!hooks.attempt) throw ConfigError("run_schedule: no attempt function");
  ScheduleResult res;
  res.outcomes = std::move(prior);
  res.modalities = std::move(modalities);
  res.state = std::move(state);
  std::map<std::string, int> group_attempts;
  std::set<std::string> groups_passed;

  while (true) {
    AdvanceResult adv = advance(graph, res.outcomes, res.modalities, phase);
    for (const StageSpec* sk : adv.skipped) {
      res.outcomes[sk->stage_id] = StageOutcome{sk->stage_id, StageStatus::skipped, 0, 0.0};
      res.events.push_back({ScheduleEvent::Type::skip, sk->stage_id, StageStatus::skipped, 0});
    }
    if (adv.kind == AdvanceResult::Kind::terminal_failure) {
      res.terminal_failure = adv.failed_stage;
      break;
    }
    if (adv.kind == AdvanceResult::Kind::phase_complete) break;

    const StageSpec& st = *adv.stage;
    auto [outcome, next] = hooks.attempt(st, res.state);
    outcome.stage_id = st.stage_id;
    if (outcome.attempts > st.retry_budget) {
      throw std::logic_error("stage " + st.stage_id + " exceeded its retry budget");
    }
    res.state = std::move(next);
    res.outcomes[st.stage_id] = outcome;
    res.events.push_back({ScheduleEvent::Type::attempt, st.stage_id, outcome.status, outcome.attempts});
    if (outcome.status != StageStatus::success) continue;

    if (st.name == StageKind::modality_identification && !res.modalities && hooks.modalities) {
      res.modalities = hooks.modalities(res.state);
      if (!res.modalities) throw EpisodeError("stage " + st.stage_id + " passed but left no modalities");
    }
    if (!st.group_id || groups_passed.count(*st.group_id)) continue;

    const MetaGroup& group = graph.groups().at(*st.group_id);
    bool complete = true;
    for (const StageSpec* m : graph.members(group.group_id)) {
      if (!resolved(res.outcomes, m->stage_id) && !will_skip(*m, res.modalities)) complete = false;
    }
    if (!complete) continue;

    int& n = group_attempts[group.group_id];
    ++n;
    core::Feedback fb = hooks.meta ? hooks.meta(group, res.state) : core::Feedback::unit_test(true, "no meta test");
    GroupOutcome& go = res.groups[group.group_id];
    go.group_id = group.group_id;
    go.attempts = n;
    go.last_body = fb.body();
    res.events.push_back({ScheduleEvent::Type::meta, group.group_id,
                          fb.success() ? StageStatus::success : StageStatus::failed, n});
    if (fb.success()) {
      go.status = StageStatus::success;
      groups_passed.insert(group.group_id);
      continue;
    }
    if (n > group.retry_budget) {
      go.status = StageStatus::failed;
      res.terminal_failure = group.group_id;
      break;
    }
    go.status = StageStatus::not_reached;
    if (hooks.on_meta_failure) hooks.on_meta_failure(group, fb, res.state);
    auto members = graph.members(group.group_id);
    std::size_t first = graph.index_of(members.front()->stage_id);
    for (std::size_t i = first; i < graph.stages().size(); ++i) {
      const StageSpec& s = graph.stages()[i];
      bool member = s.group_id && *s.group_id == group.group_id;
      if (member || group.reenterable) res.outcomes.erase(s.stage_id);
    }
    res.events.push_back({ScheduleEvent::Type::reset, group.group_id, StageStatus::not_reached, n});
  }
  return res;
}

Json OutcomeReport::to_json() const {
  Json stages_j = Json::array();
  for (const auto& s : stages) {
    stages_j.push_back(Json{{"stage_id", s.stage_id},
                            {"success", s.success},
                            {"failed", s.failed},
                            {"not_reached", s.not_reached},
                            {"skipped", s.skipped},
                            {"success_rate", s.success_rate ? Json(*s.success_rate) : Json(nullptr)}});
  }
  return Json{{"runs", runs}, {"complete_runs", complete_runs}, {"overall_rate", overall_rate}, {"stages", stages_j}};
}

std::string OutcomeReport::to_text() const {
  std::ostringstream os;
  os << std::left << std::setw(32) << "stage" << std::right << std::setw(9) << "success" << std::setw(8) << "failed"
     << std::setw(13) << "not_reached" << std::setw(9) << "skipped" << std::setw(10) << "rate" << "\n";
  for (const auto& s : stages) {
    os << std::left << std::setw(32) << s.stage_id << std::right << std::setw(9) << s.success << std::setw(8)
       << s.failed << std::setw(13) << s.not_reached << std::setw(9) << s.skipped << std::setw(10);
    if (s.success_rate) {
      std::ostringstream pct;
      pct << std::fixed << std::setprecision(1) << 100.0 * *s.success_rate << "%";
      os << pct.str();
    } else {
      os << "-";
    }
    os << "\n";
  }
  os << "overall setup success rate: " << std::fixed << std::setprecision(1) << 100.0 * overall_rate << "% ("
     << complete_runs << "/" << runs << " runs)\n";
  return os.str();
}

OutcomeReport stage_outcome_report(const std::vector<std::vector<StageOutcome>>& runs) {
  if (runs.empty()) throw ConfigError("stage_outcome_report needs at least one run");
  OutcomeReport rep;
  rep.runs = static_cast<int>(runs.size());
  std::map<std::string, std::size_t> index;
  for (const auto& run : runs) {
    bool complete = true;
    for (const auto& o : run) {
      auto [it, fresh] = index.emplace(o.stage_id, rep.stages.size());
      if (fresh) {
        StageStats fresh_stats;
        fresh_stats.stage_id = o.stage_id;
        rep.stages.push_back(fresh_stats);
      }
      StageStats& st = rep.stages[it->second];
      switch (o.status) {
        case StageStatus::success:
          ++st.success;
          break;
        case StageStatus::failed:
          ++st.failed;
          complete = false;
          break;
        case StageStatus::not_reached:
          ++st.not_reached;
          complete = false;
          break;
        case StageStatus::skipped:
          ++st.skipped;
          break;
      }
    }
    if (complete) ++rep.complete_runs;
  }
  for (auto& st : rep.stages) {
    int reached = st.success + st.failed;
    if (reached > 0) st.success_rate = static_cast<double>(st.success) / reached;
  }
  rep.overall_rate = static_cast<double>(rep.complete_runs) / rep.runs;
  return rep;
}

SetupResult run_scaffold(const StageGraph& graph, core::InternalState state, ScaffoldEnv& env, const HookTable& hooks,
                         std::optional<Phase> phase, std::optional<Modalities> modalities) {
  DriverHooks dh;
  dh.attempt = [&](const StageSpec& stage, const core::InternalState& s) {
    auto it = hooks.find(stage.stage_id);
    AttemptOutput out = attempt_stage(stage, s, env, it == hooks.end() ? StageHooks{} : it->second);
    return std::make_pair(out.outcome, std::move(out.state));
  };
  dh.meta = [&](const MetaGroup& group, const core::InternalState&) {
    std::vector<std::string> maps;
    for (const StageSpec* m : graph.members(group.group_id)) {
      for (const auto& f : m->outputs) {
        if (f.size() > 8 && f.compare(f.size() - 8, 8, "_map.csv") == 0 && std::filesystem::exists(env.workspace.path(f))) {
          maps.push_back(f);
        }
      }
    }
    return run_meta_test(group.meta_test_id, env.workspace, maps);
  };
  dh.modalities = modalities_from_state;
  dh.on_meta_failure = [&](const MetaGroup& group, const core::Feedback& fb, core::InternalState& s) {
    core::InternalState before = s;
    s.add_abstraction({"meta_test:" + group.group_id,
                       "The cross-stage check failed, so these stages are being redone:\n" + fb.body()});
    if (env.trace) env.trace->append_update("group:" + group.group_id, before, s, "meta-test failure");
  };

  SetupResult res;
  res.schedule = run_schedule(graph, std::move(state), dh, phase, std::move(modalities));
  res.outcomes = res.schedule.ordered(graph, phase);
  std::vector<std::string> files;
  for (const auto& o : res.outcomes) {
    if (o.status != StageStatus::success) continue;
    const StageSpec* s = graph.find(o.stage_id);
    files.insert(files.end(), s->outputs.begin(), s->outputs.end());
  }
  res.artifacts = collect_artifacts(env.workspace, files);
  return res;
}

}  // namespace kolb::scaffold
