#include "kolb/scaffold/stage.hpp"

#include <algorithm>
#include <set>

#include "kolb/util/error.hpp"

namespace kolb::scaffold {

namespace {
constexpr std::pair<StageKind, const char*> kKindNames[] = {
    {StageKind::competition_understanding, "competition_understanding"},
    {StageKind::modality_identification, "modality_identification"},
    {StageKind::create_maps, "create_maps"},
    {StageKind::select_metric, "select_metric"},
    {StageKind::create_submission_format, "create_submission_format"},
    {StageKind::feature_engineering, "feature_engineering"},
    {StageKind::create_embedders, "create_embedders"},
    {StageKind::class_imbalance, "class_imbalance"},
    {StageKind::create_target_transform, "create_target_transform"},
    {StageKind::create_model_head, "create_model_head"},
    {StageKind::create_solution_summary, "create_solution_summary"},
    {StageKind::ensemble, "ensemble"},
    {StageKind::error_code, "error_code"},
};
}  // namespace

std::string to_string(StageKind k) {
  for (const auto& [kind, name] : kKindNames) {
    if (kind == k) return name;
  }
  return "create_maps";
}

StageKind parse_stage_kind(const std::string& s) {
  for (const auto& [kind, name] : kKindNames) {
    if (s == name) return kind;
  }
  throw ConfigError("unknown stage kind: " + s);
}

std::string to_string(Phase p) { return p == Phase::workspace ? "workspace" : "solution"; }

Json Modalities::to_json() const { return Json{{"tabular", tabular}, {"image", image}, {"text", text}}; }

Modalities Modalities::from_json(const Json& j) {
  Modalities m;
  for (const char* key : {"tabular", "image", "text"}) {
    if (!j.contains(key) || !j.at(key).is_boolean()) {
      throw ConfigError(std::string("modalities: '") + key + "' must be a boolean");
    }
  }
  m.tabular = j.at("tabular").get<bool>();
  m.image = j.at("image").get<bool>();
  m.text = j.at("text").get<bool>();
  return m;
}

void StageGraph::add(StageSpec stage) { stages_.push_back(std::move(stage)); }

void StageGraph::add_group(MetaGroup group) {
  std::string id = group.group_id;
  groups_[id] = std::move(group);
}

const StageSpec* StageGraph::find(const std::string& stage_id) const {
  for (const auto& s : stages_) {
    if (s.stage_id == stage_id) return &s;
  }
  return nullptr;
}

std::size_t StageGraph::index_of(const std::string& stage_id) const {
  for (std::size_t i = 0; i < stages_.size(); ++i) {
    if (stages_[i].stage_id == stage_id) return i;
  }
  throw ConfigError("unknown stage id: " + stage_id);
}

std::vector<const StageSpec*> StageGraph::members(const std::string& group_id) const {
  std::vector<const StageSpec*> out;
  for (const auto& s : stages_) {
    if (s.group_id && *s.group_id == group_id) out.push_back(&s);
  }
  return out;
}

std::vector<std::string> StageGraph::predecessors_of(const StageSpec& stage) const {
  if (!stage.predecessors.empty()) return stage.predecessors;
  std::vector<std::string> out;
  for (const auto& s : stages_) {
    if (s.stage_id == stage.stage_id) break;
    out.push_back(s.stage_id);
  }
  return out;
}

void StageGraph::validate() const {
  std::set<std::string> seen;
  bool in_solution = false;
  for (const auto& s : stages_) {
    if (s.stage_id.empty()) throw ConfigError("stage graph: empty stage id");
    if (!seen.insert(s.stage_id).second) throw ConfigError("stage graph: duplicate stage id " + s.stage_id);
    if (s.retry_budget < 1) throw ConfigError("stage " + s.stage_id + ": retry_budget must be >= 1");
    if (s.action_kind == core::ActionKind::emit_code && !s.unit_test_id) {
      throw ConfigError("stage " + s.stage_id + ": code stages need a unit test");
    }
    if (s.phase == Phase::solution) in_solution = true;
    if (s.phase == Phase::workspace && in_solution) {
      throw ConfigError("stage " + s.stage_id + ": workspace stage after a solution stage");
    }
    for (const auto& p : s.predecessors) {
      if (!seen.count(p) || p == s.stage_id) {
        throw ConfigError("stage " + s.stage_id + ": predecessor " + p + " must appear earlier");
      }
    }
    if (s.group_id && !groups_.count(*s.group_id)) {
      throw ConfigError("stage " + s.stage_id + ": unknown group " + *s.group_id);
    }
  }
  for (const auto& [id, g] : groups_) {
    if (g.retry_budget < 0) throw ConfigError("group " + id + ": negative retry budget");
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < stages_.size(); ++i) {
      if (stages_[i].group_id && *stages_[i].group_id == id) idx.push_back(i);
    }
    if (idx.empty()) throw ConfigError("group " + id + " has no stages");
    if (!g.reenterable && idx.back() - idx.front() + 1 != idx.size()) {
      throw ConfigError("group " + id + ": stages are not contiguous and the group is not re-enterable");
    }
  }
}

std::string to_string(StageStatus s) {
  switch (s) {
    case StageStatus::success:
      return "success";
    case StageStatus::failed:
      return "failed";
    case StageStatus::not_reached:
      return "not_reached";
    case StageStatus::skipped:
      return "skipped";
  }
  return "not_reached";
}

StageStatus parse_stage_status(const std::string& s) {
  for (auto st : {StageStatus::success, StageStatus::failed, StageStatus::not_reached, StageStatus::skipped}) {
    if (to_string(st) == s) return st;
  }
  throw ConfigError("unknown stage status: " + s);
}

Json StageOutcome::to_json() const {
  return Json{{"stage_id", stage_id}, {"status", to_string(status)}, {"attempts", attempts}, {"wall_time", wall_time}};
}

StageOutcome StageOutcome::from_json(const Json& j) {
  StageOutcome o;
  o.stage_id = j.at("stage_id").get<std::string>();
  o.status = parse_stage_status(j.at("status").get<std::string>());
  o.attempts = j.value("attempts", 0);
  o.wall_time = j.value("wall_time", 0.0);
  return o;
}

Json GroupOutcome::to_json() const {
  return Json{{"group_id", group_id}, {"status", to_string(status)}, {"attempts", attempts}};
}

bool resolved(const OutcomeMap& outcomes, const std::string& stage_id) {
  auto it = outcomes.find(stage_id);
  return it != outcomes.end() &&
         (it->second.status == StageStatus::success || it->second.status == StageStatus::skipped);
}

AdvanceResult advance(const StageGraph& graph, const OutcomeMap& outcomes, const std::optional<Modalities>& modalities,
                      std::optional<Phase> phase) {
  AdvanceResult r;
  for (const auto& o : outcomes) {
    if (o.second.status == StageStatus::failed) {
      r.kind = AdvanceResult::Kind::terminal_failure;
      r.failed_stage = o.first;
      return r;
    }
  }
  OutcomeMap view = outcomes;
  for (const auto& s : graph.stages()) {
    if (phase && s.phase != *phase) continue;
    if (resolved(view, s.stage_id)) continue;
    if (s.applicable_when) {
      if (!modalities) {
        throw ConfigError("stage " + s.stage_id + " depends on modalities that are not identified yet");
      }
      if (!s.applicable_when(*modalities)) {
        r.skipped.push_back(&s);
        view[s.stage_id] = StageOutcome{s.stage_id, StageStatus::skipped, 0, 0.0};
        continue;
      }
    }
    for (const auto& p : graph.predecessors_of(s)) {
      const StageSpec* ps = graph.find(p);
      bool outside = phase && ps && ps->phase != *phase;
      if (!outside && !resolved(view, p)) {
        throw ConfigError("stage " + s.stage_id + ": predecessor " + p + " unresolved");
      }
    }
    r.kind = AdvanceResult::Kind::stage;
    r.stage = &s;
    return r;
  }
  r.kind = AdvanceResult::Kind::phase_complete;
  return r;
}

}  // namespace kolb::scaffold
