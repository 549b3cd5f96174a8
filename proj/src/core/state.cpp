#include "kolb/core/state.hpp"

#include "kolb/util/error.hpp"
#include "kolb/util/hash.hpp"

namespace kolb::core {

std::string to_string(Direction d) { return d == Direction::maximize ? "maximize" : "minimize"; }

Direction parse_direction(const std::string& s) {
  std::string t = to_lower(trim(s));
  if (t == "maximize" || t == "maximise" || t == "max" || t == "higher") return Direction::maximize;
  if (t == "minimize" || t == "minimise" || t == "min" || t == "lower") return Direction::minimize;
  throw ConfigError("direction must be maximize or minimize (got '" + s + "')");
}

bool better(double a, double b, Direction d) { return d == Direction::maximize ? a > b : a < b; }

std::string to_string(IntrinsicKind k) {
  switch (k) {
    case IntrinsicKind::summarise:
      return "summarise";
    case IntrinsicKind::think:
      return "think";
    case IntrinsicKind::plan:
      return "plan";
    case IntrinsicKind::identify:
      return "identify";
    case IntrinsicKind::abstract:
      return "abstract";
  }
  return "think";
}

std::string to_string(ActionKind k) {
  switch (k) {
    case ActionKind::emit_code:
      return "emit_code";
    case ActionKind::emit_structured:
      return "emit_structured";
    case ActionKind::emit_text:
      return "emit_text";
    case ActionKind::select_subset:
      return "select_subset";
  }
  return "emit_text";
}

std::string to_string(FeedbackKind k) {
  switch (k) {
    case FeedbackKind::unit_test:
      return "unit_test";
    case FeedbackKind::exec_log:
      return "exec_log";
    case FeedbackKind::validation_score:
      return "validation_score";
    case FeedbackKind::structured:
      return "structured";
  }
  return "structured";
}

IntrinsicKind parse_intrinsic_kind(const std::string& s) {
  for (auto k : {IntrinsicKind::summarise, IntrinsicKind::think, IntrinsicKind::plan, IntrinsicKind::identify,
                 IntrinsicKind::abstract}) {
    if (to_string(k) == s) return k;
  }
  throw ConfigError("unknown intrinsic kind: " + s);
}

ActionKind parse_action_kind(const std::string& s) {
  for (auto k : {ActionKind::emit_code, ActionKind::emit_structured, ActionKind::emit_text, ActionKind::select_subset}) {
    if (to_string(k) == s) return k;
  }
  throw ConfigError("unknown action kind: " + s);
}

FeedbackKind parse_feedback_kind(const std::string& s) {
  for (auto k : {FeedbackKind::unit_test, FeedbackKind::exec_log, FeedbackKind::validation_score,
                 FeedbackKind::structured}) {
    if (to_string(k) == s) return k;
  }
  throw ConfigError("unknown feedback kind: " + s);
}

Feedback::Feedback(FeedbackKind kind, bool success, std::string_view body, std::optional<Score> score)
    : kind_(kind), success_(success), body_(tail_truncate(body)), score_(score) {}

Feedback Feedback::unit_test(bool success, std::string_view body) {
  return Feedback(FeedbackKind::unit_test, success, body, std::nullopt);
}
Feedback Feedback::exec_log(bool success, std::string_view body) {
  return Feedback(FeedbackKind::exec_log, success, body, std::nullopt);
}
Feedback Feedback::structured(bool success, std::string_view body) {
  return Feedback(FeedbackKind::structured, success, body, std::nullopt);
}
Feedback Feedback::validation_score(bool success, std::string_view body, Score score) {
  return Feedback(FeedbackKind::validation_score, success, body, score);
}

Json Feedback::to_json() const {
  Json j{{"kind", to_string(kind_)}, {"success", success_}, {"body", body_}};
  if (score_) j["score"] = Json{{"value", score_->value}, {"direction", to_string(score_->direction)}};
  return j;
}

Feedback Feedback::from_json(const Json& j) {
  auto kind = parse_feedback_kind(j.at("kind").get<std::string>());
  bool ok = j.at("success").get<bool>();
  std::string body = j.value("body", std::string{});
  if (kind == FeedbackKind::validation_score) {
    const auto& s = j.at("score");
    return validation_score(ok, body,
                            Score{s.at("value").get<double>(), parse_direction(s.at("direction").get<std::string>())});
  }
  return Feedback(kind, ok, body, std::nullopt);
}

void InternalState::append_history(HistoryEntry entry) {
  if (entry.feedback.kind() == FeedbackKind::validation_score && entry.feedback.score()) {
    const Score& s = *entry.feedback.score();
    scores_.push_back(s);
    if (!best_score_ || better(s.value, best_score_->value, s.direction)) best_score_ = s;
  }
  history_.push_back(std::move(entry));
  ++step_index_;
}

const HistoryEntry* InternalState::last_failure() const {
  for (auto it = history_.rbegin(); it != history_.rend(); ++it) {
    if (!it->success()) return &*it;
  }
  return nullptr;
}

Json InternalState::to_json() const {
  Json history = Json::array();
  for (const auto& h : history_) {
    history.push_back(Json{{"stage", h.stage},
                           {"action_kind", to_string(h.action_kind)},
                           {"action_content", h.action_content},
                           {"action_digest", h.action_digest},
                           {"feedback", h.feedback.to_json()},
                           {"feedback_digest", h.feedback_digest}});
  }
  Json abstractions = Json::array();
  for (const auto& a : abstractions_) abstractions.push_back(Json{{"source", a.source}, {"text", a.text}});
  Json scores = Json::array();
  for (const auto& s : scores_) scores.push_back(Json{{"value", s.value}, {"direction", to_string(s.direction)}});
  return Json{{"task_spec", Json{{"description", task_->description}, {"metadata", task_->metadata}}},
              {"history", history},
              {"abstractions", abstractions},
              {"scratch", scratch_},
              {"step_index", step_index_},
              {"scores", scores}};
}

InternalState InternalState::from_json(const Json& j) {
  TaskSpec task;
  task.description = j.at("task_spec").value("description", std::string{});
  task.metadata = j.at("task_spec").value("metadata", std::map<std::string, std::string>{});
  InternalState s(std::move(task));
  for (const auto& a : j.at("abstractions")) {
    s.add_abstraction(Abstraction{a.at("source").get<std::string>(), a.at("text").get<std::string>()});
  }
  for (const auto& h : j.at("history")) {
    HistoryEntry e;
    e.stage = h.value("stage", std::string{});
    e.action_kind = parse_action_kind(h.at("action_kind").get<std::string>());
    e.action_content = h.value("action_content", std::string{});
    e.action_digest = h.value("action_digest", std::string{});
    e.feedback = Feedback::from_json(h.at("feedback"));
    e.feedback_digest = h.value("feedback_digest", std::string{});
    s.append_history(std::move(e));
  }
  s.scratch_ = j.value("scratch", std::map<std::string, std::string>{});
  if (s.step_index_ != j.at("step_index").get<std::size_t>()) {
    throw ConfigError("serialized state: step_index does not match history length");
  }
  return s;
}

std::string InternalState::digest() const { return sha256_hex(canonical_dump(to_json())); }

}  // namespace kolb::core
