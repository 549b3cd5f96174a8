#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "kolb/util/json_io.hpp"
#include "kolb/util/text.hpp"

namespace kolb::core {

enum class Direction { maximize, minimize };

std::string to_string(Direction d);
Direction parse_direction(const std::string& s);
// True when `a` is strictly better than `b` under `d`.
bool better(double a, double b, Direction d);

struct Score {
  double value = 0.0;
  Direction direction = Direction::maximize;
};

enum class IntrinsicKind { summarise, think, plan, identify, abstract };
enum class ActionKind { emit_code, emit_structured, emit_text, select_subset };
enum class FeedbackKind { unit_test, exec_log, validation_score, structured };

std::string to_string(IntrinsicKind k);
std::string to_string(ActionKind k);
std::string to_string(FeedbackKind k);
IntrinsicKind parse_intrinsic_kind(const std::string& s);
ActionKind parse_action_kind(const std::string& s);
FeedbackKind parse_feedback_kind(const std::string& s);

struct TaskSpec {
  std::string description;
  std::map<std::string, std::string> metadata;
};

struct IntrinsicStep {
  std::string name;
  IntrinsicKind kind = IntrinsicKind::think;
  std::string prompt_template_id;
  std::string output_slot;
};

struct ActionResult {
  ActionKind kind = ActionKind::emit_text;
  std::string content;          // raw completion
  std::optional<Json> parsed;   // code interior, mapping, or selection
  int attempts = 1;
};

// Environment response. Construct through the factories so the body cap
// and the score/kind pairing always hold.
class Feedback {
 public:
  static Feedback unit_test(bool success, std::string_view body);
  static Feedback exec_log(bool success, std::string_view body);
  static Feedback structured(bool success, std::string_view body);
  static Feedback validation_score(bool success, std::string_view body, Score score);

  FeedbackKind kind() const { return kind_; }
  bool success() const { return success_; }
  const std::string& body() const { return body_; }
  const std::optional<Score>& score() const { return score_; }

  Json to_json() const;
  static Feedback from_json(const Json& j);

 private:
  Feedback(FeedbackKind kind, bool success, std::string_view body, std::optional<Score> score);
  FeedbackKind kind_ = FeedbackKind::structured;
  bool success_ = false;
  std::string body_;
  std::optional<Score> score_;
};

struct HistoryEntry {
  std::string stage;
  ActionKind action_kind = ActionKind::emit_text;
  std::string action_content;
  std::string action_digest;
  Feedback feedback = Feedback::structured(false, "");
  std::string feedback_digest;

  bool success() const { return feedback.success(); }
};

struct Abstraction {
  std::string source;  // e.g. "task_summary", "error_summary:<stage>"
  std::string text;
};

// The agent's internal state. The task spec is fixed at construction,
// history only grows through append_history (which also advances the step
// counter) and abstractions are append-only.
class InternalState {
 public:
  InternalState() : task_(std::make_shared<const TaskSpec>()) {}
  explicit InternalState(TaskSpec task) : task_(std::make_shared<const TaskSpec>(std::move(task))) {}

  const TaskSpec& task_spec() const { return *task_; }
  const std::vector<HistoryEntry>& history() const { return history_; }
  const std::vector<Abstraction>& abstractions() const { return abstractions_; }
  const std::map<std::string, std::string>& scratch() const { return scratch_; }
  std::size_t step_index() const { return step_index_; }
  const std::optional<Score>& best_score() const { return best_score_; }
  const std::vector<Score>& scores() const { return scores_; }

  void set_scratch(const std::string& key, std::string value) { scratch_[key] = std::move(value); }
  void clear_scratch() { scratch_.clear(); }
  void add_abstraction(Abstraction a) { abstractions_.push_back(std::move(a)); }
  void append_history(HistoryEntry entry);

  // Most recent failing history entry, if any.
  const HistoryEntry* last_failure() const;

  Json to_json() const;
  static InternalState from_json(const Json& j);
  std::string digest() const;

 private:
  std::shared_ptr<const TaskSpec> task_;
  std::vector<HistoryEntry> history_;
  std::vector<Abstraction> abstractions_;
  std::map<std::string, std::string> scratch_;
  std::size_t step_index_ = 0;
  std::vector<Score> scores_;
  std::optional<Score> best_score_;
};

}  // namespace kolb::core
