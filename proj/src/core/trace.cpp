#include "kolb/core/trace.hpp"

#include <sstream>

#include "kolb/util/error.hpp"
#include "kolb/util/hash.hpp"

namespace kolb::core {

Json CycleRecord::to_json() const {
  Json j{{"type", type},
         {"step", step},
         {"stage", stage},
         {"before", before_digest},
         {"intrinsics", intrinsic_outputs},
         {"action_kind", to_string(action_kind)},
         {"action", action_content},
         {"after", after_digest}};
  j["feedback"] = feedback ? feedback->to_json() : Json(nullptr);
  if (!error.empty()) j["error"] = error;
  return j;
}

CycleRecord CycleRecord::from_json(const Json& j) {
  CycleRecord r;
  r.type = j.value("type", std::string("cycle"));
  r.step = j.at("step").get<std::size_t>();
  r.stage = j.value("stage", std::string{});
  r.before_digest = j.value("before", std::string{});
  r.intrinsic_outputs = j.value("intrinsics", std::map<std::string, std::string>{});
  r.action_kind = parse_action_kind(j.at("action_kind").get<std::string>());
  r.action_content = j.value("action", std::string{});
  if (!j.at("feedback").is_null()) r.feedback = Feedback::from_json(j.at("feedback"));
  r.after_digest = j.value("after", std::string{});
  r.error = j.value("error", std::string{});
  return r;
}

void EpisodeTrace::append_update(const std::string& stage, const InternalState& before, const InternalState& after,
                                 const std::string& note) {
  CycleRecord r;
  r.type = "update";
  r.step = after.step_index();
  r.stage = stage;
  r.before_digest = before.digest();
  r.after_digest = after.digest();
  r.action_content = note;
  cycles_.push_back(std::move(r));
}

bool EpisodeTrace::digests_chain() const {
  const CycleRecord* prev = nullptr;
  for (const auto& c : cycles_) {
    if (!c.error.empty()) {
      prev = nullptr;
      continue;
    }
    if (prev && prev->after_digest != c.before_digest) return false;
    prev = &c;
  }
  return true;
}

std::string EpisodeTrace::serialize() const {
  std::string out;
  for (const auto& c : cycles_) {
    out += canonical_dump(c.to_json());
    out += '\n';
  }
  out += canonical_dump(Json{{"episode", episode_id_}, {"terminal", terminal_status_}});
  out += '\n';
  return out;
}

std::string EpisodeTrace::digest() const { return sha256_hex(serialize()); }

std::filesystem::path EpisodeTrace::write(const std::filesystem::path& dir) const {
  std::string text = serialize();
  auto path = dir / (episode_id_ + "-" + short_hash(text) + ".jsonl");
  write_text_file(path, text);
  return path;
}

EpisodeTrace EpisodeTrace::load(const std::filesystem::path& path) {
  auto records = read_jsonl(path);
  if (records.empty() || !records.back().contains("terminal")) {
    throw ConfigError(path.string() + ": trace has no terminal record");
  }
  EpisodeTrace t(records.back().value("episode", std::string("episode")));
  t.set_terminal_status(records.back().at("terminal").get<std::string>());
  for (std::size_t i = 0; i + 1 < records.size(); ++i) t.append(CycleRecord::from_json(records[i]));
  return t;
}

}  // namespace kolb::core
