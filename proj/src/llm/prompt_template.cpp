#include "kolb/llm/prompt_template.hpp"

#include <algorithm>
#include <cctype>

#include "kolb/util/error.hpp"
#include "kolb/util/json_io.hpp"

namespace kolb::llm {

namespace {

bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

// Length of the `{ident}` placeholder starting at body[pos] or 0.
std::size_t placeholder_length(std::string_view body, std::size_t pos) {
  if (body[pos] != '{') return 0;
  std::size_t i = pos + 1;
  while (i < body.size() && is_ident_char(body[i])) ++i;
  if (i == pos + 1 || i >= body.size() || body[i] != '}') return 0;
  return i - pos + 1;
}

}  // namespace

std::vector<std::string> placeholders(std::string_view body) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < body.size(); ++i) {
    if ((body[i] == '{' || body[i] == '}') && i + 1 < body.size() && body[i + 1] == body[i]) {
      ++i;
      continue;
    }
    std::size_t len = placeholder_length(body, i);
    if (len == 0) continue;
    std::string name(body.substr(i + 1, len - 2));
    if (std::find(names.begin(), names.end(), name) == names.end()) names.push_back(name);
    i += len - 1;
  }
  return names;
}

PromptTemplate::PromptTemplate(std::string template_id, std::string body)
    : id_(std::move(template_id)), body_(std::move(body)), required_slots_(placeholders(body_)) {}

PromptTemplate::PromptTemplate(std::string template_id, std::string body, std::vector<std::string> required_slots)
    : id_(std::move(template_id)), body_(std::move(body)), required_slots_(std::move(required_slots)) {
  for (const auto& name : placeholders(body_)) {
    if (std::find(required_slots_.begin(), required_slots_.end(), name) == required_slots_.end()) {
      throw ConfigError("template " + id_ + ": placeholder {" + name + "} not listed in required_slots");
    }
  }
}

std::string render_prompt(const PromptTemplate& tmpl, const SlotMap& slots) {
  for (const auto& name : tmpl.required_slots()) {
    if (slots.find(name) == slots.end()) {
      throw ConfigError("template " + tmpl.id() + ": unbound slot '" + name + "'");
    }
  }
  const std::string& body = tmpl.body();
  std::string out;
  out.reserve(body.size());
  for (std::size_t i = 0; i < body.size(); ++i) {
    char c = body[i];
    if ((c == '{' || c == '}') && i + 1 < body.size() && body[i + 1] == c) {
      out.push_back(c);
      ++i;
      continue;
    }
    std::size_t len = placeholder_length(body, i);
    if (len == 0) {
      out.push_back(c);
      continue;
    }
    out += slots.at(body.substr(i + 1, len - 2));
    i += len - 1;
  }
  return out;
}

void TemplateCatalog::add(PromptTemplate tmpl) {
  std::string id = tmpl.id();
  templates_.insert_or_assign(std::move(id), std::move(tmpl));
}

const PromptTemplate& TemplateCatalog::get(const std::string& id) const {
  auto it = templates_.find(id);
  if (it == templates_.end()) throw ConfigError("prompt template not found: " + id);
  return it->second;
}

void TemplateCatalog::load_overrides(const std::filesystem::path& path) {
  Json j = read_json_file(path);
  if (!j.is_object()) throw ConfigError(path.string() + ": expected an object of templates");
  for (auto& [id, value] : j.items()) {
    if (value.is_string()) {
      add(PromptTemplate(id, value.get<std::string>()));
    } else if (value.is_object() && value.contains("body")) {
      std::vector<std::string> required =
          value.value("required_slots", std::vector<std::string>{});
      if (required.empty()) {
        add(PromptTemplate(id, value["body"].get<std::string>()));
      } else {
        add(PromptTemplate(id, value["body"].get<std::string>(), std::move(required)));
      }
    } else {
      throw ConfigError(path.string() + ": template " + id + " must be a string or {body, required_slots}");
    }
  }
}

std::vector<std::string> TemplateCatalog::ids() const {
  std::vector<std::string> out;
  for (const auto& [id, _] : templates_) out.push_back(id);
  return out;
}

}  // namespace kolb::llm
