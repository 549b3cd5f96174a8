#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace kolb::llm {

using SlotMap = std::map<std::string, std::string>;

// A prompt body with `{name}` placeholders. `{{` and `}}` render as literal
// braces; a brace not followed by an identifier and `}` is literal text, so
// JSON examples inside a body need no escaping.
class PromptTemplate {
 public:
  PromptTemplate() = default;
  // Required slots are inferred from the placeholders.
  PromptTemplate(std::string template_id, std::string body);
  // Throws ConfigError when a placeholder is missing from `required_slots`.
  PromptTemplate(std::string template_id, std::string body, std::vector<std::string> required_slots);

  const std::string& id() const { return id_; }
  const std::string& body() const { return body_; }
  const std::vector<std::string>& required_slots() const { return required_slots_; }

 private:
  std::string id_;
  std::string body_;
  std::vector<std::string> required_slots_;
};

// Placeholder names in order of first appearance.
std::vector<std::string> placeholders(std::string_view body);

// Single left-to-right pass: slot values are copied verbatim and never
// rescanned, so a value containing "{plan}" cannot expand another slot.
// Throws ConfigError naming the first unbound required slot.
std::string render_prompt(const PromptTemplate& tmpl, const SlotMap& slots);

class TemplateCatalog {
 public:
  // Catalog pre-filled with the built-in stage and tree-search templates.
  static TemplateCatalog with_defaults();

  void add(PromptTemplate tmpl);
  bool contains(const std::string& id) const { return templates_.count(id) != 0; }
  // Throws ConfigError("prompt template not found: <id>").
  const PromptTemplate& get(const std::string& id) const;
  // JSON object {id: body} or {id: {"body": ..., "required_slots": [...]}}.
  void load_overrides(const std::filesystem::path& path);
  std::vector<std::string> ids() const;

 private:
  std::map<std::string, PromptTemplate> templates_;
};

}  // namespace kolb::llm
