#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kolb/util/json_io.hpp"

namespace kolb::llm {

enum class ParseKind { fenced_code_block, structured_mapping, raw_text };

struct ParseSpec {
  ParseKind kind = ParseKind::raw_text;
  std::vector<std::string> required_keys;  // structured_mapping only
  int max_retries = 5;
  // Extra semantic check on the parsed value; returns an error message.
  std::function<std::optional<std::string>(const Json&)> validate;
};

struct ParseOutcome {
  Json value;        // string for code/raw text, object for mappings
  std::string raw;   // the completion that parsed
  int attempts = 1;  // total requests including the first
};

// Receives the formatting error, returns a fresh completion.
using RepromptHook = std::function<std::string(const std::string& format_error)>;

// Interior of the first ``` fenced block, language tag dropped.
std::optional<std::string> extract_fenced_block(std::string_view text);

// Number of complete fenced blocks in the text.
std::size_t count_fenced_blocks(std::string_view text);

// Tries `raw`, then up to spec.max_retries reprompts. Throws FormatError
// carrying a digest of every attempt once the budget is spent.
ParseOutcome parse_structured(std::string raw, const ParseSpec& spec, const RepromptHook& reprompt);

}  // namespace kolb::llm
