#include "kolb/llm/parse.hpp"

#include "kolb/util/error.hpp"
#include "kolb/util/hash.hpp"
#include "kolb/util/text.hpp"

namespace kolb::llm {

namespace {

struct Fence {
  std::size_t body_begin;
  std::size_t body_end;
  std::size_t next;
};

std::optional<Fence> find_fence(std::string_view text, std::size_t from) {
  std::size_t open = text.find("```", from);
  if (open == std::string_view::npos) return std::nullopt;
  std::size_t line_end = text.find('\n', open);
  if (line_end == std::string_view::npos) return std::nullopt;
  std::size_t body_begin = line_end + 1;
  std::size_t close = text.find("```", body_begin);
  // An empty block closes on the line right after the opener.
  if (close == std::string_view::npos) return std::nullopt;
  std::size_t body_end = close;
  if (body_end > body_begin && text[body_end - 1] == '\n') --body_end;
  if (body_end < body_begin) body_end = body_begin;
  return Fence{body_begin, body_end, close + 3};
}

std::optional<std::string> try_parse(const std::string& raw, const ParseSpec& spec, Json& value) {
  switch (spec.kind) {
    case ParseKind::fenced_code_block: {
      auto block = extract_fenced_block(raw);
      if (!block) return "no fenced code block found; wrap the code in ``` fences";
      if (trim(*block).empty()) return "the fenced code block is empty";
      value = *block;
      break;
    }
    case ParseKind::raw_text: {
      if (trim(raw).empty()) return "the response is empty";
      value = raw;
      break;
    }
    case ParseKind::structured_mapping: {
      std::string candidate;
      if (auto block = extract_fenced_block(raw)) {
        candidate = *block;
      } else {
        auto open = raw.find('{');
        auto close = raw.rfind('}');
        if (open == std::string::npos || close == std::string::npos || close < open) {
          return "no JSON object found in the response";
        }
        candidate = raw.substr(open, close - open + 1);
      }
      Json parsed = Json::parse(candidate, nullptr, false);
      if (parsed.is_discarded()) return "the JSON object could not be parsed";
      if (!parsed.is_object()) return "expected a JSON object";
      for (const auto& key : spec.required_keys) {
        if (!parsed.contains(key)) return "missing required key \"" + key + "\"";
      }
      value = std::move(parsed);
      break;
    }
  }
  if (spec.validate) {
    if (auto err = spec.validate(value)) return err;
  }
  return std::nullopt;
}

}  // namespace

std::optional<std::string> extract_fenced_block(std::string_view text) {
  auto fence = find_fence(text, 0);
  if (!fence) return std::nullopt;
  return std::string(text.substr(fence->body_begin, fence->body_end - fence->body_begin));
}

std::size_t count_fenced_blocks(std::string_view text) {
  std::size_t n = 0;
  std::size_t from = 0;
  while (auto fence = find_fence(text, from)) {
    ++n;
    from = fence->next;
  }
  return n;
}

ParseOutcome parse_structured(std::string raw, const ParseSpec& spec, const RepromptHook& reprompt) {
  if (spec.max_retries < 0) throw ConfigError("ParseSpec.max_retries must be >= 0");
  std::vector<std::string> digests;
  for (int attempt = 1;; ++attempt) {
    digests.push_back(short_hash(raw, 16));
    Json value;
    auto err = try_parse(raw, spec, value);
    if (!err) return ParseOutcome{std::move(value), std::move(raw), attempt};
    if (attempt > spec.max_retries || !reprompt) {
      throw FormatError("output still malformed after " + std::to_string(attempt) + " attempts: " + *err,
                        std::move(digests));
    }
    raw = reprompt(*err);
  }
}

}  // namespace kolb::llm
