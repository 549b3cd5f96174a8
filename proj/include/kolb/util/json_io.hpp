#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace kolb {

using Json = nlohmann::json;

// Compact, key-sorted serialization. Invalid UTF-8 in process output is
// replaced rather than throwing, so hashing never fails on binary noise.
std::string canonical_dump(const Json& j);

// One JSON record per line.
std::vector<Json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<Json>& records);

Json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const Json& j);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace kolb
