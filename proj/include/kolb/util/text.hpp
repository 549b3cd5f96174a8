#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace kolb {

// 16 KiB; shared by feedback bodies and captured process streams.
inline constexpr std::size_t kTruncationCap = 16 * 1024;

// Keeps the last `cap` bytes of `text`, starting on a UTF-8 character
// boundary. Error traces end with the relevant line, so the head is dropped.
std::string tail_truncate(std::string_view text, std::size_t cap = kTruncationCap);

std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
bool starts_with(std::string_view s, std::string_view prefix);
bool contains(std::string_view s, std::string_view needle);
std::string to_lower(std::string_view s);

// Parses the whole string as a finite double.
bool parse_double(std::string_view s, double& out);

// Shortest round-trip decimal representation.
std::string format_double(double v);

}  // namespace kolb
