#pragma once

#include <string>
#include <string_view>

namespace kolb {

// Lowercase hex SHA-256 of the bytes.
std::string sha256_hex(std::string_view data);

// First `n` hex characters of sha256_hex.
std::string short_hash(std::string_view data, std::size_t n = 12);

}  // namespace kolb
