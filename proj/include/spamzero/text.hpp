#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace spamzero::text {

/// SHA-256 of the input, as a lowercase hex string.
std::string sha256_hex(std::string_view data);

/// Number of Unicode scalar values in a UTF-8 string. Invalid bytes count
/// as one scalar each (they decode to U+FFFD downstream).
std::size_t scalar_count(std::string_view utf8);

/// Byte offset just past the first `n` scalars (clamped to the string end).
std::size_t scalar_prefix_bytes(std::string_view utf8, std::size_t n);

std::string to_lower_ascii(std::string_view s);

bool is_ascii_space(char c);

/// Collapses runs of whitespace to single spaces and trims the ends.
std::string normalize_whitespace(std::string_view s);

/// Splits on non-alphanumeric boundaries; returns lowercase words.
std::vector<std::string> words(std::string_view s);

bool contains_ci(std::string_view haystack, std::string_view needle);

}  // namespace spamzero::text
