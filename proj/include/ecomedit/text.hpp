#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace ecomedit::text {

std::string trim(std::string_view s);
std::string collapse_whitespace(std::string_view s);
std::string to_lower(std::string_view s);
std::vector<std::string> split_lines(std::string_view s);
bool starts_with_ci(std::string_view s, std::string_view prefix);
bool contains(std::string_view haystack, std::string_view needle);

// Strips a leading list marker ("1.", "2)", "-", "*", "•", "[3]") and the
// whitespace after it.
std::string strip_list_marker(std::string_view line);

// A line counts as content when it has at least one alphabetic run of two or
// more letters; numbering and bracket noise do not qualify.
bool has_word(std::string_view s);

// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

// "14206" -> "14,206"
std::string group_thousands(long long v);

}  // namespace ecomedit::text
