#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace synthprod::text {

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);
// Collapses every whitespace run to a single space and trims both ends.
std::string collapse_whitespace(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

bool iequals(std::string_view a, std::string_view b);
bool icontains(std::string_view haystack, std::string_view needle);

// Case-insensitive, word-bounded search. A boundary is the string edge or a
// byte that is not an ASCII letter/digit.
std::size_t find_word_ci(std::string_view haystack, std::string_view needle, std::size_t from = 0);
bool contains_word_ci(std::string_view haystack, std::string_view needle);
// Returns the number of replacements made.
std::size_t replace_word_ci(std::string& s, std::string_view needle, std::string_view replacement);

// Lowercased alphanumeric runs; every other byte separates tokens.
// Bytes >= 0x80 count as alphanumeric so UTF-8 words stay whole.
std::vector<std::string> word_tokens(std::string_view s);

// Whitespace-separated token count (the mock provider's usage unit).
std::size_t whitespace_token_count(std::string_view s);

std::uint64_t fnv1a64(std::string_view s, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

inline bool is_alnum(unsigned char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

} // namespace synthprod::text
