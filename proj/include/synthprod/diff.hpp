#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace synthprod {

enum class DiffKind { removed, added, incorrect_attribute };

std::string_view to_string(DiffKind k);
std::optional<DiffKind> parse_diff_kind(std::string_view s);

// removed spans index the base text; added and incorrect_attribute spans
// index the synthetic text.
struct DiffSpan {
    std::string field;
    DiffKind kind = DiffKind::added;
    std::size_t begin = 0;
    std::size_t end = 0;
    std::string text;

    bool operator==(const DiffSpan&) const = default;
};

nlohmann::json to_json(const DiffSpan& d);
DiffSpan diff_span_from_json(const nlohmann::json& j);

struct TextToken {
    std::size_t begin = 0;
    std::size_t end = 0;
};

// Alphanumeric runs, and every other non-space byte on its own.
std::vector<TextToken> diff_tokens(std::string_view s);

// Token-level LCS diff of one field. Maximal runs of consecutive base-only
// tokens become one removed span; likewise for synthetic-only tokens.
std::vector<DiffSpan> diff_field(const std::string& field, std::string_view base, std::string_view synth);

// Diffs every field present in either map (missing means empty). Added
// spans containing negative_value are labelled incorrect_attribute.
std::vector<DiffSpan> compute_diff(const std::map<std::string, std::string>& base,
                                   const std::map<std::string, std::string>& synth,
                                   const std::optional<std::string>& negative_value = std::nullopt);

// Checks a span's offsets and text against the version it indexes.
bool span_matches(const DiffSpan& d, const std::map<std::string, std::string>& base,
                  const std::map<std::string, std::string>& synth);

} // namespace synthprod
