#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "synthprod/catalog.hpp"
#include "synthprod/strategy.hpp"

namespace synthprod {

enum class UnitSystem { metric, imperial };

struct StoreConstraints {
    std::string locale = "en_US";
    UnitSystem unit_system = UnitSystem::imperial;
    std::string currency_symbol = "$";
    std::string language_tag = "en-US";
};

std::string_view to_string(UnitSystem u);

// Mustache-style subset: {{name}}, {{#name}}...{{/name}} (kept when the
// variable is non-empty) and {{^name}}...{{/name}} (kept when empty).
// Unknown variables throw Error(invalid).
using TemplateVars = std::map<std::string, std::string>;
std::string render_template(std::string_view tpl, const TemplateVars& vars);

// Template assets for one locale. Files live in <dir>/<locale>/; leading
// lines starting with "##" are metadata and are stripped on load.
class PromptLibrary {
public:
    static PromptLibrary load(const std::string& dir, const std::string& locale);
    static std::string default_dir();

    const StoreConstraints& constraints() const { return constraints_; }
    const std::string& get(const std::string& name) const;
    const std::string& version() const { return version_; }

private:
    StoreConstraints constraints_;
    std::map<std::string, std::string> templates_;
    std::string version_;
};

struct ValueChange {
    std::string original_value;
    std::string target_value;                 // v: the value the text should reflect
    std::optional<std::string> negative_value; // set only for the incorrect strategy
};

struct PromptSections {
    std::string role_text;
    std::string instruction_text;
    std::string context_text;
    std::string format_text;
};

struct Prompt {
    PromptSections sections;
    std::string rendered;
};

inline constexpr const char* kRoleHeader = "### ROLE";
inline constexpr const char* kInstructionHeader = "### INSTRUCTION";
inline constexpr const char* kContextHeader = "### CONTEXT";
inline constexpr const char* kFormatHeader = "### FORMAT";

// Renders ROLE, INSTRUCTION, CONTEXT and FORMAT in that order, each
// preceded by a blank line and its header.
Prompt construct_prompt(StrategyLabel l, const Product& p, const AttributeRecord& s, const ValueChange& v,
                        const std::vector<std::string>& brands, const PromptLibrary& lib);

struct BrandReplacement {
    std::string original;
    std::string replacement;
    bool operator==(const BrandReplacement&) const = default;
};

struct ContractViolation {
    std::string field;
    std::string reason;
};

// Strict schema for generation responses: title, description, features
// (strings), brand_replacements (list of {original, replacement}),
// change_notes (string); nothing else.
class OutputContract {
public:
    std::vector<ContractViolation> check(const nlohmann::json& doc) const;
    bool accepts(const nlohmann::json& doc) const { return check(doc).empty(); }
    const std::vector<std::string>& text_keys() const;
    nlohmann::json describe() const;
};

const OutputContract& output_contract();

} // namespace synthprod
