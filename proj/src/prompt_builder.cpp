#include "synthprod/prompt_builder.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "synthprod/error.hpp"
#include "synthprod/text.hpp"

namespace synthprod {

using nlohmann::json;

std::string_view to_string(UnitSystem u) { return u == UnitSystem::metric ? "metric" : "imperial"; }

namespace {

std::size_t find_section_end(std::string_view tpl, std::size_t from, const std::string& name) {
    const std::string open_a = "{{#" + name + "}}", open_b = "{{^" + name + "}}", close = "{{/" + name + "}}";
    int depth = 1;
    std::size_t pos = from;
    while (pos < tpl.size()) {
        auto next_close = tpl.find(close, pos);
        if (next_close == std::string_view::npos) break;
        auto next_open = std::min(tpl.find(open_a, pos), tpl.find(open_b, pos));
        if (next_open < next_close) {
            ++depth;
            pos = next_open + open_a.size();
            continue;
        }
        if (--depth == 0) return next_close;
        pos = next_close + close.size();
    }
    throw invalid_input("template section '" + name + "' is not closed");
}

const std::string& lookup(const TemplateVars& vars, const std::string& name) {
    auto it = vars.find(name);
    if (it == vars.end()) throw invalid_input("template variable '" + name + "' is not defined");
    return it->second;
}

std::string read_asset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot read template '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Drops "##" metadata lines at the top and trailing newlines.
std::string strip_metadata(const std::string& raw, std::string* version) {
    std::size_t pos = 0;
    while (raw.compare(pos, 2, "##") == 0) {
        auto eol = raw.find('\n', pos);
        std::string line = raw.substr(pos, eol == std::string::npos ? std::string::npos : eol - pos);
        if (version && line.rfind("## version:", 0) == 0) *version = text::trim(line.substr(11));
        if (eol == std::string::npos) return {};
        pos = eol + 1;
    }
    std::string body = raw.substr(pos);
    while (!body.empty() && (body.back() == '\n' || body.back() == '\r')) body.pop_back();
    return body;
}

const char* kTemplateNames[] = {"role",
                                "instruction_correct",
                                "instruction_incorrect",
                                "instruction_unknown",
                                "instruction_common",
                                "context",
                                "format",
                                "format_reminder",
                                "value_provider",
                                "value_provider_system"};

} // namespace

std::string render_template(std::string_view tpl, const TemplateVars& vars) {
    std::string out;
    std::size_t pos = 0;
    while (pos < tpl.size()) {
        auto open = tpl.find("{{", pos);
        if (open == std::string_view::npos) {
            out.append(tpl.substr(pos));
            break;
        }
        out.append(tpl.substr(pos, open - pos));
        auto close = tpl.find("}}", open);
        if (close == std::string_view::npos) throw invalid_input("unterminated template tag");
        std::string tag(tpl.substr(open + 2, close - open - 2));
        pos = close + 2;
        if (tag.empty()) throw invalid_input("empty template tag");
        char sigil = tag[0];
        if (sigil == '#' || sigil == '^') {
            std::string name = tag.substr(1);
            auto end = find_section_end(tpl, pos, name);
            bool present = !lookup(vars, name).empty();
            if (present == (sigil == '#')) out += render_template(tpl.substr(pos, end - pos), vars);
            pos = end + name.size() + 5;
        } else if (sigil == '/') {
            throw invalid_input("unexpected section close '" + tag + "'");
        } else {
            out += lookup(vars, tag);
        }
    }
    return out;
}

std::string PromptLibrary::default_dir() {
#ifdef SYNTHPROD_ASSET_DIR
    return std::string(SYNTHPROD_ASSET_DIR) + "/prompts";
#else
    return "assets/prompts";
#endif
}

PromptLibrary PromptLibrary::load(const std::string& dir, const std::string& locale) {
    namespace fs = std::filesystem;
    fs::path root = fs::path(dir) / locale;
    if (!fs::is_directory(root)) throw io_error("no prompt templates for locale '" + locale + "' under " + dir);

    PromptLibrary lib;
    for (const char* name : kTemplateNames) {
        std::string version;
        lib.templates_[name] = strip_metadata(read_asset(root / (std::string(name) + ".txt")), &version);
        if (lib.version_.empty()) lib.version_ = version;
    }

    json loc;
    try {
        loc = json::parse(read_asset(root / "locale.json"));
    } catch (const json::exception& e) {
        throw invalid_input("locale.json for '" + locale + "' is malformed: " + e.what());
    }
    auto& c = lib.constraints_;
    c.locale = loc.value("locale", locale);
    auto units = loc.value("unit_system", "metric");
    if (units != "metric" && units != "imperial")
        throw invalid_input("unit_system must be metric or imperial, got '" + units + "'");
    c.unit_system = units == "metric" ? UnitSystem::metric : UnitSystem::imperial;
    c.currency_symbol = loc.value("currency_symbol", "");
    c.language_tag = loc.value("language_tag", "");
    return lib;
}

const std::string& PromptLibrary::get(const std::string& name) const {
    auto it = templates_.find(name);
    if (it == templates_.end()) throw invalid_input("unknown template '" + name + "'");
    return it->second;
}

Prompt construct_prompt(StrategyLabel l, const Product& p, const AttributeRecord& s, const ValueChange& v,
                        const std::vector<std::string>& brands, const PromptLibrary& lib) {
    if (v.target_value.empty()) throw invalid_input("new value must be non-empty");
    if ((l == StrategyLabel::incorrect) != v.negative_value.has_value())
        throw invalid_input("a negative value is required for, and only for, the incorrect strategy");
    if (v.negative_value && v.negative_value->empty()) throw invalid_input("negative value must be non-empty");
    bool any_text = false;
    for (const auto& f : canonical_fields()) {
        if (!p.text_fields.count(f)) throw invalid_input("product " + p.id + " is missing text field '" + f + "'");
        any_text = any_text || !p.text_fields.at(f).empty();
    }
    if (!any_text) throw invalid_input("product " + p.id + " has no text to modify");

    const auto& c = lib.constraints();
    TemplateVars vars{
        {"category", p.category},
        {"attribute", s.key},
        {"strategy", std::string(to_string(l))},
        {"original_value", v.original_value},
        {"target_value", v.target_value},
        {"incorrect_value", v.negative_value.value_or("")},
        {"brands", text::join(brands, " | ")},
        {"title", p.field_text(field::title)},
        {"description", p.field_text(field::description)},
        {"features", p.field_text(field::features)},
        {"empty_description", p.field_text(field::description).empty() ? "1" : ""},
        {"locale", c.locale},
        {"unit_system", std::string(to_string(c.unit_system))},
        {"currency_symbol", c.currency_symbol},
        {"language_tag", c.language_tag},
    };

    Prompt out;
    out.sections.role_text = render_template(lib.get("role"), vars);
    out.sections.instruction_text = render_template(lib.get("instruction_" + std::string(to_string(l))), vars) +
                                    "\n\n" + render_template(lib.get("instruction_common"), vars);
    while (!out.sections.instruction_text.empty() && out.sections.instruction_text.back() == '\n')
        out.sections.instruction_text.pop_back();
    out.sections.context_text = render_template(lib.get("context"), vars);
    out.sections.format_text = render_template(lib.get("format"), vars);

    out.rendered = std::string(kRoleHeader) + "\n" + out.sections.role_text + "\n\n" + kInstructionHeader + "\n" +
                   out.sections.instruction_text + "\n\n" + kContextHeader + "\n" + out.sections.context_text +
                   "\n\n" + kFormatHeader + "\n" + out.sections.format_text + "\n";
    return out;
}

const std::vector<std::string>& OutputContract::text_keys() const { return canonical_fields(); }

std::vector<ContractViolation> OutputContract::check(const json& doc) const {
    std::vector<ContractViolation> v;
    if (!doc.is_object()) {
        v.push_back({"", "response is not a JSON object"});
        return v;
    }
    for (const auto& k : text_keys()) {
        if (!doc.contains(k)) v.push_back({k, "missing required key"});
        else if (!doc[k].is_string()) v.push_back({k, "must be a string"});
    }
    if (!doc.contains("brand_replacements")) {
        v.push_back({"brand_replacements", "missing required key"});
    } else if (!doc["brand_replacements"].is_array()) {
        v.push_back({"brand_replacements", "must be a list"});
    } else {
        std::size_t i = 0;
        for (const auto& r : doc["brand_replacements"]) {
            std::string where = "brand_replacements[" + std::to_string(i++) + "]";
            if (!r.is_object() || r.size() != 2 || !r.contains("original") || !r.contains("replacement") ||
                !r["original"].is_string() || !r["replacement"].is_string())
                v.push_back({where, "must be {original: string, replacement: string}"});
        }
    }
    if (!doc.contains("change_notes")) v.push_back({"change_notes", "missing required key"});
    else if (!doc["change_notes"].is_string()) v.push_back({"change_notes", "must be a string"});

    for (const auto& [key, _] : doc.items()) {
        bool known = key == "brand_replacements" || key == "change_notes";
        for (const auto& k : text_keys()) known = known || key == k;
        if (!known) v.push_back({key, "unknown key"});
    }
    return v;
}

json OutputContract::describe() const {
    return {{"type", "object"},
            {"strict", true},
            {"required",
             {{"title", "string"},
              {"description", "string"},
              {"features", "string"},
              {"brand_replacements", "list of {original: string, replacement: string}"},
              {"change_notes", "string"}}}};
}

const OutputContract& output_contract() {
    static const OutputContract contract;
    return contract;
}

} // namespace synthprod
