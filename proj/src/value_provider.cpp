#include "synthprod/value_provider.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include "synthprod/error.hpp"
#include "synthprod/json_extract.hpp"
#include "synthprod/text.hpp"

namespace synthprod {

using nlohmann::json;

namespace {

bool contains_ci(const std::vector<std::string>& xs, const std::string& v) {
    return std::any_of(xs.begin(), xs.end(), [&](const auto& x) { return text::iequals(x, v); });
}

std::optional<DataType> parse_data_type(const std::string& s) {
    if (s == "text") return DataType::text;
    if (s == "numeric") return DataType::numeric;
    if (s == "enumerated") return DataType::enumerated;
    return std::nullopt;
}

std::string_view to_string(DataType t) {
    switch (t) {
    case DataType::text: return "text";
    case DataType::numeric: return "numeric";
    case DataType::enumerated: return "enumerated";
    }
    return "text";
}

} // namespace

std::optional<std::string> check_value(const AttributeMetadata& meta, const std::string& raw) {
    auto value = text::trim(raw);
    if (value.empty()) return "empty value";
    if (value.find('\n') != std::string::npos) return "value spans multiple lines";
    if (value.size() > 80) return "value longer than 80 characters";
    if (!meta.allowed_values.empty() && !contains_ci(meta.allowed_values, value))
        return "'" + value + "' is not an allowed value";
    if (meta.data_type == DataType::numeric) {
        std::size_t i = 0;
        if (i < value.size() && (value[i] == '-' || value[i] == '+')) ++i;
        std::size_t digits = 0;
        while (i < value.size() && (std::isdigit(static_cast<unsigned char>(value[i])) || value[i] == '.' || value[i] == ',')) {
            if (std::isdigit(static_cast<unsigned char>(value[i]))) ++digits;
            ++i;
        }
        if (digits == 0) return "'" + value + "' does not start with a number";
        auto unit = text::trim(value.substr(i));
        if (!meta.valid_units.empty()) {
            if (unit.empty()) return "'" + value + "' lacks a unit";
            if (!contains_ci(meta.valid_units, unit)) return "unit '" + unit + "' is not one of the valid units";
        }
    }
    return std::nullopt;
}

AttributeRegistry AttributeRegistry::from_json(const json& doc) {
    AttributeRegistry reg;
    if (doc.contains("relevance"))
        for (const auto& [cat, keys] : doc["relevance"].items()) reg.relevance_[cat] = keys.get<std::vector<std::string>>();
    if (doc.contains("metadata")) {
        for (const auto& m : doc["metadata"]) {
            AttributeMetadata meta;
            meta.key = m.at("key").get<std::string>();
            meta.category = m.value("category", "*");
            if (m.contains("data_type")) {
                meta.data_type = parse_data_type(m["data_type"].get<std::string>());
                if (!meta.data_type) throw invalid_input("unknown data_type for attribute '" + meta.key + "'");
            }
            meta.valid_units = m.value("valid_units", std::vector<std::string>{});
            meta.allowed_values = m.value("allowed_values", std::vector<std::string>{});
            if (meta.data_type == DataType::enumerated && meta.allowed_values.empty())
                throw invalid_input("enumerated attribute '" + meta.key + "' needs allowed_values");
            reg.metadata_[{meta.category, text::to_lower(meta.key)}] = meta;
        }
    }
    return reg;
}

AttributeRegistry AttributeRegistry::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open attribute registry '" + path + "'");
    try {
        return from_json(json::parse(in));
    } catch (const json::exception& e) {
        throw invalid_input("attribute registry '" + path + "' is malformed: " + e.what());
    }
}

AttributeMetadata AttributeRegistry::metadata(const std::string& category, const std::string& key) const {
    auto lk = text::to_lower(key);
    auto it = metadata_.find({category, lk});
    if (it == metadata_.end()) it = metadata_.find({"*", lk});
    AttributeMetadata m;
    if (it != metadata_.end()) m = it->second;
    m.key = key;
    m.category = category;
    return m;
}

const std::vector<std::string>* AttributeRegistry::relevant_keys(const std::string& category) const {
    auto it = relevance_.find(category);
    return it == relevance_.end() ? nullptr : &it->second;
}

std::vector<std::string> UsedValuesRegistry::snapshot(const std::string& category, const std::string& key) const {
    std::lock_guard lock(mu_);
    auto it = used_.find({category, key});
    return it == used_.end() ? std::vector<std::string>{} : it->second;
}

void UsedValuesRegistry::add(const std::string& category, const std::string& key, const std::string& value) {
    std::lock_guard lock(mu_);
    auto& v = used_[{category, key}];
    if (!contains_ci(v, value)) v.push_back(value);
}

std::vector<std::string> parse_value_list(const std::string& raw) {
    if (auto obj = first_json_object(raw)) {
        auto doc = json::parse(*obj);
        if (doc.contains("values") && doc["values"].is_array()) {
            std::vector<std::string> out;
            for (const auto& v : doc["values"])
                if (v.is_string()) out.push_back(text::trim(v.get<std::string>()));
                else if (v.is_number()) out.push_back(v.dump());
            return out;
        }
        if (doc.contains("value") && doc["value"].is_string()) return {text::trim(doc["value"].get<std::string>())};
    }
    for (const auto& line : text::split(raw, '\n')) {
        auto t = text::trim(line);
        if (!t.empty() && t.front() != '{') return {t};
    }
    return {};
}

std::string select_negative_value(const ValuePool& pool, const std::string& correct_value, const Embedder& embedder,
                                  double s_max) {
    auto target = embed_text(embedder, correct_value);
    const std::string* best = nullptr;
    double best_sim = 0.0;
    for (const auto& c : pool.candidates) {
        if (text::iequals(c, correct_value)) continue;
        double sim = cosine(embed_text(embedder, c), target);
        if (sim > s_max) continue;
        if (!best || sim < best_sim || (sim == best_sim && c < *best)) {
            best = &c;
            best_sim = sim;
        }
    }
    if (!best) throw invalid_input("no semantically distinct candidate for '" + correct_value + "'");
    return *best;
}

ValueProvider::ValueProvider(LlmGateway& gateway, const Embedder& embedder, const PromptLibrary& prompts,
                             ValueProviderOptions options)
    : gateway_(gateway), embedder_(embedder), prompts_(prompts), options_(options) {}

std::vector<std::string> ValueProvider::request_values(const AttributeMetadata& s, const std::string& category,
                                                       int count, const std::vector<std::string>& excluded,
                                                       double temperature) {
    TemplateVars vars{
        {"count", std::to_string(count)},
        {"category", category},
        {"attribute", s.key},
        {"data_type", s.data_type ? std::string(to_string(*s.data_type)) : ""},
        {"valid_units", text::join(s.valid_units, " | ")},
        {"allowed_values", text::join(s.allowed_values, " | ")},
        {"excluded", text::join(excluded, " | ")},
        {"unit_system", std::string(to_string(prompts_.constraints().unit_system))},
    };
    ChatRequest req;
    req.system_text = render_template(prompts_.get("value_provider_system"), vars);
    req.user_text = render_template(prompts_.get("value_provider"), vars);
    req.temperature = temperature;
    req.max_output_tokens = options_.max_output_tokens;
    req.request_tag = "value_provider";
    return parse_value_list(gateway_.complete(req).text);
}

std::string ValueProvider::generate_value(const AttributeMetadata& s, StrategyLabel l, const std::string& category,
                                          const std::vector<std::string>& used_values,
                                          const std::string& current_value) {
    if (l == StrategyLabel::incorrect) {
        auto pool = generate_value_pool(s, category, options_.pool_size, current_value);
        return select_negative_value(pool, current_value, embedder_, options_.s_max);
    }

    if (s.data_type == DataType::enumerated && s.allowed_values.size() == 1) return s.allowed_values.front();

    std::vector<std::string> excluded;
    if (!current_value.empty()) excluded.push_back(current_value);
    for (const auto& u : used_values)
        if (!contains_ci(excluded, u)) excluded.push_back(u);
    if (!s.allowed_values.empty()) {
        // Never exclude every allowed value; fall back to excluding only the current one.
        bool any_left = std::any_of(s.allowed_values.begin(), s.allowed_values.end(),
                                    [&](const auto& a) { return !contains_ci(excluded, a); });
        if (!any_left) excluded.assign(current_value.empty() ? 0 : 1, current_value);
    }

    std::string last_candidate;
    std::string last_reason = "no candidate returned";
    for (int attempt = 0; attempt <= options_.validation_retries; ++attempt) {
        auto values = request_values(s, category, 1, excluded, options_.temperature);
        if (values.empty() || values.front().empty()) {
            last_reason = "no candidate returned";
            continue;
        }
        last_candidate = values.front();
        auto problem = check_value(s, last_candidate);
        if (!problem && contains_ci(excluded, last_candidate)) problem = "'" + last_candidate + "' was excluded";
        if (!problem) return last_candidate;
        last_reason = *problem;
        if (!contains_ci(excluded, last_candidate)) excluded.push_back(last_candidate);
    }
    throw invalid_input("value generation for '" + s.key + "' failed: " + last_reason +
                        (last_candidate.empty() ? "" : " (last candidate '" + last_candidate + "')"));
}

ValuePool ValueProvider::generate_value_pool(const AttributeMetadata& s, const std::string& category, int pool_size,
                                             const std::string& correct_value) {
    if (pool_size < 2) throw invalid_input("pool_size must be >= 2");
    std::vector<std::string> excluded;
    if (!correct_value.empty()) excluded.push_back(correct_value);
    auto raw = request_values(s, category, pool_size, excluded, options_.pool_temperature);

    ValuePool pool;
    pool.attribute_key = s.key;
    auto accept = [&](const std::string& v, ValueOrigin origin) {
        if (static_cast<int>(pool.candidates.size()) >= pool_size) return;
        if (check_value(s, v)) return;
        if (!correct_value.empty() && text::iequals(v, correct_value)) return;
        if (contains_ci(pool.candidates, v)) return;
        pool.candidates.push_back(text::trim(v));
        pool.provenance.push_back(origin);
    };
    for (const auto& v : raw) accept(v, ValueOrigin::llm);
    for (const auto& v : s.allowed_values) accept(v, ValueOrigin::metadata);
    if (pool.candidates.size() < 2)
        throw invalid_input("value pool for '" + s.key + "' has " + std::to_string(pool.candidates.size()) +
                            " valid candidate(s); need at least 2");
    return pool;
}

} // namespace synthprod
