#include "synthprod/mock_provider.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "synthprod/prompt_builder.hpp"
#include "synthprod/text.hpp"

namespace synthprod {

using nlohmann::json;

namespace {

std::string_view after(std::string_view s, std::string_view marker) {
    auto pos = s.find(marker);
    return pos == std::string_view::npos ? std::string_view{} : s.substr(pos + marker.size());
}

// Value of the first line starting with `label` ("" when absent).
std::string line_value(std::string_view s, std::string_view label) {
    std::size_t pos = 0;
    while (pos < s.size()) {
        auto eol = s.find('\n', pos);
        auto line = s.substr(pos, eol == std::string_view::npos ? s.npos : eol - pos);
        if (line.substr(0, label.size()) == label) return text::trim(line.substr(label.size()));
        if (eol == std::string_view::npos) break;
        pos = eol + 1;
    }
    return {};
}

std::string tagged_block(std::string_view s, const std::string& tag) {
    std::string open = "<" + tag + ">\n", close = "\n</" + tag + ">";
    auto b = s.find(open);
    if (b == std::string_view::npos) return {};
    b += open.size();
    auto e = s.find(close, b);
    if (e == std::string_view::npos) return {};
    return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    if (s.empty()) return out;
    std::size_t pos = 0;
    for (;;) {
        auto next = s.find(" | ", pos);
        auto item = text::trim(s.substr(pos, next == std::string::npos ? std::string::npos : next - pos));
        if (!item.empty()) out.push_back(item);
        if (next == std::string::npos) break;
        pos = next + 3;
    }
    return out;
}

bool is_punct(char c) { return c == ',' || c == '.' || c == ';' || c == ':' || c == '!' || c == '?'; }

// Tidies a line after words were deleted from it.
std::string tidy_line(const std::string& line) {
    std::string s = text::collapse_whitespace(line);
    std::string out;
    for (char c : s) {
        if (is_punct(c) && !out.empty() && out.back() == ' ') out.pop_back();
        if (c == ',' && !out.empty() && out.back() == ',') continue;
        out.push_back(c);
    }
    std::size_t b = 0;
    while (b < out.size() && (is_punct(out[b]) || out[b] == ' ')) ++b;
    out.erase(0, b);
    while (!out.empty() && (out.back() == ' ' || out.back() == ',' || out.back() == '-' || out.back() == ':'))
        out.pop_back();
    return out;
}

// Deletes word-bounded mentions of `values`; only lines that lost a
// mention are tidied, and lines left empty are dropped.
std::size_t remove_mentions(std::string& field, const std::vector<std::string>& values) {
    std::size_t removed = 0;
    std::vector<std::string> kept;
    for (auto line : text::split(field, '\n')) {
        std::size_t n = 0;
        for (const auto& v : values)
            if (!v.empty()) n += text::replace_word_ci(line, v, "");
        if (n == 0) {
            kept.push_back(line);
            continue;
        }
        removed += n;
        auto t = tidy_line(line);
        if (!t.empty()) kept.push_back(t);
    }
    field = text::join(kept, "\n");
    return removed;
}

} // namespace

std::vector<MockFixture> load_mock_fixtures(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open mock fixture file '" + path + "'");
    std::vector<MockFixture> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (text::trim(line).empty()) continue;
        try {
            auto j = json::parse(line);
            MockFixture f;
            f.tag = j.at("tag").get<std::string>();
            if (j.contains("user_text")) f.user_hash = text::fnv1a64(j["user_text"].get<std::string>());
            if (j.contains("user_hash")) f.user_hash = std::stoull(j["user_hash"].get<std::string>(), nullptr, 16);
            if (j.contains("user_contains")) f.user_contains = j["user_contains"].get<std::string>();
            if (j.contains("text")) f.text = j["text"].get<std::string>();
            if (j.contains("error_status")) f.error_status = j["error_status"].get<int>();
            if (j.contains("usage"))
                f.usage = TokenUsage{j["usage"].at("input_tokens").get<std::int64_t>(),
                                     j["usage"].at("output_tokens").get<std::int64_t>()};
            if (!f.user_hash && !f.user_contains)
                throw invalid_input("needs user_text, user_hash or user_contains");
            if (!f.text && !f.error_status) throw invalid_input("needs text or error_status");
            out.push_back(std::move(f));
        } catch (const std::exception& e) {
            throw invalid_input("mock fixture line " + std::to_string(n) + ": " + e.what());
        }
    }
    return out;
}

std::string default_mock_vocabulary_path() {
#ifdef SYNTHPROD_ASSET_DIR
    return std::string(SYNTHPROD_ASSET_DIR) + "/mock/value_vocab.json";
#else
    return "assets/mock/value_vocab.json";
#endif
}

MockVocabulary load_mock_vocabulary(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open mock vocabulary '" + path + "'");
    MockVocabulary vocab;
    try {
        auto j = json::parse(in);
        for (const auto& [key, values] : j.items()) vocab[text::to_lower(key)] = values.get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        throw invalid_input("mock vocabulary '" + path + "' is malformed: " + e.what());
    }
    return vocab;
}

MockProvider::MockProvider(std::vector<MockFixture> fixtures, MockVocabulary vocabulary)
    : fixtures_(std::move(fixtures)), vocabulary_(std::move(vocabulary)) {}

std::string MockProvider::fictional_brand(const std::string& brand) {
    static const char* stems[] = {"Athlete", "Novara", "Zentrik", "Lumora", "Brisko", "Quillon", "Vantor", "Kestro"};
    static const char* tails[] = {"X", "Co", "Labs", "Works"};
    auto h = text::fnv1a64(text::to_lower(brand));
    std::string name = std::string(stems[h % 8]) + tails[(h >> 8) % 4];
    if (text::iequals(name, brand)) name += "Prime";
    return name;
}

const MockFixture* MockProvider::match(const ChatRequest& req, std::uint64_t hash) const {
    for (const auto& f : fixtures_)
        if (f.tag == req.request_tag && f.user_hash && *f.user_hash == hash) return &f;
    for (const auto& f : fixtures_)
        if (f.tag == req.request_tag && f.user_contains && req.user_text.find(*f.user_contains) != std::string::npos)
            return &f;
    return nullptr;
}

ChatResponse MockProvider::send(const ChatRequest& req) {
    const auto hash = text::fnv1a64(req.user_text);
    ChatResponse resp;
    resp.provider_id = id();
    if (const auto* f = match(req, hash)) {
        if (f->error_status) {
            int status = *f->error_status;
            throw TransportError(status, is_retryable_status(status),
                                 "mock fixture error " + std::to_string(status) + " for tag " + req.request_tag);
        }
        resp.text = *f->text;
        if (f->usage) {
            resp.usage = *f->usage;
            return resp;
        }
    } else {
        resp.text = templated(req, hash);
    }
    resp.usage.input_tokens = static_cast<std::int64_t>(text::whitespace_token_count(req.system_text) +
                                                        text::whitespace_token_count(req.user_text));
    resp.usage.output_tokens = static_cast<std::int64_t>(text::whitespace_token_count(resp.text));
    return resp;
}

std::string MockProvider::templated(const ChatRequest& req, std::uint64_t hash) const {
    if (req.request_tag == "value_provider") return value_response(req.user_text, hash);
    if (req.request_tag == "generation") return generation_response(req.user_text);
    return "mock response " + text::hex64(hash);
}

std::string MockProvider::value_response(const std::string& user, std::uint64_t hash) const {
    auto attribute = line_value(user, "Attribute: ");
    auto allowed = split_list(line_value(user, "Allowed values: "));
    auto excluded = split_list(line_value(user, "Do not use: "));
    std::size_t count = 1;
    try {
        count = std::max<std::size_t>(1, std::stoul(line_value(user, "Number of values: ")));
    } catch (const std::exception&) {
    }

    std::vector<std::string> candidates = allowed;
    if (candidates.empty()) {
        auto it = vocabulary_.find(text::to_lower(attribute));
        if (it != vocabulary_.end()) candidates = it->second;
    }

    std::vector<std::string> usable;
    for (const auto& c : candidates) {
        bool banned = std::any_of(excluded.begin(), excluded.end(), [&](const auto& e) { return text::iequals(e, c); });
        if (!banned) usable.push_back(c);
    }
    for (std::size_t k = 1; allowed.empty() && usable.size() < count; ++k) {
        std::string variant = text::to_lower(attribute) + " variant " + std::to_string(k);
        bool banned = std::any_of(excluded.begin(), excluded.end(), [&](const auto& e) { return text::iequals(e, variant); });
        if (!banned && std::find(usable.begin(), usable.end(), variant) == usable.end()) usable.push_back(variant);
    }
    json values = json::array();
    if (!usable.empty()) {
        std::size_t offset = hash % usable.size();
        for (std::size_t i = 0; i < std::min(count, usable.size()); ++i)
            values.push_back(usable[(offset + i) % usable.size()]);
    }
    return json{{"values", values}}.dump();
}

std::string MockProvider::generation_response(const std::string& user) const {
    auto context = after(user, kContextHeader);
    auto strategy = line_value(context, "Modification type: ");
    auto original = line_value(context, "Current value: ");
    auto target = line_value(context, "New value: ");
    auto incorrect = line_value(context, "Incorrect value: ");
    auto brands = split_list(line_value(context, "Brands: "));

    std::map<std::string, std::string> fields;
    for (const auto& f : canonical_fields()) fields[f] = tagged_block(context, f);

    json replacements = json::array();
    for (const auto& brand : brands) {
        auto fake = fictional_brand(brand);
        std::size_t n = 0;
        for (auto& [_, t] : fields) n += text::replace_word_ci(t, brand, fake);
        if (n > 0) replacements.push_back({{"original", brand}, {"replacement", fake}});
    }

    std::size_t touched = 0;
    if (strategy == "correct" || strategy == "incorrect") {
        if (!original.empty() && !text::iequals(original, target))
            for (auto& [_, t] : fields) touched += text::replace_word_ci(t, original, target);
    }
    if (strategy == "correct") {
        auto& title = fields[field::title];
        if (!text::contains_word_ci(title, target)) {
            title = title.empty() ? target : target + " " + title;
            ++touched;
        }
    } else if (strategy == "unknown") {
        for (auto& [_, t] : fields) touched += remove_mentions(t, {original, target});
    } else if (strategy == "incorrect" && !incorrect.empty()) {
        std::string sentence = "Some shoppers describe it as " + incorrect + ".";
        for (const char* name : {field::features, field::description, field::title}) {
            auto& t = fields[name];
            if (t.empty() && std::string(name) != field::title) continue;
            if (std::string(name) == field::features) t += (t.empty() ? "" : "\n") + sentence;
            else t += (t.empty() ? "" : " ") + sentence;
            break;
        }
    }
    if (fields[field::description].empty()) fields[field::description] = "Designed for reliable, everyday use.";

    json out = {{"title", fields[field::title]},
                {"description", fields[field::description]},
                {"features", fields[field::features]},
                {"brand_replacements", replacements},
                {"change_notes", "Applied " + strategy + " modification (" + std::to_string(touched) +
                                     " value mentions changed)."}};
    return out.dump();
}

} // namespace synthprod
