#include "synthprod/diff.hpp"

#include <cctype>
#include <cstdint>
#include <set>

#include "synthprod/error.hpp"
#include "synthprod/text.hpp"

namespace synthprod {

using nlohmann::json;

std::string_view to_string(DiffKind k) {
    switch (k) {
    case DiffKind::removed: return "removed";
    case DiffKind::added: return "added";
    case DiffKind::incorrect_attribute: return "incorrect_attribute";
    }
    return "added";
}

std::optional<DiffKind> parse_diff_kind(std::string_view s) {
    for (auto k : {DiffKind::removed, DiffKind::added, DiffKind::incorrect_attribute})
        if (to_string(k) == s) return k;
    return std::nullopt;
}

json to_json(const DiffSpan& d) {
    return {{"field", d.field}, {"kind", to_string(d.kind)}, {"begin", d.begin}, {"end", d.end}, {"text", d.text}};
}

DiffSpan diff_span_from_json(const json& j) {
    DiffSpan d;
    d.field = j.at("field").get<std::string>();
    auto kind = parse_diff_kind(j.at("kind").get<std::string>());
    if (!kind) throw invalid_input("unknown diff kind '" + j.at("kind").get<std::string>() + "'");
    d.kind = *kind;
    d.begin = j.at("begin").get<std::size_t>();
    d.end = j.at("end").get<std::size_t>();
    d.text = j.at("text").get<std::string>();
    return d;
}

std::vector<TextToken> diff_tokens(std::string_view s) {
    std::vector<TextToken> out;
    std::size_t i = 0;
    while (i < s.size()) {
        auto c = static_cast<unsigned char>(s[i]);
        if (std::isspace(c)) {
            ++i;
        } else if (text::is_alnum(c)) {
            std::size_t b = i;
            while (i < s.size() && text::is_alnum(static_cast<unsigned char>(s[i]))) ++i;
            out.push_back({b, i});
        } else {
            out.push_back({i, i + 1});
            ++i;
        }
    }
    return out;
}

namespace {

// Groups consecutive token indexes into spans over `src`.
void emit_runs(const std::string& field, DiffKind kind, std::string_view src, const std::vector<TextToken>& toks,
               const std::vector<std::size_t>& idx, std::vector<DiffSpan>& out) {
    std::size_t k = 0;
    while (k < idx.size()) {
        std::size_t j = k;
        while (j + 1 < idx.size() && idx[j + 1] == idx[j] + 1) ++j;
        std::size_t b = toks[idx[k]].begin, e = toks[idx[j]].end;
        out.push_back({field, kind, b, e, std::string(src.substr(b, e - b))});
        k = j + 1;
    }
}

} // namespace

std::vector<DiffSpan> diff_field(const std::string& field, std::string_view base, std::string_view synth) {
    auto a = diff_tokens(base), b = diff_tokens(synth);
    auto tok = [](std::string_view s, const TextToken& t) { return s.substr(t.begin, t.end - t.begin); };

    std::size_t pre = 0;
    while (pre < a.size() && pre < b.size() && tok(base, a[pre]) == tok(synth, b[pre])) ++pre;
    std::size_t suf = 0;
    while (suf < a.size() - pre && suf < b.size() - pre &&
           tok(base, a[a.size() - 1 - suf]) == tok(synth, b[b.size() - 1 - suf]))
        ++suf;

    const std::size_t n = a.size() - pre - suf, m = b.size() - pre - suf;
    // lcs[i][j] = LCS length of a[pre+i..] and b[pre+j..]
    std::vector<std::uint32_t> lcs((n + 1) * (m + 1), 0);
    auto at = [&](std::size_t i, std::size_t j) -> std::uint32_t& { return lcs[i * (m + 1) + j]; };
    for (std::size_t i = n; i-- > 0;)
        for (std::size_t j = m; j-- > 0;)
            at(i, j) = tok(base, a[pre + i]) == tok(synth, b[pre + j]) ? at(i + 1, j + 1) + 1
                                                                        : std::max(at(i + 1, j), at(i, j + 1));

    std::vector<std::size_t> removed, added;
    std::size_t i = 0, j = 0;
    while (i < n && j < m) {
        if (tok(base, a[pre + i]) == tok(synth, b[pre + j])) {
            ++i;
            ++j;
        } else if (at(i + 1, j) >= at(i, j + 1)) {
            removed.push_back(pre + i++);
        } else {
            added.push_back(pre + j++);
        }
    }
    while (i < n) removed.push_back(pre + i++);
    while (j < m) added.push_back(pre + j++);

    std::vector<DiffSpan> out;
    emit_runs(field, DiffKind::removed, base, a, removed, out);
    emit_runs(field, DiffKind::added, synth, b, added, out);
    return out;
}

std::vector<DiffSpan> compute_diff(const std::map<std::string, std::string>& base,
                                   const std::map<std::string, std::string>& synth,
                                   const std::optional<std::string>& negative_value) {
    std::set<std::string> names;
    for (const auto& [k, _] : base) names.insert(k);
    for (const auto& [k, _] : synth) names.insert(k);
    std::vector<DiffSpan> out;
    for (const auto& name : names) {
        auto bi = base.find(name);
        auto si = synth.find(name);
        auto spans = diff_field(name, bi == base.end() ? std::string_view{} : std::string_view(bi->second),
                                si == synth.end() ? std::string_view{} : std::string_view(si->second));
        for (auto& d : spans) {
            if (d.kind == DiffKind::added && negative_value && !negative_value->empty() &&
                text::icontains(d.text, *negative_value))
                d.kind = DiffKind::incorrect_attribute;
            out.push_back(std::move(d));
        }
    }
    return out;
}

bool span_matches(const DiffSpan& d, const std::map<std::string, std::string>& base,
                  const std::map<std::string, std::string>& synth) {
    const auto& src = d.kind == DiffKind::removed ? base : synth;
    auto it = src.find(d.field);
    if (it == src.end()) return false;
    if (d.begin > d.end || d.end > it->second.size()) return false;
    return it->second.compare(d.begin, d.end - d.begin, d.text) == 0;
}

} // namespace synthprod
