#include "synthprod/extraction.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "synthprod/error.hpp"
#include "synthprod/rng.hpp"
#include "synthprod/text.hpp"

namespace synthprod {

using nlohmann::json;
namespace fs = std::filesystem;

std::string_view to_string(VariationCategory c) {
    switch (c) {
    case VariationCategory::granularity: return "granularity";
    case VariationCategory::morphological: return "morphological";
    case VariationCategory::multiple_valid: return "multiple_valid";
    case VariationCategory::missing_units: return "missing_units";
    case VariationCategory::equivalent_definition: return "equivalent_definition";
    case VariationCategory::contextual_synonym: return "contextual_synonym";
    case VariationCategory::format_variation: return "format_variation";
    }
    return "unknown";
}

std::string mismatch_name(const std::optional<VariationCategory>& c) {
    return c ? std::string(to_string(*c)) : std::string("true_error");
}

std::string_view to_string(SplitName s) {
    switch (s) {
    case SplitName::train: return "train";
    case SplitName::val: return "val";
    case SplitName::test: return "test";
    }
    return "unknown";
}

ExtractionPools extraction_pools(const Catalog& originals, const std::vector<SyntheticProduct>& run) {
    ExtractionPools pools;
    std::set<std::string> seen_original, seen_synthetic, seen_test;
    auto base_record = [](const Product& p, const SyntheticProduct& sp) {
        ExtractionRecord r;
        r.product_id = p.id;
        r.category = p.category;
        r.attribute_key = sp.attribute_key;
        r.gold_value = sp.original_value;
        for (const auto& f : canonical_fields()) r.text_fields[f] = p.field_text(f);
        r.source = "original";
        return r;
    };
    for (const auto& sp : run) {
        const Product* base = originals.find(sp.base_id);
        if (!base) throw invalid_input("synthetic product " + sp.id + " refers to unknown base " + sp.base_id);
        if (sp.strategy == StrategyLabel::correct) {
            if (seen_original.insert(base->id).second) pools.original.push_back(base_record(*base, sp));
            if (seen_synthetic.insert(base->id).second) {
                ExtractionRecord r;
                r.product_id = base->id;
                r.category = sp.category;
                r.attribute_key = sp.attribute_key;
                r.gold_value = sp.recorded_value;
                r.text_fields = sp.text_fields;
                r.source = "synthetic";
                pools.synthetic.push_back(std::move(r));
            }
        } else if (seen_test.insert(base->id).second) {
            pools.test.push_back(base_record(*base, sp));
        }
    }
    return pools;
}

const std::vector<DatasetConfig>& dataset_configs() {
    static const std::vector<DatasetConfig> configs{
        {"zero_shot", 0.0, 0.0},       {"original_100", 1.0, 0.0},    {"synthetic_100", 0.0, 1.0},
        {"hybrid_75_25", 0.75, 0.25},  {"hybrid_50_50", 0.5, 0.5},    {"hybrid_25_75", 0.25, 0.75}};
    return configs;
}

namespace {

std::vector<ExtractionRecord> shuffled(std::vector<ExtractionRecord> items, std::uint64_t seed) {
    Rng rng(seed);
    rng.shuffle(items);
    return items;
}

std::vector<ExtractionRecord> hybrid_pool(const DatasetConfig& cfg, const std::vector<ExtractionRecord>& orig,
                                          const std::vector<ExtractionRecord>& synth) {
    const std::size_t n = std::min(orig.size(), synth.size());
    if (n == 0)
        throw invalid_input(cfg.name + " needs both pools: original " + std::to_string(orig.size()) + ", synthetic " +
                            std::to_string(synth.size()));
    const auto n_orig = static_cast<std::size_t>(std::llround(cfg.original_fraction * static_cast<double>(n)));
    const std::size_t n_synth = n - n_orig;

    std::vector<ExtractionRecord> pool(orig.begin(), orig.begin() + static_cast<std::ptrdiff_t>(n_orig));
    std::set<std::string> used;
    for (const auto& r : pool) used.insert(r.product_id);
    std::size_t taken = 0;
    for (const auto& r : synth) {
        if (taken == n_synth) break;
        if (used.count(r.product_id)) continue;
        used.insert(r.product_id);
        pool.push_back(r);
        ++taken;
    }
    if (taken < n_synth)
        throw invalid_input(cfg.name + " needs " + std::to_string(n_synth) +
                            " synthetic items from products not drawn as originals, found " + std::to_string(taken) +
                            " (original pool " + std::to_string(orig.size()) + ", synthetic pool " +
                            std::to_string(synth.size()) + ")");
    return pool;
}

} // namespace

std::vector<DatasetSplit> build_configs(const std::vector<ExtractionRecord>& original,
                                        const std::vector<ExtractionRecord>& synthetic,
                                        const std::vector<ExtractionRecord>& test, std::uint64_t seed,
                                        BuildOptions options) {
    if (!(options.train_fraction > 0.0 && options.train_fraction <= 1.0))
        throw invalid_input("train fraction must be in (0, 1]");
    std::vector<ExtractionRecord> test_sorted = test;
    std::stable_sort(test_sorted.begin(), test_sorted.end(),
                     [](const ExtractionRecord& a, const ExtractionRecord& b) { return a.product_id < b.product_id; });
    std::set<std::string> test_ids;
    for (const auto& r : test_sorted) test_ids.insert(r.product_id);

    auto without_test = [&](const std::vector<ExtractionRecord>& pool) {
        std::vector<ExtractionRecord> out;
        for (const auto& r : pool)
            if (!test_ids.count(r.product_id)) out.push_back(r);
        return out;
    };
    const auto orig = shuffled(without_test(original), mix_seed(seed, 1));
    const auto synth = shuffled(without_test(synthetic), mix_seed(seed, 2));

    std::vector<DatasetSplit> splits;
    const auto& configs = dataset_configs();
    for (std::size_t ci = 0; ci < configs.size(); ++ci) {
        const DatasetConfig& cfg = configs[ci];
        DatasetSplit split{cfg, {}, {}, test_sorted};
        if (!cfg.zero_shot()) {
            std::vector<ExtractionRecord> pool;
            if (cfg.synthetic_fraction == 0.0) {
                if (orig.empty()) throw invalid_input(cfg.name + " needs original examples, pool is empty");
                pool = orig;
            } else if (cfg.original_fraction == 0.0) {
                if (synth.empty()) throw invalid_input(cfg.name + " needs synthetic examples, pool is empty");
                pool = synth;
            } else {
                pool = hybrid_pool(cfg, orig, synth);
            }
            pool = shuffled(std::move(pool), mix_seed(seed, 100 + ci));
            const auto n_train = static_cast<std::size_t>(
                std::llround(options.train_fraction * static_cast<double>(pool.size())));
            split.train.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_train));
            split.val.assign(pool.begin() + static_cast<std::ptrdiff_t>(n_train), pool.end());
        }
        splits.push_back(std::move(split));
    }
    return splits;
}

namespace {

std::vector<std::string> ws_tokens(std::string_view s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!cur.empty()) out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::string take_tokens(const std::vector<std::string>& tokens, std::size_t n) {
    std::vector<std::string> head(tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(std::min(n, tokens.size())));
    return text::join(head, " ");
}

std::string render_parts(const std::string& title, const std::string& description, const std::string& features,
                         const std::string& key) {
    return text::collapse_whitespace("title: " + title + " | description: " + description + " | features: " + features +
                                     " | question: what is the " + key + "?");
}

} // namespace

std::string render_example_input(const ExtractionRecord& r, const ExampleTemplate& tmpl) {
    auto field = [&](const char* name) {
        auto it = r.text_fields.find(name);
        return it == r.text_fields.end() ? std::vector<std::string>{} : ws_tokens(it->second);
    };
    const auto title = field(field::title);
    const auto description = field(field::description);
    const auto features = field(field::features);
    const std::size_t fixed = text::whitespace_token_count(render_parts("", "", "", r.attribute_key));
    std::size_t budget = tmpl.token_budget > fixed ? tmpl.token_budget - fixed : 0;

    const std::size_t n_title = std::min(title.size(), budget);
    budget -= n_title;
    const std::size_t n_features = std::min(features.size(), budget);
    budget -= n_features;
    const std::size_t n_description = std::min(description.size(), budget);
    return render_parts(take_tokens(title, n_title), take_tokens(description, n_description),
                        take_tokens(features, n_features), r.attribute_key);
}

ExtractionExample make_example(const ExtractionRecord& r, const std::string& config, SplitName split,
                               const ExampleTemplate& tmpl) {
    if (text::trim(r.gold_value).empty()) throw invalid_input("empty gold value for product " + r.product_id);
    return {render_example_input(r, tmpl), r.gold_value, r.product_id, config, split, r.source, r.alternates};
}

std::string tsv_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '\\': out += "\\\\"; break;
        case '\t': out += "\\t"; break;
        case '\n': out += "\\n"; break;
        case '\r': out += "\\r"; break;
        default: out += c;
        }
    }
    return out;
}

std::string tsv_unescape(std::string_view s) {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] != '\\' || i + 1 == s.size()) {
            out += s[i];
            continue;
        }
        char n = s[++i];
        switch (n) {
        case 't': out += '\t'; break;
        case 'n': out += '\n'; break;
        case 'r': out += '\r'; break;
        default: out += n;
        }
    }
    return out;
}

json EmitSummary::to_json() const {
    return {{"counts", counts}, {"test_hash", test_hash}};
}

EmitSummary emit_examples(const std::vector<DatasetSplit>& splits, const std::string& out_dir,
                          const ExampleTemplate& tmpl) {
    EmitSummary summary;
    json configs = json::array();
    for (const auto& split : splits) {
        fs::path dir = fs::path(out_dir) / split.config.name;
        std::error_code ec;
        fs::create_directories(dir, ec);
        if (ec) throw io_error("cannot create " + dir.string() + ": " + ec.message());
        const std::pair<SplitName, const std::vector<ExtractionRecord>*> parts[] = {
            {SplitName::train, &split.train}, {SplitName::val, &split.val}, {SplitName::test, &split.test}};
        for (const auto& [name, records] : parts) {
            std::string body;
            std::string meta;
            for (const auto& r : *records) {
                auto ex = make_example(r, split.config.name, name, tmpl);
                body += tsv_escape(ex.input) + '\t' + tsv_escape(ex.target);
                if (!ex.alternates.empty()) body += '\t' + tsv_escape(text::join(ex.alternates, "|"));
                body += '\n';
                meta += json{{"product_id", ex.product_id},
                             {"source", ex.source},
                             {"category", r.category},
                             {"attribute_key", r.attribute_key}}
                            .dump() +
                        '\n';
            }
            const std::string stem(to_string(name));
            for (const auto& [file, content] : {std::pair{stem + ".tsv", &body}, std::pair{stem + ".meta.jsonl", &meta}}) {
                std::ofstream out(dir / file, std::ios::binary);
                if (!out) throw io_error("cannot write " + (dir / file).string());
                out << *content;
                if (!out) throw io_error("write failed: " + (dir / file).string());
            }
            summary.counts[split.config.name][stem] = records->size();
            if (name == SplitName::test) summary.test_hash[split.config.name] = text::hex64(text::fnv1a64(body));
        }
        configs.push_back({{"name", split.config.name},
                           {"original_fraction", split.config.original_fraction},
                           {"synthetic_fraction", split.config.synthetic_fraction}});
    }
    json manifest = summary.to_json();
    manifest["configs"] = configs;
    manifest["token_budget"] = tmpl.token_budget;
    std::ofstream out(fs::path(out_dir) / "manifest.json");
    if (!out) throw io_error("cannot write manifest in " + out_dir);
    out << manifest.dump(2) << '\n';
    return summary;
}

UnitLexicon UnitLexicon::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open " + path);
    UnitLexicon lex;
    try {
        json j = json::parse(in);
        for (const auto& u : j.at("units")) lex.units.push_back(text::to_lower(u.get<std::string>()));
        if (j.contains("aliases"))
            for (const auto& [k, v] : j.at("aliases").items()) lex.aliases[text::to_lower(k)] = text::to_lower(v.get<std::string>());
    } catch (const json::exception& e) {
        throw invalid_input(path + ": " + e.what());
    }
    std::stable_sort(lex.units.begin(), lex.units.end(),
                     [](const std::string& a, const std::string& b) { return a.size() > b.size(); });
    return lex;
}

std::string UnitLexicon::default_path() { return std::string(SYNTHPROD_ASSET_DIR) + "/extraction/units.json"; }

const UnitLexicon& UnitLexicon::builtin() {
    static const UnitLexicon lex = load(default_path());
    return lex;
}

SynonymTable SynonymTable::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open " + path);
    SynonymTable t;
    try {
        for (const auto& group : json::parse(in)) {
            std::vector<std::string> g;
            for (const auto& v : group) g.push_back(strict_form(v.get<std::string>()));
            t.groups.push_back(std::move(g));
        }
    } catch (const json::exception& e) {
        throw invalid_input(path + ": " + e.what());
    }
    return t;
}

std::string SynonymTable::default_path() { return std::string(SYNTHPROD_ASSET_DIR) + "/extraction/synonyms.json"; }

bool SynonymTable::synonyms(std::string_view a, std::string_view b) const {
    const std::string sa = strict_form(a), sb = strict_form(b);
    for (const auto& g : groups) {
        bool ha = std::find(g.begin(), g.end(), sa) != g.end();
        bool hb = std::find(g.begin(), g.end(), sb) != g.end();
        if (ha && hb) return true;
    }
    return false;
}

std::string strict_form(std::string_view v) { return text::collapse_whitespace(text::to_lower(v)); }

namespace {

std::string strip_plural(const std::string& s) {
    std::size_t start = s.rfind(' ');
    start = start == std::string::npos ? 0 : start + 1;
    if (s.size() - start > 3 && s.back() == 's') return s.substr(0, s.size() - 1);
    return s;
}

std::string strip_unit(const std::string& s, const UnitLexicon& units) {
    for (const auto& u : units.units) {
        if (u.empty() || s.size() <= u.size() || s.compare(s.size() - u.size(), u.size(), u) != 0) continue;
        std::string rest = s.substr(0, s.size() - u.size());
        const char before = rest.back();
        if (before == ' ') return text::trim(rest);
        if (std::isdigit(static_cast<unsigned char>(before))) return rest;
    }
    return s;
}

std::string strip_leading_for(const std::string& s) {
    if (s.rfind("for ", 0) == 0 && s.size() > 4) return s.substr(4);
    return s;
}

std::vector<std::string> space_tokens(const std::string& s) { return text::split(s, ' '); }

bool is_prefix_or_suffix(const std::vector<std::string>& shorter, const std::vector<std::string>& longer) {
    if (shorter.empty() || shorter.size() >= longer.size()) return false;
    return std::equal(shorter.begin(), shorter.end(), longer.begin()) ||
           std::equal(shorter.rbegin(), shorter.rend(), longer.rbegin());
}

std::string format_canonical(const std::string& s, const UnitLexicon& units) {
    std::string out;
    for (auto tok : text::word_tokens(s)) {
        if (tok == "for") continue;
        auto a = units.aliases.find(tok);
        out += a == units.aliases.end() ? tok : a->second;
    }
    return out;
}

bool token_subset(const std::vector<std::string>& small, const std::vector<std::string>& big) {
    std::set<std::string> b(big.begin(), big.end());
    return !small.empty() && std::all_of(small.begin(), small.end(), [&](const std::string& t) { return b.count(t); });
}

} // namespace

std::string normalize_value(std::string_view v, const NormalizeOptions& options, const UnitLexicon& units) {
    std::string s = strict_form(v);
    if (options.strip_leading_for) s = strip_leading_for(s);
    if (options.strip_units) s = strip_unit(s, units);
    if (options.strip_plural) s = strip_plural(s);
    return s;
}

std::optional<VariationCategory> categorize_mismatch(std::string_view prediction, std::string_view gold,
                                                     const std::vector<std::string>& alternates,
                                                     const MismatchContext& ctx) {
    const UnitLexicon& units = ctx.units ? *ctx.units : UnitLexicon::builtin();
    const std::string a = strict_form(prediction);
    const std::string b = strict_form(gold);

    if (strip_plural(a) == strip_plural(b)) return VariationCategory::morphological;

    const std::string ua = strip_unit(a, units), ub = strip_unit(b, units);
    if ((ua != a && ua == b) || (ub != b && ub == a)) return VariationCategory::missing_units;

    const auto ta = space_tokens(a), tb = space_tokens(b);
    if (is_prefix_or_suffix(ta, tb) || is_prefix_or_suffix(tb, ta)) return VariationCategory::granularity;

    const std::string fa = format_canonical(a, units), fb = format_canonical(b, units);
    if (!fa.empty() && fa == fb) return VariationCategory::format_variation;
    if (a.rfind("for ", 0) == 0 || b.rfind("for ", 0) == 0) {
        auto wa = text::word_tokens(a), wb = text::word_tokens(b);
        std::set<std::string> sb(wb.begin(), wb.end());
        sb.erase("for");
        if (std::any_of(wa.begin(), wa.end(), [&](const std::string& t) { return t != "for" && sb.count(t); }))
            return VariationCategory::format_variation;
    }

    const SynonymTable* synonyms = ctx.synonyms;
    static const SynonymTable builtin_synonyms = SynonymTable::load(SynonymTable::default_path());
    if (!synonyms) synonyms = &builtin_synonyms;
    if (synonyms->synonyms(a, b)) return VariationCategory::contextual_synonym;
    if (ctx.embedder && !a.empty() && !b.empty()) {
        double c = cosine(embed_text(*ctx.embedder, a), embed_text(*ctx.embedder, b));
        if (c >= ctx.synonym_cosine) return VariationCategory::contextual_synonym;
    }

    const auto wa = text::word_tokens(a), wb = text::word_tokens(b);
    if (token_subset(wa, wb) || token_subset(wb, wa)) return VariationCategory::equivalent_definition;

    for (const auto& alt : alternates)
        if (strict_form(alt) == a) return VariationCategory::multiple_valid;

    return std::nullopt;
}

double ScoreReport::strict_accuracy() const {
    return total == 0 ? 0.0 : static_cast<double>(strict_correct) / static_cast<double>(total);
}

double ScoreReport::normalized_accuracy() const {
    return total == 0 ? 0.0 : static_cast<double>(normalized_correct) / static_cast<double>(total);
}

json ScoreReport::to_json(bool with_lines) const {
    json j = {{"config", config},
              {"total", total},
              {"strict_correct", strict_correct},
              {"normalized_correct", normalized_correct},
              {"strict_accuracy", strict_accuracy()},
              {"normalized_accuracy", normalized_accuracy()},
              {"mismatch_counts", mismatch_counts}};
    if (with_lines) {
        json lines_json = json::array();
        for (const auto& l : lines) {
            json e = {{"prediction", l.prediction}, {"gold", l.gold}, {"strict", l.strict}, {"normalized", l.normalized}};
            if (!l.strict) e["category"] = mismatch_name(l.category);
            lines_json.push_back(e);
        }
        j["lines"] = lines_json;
    }
    return j;
}

ScoreReport score_predictions(const std::vector<std::string>& predictions, const std::vector<GoldEntry>& gold,
                              const MismatchContext& ctx, const NormalizeOptions& options) {
    if (predictions.size() != gold.size())
        throw invalid_input("prediction count " + std::to_string(predictions.size()) + " does not match gold count " +
                            std::to_string(gold.size()));
    const UnitLexicon& units = ctx.units ? *ctx.units : UnitLexicon::builtin();
    ScoreReport report;
    for (auto c : all_variation_categories) report.mismatch_counts[std::string(to_string(c))] = 0;
    report.mismatch_counts["true_error"] = 0;
    report.total = predictions.size();
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        ScoredLine line{predictions[i], gold[i].value, false, false, std::nullopt};
        line.strict = strict_form(line.prediction) == strict_form(line.gold);
        line.normalized =
            line.strict || normalize_value(line.prediction, options, units) == normalize_value(line.gold, options, units);
        if (line.strict) {
            ++report.strict_correct;
        } else {
            line.category = categorize_mismatch(line.prediction, line.gold, gold[i].alternates, ctx);
            ++report.mismatch_counts[mismatch_name(line.category)];
        }
        if (line.normalized) ++report.normalized_correct;
        report.lines.push_back(std::move(line));
    }
    return report;
}

namespace {

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

} // namespace

std::vector<std::string> load_predictions(const std::string& path) {
    std::vector<std::string> out;
    for (const auto& l : read_lines(path)) out.push_back(tsv_unescape(l));
    return out;
}

std::vector<GoldEntry> load_gold(const std::string& path) {
    std::vector<GoldEntry> out;
    for (const auto& l : read_lines(path)) {
        auto cols = text::split(l, '\t');
        GoldEntry g;
        if (cols.size() == 1) {
            g.value = tsv_unescape(cols[0]);
        } else {
            g.value = tsv_unescape(cols[1]);
            if (cols.size() > 2 && !cols[2].empty())
                for (const auto& alt : text::split(tsv_unescape(cols[2]), '|')) g.alternates.push_back(alt);
        }
        out.push_back(std::move(g));
    }
    return out;
}

} // namespace synthprod
