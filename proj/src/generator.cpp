#include "synthprod/generator.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <set>
#include <thread>

#include "synthprod/json_extract.hpp"
#include "synthprod/text.hpp"

namespace synthprod {

using nlohmann::json;

std::string_view to_string(AdditionalChanges c) {
    switch (c) {
    case AdditionalChanges::none: return "none";
    case AdditionalChanges::acceptable: return "acceptable";
    case AdditionalChanges::major: return "major";
    }
    return "none";
}

std::optional<AdditionalChanges> parse_additional_changes(std::string_view s) {
    for (auto c : {AdditionalChanges::none, AdditionalChanges::acceptable, AdditionalChanges::major})
        if (to_string(c) == s) return c;
    return std::nullopt;
}

// ---- serialization ---------------------------------------------------------

json to_json(const SyntheticProduct& p) {
    json diff = json::array();
    for (const auto& d : p.diff) diff.push_back(to_json(d));
    json brands = json::array();
    for (const auto& b : p.brand_replacements) brands.push_back({{"original", b.original}, {"replacement", b.replacement}});
    json validation = {{"schema_ok", p.validation.schema_ok},
                       {"brand_ok", p.validation.brand_ok},
                       {"additional_changes", p.validation.additional_changes
                                                  ? json(std::string(to_string(*p.validation.additional_changes)))
                                                  : json(nullptr)},
                       {"notes", p.validation.notes}};
    return {{"id", p.id},
            {"base_id", p.base_id},
            {"category", p.category},
            {"strategy", std::string(to_string(p.strategy))},
            {"attribute",
             {{"key", p.attribute_key},
              {"original_value", p.original_value},
              {"value", p.recorded_value},
              {"inferable", p.inferable}}},
            {"negative_value", p.negative_value ? json(*p.negative_value) : json(nullptr)},
            {"text_fields", p.text_fields},
            {"diff", diff},
            {"brand_replacements", brands},
            {"change_notes", p.change_notes},
            {"validation", validation},
            {"usage", to_json(p.usage)},
            {"seed", text::hex64(p.seed)},
            {"attempts", p.attempts}};
}

SyntheticProduct synthetic_from_json(const json& j) {
    SyntheticProduct p;
    p.id = j.at("id").get<std::string>();
    p.base_id = j.at("base_id").get<std::string>();
    p.category = j.at("category").get<std::string>();
    auto strategy = parse_strategy(j.at("strategy").get<std::string>());
    if (!strategy) throw invalid_input("unknown strategy '" + j.at("strategy").get<std::string>() + "'");
    p.strategy = *strategy;
    const auto& a = j.at("attribute");
    p.attribute_key = a.at("key").get<std::string>();
    p.original_value = a.at("original_value").get<std::string>();
    p.recorded_value = a.at("value").get<std::string>();
    p.inferable = a.at("inferable").get<bool>();
    if (j.contains("negative_value") && !j["negative_value"].is_null())
        p.negative_value = j["negative_value"].get<std::string>();
    p.text_fields = j.at("text_fields").get<std::map<std::string, std::string>>();
    for (const auto& d : j.at("diff")) p.diff.push_back(diff_span_from_json(d));
    for (const auto& b : j.at("brand_replacements"))
        p.brand_replacements.push_back({b.at("original").get<std::string>(), b.at("replacement").get<std::string>()});
    p.change_notes = j.value("change_notes", "");
    const auto& v = j.at("validation");
    p.validation.schema_ok = v.at("schema_ok").get<bool>();
    p.validation.brand_ok = v.at("brand_ok").get<bool>();
    if (!v.at("additional_changes").is_null())
        p.validation.additional_changes = parse_additional_changes(v["additional_changes"].get<std::string>());
    p.validation.notes = v.value("notes", std::vector<std::string>{});
    p.usage.input_tokens = j.at("usage").at("input_tokens").get<std::int64_t>();
    p.usage.output_tokens = j.at("usage").at("output_tokens").get<std::int64_t>();
    p.seed = std::stoull(j.at("seed").get<std::string>(), nullptr, 16);
    p.attempts = j.value("attempts", 1);
    return p;
}

std::vector<SyntheticProduct> load_synthetic_products(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open synthetic products '" + path + "'");
    std::vector<SyntheticProduct> out;
    std::vector<std::string> bad;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (text::trim(line).empty()) continue;
        try {
            out.push_back(synthetic_from_json(json::parse(line)));
        } catch (const std::exception& e) {
            bad.push_back("line " + std::to_string(n) + ": " + e.what());
        }
    }
    if (!bad.empty()) throw invalid_input("malformed synthetic records: " + text::join(bad, "; "));
    return out;
}

// ---- parsing and validation ------------------------------------------------

ParsedOutput parse_output(const std::string& raw) {
    auto doc_text = first_json_object(raw);
    if (!doc_text) throw ParseError("no JSON object found in response");
    auto doc = json::parse(*doc_text);
    auto violations = output_contract().check(doc);
    if (!violations.empty()) {
        std::vector<std::string> parts;
        for (const auto& v : violations) parts.push_back((v.field.empty() ? "" : v.field + ": ") + v.reason);
        throw ParseError("schema violation: " + text::join(parts, "; "));
    }
    ParsedOutput out;
    for (const auto& k : output_contract().text_keys()) out.text_fields[k] = doc[k].get<std::string>();
    for (const auto& r : doc["brand_replacements"])
        out.brand_replacements.push_back({r["original"].get<std::string>(), r["replacement"].get<std::string>()});
    out.change_notes = doc["change_notes"].get<std::string>();
    return out;
}

std::vector<std::string> build_brand_lexicon(const Product& base, const std::vector<std::string>& extra) {
    std::vector<std::string> lexicon;
    auto add = [&](const std::string& raw) {
        auto b = text::trim(raw);
        if (b.empty()) return;
        if (std::none_of(lexicon.begin(), lexicon.end(), [&](const auto& x) { return text::iequals(x, b); }))
            lexicon.push_back(b);
    };
    for (const auto& line : text::split(base.field_text(field::brand), '\n')) add(line);
    for (const auto& e : extra) add(e);
    return lexicon;
}

BrandCheck check_brand_anonymization(const std::map<std::string, std::string>& synth_fields,
                                     const std::vector<std::string>& lexicon) {
    BrandCheck check;
    for (const auto& [name, t] : synth_fields)
        for (const auto& brand : lexicon)
            if (text::contains_word_ci(t, brand)) {
                check.ok = false;
                check.mentions.emplace_back(name, brand);
            }
    return check;
}

namespace {

std::vector<std::string> target_phrases(const GenerationTask& task, const std::vector<BrandReplacement>& brands) {
    std::vector<std::string> phrases{task.original_value, task.new_value};
    if (task.negative_value) phrases.push_back(*task.negative_value);
    for (const auto& b : brands) {
        phrases.push_back(b.original);
        phrases.push_back(b.replacement);
    }
    phrases.erase(std::remove_if(phrases.begin(), phrases.end(), [](const auto& p) { return text::trim(p).empty(); }),
                  phrases.end());
    return phrases;
}

bool is_target_span(const DiffSpan& d, const std::vector<std::string>& phrases) {
    if (d.kind == DiffKind::incorrect_attribute) return true;
    auto span_tokens = text::word_tokens(d.text);
    for (const auto& p : phrases) {
        if (text::icontains(d.text, p)) return true;
        auto pt = text::word_tokens(p);
        std::set<std::string> phrase_set(pt.begin(), pt.end());
        if (!span_tokens.empty() &&
            std::all_of(span_tokens.begin(), span_tokens.end(), [&](const auto& t) { return phrase_set.count(t); }))
            return true;
    }
    return false;
}

struct ChangeTally {
    double ratio = 0.0;
    bool filled_empty = false;
};

ChangeTally tally_changes(const std::vector<DiffSpan>& diff, const GenerationTask& task,
                          const std::map<std::string, std::string>& base_fields,
                          const std::map<std::string, std::string>& synth_fields,
                          const std::vector<BrandReplacement>& brands) {
    auto text_of = [](const std::map<std::string, std::string>& m, const std::string& k) -> std::string {
        auto it = m.find(k);
        return it == m.end() ? std::string{} : it->second;
    };
    std::set<std::string> filled;
    std::set<std::string> names;
    for (const auto& [k, _] : base_fields) names.insert(k);
    for (const auto& [k, _] : synth_fields) names.insert(k);
    std::size_t total = 0;
    for (const auto& k : names) {
        auto b = text_of(base_fields, k), s = text_of(synth_fields, k);
        if (text::trim(b).empty() && !text::trim(s).empty()) {
            filled.insert(k);
            continue;
        }
        total += text::word_tokens(b).size() + text::word_tokens(s).size();
    }
    auto phrases = target_phrases(task, brands);
    std::size_t changed = 0;
    for (const auto& d : diff) {
        if (filled.count(d.field) || is_target_span(d, phrases)) continue;
        changed += text::word_tokens(d.text).size();
    }
    ChangeTally t;
    t.filled_empty = !filled.empty();
    t.ratio = total == 0 ? 0.0 : static_cast<double>(changed) / static_cast<double>(total);
    return t;
}

} // namespace

double extraneous_change_ratio(const std::vector<DiffSpan>& diff, const GenerationTask& task,
                               const std::map<std::string, std::string>& base_fields,
                               const std::map<std::string, std::string>& synth_fields,
                               const std::vector<BrandReplacement>& brands) {
    return tally_changes(diff, task, base_fields, synth_fields, brands).ratio;
}

AdditionalChanges classify_additional_changes(const std::vector<DiffSpan>& diff, const GenerationTask& task,
                                              const std::map<std::string, std::string>& base_fields,
                                              const std::map<std::string, std::string>& synth_fields,
                                              const std::vector<BrandReplacement>& brands,
                                              ChangeClassifierOptions options) {
    auto t = tally_changes(diff, task, base_fields, synth_fields, brands);
    if (t.ratio == 0.0) return t.filled_empty ? AdditionalChanges::acceptable : AdditionalChanges::none;
    return t.ratio <= options.acceptable_ratio ? AdditionalChanges::acceptable : AdditionalChanges::major;
}

std::vector<std::string> strategy_contract_violations(const SyntheticProduct& p) {
    std::vector<std::string> v;
    auto mentions = [&](const std::string& value) {
        return !value.empty() && std::any_of(p.text_fields.begin(), p.text_fields.end(), [&](const auto& kv) {
                   return text::contains_word_ci(kv.second, value);
               });
    };
    switch (p.strategy) {
    case StrategyLabel::correct:
        if (!mentions(p.recorded_value)) v.push_back("new value '" + p.recorded_value + "' not mentioned");
        if (!text::iequals(p.original_value, p.recorded_value) && mentions(p.original_value))
            v.push_back("original value '" + p.original_value + "' still mentioned");
        break;
    case StrategyLabel::unknown:
        if (mentions(p.original_value)) v.push_back("original value '" + p.original_value + "' still mentioned");
        if (mentions(p.recorded_value)) v.push_back("hidden value '" + p.recorded_value + "' mentioned");
        break;
    case StrategyLabel::incorrect: {
        auto n = std::count_if(p.diff.begin(), p.diff.end(),
                               [](const auto& d) { return d.kind == DiffKind::incorrect_attribute; });
        if (n != 1) v.push_back(std::to_string(n) + " incorrect-attribute spans (expected 1)");
        break;
    }
    }
    return v;
}

// ---- Algorithm steps -------------------------------------------------------

const AttributeRecord& select_attribute(const Product& p, const AttributeRegistry& registry, Rng& rng) {
    if (p.attributes.empty()) throw invalid_input("product " + p.id + " has no attributes");
    std::vector<const AttributeRecord*> candidates;
    if (const auto* keys = registry.relevant_keys(p.category)) {
        for (const auto& a : p.attributes)
            if (std::any_of(keys->begin(), keys->end(), [&](const auto& k) { return text::iequals(k, a.key); }))
                candidates.push_back(&a);
    }
    if (candidates.empty())
        for (const auto& a : p.attributes) candidates.push_back(&a);
    return *candidates[rng.uniform_index(candidates.size())];
}

namespace {

struct Plan {
    const AttributeRecord* attribute = nullptr;
    GenerationTask task;
};

Plan plan_choices(const Product& p, const AttributeRecord* preselected, const GenerationContext& ctx, Rng& rng,
                  std::size_t index, std::uint64_t seed) {
    Plan plan;
    plan.attribute = preselected ? preselected : &select_attribute(p, ctx.attributes, rng);
    auto& t = plan.task;
    t.index = index;
    t.product_id = p.id;
    t.category = p.category;
    t.attribute_key = plan.attribute->key;
    t.original_value = plan.attribute->value;
    t.strategy = sample_strategy(ctx.config.pi, rng);
    t.seed = seed;
    return plan;
}

void assign_values(GenerationTask& t, GenerationContext& ctx) {
    auto meta = ctx.attributes.metadata(t.category, t.attribute_key);
    auto used = ctx.used_values.snapshot(t.category, t.attribute_key);
    auto value = ctx.values.generate_value(meta, t.strategy, t.category, used, t.original_value);
    if (t.strategy == StrategyLabel::incorrect) {
        t.new_value = t.original_value;
        t.negative_value = value;
    } else {
        t.new_value = value;
        ctx.used_values.add(t.category, t.attribute_key, value);
    }
}

} // namespace

GenerationTask plan_task(const Product& p, const AttributeRecord* preselected, GenerationContext& ctx, Rng& rng,
                         std::size_t index) {
    auto plan = plan_choices(p, preselected, ctx, rng, index, rng.next_u64());
    assign_values(plan.task, ctx);
    return plan.task;
}

SyntheticProduct realize_task(const Product& p, const GenerationTask& task, GenerationContext& ctx) {
    const AttributeRecord* attr = p.find_attribute(task.attribute_key);
    AttributeRecord fallback{task.attribute_key, task.original_value, {}};
    if (!attr) attr = &fallback;

    auto lexicon = build_brand_lexicon(p, ctx.config.extra_brands);
    auto prompt = construct_prompt(task.strategy, p, *attr,
                                   ValueChange{task.original_value, task.new_value, task.negative_value}, lexicon,
                                   ctx.prompts);

    SyntheticProduct out;
    out.base_id = p.id;
    out.category = p.category;
    out.attribute_key = task.attribute_key;
    out.original_value = task.original_value;
    out.recorded_value = task.strategy == StrategyLabel::incorrect ? task.original_value : task.new_value;
    out.inferable = task.strategy != StrategyLabel::unknown;
    out.strategy = task.strategy;
    out.negative_value = task.negative_value;
    out.seed = task.seed;
    out.id = p.id + "-" + std::string(to_string(task.strategy)) + "-" + text::hex64(task.seed).substr(0, 8);

    ChatRequest req;
    req.user_text = prompt.rendered;
    req.temperature = ctx.config.temperature;
    req.max_output_tokens = ctx.config.max_output_tokens;
    req.request_tag = "generation";

    std::optional<ParsedOutput> parsed;
    std::string last_error;
    for (int attempt = 0; attempt <= ctx.config.parse_retries && !parsed; ++attempt) {
        if (attempt > 0) req.user_text = prompt.rendered + "\n" + ctx.prompts.get("format_reminder") + "\n";
        auto resp = ctx.gateway.complete(req);
        out.usage += resp.usage;
        out.attempts = attempt + 1;
        try {
            parsed = parse_output(resp.text);
        } catch (const ParseError& e) {
            last_error = e.what();
        } catch (const nlohmann::json::exception& e) {
            last_error = e.what();
        }
    }
    if (!parsed) throw ParseError("unparseable output after " + std::to_string(out.attempts) + " attempt(s): " + last_error);

    std::map<std::string, std::string> base_fields;
    for (const auto& f : canonical_fields()) base_fields[f] = p.field_text(f);

    out.text_fields = parsed->text_fields;
    out.brand_replacements = parsed->brand_replacements;
    out.change_notes = parsed->change_notes;
    out.diff = compute_diff(base_fields, out.text_fields, task.negative_value);

    auto& v = out.validation;
    v.schema_ok = true;
    auto brand = check_brand_anonymization(out.text_fields, lexicon);
    v.brand_ok = brand.ok;
    for (const auto& [f, b] : brand.mentions) v.notes.push_back("brand '" + b + "' remains in " + f);
    v.additional_changes = classify_additional_changes(out.diff, task, base_fields, out.text_fields,
                                                       out.brand_replacements, ctx.config.changes);
    for (auto& note : strategy_contract_violations(out)) v.notes.push_back(std::move(note));
    return out;
}

SyntheticProduct generate_product(const Product& p, GenerationContext& ctx, Rng& rng) {
    auto task = plan_task(p, nullptr, ctx, rng);
    return realize_task(p, task, ctx);
}

// ---- batch -----------------------------------------------------------------

json RunManifest::to_json() const {
    json failures_j = json::array();
    for (const auto& f : failures)
        failures_j.push_back({{"index", f.index}, {"product_id", f.product_id}, {"stage", f.stage}, {"reason", f.reason}});
    json fractions = json::object();
    for (const auto& [k, n] : strategy_counts)
        fractions[k] = task_count == 0 ? 0.0 : static_cast<double>(n) / static_cast<double>(task_count);
    return {{"seed", seed},
            {"config_hash", config_hash},
            {"task_count", task_count},
            {"succeeded", succeeded},
            {"failure_count", failures.size()},
            {"strategy_counts", strategy_counts},
            {"strategy_fractions", fractions},
            {"failures", failures_j},
            {"token_ledger", token_ledger},
            {"retries", retries},
            {"prompt_version", prompt_version},
            {"provider", provider}};
}

namespace {

template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    };
    std::size_t count = std::min<std::size_t>(std::max(workers, 1), n);
    if (count <= 1) {
        work();
        return;
    }
    std::vector<std::jthread> threads;
    for (std::size_t t = 0; t < count; ++t) threads.emplace_back(work);
}

} // namespace

BatchResult run_batch(const std::vector<SampledPair>& tasks, GenerationContext& ctx, std::uint64_t seed,
                      const json& config_doc, const std::string& out_dir) {
    const std::size_t n = tasks.size();
    std::vector<Plan> plans(n);
    std::vector<std::optional<TaskFailure>> failures(n);
    std::vector<std::optional<SyntheticProduct>> results(n);

    // Choices first, sequentially: cheap and fully seed-determined.
    for (std::size_t i = 0; i < n; ++i) {
        auto task_seed = mix_seed(seed, i);
        Rng rng(task_seed);
        plans[i] = plan_choices(tasks[i].product, &tasks[i].attribute, ctx, rng, i, task_seed);
    }

    // Value generation reads the used-values registry, so tasks sharing a
    // (category, attribute) run in index order; groups run in parallel.
    std::map<std::pair<std::string, std::string>, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < n; ++i) groups[{plans[i].task.category, plans[i].task.attribute_key}].push_back(i);
    std::vector<const std::vector<std::size_t>*> group_list;
    for (const auto& [_, idx] : groups) group_list.push_back(&idx);
    parallel_for(group_list.size(), ctx.config.max_parallel, [&](std::size_t g) {
        for (auto i : *group_list[g]) {
            try {
                assign_values(plans[i].task, ctx);
            } catch (const std::exception& e) {
                failures[i] = TaskFailure{i, tasks[i].product.id, "value", e.what()};
            }
        }
    });

    parallel_for(n, ctx.config.max_parallel, [&](std::size_t i) {
        if (failures[i]) return;
        try {
            results[i] = realize_task(tasks[i].product, plans[i].task, ctx);
        } catch (const std::exception& e) {
            failures[i] = TaskFailure{i, tasks[i].product.id, "generation", e.what()};
        }
    });

    BatchResult out;
    auto& m = out.manifest;
    m.seed = seed;
    m.config_hash = text::hex64(text::fnv1a64(config_doc.dump()));
    m.task_count = n;
    for (auto l : all_strategies) m.strategy_counts[std::string(to_string(l))] = 0;
    for (std::size_t i = 0; i < n; ++i) {
        ++m.strategy_counts[std::string(to_string(plans[i].task.strategy))];
        if (failures[i]) m.failures.push_back(*failures[i]);
        if (results[i]) out.products.push_back(std::move(*results[i]));
    }
    m.succeeded = out.products.size();
    m.token_ledger = ctx.gateway.ledger().to_json();
    m.retries = ctx.gateway.retry_count();
    m.prompt_version = ctx.prompts.version();
    m.provider = ctx.gateway.provider_id();

    if (!out_dir.empty()) {
        namespace fs = std::filesystem;
        fs::create_directories(out_dir);
        {
            std::ofstream os(fs::path(out_dir) / "synthetic.jsonl", std::ios::binary);
            if (!os) throw io_error("cannot write " + (fs::path(out_dir) / "synthetic.jsonl").string());
            for (const auto& p : out.products) os << to_json(p).dump() << '\n';
        }
        std::ofstream ms(fs::path(out_dir) / "manifest.json", std::ios::binary);
        if (!ms) throw io_error("cannot write manifest in " + out_dir);
        ms << m.to_json().dump(2) << '\n';
    }
    return out;
}

} // namespace synthprod
