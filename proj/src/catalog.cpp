#include "synthprod/catalog.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>

#include "synthprod/error.hpp"
#include "synthprod/rng.hpp"

namespace synthprod {

using nlohmann::json;

namespace {

// Paragraph source label -> consolidated field name.
std::optional<std::string> field_for_source(const std::string& source) {
    if (source == "title") return std::string(field::title);
    if (source == "description") return std::string(field::description);
    if (source == "feature" || source == "features") return std::string(field::features);
    if (source == "brand") return std::string(field::brand);
    if (source == "price") return std::string(field::price);
    return std::nullopt;
}

std::string source_for_field(const std::string& f) {
    return f == field::features ? "feature" : f;
}

struct ParagraphSlot {
    std::string field;
    std::size_t offset = 0;
    std::size_t length = 0;
};

// Throws std::invalid_argument with a human-readable reason.
Product parse_record(const json& rec) {
    auto fail = [](const std::string& why) { throw std::invalid_argument(why); };
    if (!rec.is_object()) fail("record is not an object");

    Product p;
    if (!rec.contains("id") || !rec["id"].is_string() || rec["id"].get<std::string>().empty())
        fail("missing or empty id");
    p.id = rec["id"].get<std::string>();
    if (!rec.contains("category") || !rec["category"].is_string() ||
        rec["category"].get<std::string>().empty())
        fail("missing or empty category");
    p.category = rec["category"].get<std::string>();

    if (!rec.contains("paragraphs") || !rec["paragraphs"].is_array()) fail("missing paragraphs array");
    const auto& paragraphs = rec["paragraphs"];

    for (const auto& name : canonical_fields()) p.text_fields[name];

    std::map<std::string, bool> field_started;
    std::vector<ParagraphSlot> slots;
    std::vector<std::string> paragraph_texts;
    for (std::size_t i = 0; i < paragraphs.size(); ++i) {
        const auto& para = paragraphs[i];
        if (!para.is_object() || !para.contains("source") || !para["source"].is_string() ||
            !para.contains("text") || !para["text"].is_string())
            fail("paragraph " + std::to_string(i) + " lacks string source/text");
        auto f = field_for_source(para["source"].get<std::string>());
        if (!f) fail("paragraph " + std::to_string(i) + " has unknown source '" +
                     para["source"].get<std::string>() + "'");
        auto& dest = p.text_fields[*f];
        if (field_started[*f]) dest.push_back('\n');
        field_started[*f] = true;
        const auto& t = para["text"].get_ref<const std::string&>();
        slots.push_back({*f, dest.size(), t.size()});
        paragraph_texts.push_back(t);
        dest += t;
    }

    bool any_text = std::any_of(p.text_fields.begin(), p.text_fields.end(),
                                [](const auto& kv) { return !kv.second.empty(); });
    if (!any_text) fail("all text fields empty");

    p.paragraph_count = paragraphs.size();
    if (rec.contains("paragraph_count")) {
        if (!rec["paragraph_count"].is_number_unsigned()) fail("paragraph_count must be a non-negative integer");
        p.paragraph_count = rec["paragraph_count"].get<std::size_t>();
    }

    if (rec.contains("attributes")) {
        if (!rec["attributes"].is_array()) fail("attributes is not an array");
        for (const auto& a : rec["attributes"]) {
            AttributeRecord attr;
            if (!a.is_object() || !a.contains("key") || !a["key"].is_string() ||
                a["key"].get<std::string>().empty())
                fail("attribute with missing or empty key");
            attr.key = a["key"].get<std::string>();
            if (!a.contains("value") || !a["value"].is_string()) fail("attribute '" + attr.key + "' lacks a value");
            attr.value = a["value"].get<std::string>();
            if (a.contains("evidences")) {
                if (!a["evidences"].is_array()) fail("evidences of '" + attr.key + "' is not an array");
                for (const auto& e : a["evidences"]) {
                    if (!e.is_object() || !e.contains("pid") || !e["pid"].is_number_unsigned() ||
                        !e.contains("begin") || !e["begin"].is_number_unsigned() || !e.contains("end") ||
                        !e["end"].is_number_unsigned())
                        fail("evidence of '" + attr.key + "' lacks pid/begin/end");
                    auto pid = e["pid"].get<std::size_t>();
                    auto begin = e["begin"].get<std::size_t>();
                    auto end = e["end"].get<std::size_t>();
                    if (pid >= slots.size()) fail("evidence of '" + attr.key + "' references missing paragraph");
                    const auto& slot = slots[pid];
                    if (begin > end || end > slot.length)
                        fail("evidence of '" + attr.key + "' out of paragraph bounds");
                    Evidence ev;
                    ev.field = slot.field;
                    ev.begin = slot.offset + begin;
                    ev.end = slot.offset + end;
                    ev.surface = paragraph_texts[pid].substr(begin, end - begin);
                    if (e.contains("surface") && e["surface"].is_string() &&
                        e["surface"].get<std::string>() != ev.surface)
                        fail("evidence surface mismatch for '" + attr.key + "'");
                    attr.evidences.push_back(std::move(ev));
                }
            }
            p.attributes.push_back(std::move(attr));
        }
    }
    return p;
}

} // namespace

const std::vector<std::string>& canonical_fields() {
    static const std::vector<std::string> names{field::title, field::description, field::features};
    return names;
}

const std::string& Product::field_text(const std::string& name) const {
    static const std::string empty;
    auto it = text_fields.find(name);
    return it == text_fields.end() ? empty : it->second;
}

const AttributeRecord* Product::find_attribute(const std::string& key) const {
    for (const auto& a : attributes)
        if (a.key == key) return &a;
    return nullptr;
}

Catalog::Catalog(std::vector<Product> products) : products_(std::move(products)) {
    for (std::size_t i = 0; i < products_.size(); ++i) {
        if (!index_.emplace(products_[i].id, i).second)
            throw invalid_input("duplicate product id '" + products_[i].id + "'");
    }
}

const Product* Catalog::find(const std::string& id) const {
    auto it = index_.find(id);
    return it == index_.end() ? nullptr : &products_[it->second];
}

IngestResult ingest_catalog(std::istream& in, std::optional<std::size_t> max_products) {
    if (!in.good()) throw io_error("catalog stream is not readable");
    IngestResult result;
    std::vector<Product> products;
    std::set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (max_products && products.size() >= *max_products) break;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            auto rec = json::parse(line);
            Product p = parse_record(rec);
            if (!seen.insert(p.id).second) throw std::invalid_argument("duplicate id '" + p.id + "'");
            products.push_back(std::move(p));
        } catch (const json::exception& e) {
            result.skipped.push_back({line_no, std::string("malformed JSON: ") + e.what()});
        } catch (const std::invalid_argument& e) {
            result.skipped.push_back({line_no, e.what()});
        }
    }
    if (in.bad()) throw io_error("read error after line " + std::to_string(line_no));
    result.catalog = Catalog(std::move(products));
    return result;
}

IngestResult ingest_catalog_file(const std::string& path, std::optional<std::size_t> max_products) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open catalog '" + path + "'");
    return ingest_catalog(in, max_products);
}

Catalog load_catalog(const std::string& path) { return ingest_catalog_file(path).catalog; }

json product_to_record(const Product& p) {
    json paragraphs = json::array();
    std::map<std::string, std::size_t> pid_of;
    std::vector<std::string> order(canonical_fields());
    for (const auto& [name, _] : p.text_fields)
        if (std::find(order.begin(), order.end(), name) == order.end()) order.push_back(name);
    for (const auto& name : order) {
        const auto& t = p.field_text(name);
        if (t.empty()) continue;
        pid_of[name] = paragraphs.size();
        paragraphs.push_back({{"source", source_for_field(name)}, {"text", t}});
    }
    json attrs = json::array();
    for (const auto& a : p.attributes) {
        json evs = json::array();
        for (const auto& e : a.evidences)
            evs.push_back({{"pid", pid_of.at(e.field)}, {"begin", e.begin}, {"end", e.end}, {"surface", e.surface}});
        attrs.push_back({{"key", a.key}, {"value", a.value}, {"evidences", std::move(evs)}});
    }
    return {{"id", p.id},
            {"category", p.category},
            {"paragraphs", std::move(paragraphs)},
            {"attributes", std::move(attrs)},
            {"paragraph_count", p.paragraph_count}};
}

void write_catalog(std::ostream& out, const Catalog& catalog) {
    for (const auto& p : catalog.products()) out << product_to_record(p).dump() << '\n';
}

void write_catalog_file(const std::string& path, const Catalog& catalog) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write catalog '" + path + "'");
    write_catalog(out, catalog);
    if (!out) throw io_error("write failed for '" + path + "'");
}

json product_snapshot(const Product& p) {
    json attrs = json::array();
    for (const auto& a : p.attributes) {
        json evs = json::array();
        for (const auto& e : a.evidences)
            evs.push_back({{"field", e.field}, {"begin", e.begin}, {"end", e.end}, {"surface", e.surface}});
        attrs.push_back({{"key", a.key}, {"value", a.value}, {"evidences", std::move(evs)}});
    }
    return {{"id", p.id}, {"category", p.category}, {"text_fields", p.text_fields}, {"attributes", attrs}};
}

std::vector<std::pair<std::string, std::size_t>> ranked_categories(const Catalog& catalog) {
    std::map<std::string, std::size_t> counts;
    for (const auto& p : catalog.products()) ++counts[p.category];
    std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    return ranked;
}

std::vector<SampledPair> sample_generation_tasks(const Catalog& catalog, int top_k_categories,
                                                 int n_products, std::uint64_t seed) {
    if (top_k_categories < 1) throw invalid_input("top_k_categories must be >= 1");
    if (n_products < 1) throw invalid_input("n_products must be >= 1");
    if (catalog.empty()) throw invalid_input("catalog is empty");

    auto ranked = ranked_categories(catalog);
    std::set<std::string> allowed;
    for (std::size_t i = 0; i < ranked.size() && i < static_cast<std::size_t>(top_k_categories); ++i)
        allowed.insert(ranked[i].first);

    std::vector<const Product*> eligible;
    for (const auto& p : catalog.products())
        if (allowed.count(p.category) && !p.attributes.empty()) eligible.push_back(&p);
    if (eligible.empty())
        throw invalid_input("no eligible products: none of the top " + std::to_string(top_k_categories) +
                            " categories has a product with at least one attribute");

    Rng rng(seed);
    rng.shuffle(eligible);
    auto n = std::min<std::size_t>(eligible.size(), static_cast<std::size_t>(n_products));
    std::vector<SampledPair> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Product& p = *eligible[i];
        auto a = rng.uniform_index(p.attributes.size());
        out.push_back({p, p.attributes[a]});
    }
    return out;
}

MeanStd mean_std(const std::vector<double>& xs) {
    if (xs.empty()) return {};
    double sum = 0.0;
    for (double x : xs) sum += x;
    double mean = sum / static_cast<double>(xs.size());
    double sq = 0.0;
    for (double x : xs) sq += (x - mean) * (x - mean);
    return {mean, std::sqrt(sq / static_cast<double>(xs.size()))};
}

std::map<std::string, double> compute_evidence_distribution(const Catalog& catalog) {
    std::map<std::string, std::size_t> counts;
    std::size_t total = 0;
    for (const auto& p : catalog.products())
        for (const auto& a : p.attributes)
            for (const auto& e : a.evidences) {
                ++counts[e.field];
                ++total;
            }
    std::map<std::string, double> dist;
    for (const auto& [f, c] : counts) dist[f] = static_cast<double>(c) / static_cast<double>(total);
    return dist;
}

CatalogStats compute_catalog_stats(const Catalog& catalog) {
    if (catalog.empty()) throw invalid_input("catalog is empty");
    CatalogStats s;
    s.product_count = catalog.size();
    std::vector<double> attrs, spans, paragraphs;
    for (const auto& p : catalog.products()) {
        ++s.category_histogram[p.category];
        attrs.push_back(static_cast<double>(p.attributes.size()));
        paragraphs.push_back(static_cast<double>(p.paragraph_count));
        for (const auto& a : p.attributes) {
            ++s.attribute_histogram[a.key];
            spans.push_back(static_cast<double>(a.evidences.size()));
        }
    }
    s.attrs_per_product = mean_std(attrs);
    s.evidence_spans_per_attr = mean_std(spans);
    s.paragraphs_per_product = mean_std(paragraphs);
    s.evidence_source_distribution = compute_evidence_distribution(catalog);
    return s;
}

} // namespace synthprod
