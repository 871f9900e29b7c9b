#include "fixtures.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "synthprod/rng.hpp"
#include "synthprod/text.hpp"

namespace fixtures {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct CategoryDef {
    const char* name;
    const char* noun;
};

const std::vector<CategoryDef>& category_defs() {
    static const std::vector<CategoryDef> defs{
        {"Backpacks", "Backpack"},         {"Sneakers", "Sneaker"},          {"Dresses", "Dress"},
        {"Table Lamps", "Table Lamp"},     {"Coffee Mugs", "Coffee Mug"},    {"Throw Pillows", "Throw Pillow"},
        {"Wallets", "Wallet"},             {"Handbags", "Handbag"},          {"Jackets", "Jacket"},
        {"Scarves", "Scarf"},              {"Area Rugs", "Area Rug"},        {"Curtains", "Curtain Panel"},
        {"Desk Chairs", "Desk Chair"},     {"Bookshelves", "Bookshelf"},     {"Wall Clocks", "Wall Clock"},
        {"Sunglasses", "Sunglass Set"},    {"Watches", "Wristwatch"},        {"Phone Cases", "Phone Case"},
        {"Laptop Sleeves", "Laptop Sleeve"}, {"Water Bottles", "Water Bottle"}, {"Cutting Boards", "Cutting Board"},
        {"Vases", "Vase"},                 {"Picture Frames", "Picture Frame"}, {"Bedding Sets", "Bedding Set"},
        {"Towels", "Bath Towel"},          {"Yoga Mats", "Yoga Mat"},        {"Tote Bags", "Tote Bag"},
        {"Hats", "Hat"},                   {"Gloves", "Glove Pair"},         {"Belts", "Belt"},
        {"Boots", "Boot"},                 {"Sandals", "Sandal"},            {"Planters", "Planter"},
        {"Candle Holders", "Candle Holder"}, {"Serving Bowls", "Serving Bowl"}, {"Dinner Plates", "Dinner Plate"},
        {"Storage Baskets", "Storage Basket"}, {"Duffel Bags", "Duffel Bag"}, {"Lunch Boxes", "Lunch Box"},
        {"Pet Beds", "Pet Bed"}};
    return defs;
}

const std::vector<std::string>& attribute_keys() {
    static const std::vector<std::string> keys{"Color", "Material", "Pattern", "Style", "Closure", "Finish"};
    return keys;
}

const std::map<std::string, std::vector<std::string>>& vocabulary() {
    static const std::map<std::string, std::vector<std::string>> vocab = [] {
        std::ifstream in(asset_dir() + "/mock/value_vocab.json");
        if (!in) throw std::runtime_error("missing mock vocabulary asset");
        return json::parse(in).get<std::map<std::string, std::vector<std::string>>>();
    }();
    return vocab;
}

const std::vector<std::string>& brands() {
    static const std::vector<std::string> b{"Pelford", "Marwick", "Tandridge", "Holloway", "Brennock",
                                            "Fenwick", "Ashcombe", "Wexley", "Dunmore", "Kelsall"};
    return b;
}

const std::vector<std::string>& adjectives() {
    static const std::vector<std::string> a{"Everyday", "Classic", "Compact", "Deluxe",
                                            "Premium", "Essential", "Signature", "Urban"};
    return a;
}

const std::vector<std::string>& filler_features() {
    static const std::vector<std::string> f{"Easy to clean", "Ships in protective packaging",
                                            "Backed by a one-year warranty", "Lightweight and sturdy",
                                            "Gift ready"};
    return f;
}

std::string description_lead(const std::string& brand, const std::string& noun) {
    return brand + " built this " + synthprod::text::to_lower(noun) + " for daily routines.";
}

std::vector<std::string> fixed_texts() {
    std::vector<std::string> out = {"built this", "for daily routines.", "It has a", "look.", " - ", ": ",
                                    "Some shoppers describe it as", "Designed for reliable, everyday use."};
    for (const auto& f : filler_features()) out.push_back(f);
    for (const auto& b : brands()) out.push_back(b);
    for (const auto& a : adjectives()) out.push_back(a);
    for (const auto& k : attribute_keys()) out.push_back(k);
    for (const auto& c : category_defs()) {
        out.push_back(c.name);
        out.push_back(c.noun);
    }
    for (const char* stem : {"Athlete", "Novara", "Zentrik", "Lumora", "Brisko", "Quillon", "Vantor", "Kestro"})
        for (const char* tail : {"X", "Co", "Labs", "Works"}) out.push_back(std::string(stem) + tail);
    return out;
}

json evidence_in(const std::vector<json>& paragraphs, const std::string& value) {
    json evs = json::array();
    for (std::size_t pid = 0; pid < paragraphs.size(); ++pid) {
        const std::string text = paragraphs[pid]["text"].get<std::string>();
        auto pos = text.find(value);
        if (pos == std::string::npos) continue;
        evs.push_back({{"pid", pid}, {"begin", pos}, {"end", pos + value.size()}, {"surface", value}});
    }
    return evs;
}

} // namespace

std::vector<json> catalog_records(const CatalogSpec& spec) {
    const auto& defs = category_defs();
    if (spec.categories == 0 || spec.categories > defs.size()) throw std::invalid_argument("bad category count");
    synthprod::Rng rng(spec.seed);

    // Category i gets weight categories - i + 1, so sizes decrease.
    std::vector<std::size_t> weights;
    std::size_t total_weight = 0;
    for (std::size_t i = 0; i < spec.categories; ++i) {
        weights.push_back(spec.categories - i + 1);
        total_weight += weights.back();
    }
    std::vector<std::size_t> sizes;
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < spec.categories; ++i) {
        sizes.push_back(spec.products * weights[i] / total_weight);
        assigned += sizes.back();
    }
    sizes[0] += spec.products - assigned;

    std::vector<json> records;
    std::size_t serial = 0;
    for (std::size_t c = 0; c < spec.categories; ++c) {
        const auto& def = defs[c];
        std::vector<std::string> keys;
        for (std::size_t j = 0; j < 3; ++j) keys.push_back(attribute_keys()[(c + j) % attribute_keys().size()]);
        for (std::size_t k = 0; k < sizes[c]; ++k, ++serial) {
            const std::string& brand = brands()[rng.uniform_index(brands().size())];
            const std::string& adj = adjectives()[rng.uniform_index(adjectives().size())];
            const std::size_t n_attrs = 1 + rng.uniform_index(3);

            std::vector<std::pair<std::string, std::string>> attrs;
            for (std::size_t a = 0; a < n_attrs; ++a) {
                const auto& values = vocabulary().at(synthprod::text::to_lower(keys[a]));
                attrs.emplace_back(keys[a], values[rng.uniform_index(values.size())]);
            }

            std::vector<json> paragraphs;
            paragraphs.push_back({{"source", "title"}, {"text", brand + " " + adj + " " + def.noun + " - " + attrs[0].second}});
            const bool empty_description = spec.with_empty_descriptions && serial % 10 == 9;
            if (!empty_description) {
                std::string d = description_lead(brand, def.noun);
                for (std::size_t a = 1; a < attrs.size(); ++a)
                    d += " It has a " + attrs[a].second + " " + synthprod::text::to_lower(attrs[a].first) + " look.";
                paragraphs.push_back({{"source", "description"}, {"text", d}});
            }
            for (std::size_t a = 0; a < attrs.size(); ++a)
                if (a > 0 && empty_description)
                    paragraphs.push_back({{"source", "feature"}, {"text", attrs[a].first + ": " + attrs[a].second}});
            paragraphs.push_back({{"source", "feature"}, {"text", filler_features()[serial % filler_features().size()]}});
            paragraphs.push_back(
                {{"source", "feature"}, {"text", filler_features()[(serial + 2) % filler_features().size()]}});
            paragraphs.push_back({{"source", "brand"}, {"text", brand}});
            paragraphs.push_back({{"source", "price"}, {"text", "$" + std::to_string(10 + serial % 90) + ".99"}});

            json attributes = json::array();
            for (const auto& [key, value] : attrs)
                attributes.push_back({{"key", key}, {"value", value}, {"evidences", evidence_in(paragraphs, value)}});

            char id[32];
            std::snprintf(id, sizeof id, "P%05zu", serial + 1);
            records.push_back({{"id", id}, {"category", def.name}, {"paragraphs", paragraphs}, {"attributes", attributes}});
        }
    }
    return records;
}

synthprod::Catalog make_catalog(const CatalogSpec& spec) {
    std::istringstream in(records_to_jsonl(catalog_records(spec)));
    auto result = synthprod::ingest_catalog(in);
    if (!result.skipped.empty()) throw std::runtime_error("fixture record skipped: " + result.skipped.front().reason);
    return result.catalog;
}

std::string records_to_jsonl(const std::vector<json>& records) {
    std::string out;
    for (const auto& r : records) out += r.dump() + "\n";
    return out;
}

std::vector<std::string> vocabulary_collisions(const std::map<std::string, std::vector<std::string>>& vocab) {
    std::vector<std::string> all_values;
    for (const auto& [_, values] : vocab) all_values.insert(all_values.end(), values.begin(), values.end());
    std::vector<std::string> collisions;
    for (const auto& v : all_values) {
        for (const auto& t : fixed_texts())
            if (synthprod::text::icontains(t, v)) collisions.push_back(v + " in '" + t + "'");
        for (const auto& other : all_values)
            if (&other != &v && synthprod::text::icontains(other, v)) collisions.push_back(v + " in value '" + other + "'");
    }
    return collisions;
}

std::string source_dir() { return SYNTHPROD_TEST_DIR; }
std::string asset_dir() { return SYNTHPROD_ASSET_DIR; }

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    fs::create_directories(fs::path(path).parent_path());
    std::ofstream out(path, std::ios::binary);
    out << content;
    if (!out) throw std::runtime_error("cannot write " + path);
}

std::string temp_dir(const std::string& name) {
    fs::path p = fs::path(SYNTHPROD_TEST_TMP) / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p.string();
}

namespace {

// Three answers whose majority is `winner`; the dissenting position
// rotates with `i` (and every fourth task is unanimous).
std::vector<std::string> ballots(std::size_t i, const std::string& winner, const std::string& loser) {
    switch (i % 4) {
    case 0: return {winner, winner, winner};
    case 1: return {winner, winner, loser};
    case 2: return {winner, loser, winner};
    default: return {loser, winner, winner};
    }
}

} // namespace

ReportFixture annotation_report_fixture(const synthprod::AnnotationProtocol& protocol) {
    using namespace synthprod;
    ReportFixture f;
    const std::size_t n = 1000;
    for (std::size_t i = 0; i < n; ++i) {
        AnnotationTask t;
        char id[16];
        std::snprintf(id, sizeof id, "T%04zu", i);
        t.task_id = t.synthetic_id = id;
        t.strategy = i < 520 ? StrategyLabel::correct : i < 761 ? StrategyLabel::incorrect : StrategyLabel::unknown;
        t.attribute_key = "Color";
        t.questions = protocol.questions;
        f.tasks.push_back(t);
    }
    std::size_t rank_in_strategy[3] = {0, 0, 0};
    for (std::size_t i = 0; i < n; ++i) {
        const auto& t = f.tasks[i];
        auto s = static_cast<std::size_t>(t.strategy);
        std::size_t r = rank_in_strategy[s]++;
        const std::size_t consistent[3] = {490, 224, 211};
        std::map<std::string, std::vector<std::string>> votes;
        votes[question::attribute_value_quality] = ballots(i, i < 965 ? "valid" : "invalid", i < 965 ? "invalid" : "valid");
        votes[question::professional_writing] = ballots(i + 1, i < 996 ? "valid" : "invalid", i < 996 ? "invalid" : "valid");
        votes[question::brand_modification] = ballots(i + 2, i >= 42 ? "valid" : "invalid", i >= 42 ? "invalid" : "valid");
        bool ok = r < consistent[s];
        votes[question::cross_field_consistency] = ballots(i + 3, ok ? "valid" : "invalid", ok ? "invalid" : "valid");
        std::string change = i < 888 ? "none" : i < 958 ? "acceptable" : "major";
        votes[question::content_preservation] = ballots(i, change, change == "none" ? "acceptable" : "none");
        if (t.strategy == StrategyLabel::incorrect)
            votes[question::negative_example_coherence] =
                r < 230 ? ballots(i, "valid", "invalid") : ballots(i, "not_applicable", "valid");
        else
            votes[question::negative_example_coherence] = ballots(i, "not_applicable", "invalid");
        for (std::size_t a = 0; a < 3; ++a) {
            AnnotationLabel l;
            l.task_id = t.task_id;
            l.annotator_id = "annotator-" + std::to_string(a);
            for (const auto& [q, v] : votes) l.answers[q] = v[a];
            l.timestamp_ms = static_cast<std::int64_t>(i * 3 + a + 1);
            f.labels.push_back(l);
        }
    }
    return f;
}

namespace {

synthprod::GatewayOptions pipeline_gateway_options(int max_parallel) {
    synthprod::GatewayOptions o;
    o.max_parallel = max_parallel;
    return o;
}

synthprod::GeneratorConfig pipeline_config(synthprod::StrategyProbabilities pi, int max_parallel) {
    synthprod::GeneratorConfig c;
    c.pi = pi;
    c.max_parallel = max_parallel;
    return c;
}

} // namespace

MockPipeline::MockPipeline(synthprod::StrategyProbabilities pi, std::vector<synthprod::MockFixture> fixtures,
                           int max_parallel)
    : provider(std::make_shared<synthprod::MockProvider>(
          std::move(fixtures), synthprod::load_mock_vocabulary(synthprod::default_mock_vocabulary_path()))),
      gateway(provider, pipeline_gateway_options(max_parallel), [](std::chrono::milliseconds) {}),
      prompts(synthprod::PromptLibrary::load(synthprod::PromptLibrary::default_dir(), "en_US")),
      attributes(synthprod::AttributeRegistry::load(asset_dir() + "/attributes.json")),
      values(gateway, embedder, prompts),
      ctx{gateway, values, prompts, attributes, used, pipeline_config(pi, max_parallel)} {}

} // namespace fixtures
