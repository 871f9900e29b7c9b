#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "synthprod/annotation.hpp"
#include "synthprod/catalog.hpp"
#include "synthprod/embedding.hpp"
#include "synthprod/generator.hpp"
#include "synthprod/mock_provider.hpp"
#include "synthprod/value_provider.hpp"

namespace fixtures {

struct CatalogSpec {
    std::size_t products = 50;
    std::size_t categories = 5;
    std::uint64_t seed = 1;
    bool with_empty_descriptions = true;
};

// Raw paragraph records in the ingest schema. Category sizes are unequal;
// every attribute value is mentioned in the text with evidence spans, and
// every product has a brand paragraph.
std::vector<nlohmann::json> catalog_records(const CatalogSpec& spec);
synthprod::Catalog make_catalog(const CatalogSpec& spec);
std::string records_to_jsonl(const std::vector<nlohmann::json>& records);

// Every vocabulary value paired with the filler/brand/category strings it
// would collide with (case-insensitive substring). Empty when safe.
std::vector<std::string> vocabulary_collisions(const std::map<std::string, std::vector<std::string>>& vocabulary);

std::string source_dir();   // tests/
std::string asset_dir();
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);
std::string temp_dir(const std::string& name); // fresh, empty

// 1000 annotation tasks (520 correct, 241 incorrect, 239 unknown) with
// three labels each. Every question has a majority; the counts of
// majority answers are fixed:
//   attribute_value_quality valid 965, professional_writing valid 996,
//   brand_modification valid 958, cross_field_consistency valid
//   490 / 224 / 211 by strategy, content_preservation none 888,
//   acceptable 70, major 42, negative_example_coherence valid 230 of the
//   incorrect tasks with the other 11 not_applicable.
struct ReportFixture {
    std::vector<synthprod::AnnotationTask> tasks;
    std::vector<synthprod::AnnotationLabel> labels;
};
ReportFixture annotation_report_fixture(const synthprod::AnnotationProtocol& protocol);

// Mock provider, trigram embedder, bundled prompts and attributes wired into
// one generation context. Retries do not sleep.
struct MockPipeline {
    explicit MockPipeline(synthprod::StrategyProbabilities pi = {}, std::vector<synthprod::MockFixture> fixtures = {},
                          int max_parallel = 4);
    MockPipeline(const MockPipeline&) = delete;
    MockPipeline& operator=(const MockPipeline&) = delete;

    std::shared_ptr<synthprod::MockProvider> provider;
    synthprod::LlmGateway gateway;
    synthprod::HashedTrigramEmbedder embedder;
    synthprod::PromptLibrary prompts;
    synthprod::AttributeRegistry attributes;
    synthprod::UsedValuesRegistry used;
    synthprod::ValueProvider values;
    synthprod::GenerationContext ctx;
};

} // namespace fixtures
