#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "synthprod/catalog.hpp"
#include "synthprod/embedding.hpp"
#include "synthprod/generator.hpp"

namespace synthprod {

enum class VariationCategory {
    granularity,
    morphological,
    multiple_valid,
    missing_units,
    equivalent_definition,
    contextual_synonym,
    format_variation,
};

inline constexpr std::array<VariationCategory, 7> all_variation_categories{
    VariationCategory::granularity,        VariationCategory::morphological,
    VariationCategory::multiple_valid,     VariationCategory::missing_units,
    VariationCategory::equivalent_definition, VariationCategory::contextual_synonym,
    VariationCategory::format_variation};

std::string_view to_string(VariationCategory c);
// nullopt prints as "true_error".
std::string mismatch_name(const std::optional<VariationCategory>& c);

enum class SplitName { train, val, test };
std::string_view to_string(SplitName s);

// One labelled item in a pool: text fields, the attribute key and its gold
// value. source is "original" or "synthetic".
struct ExtractionRecord {
    std::string product_id;
    std::string category;
    std::string attribute_key;
    std::string gold_value;
    std::vector<std::string> alternates;
    std::map<std::string, std::string> text_fields;
    std::string source;
};

struct ExtractionPools {
    std::vector<ExtractionRecord> original;  // correct-strategy base products
    std::vector<ExtractionRecord> synthetic; // correct-strategy synthetic products
    std::vector<ExtractionRecord> test;      // base products of the other strategies
};

// Derives the three pools from a catalog and a generation run.
ExtractionPools extraction_pools(const Catalog& originals, const std::vector<SyntheticProduct>& run);

struct DatasetConfig {
    std::string name;
    double original_fraction = 0.0;
    double synthetic_fraction = 0.0;
    bool zero_shot() const { return original_fraction == 0.0 && synthetic_fraction == 0.0; }
};

// zero_shot, original_100, synthetic_100, hybrid_75_25, hybrid_50_50, hybrid_25_75.
const std::vector<DatasetConfig>& dataset_configs();

struct DatasetSplit {
    DatasetConfig config;
    std::vector<ExtractionRecord> train;
    std::vector<ExtractionRecord> val;
    std::vector<ExtractionRecord> test;
};

struct BuildOptions {
    double train_fraction = 0.8;
};

// Training pool per config: all originals, all synthetics, or for hybrids
// N = min(|original|, |synthetic|) items of which round(f * N) come from
// the originals; products are drawn without repetition across the two
// sources. The pool is shuffled and cut at round(0.8 * size) into
// train/val. The test split is the test pool ordered by product id and
// is the same for every config. Training items whose product appears in
// the test pool are dropped.
std::vector<DatasetSplit> build_configs(const std::vector<ExtractionRecord>& original,
                                        const std::vector<ExtractionRecord>& synthetic,
                                        const std::vector<ExtractionRecord>& test, std::uint64_t seed,
                                        BuildOptions options = {});

struct ExampleTemplate {
    std::size_t token_budget = 512; // whitespace tokens of the whole input
};

struct ExtractionExample {
    std::string input;
    std::string target;
    std::string product_id;
    std::string config;
    SplitName split = SplitName::train;
    std::string source;
    std::vector<std::string> alternates;
};

// "title: ... | description: ... | features: ... | question: what is the
// <key>?" on one line. Over budget, description tokens are dropped first,
// then features, then title.
std::string render_example_input(const ExtractionRecord& r, const ExampleTemplate& tmpl = {});
ExtractionExample make_example(const ExtractionRecord& r, const std::string& config, SplitName split,
                               const ExampleTemplate& tmpl = {});

// Escapes backslash, tab, newline and carriage return.
std::string tsv_escape(std::string_view s);
std::string tsv_unescape(std::string_view s);

struct EmitSummary {
    std::map<std::string, std::map<std::string, std::size_t>> counts; // config -> split -> lines
    std::map<std::string, std::string> test_hash;                     // config -> hash of test.tsv
    nlohmann::json to_json() const;
};

// Writes <dir>/<config>/{train,val,test}.tsv (input<TAB>target<TAB>alternates
// joined by '|') plus a .meta.jsonl sidecar per split and <dir>/manifest.json.
EmitSummary emit_examples(const std::vector<DatasetSplit>& splits, const std::string& out_dir,
                          const ExampleTemplate& tmpl = {});

struct UnitLexicon {
    std::vector<std::string> units; // longest first
    std::map<std::string, std::string> aliases;

    static UnitLexicon load(const std::string& path);
    static std::string default_path();
    static const UnitLexicon& builtin();
};

struct SynonymTable {
    std::vector<std::vector<std::string>> groups;

    static SynonymTable load(const std::string& path);
    static std::string default_path();
    bool synonyms(std::string_view a, std::string_view b) const;
};

struct NormalizeOptions {
    bool strip_plural = true;
    bool strip_units = true;
    bool strip_leading_for = true;
};

// Lowercase and whitespace collapse only.
std::string strict_form(std::string_view v);
std::string normalize_value(std::string_view v, const NormalizeOptions& options = {},
                            const UnitLexicon& units = UnitLexicon::builtin());

struct MismatchContext {
    const UnitLexicon* units = nullptr;      // builtin when null
    const SynonymTable* synonyms = nullptr;
    const Embedder* embedder = nullptr;
    double synonym_cosine = 0.85;
};

std::optional<VariationCategory> categorize_mismatch(std::string_view prediction, std::string_view gold,
                                                     const std::vector<std::string>& alternates = {},
                                                     const MismatchContext& ctx = {});

struct GoldEntry {
    std::string value;
    std::vector<std::string> alternates;
};

struct ScoredLine {
    std::string prediction;
    std::string gold;
    bool strict = false;
    bool normalized = false;
    std::optional<VariationCategory> category; // strict mismatches only
};

struct ScoreReport {
    std::string config;
    std::size_t total = 0;
    std::size_t strict_correct = 0;
    std::size_t normalized_correct = 0;
    std::map<std::string, std::size_t> mismatch_counts; // seven categories + true_error
    std::vector<ScoredLine> lines;

    double strict_accuracy() const;
    double normalized_accuracy() const;
    nlohmann::json to_json(bool with_lines = false) const;
};

ScoreReport score_predictions(const std::vector<std::string>& predictions, const std::vector<GoldEntry>& gold,
                              const MismatchContext& ctx = {}, const NormalizeOptions& options = {});

// Predictions: one per line. Gold: either plain values, or the emitted
// TSV (target in the second column, alternates in the optional third).
std::vector<std::string> load_predictions(const std::string& path);
std::vector<GoldEntry> load_gold(const std::string& path);

} // namespace synthprod
