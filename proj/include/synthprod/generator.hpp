#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "synthprod/catalog.hpp"
#include "synthprod/diff.hpp"
#include "synthprod/llm_gateway.hpp"
#include "synthprod/prompt_builder.hpp"
#include "synthprod/strategy.hpp"
#include "synthprod/value_provider.hpp"

namespace synthprod {

enum class AdditionalChanges { none, acceptable, major };
std::string_view to_string(AdditionalChanges c);
std::optional<AdditionalChanges> parse_additional_changes(std::string_view s);

struct GenerationTask {
    std::size_t index = 0;
    std::string product_id;
    std::string category;
    std::string attribute_key;
    StrategyLabel strategy = StrategyLabel::correct;
    std::string original_value;
    std::string new_value;                     // value the text should reflect
    std::optional<std::string> negative_value; // incorrect strategy only
    std::uint64_t seed = 0;
};

struct ValidationReport {
    bool schema_ok = false;
    bool brand_ok = false;
    std::optional<AdditionalChanges> additional_changes; // only when schema_ok
    std::vector<std::string> notes;
};

struct SyntheticProduct {
    std::string id;
    std::string base_id;
    std::string category;
    std::string attribute_key;
    std::string original_value;
    std::string recorded_value; // structured value stored with the product
    bool inferable = true;      // false for the unknown strategy
    StrategyLabel strategy = StrategyLabel::correct;
    std::optional<std::string> negative_value;
    std::map<std::string, std::string> text_fields;
    std::vector<DiffSpan> diff;
    std::vector<BrandReplacement> brand_replacements;
    std::string change_notes;
    ValidationReport validation;
    TokenUsage usage;
    std::uint64_t seed = 0;
    int attempts = 0;
};

nlohmann::json to_json(const SyntheticProduct& p);
SyntheticProduct synthetic_from_json(const nlohmann::json& j);
std::vector<SyntheticProduct> load_synthetic_products(const std::string& path);

class ParseError : public Error {
public:
    explicit ParseError(const std::string& what) : Error(ErrorKind::invalid, what) {}
};

struct ParsedOutput {
    std::map<std::string, std::string> text_fields;
    std::vector<BrandReplacement> brand_replacements;
    std::string change_notes;
};

// Takes the first JSON object in raw (surrounding prose is ignored) and
// validates it against output_contract(). Throws ParseError.
ParsedOutput parse_output(const std::string& raw);

struct BrandCheck {
    bool ok = true;
    std::vector<std::pair<std::string, std::string>> mentions; // (field, brand)
};

// Lexicon = lines of the base product's brand field plus extra entries.
std::vector<std::string> build_brand_lexicon(const Product& base, const std::vector<std::string>& extra);
BrandCheck check_brand_anonymization(const std::map<std::string, std::string>& synth_fields,
                                     const std::vector<std::string>& lexicon);

struct ChangeClassifierOptions {
    double acceptable_ratio = 0.10;
};

// Ratio of changed word tokens outside target spans (spans carrying the
// original, new or negative value or a brand replacement) to all word
// tokens in both versions. Filling an empty base field counts as
// acceptable, never major.
AdditionalChanges classify_additional_changes(const std::vector<DiffSpan>& diff, const GenerationTask& task,
                                              const std::map<std::string, std::string>& base_fields,
                                              const std::map<std::string, std::string>& synth_fields,
                                              const std::vector<BrandReplacement>& brands,
                                              ChangeClassifierOptions options = {});
double extraneous_change_ratio(const std::vector<DiffSpan>& diff, const GenerationTask& task,
                               const std::map<std::string, std::string>& base_fields,
                               const std::map<std::string, std::string>& synth_fields,
                               const std::vector<BrandReplacement>& brands);

// Violations of the per-strategy text contract (empty when satisfied).
std::vector<std::string> strategy_contract_violations(const SyntheticProduct& p);

struct GeneratorConfig {
    StrategyProbabilities pi;
    int parse_retries = 2;
    double temperature = 0.7;
    int max_output_tokens = 1024;
    int max_parallel = 4;
    std::vector<std::string> extra_brands;
    ChangeClassifierOptions changes;
};

// Shared collaborators for one run.
struct GenerationContext {
    LlmGateway& gateway;
    ValueProvider& values;
    const PromptLibrary& prompts;
    const AttributeRegistry& attributes;
    UsedValuesRegistry& used_values;
    GeneratorConfig config;
};

// Relevance list for the category when configured and matching, else all
// of the product's attributes; uniform draw.
const AttributeRecord& select_attribute(const Product& p, const AttributeRegistry& registry, Rng& rng);

// Attribute, strategy and values for one product (no generation call).
GenerationTask plan_task(const Product& p, const AttributeRecord* preselected, GenerationContext& ctx, Rng& rng,
                         std::size_t index = 0);
// Prompt, generation call with parse retries, validation and diff.
SyntheticProduct realize_task(const Product& p, const GenerationTask& task, GenerationContext& ctx);

SyntheticProduct generate_product(const Product& p, GenerationContext& ctx, Rng& rng);

struct TaskFailure {
    std::size_t index = 0;
    std::string product_id;
    std::string stage; // "value" or "generation"
    std::string reason;
};

struct RunManifest {
    std::uint64_t seed = 0;
    std::string config_hash;
    std::size_t task_count = 0;
    std::size_t succeeded = 0;
    std::map<std::string, std::size_t> strategy_counts;
    std::vector<TaskFailure> failures;
    nlohmann::json token_ledger;
    std::uint64_t retries = 0;
    std::string prompt_version;
    std::string provider;

    nlohmann::json to_json() const;
};

struct BatchResult {
    RunManifest manifest;
    std::vector<SyntheticProduct> products; // task order, failures omitted
};

// Runs every task, isolating failures. When out_dir is non-empty writes
// synthetic.jsonl and manifest.json there; the manifest is always written.
BatchResult run_batch(const std::vector<SampledPair>& tasks, GenerationContext& ctx, std::uint64_t seed,
                      const nlohmann::json& config_doc, const std::string& out_dir = {});

} // namespace synthprod
