#pragma once

#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "synthprod/embedding.hpp"
#include "synthprod/llm_gateway.hpp"
#include "synthprod/prompt_builder.hpp"
#include "synthprod/strategy.hpp"

namespace synthprod {

enum class DataType { text, numeric, enumerated };

struct AttributeMetadata {
    std::string key;
    std::optional<DataType> data_type;
    std::vector<std::string> valid_units;
    std::vector<std::string> allowed_values;
    std::string category;
};

// Empty when the value satisfies the metadata, otherwise the reason.
std::optional<std::string> check_value(const AttributeMetadata& meta, const std::string& value);

// Attribute metadata and per-category relevance lists, loaded from one
// JSON document:
//   {"relevance": {"<category>": ["<key>", ...]},
//    "metadata": [{"category": "<category>|*", "key": ..., "data_type": ...,
//                  "valid_units": [...], "allowed_values": [...]}]}
class AttributeRegistry {
public:
    static AttributeRegistry load(const std::string& path);
    static AttributeRegistry from_json(const nlohmann::json& doc);

    // Category-specific entry, then the "*" entry, then a bare record.
    AttributeMetadata metadata(const std::string& category, const std::string& key) const;
    const std::vector<std::string>* relevant_keys(const std::string& category) const;

private:
    std::map<std::pair<std::string, std::string>, AttributeMetadata> metadata_;
    std::map<std::string, std::vector<std::string>> relevance_;
};

enum class ValueOrigin { llm, metadata };

struct ValuePool {
    std::string attribute_key;
    std::vector<std::string> candidates;
    std::vector<ValueOrigin> provenance;
};

// Values already handed out, scoped to (category, attribute key).
class UsedValuesRegistry {
public:
    std::vector<std::string> snapshot(const std::string& category, const std::string& key) const;
    void add(const std::string& category, const std::string& key, const std::string& value);

private:
    mutable std::mutex mu_;
    std::map<std::pair<std::string, std::string>, std::vector<std::string>> used_;
};

struct ValueProviderOptions {
    double temperature = 1.0;
    double pool_temperature = 1.0;
    int pool_size = 8;
    double s_max = 0.80;
    int validation_retries = 3;
    int max_output_tokens = 256;
};

// Lowest cosine to the correct value among candidates at or below s_max;
// ties go to the lexicographically smallest candidate.
std::string select_negative_value(const ValuePool& pool, const std::string& correct_value, const Embedder& embedder,
                                  double s_max = 0.80);

class ValueProvider {
public:
    ValueProvider(LlmGateway& gateway, const Embedder& embedder, const PromptLibrary& prompts,
                  ValueProviderOptions options = {});

    // correct/unknown: a fresh valid value other than current_value and the
    // used values. incorrect: a negative for current_value chosen by
    // similarity from a generated pool.
    std::string generate_value(const AttributeMetadata& s, StrategyLabel l, const std::string& category,
                               const std::vector<std::string>& used_values, const std::string& current_value);

    ValuePool generate_value_pool(const AttributeMetadata& s, const std::string& category, int pool_size,
                                  const std::string& correct_value = {});

    const ValueProviderOptions& options() const { return options_; }

private:
    std::vector<std::string> request_values(const AttributeMetadata& s, const std::string& category, int count,
                                            const std::vector<std::string>& excluded, double temperature);

    LlmGateway& gateway_;
    const Embedder& embedder_;
    const PromptLibrary& prompts_;
    ValueProviderOptions options_;
};

// Parses {"values": [...]} (surrounding prose tolerated); falls back to
// the first non-empty line of plain text.
std::vector<std::string> parse_value_list(const std::string& raw);

} // namespace synthprod
