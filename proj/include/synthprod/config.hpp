#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "synthprod/quality_metrics.hpp"
#include "synthprod/strategy.hpp"

namespace synthprod {

// Settings shared by the CLI subcommands. A config file is a flat JSON
// object whose keys are listed in config_keys(); command-line flags
// override file values, and LLM_API_KEY supplies the credential.
struct RunConfig {
    std::string catalog;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    StrategyProbabilities pi;
    int top_k = 200;
    int tasks = 2000;

    std::string provider = "mock"; // mock | remote
    std::string llm_endpoint;
    std::string llm_model;
    std::string embedding_endpoint;
    std::string embedding_model;
    int max_parallel = 4;
    std::string api_key; // from the environment only

    std::string locale = "en_US";
    std::string prompt_dir;
    std::string attributes;
    std::string mock_fixtures;
    std::string mock_vocabulary;

    double temperature = 0.7;
    int parse_retries = 2;
    double value_temperature = 1.0;
    int pool_size = 8;
    std::string similarity_backend = "fallback"; // fallback | remote
    double s_max = 0.80;

    CostModel pricing;

    // Behavioural settings only (no paths), hashed into run manifests.
    nlohmann::json fingerprint() const;
};

const std::vector<std::string>& config_keys();

// Applies every key of a flat JSON object; unknown keys and wrong types
// are rejected with Error(usage).
void apply_config(RunConfig& cfg, const nlohmann::json& doc);
RunConfig load_config_file(const std::string& path);

} // namespace synthprod
