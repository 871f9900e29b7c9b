#include "synthprod/config.hpp"

#include <fstream>
#include <functional>
#include <map>

#include "synthprod/error.hpp"

namespace synthprod {

using nlohmann::json;

namespace {

using Setter = std::function<void(RunConfig&, const json&)>;

template <typename T>
T typed(const std::string& key, const json& v) {
    try {
        return v.get<T>();
    } catch (const json::exception&) {
        throw Error(ErrorKind::usage, "config key " + key + " has the wrong type");
    }
}

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = [] {
        std::map<std::string, Setter> t;
        auto str = [&](const std::string& key, std::string RunConfig::*field) {
            t[key] = [key, field](RunConfig& c, const json& v) { c.*field = typed<std::string>(key, v); };
        };
        auto num = [&](const std::string& key, double RunConfig::*field) {
            t[key] = [key, field](RunConfig& c, const json& v) { c.*field = typed<double>(key, v); };
        };
        auto integer = [&](const std::string& key, int RunConfig::*field) {
            t[key] = [key, field](RunConfig& c, const json& v) { c.*field = typed<int>(key, v); };
        };
        auto price = [&](const std::string& key, double CostModel::*field) {
            t[key] = [key, field](RunConfig& c, const json& v) { c.pricing.*field = typed<double>(key, v); };
        };
        str("catalog", &RunConfig::catalog);
        str("out", &RunConfig::out_dir);
        t["seed"] = [](RunConfig& c, const json& v) { c.seed = typed<std::uint64_t>("seed", v); };
        t["strategy.pi_correct"] = [](RunConfig& c, const json& v) { c.pi.pi_correct = typed<double>("strategy.pi_correct", v); };
        t["strategy.pi_incorrect"] = [](RunConfig& c, const json& v) {
            c.pi.pi_incorrect = typed<double>("strategy.pi_incorrect", v);
        };
        t["strategy.pi_unknown"] = [](RunConfig& c, const json& v) { c.pi.pi_unknown = typed<double>("strategy.pi_unknown", v); };
        integer("sampling.top_k", &RunConfig::top_k);
        integer("generate.tasks", &RunConfig::tasks);
        num("generate.temperature", &RunConfig::temperature);
        integer("generate.parse_retries", &RunConfig::parse_retries);
        str("llm.mode", &RunConfig::provider);
        str("llm.endpoint", &RunConfig::llm_endpoint);
        str("llm.model", &RunConfig::llm_model);
        str("similarity.endpoint", &RunConfig::embedding_endpoint);
        str("similarity.model", &RunConfig::embedding_model);
        integer("llm.max_parallel", &RunConfig::max_parallel);
        str("locale", &RunConfig::locale);
        str("prompts.dir", &RunConfig::prompt_dir);
        str("attributes", &RunConfig::attributes);
        str("mock.fixtures", &RunConfig::mock_fixtures);
        str("mock.vocabulary", &RunConfig::mock_vocabulary);
        num("similarity.s_max", &RunConfig::s_max);
        num("value_provider.temperature", &RunConfig::value_temperature);
        str("similarity.backend", &RunConfig::similarity_backend);
        integer("value_provider.pool_size", &RunConfig::pool_size);
        price("pricing.price_in", &CostModel::price_per_m_input);
        price("pricing.price_out", &CostModel::price_per_m_output);
        price("pricing.vp_input_tokens", &CostModel::vp_input_tokens);
        price("pricing.vp_output_tokens", &CostModel::vp_output_tokens);
        price("pricing.gen_input_tokens", &CostModel::gen_input_tokens);
        price("pricing.gen_output_tokens", &CostModel::gen_output_tokens);
        return t;
    }();
    return table;
}

} // namespace

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> k;
        for (const auto& [name, _] : setters()) k.push_back(name);
        return k;
    }();
    return keys;
}

void apply_config(RunConfig& cfg, const json& doc) {
    if (!doc.is_object()) throw Error(ErrorKind::usage, "config must be a JSON object");
    for (const auto& [key, value] : doc.items()) {
        auto it = setters().find(key);
        if (it == setters().end()) throw Error(ErrorKind::usage, "unknown config key " + key);
        it->second(cfg, value);
    }
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open config " + path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::usage, "config " + path + ": " + e.what());
    }
    RunConfig cfg;
    apply_config(cfg, doc);
    return cfg;
}

json RunConfig::fingerprint() const {
    return {{"seed", seed.value_or(0)},
            {"pi", {pi.pi_correct, pi.pi_incorrect, pi.pi_unknown}},
            {"top_k", top_k},
            {"tasks", tasks},
            {"provider", provider},
            {"llm_model", llm_model},
            {"embedding_model", embedding_model},
            {"locale", locale},
            {"temperature", temperature},
            {"parse_retries", parse_retries},
            {"s_max", s_max},
            {"value_temperature", value_temperature},
            {"similarity_backend", similarity_backend},
            {"pool_size", pool_size}};
}

} // namespace synthprod
