#include "synthprod/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>

#include <CLI11.hpp>
#include <json.hpp>

#include "synthprod/annotation.hpp"
#include "synthprod/annotation_server.hpp"
#include "synthprod/catalog.hpp"
#include "synthprod/config.hpp"
#include "synthprod/embedding.hpp"
#include "synthprod/extraction.hpp"
#include "synthprod/generator.hpp"
#include "synthprod/http_provider.hpp"
#include "synthprod/mock_provider.hpp"
#include "synthprod/quality_metrics.hpp"

namespace synthprod::cli {

using nlohmann::json;
namespace fs = std::filesystem;

int exit_code(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::usage: return 2;
    case ErrorKind::io: return 3;
    case ErrorKind::invalid: return 4;
    case ErrorKind::provider: return 5;
    case ErrorKind::internal: return 1;
    }
    return 1;
}

namespace {

std::string_view kind_name(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::usage: return "usage";
    case ErrorKind::io: return "io";
    case ErrorKind::invalid: return "invalid";
    case ErrorKind::provider: return "provider";
    case ErrorKind::internal: return "internal";
    }
    return "internal";
}

Error usage(const std::string& what) { return Error(ErrorKind::usage, what); }

enum class Format { table, csv, jsonlines };

Format parse_format(const std::string& s) {
    if (s == "table") return Format::table;
    if (s == "csv") return Format::csv;
    if (s == "jsonlines") return Format::jsonlines;
    throw usage("--format must be table, csv or jsonlines");
}

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<json>> rows;
};

std::string cell_text(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_float()) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.6g", v.get<double>());
        return buf;
    }
    if (v.is_null()) return "";
    return v.dump();
}

std::string csv_cell(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

void print(std::ostream& out, const Table& t, Format f) {
    switch (f) {
    case Format::jsonlines:
        for (const auto& row : t.rows) {
            json obj = json::object();
            for (std::size_t i = 0; i < t.header.size() && i < row.size(); ++i) obj[t.header[i]] = row[i];
            out << obj.dump() << '\n';
        }
        return;
    case Format::csv:
        for (std::size_t i = 0; i < t.header.size(); ++i) out << (i ? "," : "") << csv_cell(t.header[i]);
        out << '\n';
        for (const auto& row : t.rows) {
            for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << csv_cell(cell_text(row[i]));
            out << '\n';
        }
        return;
    case Format::table: {
        std::vector<std::size_t> width(t.header.size(), 0);
        for (std::size_t i = 0; i < t.header.size(); ++i) width[i] = t.header[i].size();
        for (const auto& row : t.rows)
            for (std::size_t i = 0; i < row.size() && i < width.size(); ++i)
                width[i] = std::max(width[i], cell_text(row[i]).size());
        auto line = [&](const std::vector<std::string>& cells) {
            for (std::size_t i = 0; i < cells.size(); ++i) {
                out << cells[i];
                if (i + 1 < cells.size()) out << std::string(width[i] - cells[i].size() + 2, ' ');
            }
            out << '\n';
        };
        line(t.header);
        for (const auto& row : t.rows) {
            std::vector<std::string> cells;
            for (const auto& v : row) cells.push_back(cell_text(v));
            line(cells);
        }
        return;
    }
    }
}

// Flags recorded during parsing and applied on top of the config file.
struct Overrides {
    std::vector<std::function<void(RunConfig&)>> fns;
    void apply(RunConfig& c) const {
        for (const auto& f : fns) f(c);
    }
};

template <typename T, typename Setter>
CLI::Option* config_flag(CLI::App* sub, Overrides& o, const std::string& name, Setter setter,
                         const std::string& description) {
    return sub->add_option_function<T>(
        name, [&o, setter](const T& v) { o.fns.push_back([setter, v](RunConfig& c) { setter(c, v); }); },
        description);
}

std::string require(const std::string& value, const std::string& flag) {
    if (value.empty()) throw usage("missing required option " + flag);
    return value;
}

std::unique_ptr<Embedder> make_embedder(const RunConfig& cfg) {
    if (cfg.similarity_backend == "fallback") return std::make_unique<HashedTrigramEmbedder>();
    if (cfg.similarity_backend != "remote") throw usage("similarity.backend must be fallback or remote");
    require(cfg.embedding_endpoint, "similarity.endpoint");
    return std::make_unique<RemoteEmbedder>(RemoteEndpoint{cfg.embedding_endpoint, cfg.embedding_model, cfg.api_key});
}

std::shared_ptr<LlmProvider> make_provider(const RunConfig& cfg) {
    if (cfg.provider == "mock") {
        std::vector<MockFixture> fixtures;
        if (!cfg.mock_fixtures.empty()) fixtures = load_mock_fixtures(cfg.mock_fixtures);
        const std::string vocab = cfg.mock_vocabulary.empty() ? default_mock_vocabulary_path() : cfg.mock_vocabulary;
        return std::make_shared<MockProvider>(std::move(fixtures), load_mock_vocabulary(vocab));
    }
    if (cfg.provider == "remote") {
        require(cfg.llm_endpoint, "llm.endpoint");
        require(cfg.llm_model, "llm.model");
        return std::make_shared<HttpChatProvider>(RemoteEndpoint{cfg.llm_endpoint, cfg.llm_model, cfg.api_key});
    }
    throw usage("--provider must be mock or remote");
}

std::string default_attributes_path() { return std::string(SYNTHPROD_ASSET_DIR) + "/attributes.json"; }

int run_generate(RunConfig cfg, std::ostream& out) {
    require(cfg.catalog, "--catalog");
    require(cfg.out_dir, "--out");
    if (!cfg.seed) throw usage("missing required option --seed");
    if (auto problem = validate_probabilities(cfg.pi)) throw usage("invalid --pi: " + *problem);
    if (cfg.tasks < 1) throw usage("--tasks must be at least 1");
    if (cfg.top_k < 1) throw usage("--top-k must be at least 1");
    if (cfg.max_parallel < 1) throw usage("--max-parallel must be at least 1");

    Catalog catalog = load_catalog(cfg.catalog);
    auto pairs = sample_generation_tasks(catalog, cfg.top_k, cfg.tasks, *cfg.seed);

    PromptLibrary prompts =
        PromptLibrary::load(cfg.prompt_dir.empty() ? PromptLibrary::default_dir() : cfg.prompt_dir, cfg.locale);
    AttributeRegistry attributes =
        AttributeRegistry::load(cfg.attributes.empty() ? default_attributes_path() : cfg.attributes);
    GatewayOptions gw_options;
    gw_options.max_parallel = cfg.max_parallel;
    LlmGateway gateway(make_provider(cfg), gw_options);
    auto embedder = make_embedder(cfg);
    ValueProviderOptions vp_options;
    vp_options.s_max = cfg.s_max;
    vp_options.pool_size = cfg.pool_size;
    vp_options.temperature = cfg.value_temperature;
    ValueProvider values(gateway, *embedder, prompts, vp_options);
    UsedValuesRegistry used;

    GeneratorConfig gen;
    gen.pi = cfg.pi;
    gen.temperature = cfg.temperature;
    gen.parse_retries = cfg.parse_retries;
    gen.max_parallel = cfg.max_parallel;
    GenerationContext ctx{gateway, values, prompts, attributes, used, gen};

    BatchResult result = run_batch(pairs, ctx, *cfg.seed, cfg.fingerprint(), cfg.out_dir);
    const auto& m = result.manifest;
    out << "tasks " << m.task_count << ", succeeded " << m.succeeded << ", failed " << m.failures.size() << '\n';
    for (const auto& [label, n] : m.strategy_counts) out << "  " << label << ' ' << n << '\n';
    out << "wrote " << (fs::path(cfg.out_dir) / "synthetic.jsonl").string() << '\n';
    return 0;
}

Table stats_table(const CatalogStats& s) {
    Table t{{"metric", "value"}, {}};
    t.rows.push_back({"products", s.product_count});
    t.rows.push_back({"categories", s.category_histogram.size()});
    t.rows.push_back({"attribute_keys", s.attribute_histogram.size()});
    t.rows.push_back({"attributes_per_product_mean", s.attrs_per_product.mean});
    t.rows.push_back({"attributes_per_product_std", s.attrs_per_product.std});
    t.rows.push_back({"evidence_spans_per_attribute_mean", s.evidence_spans_per_attr.mean});
    t.rows.push_back({"evidence_spans_per_attribute_std", s.evidence_spans_per_attr.std});
    t.rows.push_back({"paragraphs_per_product_mean", s.paragraphs_per_product.mean});
    t.rows.push_back({"paragraphs_per_product_std", s.paragraphs_per_product.std});
    for (const auto& [field, share] : s.evidence_source_distribution) t.rows.push_back({"evidence_share." + field, share});
    for (const auto& [cat, n] : s.category_histogram) t.rows.push_back({"category." + cat, n});
    for (const auto& [key, n] : s.attribute_histogram) t.rows.push_back({"attribute." + key, n});
    return t;
}

json reference_rates(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw invalid_input(path + ": " + e.what());
    }
}

Table report_table(const AggregateReport& r, const json& reference) {
    Table t{{"metric", "count", "total", "percent", "reference"}, {}};
    auto ref = [&](const std::string& family, const std::string& key = {}) -> json {
        if (!reference.contains(family)) return nullptr;
        const json& v = reference.at(family);
        if (key.empty()) return v.is_number() ? v : json(nullptr);
        return v.contains(key) ? v.at(key) : json(nullptr);
    };
    auto pct = [](const Rate& rate) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.1f", rate.percent());
        return std::string(buf);
    };
    auto add = [&](const std::string& name, const Rate& rate, const json& reference_value) {
        t.rows.push_back({name, rate.count, rate.total, pct(rate), reference_value});
    };
    t.rows.push_back({"n", r.n, r.n, "", nullptr});
    add("attribute_value_correctness", r.attribute_value_correctness, ref("attribute_value_correctness"));
    add("readability", r.readability, ref("readability"));
    add("brand_modification_success", r.brand_modification_success, ref("brand_modification_success"));
    add("negative_example_coherence", r.negative_example_coherence, ref("negative_example_coherence"));
    for (const auto& [k, rate] : r.consistency_by_input_label)
        add("consistency." + k, rate, ref("consistency_by_input_label", k));
    for (const auto& [k, rate] : r.additional_changes) add("additional_changes." + k, rate, ref("additional_changes", k));
    for (const auto& [k, rate] : r.input_distribution) add("input_distribution." + k, rate, ref("input_distribution", k));
    for (const auto& [q, n] : r.no_majority) t.rows.push_back({"no_majority." + q, n, r.n, "", nullptr});
    return t;
}

} // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Synthetic product data pipeline", "synthprod"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string config_path;
    app.add_option("--config", config_path, "flat JSON config file; flags win over its keys");

    Overrides o;
    std::string format = "table";

    // ingest
    auto* ingest = app.add_subcommand("ingest", "consolidate raw paragraph records into a catalog");
    std::string ingest_in, ingest_out;
    std::optional<std::size_t> limit;
    ingest->add_option("--in", ingest_in, "raw line-delimited records")->required();
    ingest->add_option("--out", ingest_out, "consolidated catalog path")->required();
    ingest->add_option_function<std::size_t>("--limit", [&](const std::size_t& v) { limit = v; }, "stop after N products");

    // stats
    auto* stats = app.add_subcommand("stats", "catalog statistics");
    config_flag<std::string>(stats, o, "--catalog", [](RunConfig& c, const std::string& v) { c.catalog = v; }, "catalog path");
    stats->add_option("--format", format, "table|csv|jsonlines");

    // generate
    auto* generate = app.add_subcommand("generate", "generate synthetic products");
    config_flag<std::string>(generate, o, "--catalog", [](RunConfig& c, const std::string& v) { c.catalog = v; }, "catalog path");
    config_flag<int>(generate, o, "--tasks", [](RunConfig& c, int v) { c.tasks = v; }, "number of products to sample");
    config_flag<std::uint64_t>(generate, o, "--seed", [](RunConfig& c, std::uint64_t v) { c.seed = v; }, "random seed");
    config_flag<std::string>(generate, o, "--pi", [](RunConfig& c, const std::string& v) { c.pi = parse_probabilities(v); },
                             "strategy probabilities correct,incorrect,unknown");
    config_flag<std::string>(generate, o, "--provider", [](RunConfig& c, const std::string& v) { c.provider = v; },
                             "mock|remote");
    config_flag<std::string>(generate, o, "--out", [](RunConfig& c, const std::string& v) { c.out_dir = v; },
                             "output directory");
    config_flag<int>(generate, o, "--top-k", [](RunConfig& c, int v) { c.top_k = v; }, "sample from the K largest categories");
    config_flag<int>(generate, o, "--max-parallel", [](RunConfig& c, int v) { c.max_parallel = v; },
                     "concurrent provider calls");
    config_flag<std::string>(generate, o, "--locale", [](RunConfig& c, const std::string& v) { c.locale = v; },
                             "store locale (prompt constraints)");
    config_flag<std::string>(generate, o, "--prompts", [](RunConfig& c, const std::string& v) { c.prompt_dir = v; },
                             "prompt template directory");
    config_flag<std::string>(generate, o, "--attributes", [](RunConfig& c, const std::string& v) { c.attributes = v; },
                             "attribute registry JSON");
    config_flag<std::string>(generate, o, "--mock-fixtures", [](RunConfig& c, const std::string& v) { c.mock_fixtures = v; },
                             "pinned mock responses (JSONL)");

    // metrics
    auto* metrics = app.add_subcommand("metrics", "per-field TTR, cosine similarity and KL divergence");
    std::string metrics_original, metrics_synthetic;
    metrics->add_option("--original", metrics_original, "original catalog")->required();
    metrics->add_option("--synthetic", metrics_synthetic, "synthetic.jsonl from generate")->required();
    metrics->add_option("--format", format, "table|csv|jsonlines");

    // cost
    auto* cost = app.add_subcommand("cost", "estimate generation cost");
    long long cost_n = 2000;
    cost->add_option("--n", cost_n, "number of products");
    config_flag<double>(cost, o, "--price-in", [](RunConfig& c, double v) { c.pricing.price_per_m_input = v; },
                        "USD per million input tokens");
    config_flag<double>(cost, o, "--price-out", [](RunConfig& c, double v) { c.pricing.price_per_m_output = v; },
                        "USD per million output tokens");
    config_flag<double>(cost, o, "--vp-in", [](RunConfig& c, double v) { c.pricing.vp_input_tokens = v; },
                        "value provider input tokens per product");
    config_flag<double>(cost, o, "--vp-out", [](RunConfig& c, double v) { c.pricing.vp_output_tokens = v; },
                        "value provider output tokens per product");
    config_flag<double>(cost, o, "--gen-in", [](RunConfig& c, double v) { c.pricing.gen_input_tokens = v; },
                        "generation input tokens per product");
    config_flag<double>(cost, o, "--gen-out", [](RunConfig& c, double v) { c.pricing.gen_output_tokens = v; },
                        "generation output tokens per product");
    cost->add_option("--format", format, "table|csv|jsonlines");

    // export-annotation
    auto* export_cmd = app.add_subcommand("export-annotation", "write annotation tasks for a run");
    std::string export_synthetic, export_out, protocol_path = AnnotationProtocol::default_path();
    config_flag<std::string>(export_cmd, o, "--catalog", [](RunConfig& c, const std::string& v) { c.catalog = v; },
                             "original catalog");
    export_cmd->add_option("--synthetic", export_synthetic, "synthetic.jsonl from generate")->required();
    export_cmd->add_option("--out", export_out, "task file to write")->required();
    export_cmd->add_option("--protocol", protocol_path, "annotation protocol JSON");

    // serve
    auto* serve = app.add_subcommand("serve", "serve annotation tasks over HTTP");
    std::string serve_tasks, serve_store, serve_host = "127.0.0.1", serve_static;
    int serve_port = 8080;
    serve->add_option("--tasks", serve_tasks, "task file from export-annotation")->required();
    serve->add_option("--store", serve_store, "label store directory")->required();
    serve->add_option("--port", serve_port, "listen port");
    serve->add_option("--host", serve_host, "listen address");
    serve->add_option("--static", serve_static, "directory with the annotation UI bundle");
    serve->add_option("--protocol", protocol_path, "annotation protocol JSON");

    // report
    auto* report = app.add_subcommand("report", "aggregate annotation labels");
    std::string report_store, reference_path = std::string(SYNTHPROD_ASSET_DIR) + "/annotation/reference_rates.json";
    report->add_option("--store", report_store, "label store directory")->required();
    report->add_option("--reference", reference_path, "reference rates shown for comparison");
    report->add_option("--format", format, "table|csv|jsonlines");

    // prepare-extraction
    auto* prepare = app.add_subcommand("prepare-extraction", "build the six extraction dataset configs");
    std::string prep_original, prep_synthetic, prep_out;
    std::size_t token_budget = 512;
    prepare->add_option("--original", prep_original, "original catalog")->required();
    prepare->add_option("--synthetic", prep_synthetic, "synthetic.jsonl from generate")->required();
    prepare->add_option("--out", prep_out, "output directory")->required();
    config_flag<std::uint64_t>(prepare, o, "--seed", [](RunConfig& c, std::uint64_t v) { c.seed = v; }, "random seed");
    prepare->add_option("--token-budget", token_budget, "maximum whitespace tokens per input");

    // score
    auto* score = app.add_subcommand("score", "score extraction predictions");
    std::string score_pred, score_gold;
    bool score_normalized = false, score_lines = false;
    score->add_option("--pred", score_pred, "predictions, one per line")->required();
    score->add_option("--gold", score_gold, "gold values or test.tsv")->required();
    score->add_flag("--normalized", score_normalized, "headline accuracy uses normalized matching");
    score->add_flag("--lines", score_lines, "include per-line outcomes (jsonlines format)");
    score->add_option("--format", format, "table|csv|jsonlines");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e, out, err);
        std::string message = e.what();
        if (app.get_subcommands().empty()) {
            err << app.help();
            for (int i = 1; i < argc; ++i) {
                if (std::string_view(argv[i]) == "--config") {
                    ++i;
                    continue;
                }
                if (argv[i][0] != '-') {
                    message = "unknown subcommand '" + std::string(argv[i]) + "'";
                    break;
                }
            }
        }
        err << json{{"error", "usage"}, {"message", message}}.dump() << '\n';
        return exit_code(ErrorKind::usage);
    }

    try {
        RunConfig cfg = config_path.empty() ? RunConfig{} : load_config_file(config_path);
        o.apply(cfg);
        if (const char* key = std::getenv("LLM_API_KEY")) cfg.api_key = key;
        const Format fmt = parse_format(format);

        if (ingest->parsed()) {
            IngestResult r = ingest_catalog_file(ingest_in, limit);
            write_catalog_file(ingest_out, r.catalog);
            for (const auto& s : r.skipped)
                err << json{{"warning", "skipped"}, {"line", s.line}, {"reason", s.reason}}.dump() << '\n';
            out << "ingested " << r.catalog.size() << " products, skipped " << r.skipped.size() << " records\n";
        } else if (stats->parsed()) {
            print(out, stats_table(compute_catalog_stats(load_catalog(require(cfg.catalog, "--catalog")))), fmt);
        } else if (generate->parsed()) {
            return run_generate(cfg, out);
        } else if (metrics->parsed()) {
            Catalog originals = load_catalog(metrics_original);
            auto synthetic = load_synthetic_products(metrics_synthetic);
            auto embedder = make_embedder(cfg);
            Table t{{"field", "pairs", "ttr_original", "ttr_synthetic", "cosine_similarity", "kl_divergence"}, {}};
            for (const auto& m : compute_field_metrics(originals, synthetic, *embedder))
                t.rows.push_back({m.field, m.pairs, m.ttr_original, m.ttr_synthetic, m.cosine_similarity, m.kl_divergence});
            print(out, t, fmt);
        } else if (cost->parsed()) {
            CostEstimate e = estimate_cost(cfg.pricing, cost_n);
            Table t{{"products", "per_product_usd", "total_usd"}, {{cost_n, e.per_product, e.total}}};
            print(out, t, fmt);
        } else if (export_cmd->parsed()) {
            Catalog originals = load_catalog(require(cfg.catalog, "--catalog"));
            auto tasks = export_tasks(load_synthetic_products(export_synthetic), originals,
                                      AnnotationProtocol::load(protocol_path));
            write_tasks(export_out, tasks);
            out << "wrote " << tasks.size() << " tasks to " << export_out << '\n';
        } else if (serve->parsed()) {
            AnnotationService service(load_tasks(serve_tasks), serve_store);
            AnnotationHttpServer server(service, AnnotationProtocol::load(protocol_path), serve_static);
            out << "serving " << service.task_count() << " tasks on http://" << serve_host << ':' << serve_port << std::endl;
            if (!server.listen(serve_host, serve_port))
                throw io_error("cannot listen on " + serve_host + ":" + std::to_string(serve_port));
        } else if (report->parsed()) {
            fs::path task_file = fs::path(report_store) / "tasks.jsonl";
            if (!fs::exists(task_file)) throw io_error("no tasks.jsonl in store " + report_store);
            AnnotationService service(load_tasks(task_file.string()), report_store);
            AggregateReport r = service.build_report();
            if (fmt == Format::jsonlines)
                out << r.to_json().dump() << '\n';
            else
                print(out, report_table(r, reference_path.empty() ? json::object() : reference_rates(reference_path)), fmt);
        } else if (prepare->parsed()) {
            if (!cfg.seed) throw usage("missing required option --seed");
            Catalog originals = load_catalog(prep_original);
            auto pools = extraction_pools(originals, load_synthetic_products(prep_synthetic));
            auto splits = build_configs(pools.original, pools.synthetic, pools.test, *cfg.seed);
            ExampleTemplate tmpl;
            tmpl.token_budget = token_budget;
            EmitSummary summary = emit_examples(splits, prep_out, tmpl);
            Table t{{"config", "train", "val", "test", "test_hash"}, {}};
            for (const auto& s : splits)
                t.rows.push_back({s.config.name, summary.counts[s.config.name]["train"], summary.counts[s.config.name]["val"],
                                  summary.counts[s.config.name]["test"], summary.test_hash[s.config.name]});
            print(out, t, Format::table);
        } else if (score->parsed()) {
            auto embedder = make_embedder(cfg);
            MismatchContext ctx;
            ctx.embedder = embedder.get();
            ScoreReport r = score_predictions(load_predictions(score_pred), load_gold(score_gold), ctx);
            if (fmt == Format::jsonlines) {
                json j = r.to_json(score_lines);
                j["accuracy"] = score_normalized ? r.normalized_accuracy() : r.strict_accuracy();
                out << j.dump() << '\n';
            } else {
                Table t{{"metric", "value"}, {}};
                t.rows.push_back({"accuracy", score_normalized ? r.normalized_accuracy() : r.strict_accuracy()});
                t.rows.push_back({"total", r.total});
                t.rows.push_back({"strict_accuracy", r.strict_accuracy()});
                t.rows.push_back({"normalized_accuracy", r.normalized_accuracy()});
                for (const auto& [cat, n] : r.mismatch_counts) t.rows.push_back({"mismatch." + cat, n});
                print(out, t, fmt);
            }
        }
        return 0;
    } catch (const Error& e) {
        err << json{{"error", kind_name(e.kind())}, {"message", e.what()}}.dump() << '\n';
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        err << json{{"error", "internal"}, {"message", e.what()}}.dump() << '\n';
        return exit_code(ErrorKind::internal);
    }
}

} // namespace synthprod::cli
