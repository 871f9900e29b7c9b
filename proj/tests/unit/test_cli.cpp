#include <filesystem>
#include <sstream>

#include <doctest.h>

#include "fixtures.hpp"
#include "synthprod/cli.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args) {
    args.insert(args.begin(), "synthprod");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    int code = synthprod::cli::dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

json last_error(const Run& r) {
    std::istringstream in(r.err);
    std::string line, last;
    while (std::getline(in, line))
        if (!line.empty()) last = line;
    return json::parse(last);
}

std::string make_catalog_file(const std::string& dir) {
    auto raw = dir + "/raw.jsonl";
    fixtures::write_file(raw, fixtures::records_to_jsonl(fixtures::catalog_records({})));
    auto catalog = dir + "/catalog.jsonl";
    auto r = run({"ingest", "--in", raw, "--out", catalog});
    REQUIRE(r.code == 0);
    return catalog;
}

} // namespace

TEST_SUITE("cli") {

TEST_CASE("cost subcommand prints the default estimate") {
    auto r = run({"cost", "--format", "jsonlines"});
    REQUIRE(r.code == 0);
    auto j = json::parse(r.out);
    CHECK(j["products"] == 2000);
    CHECK(j["per_product_usd"].get<double>() == doctest::Approx(0.0021576));
    CHECK(j["total_usd"].get<double>() == doctest::Approx(4.3152));

    auto table = run({"cost", "--n", "1"});
    CHECK(table.code == 0);
    CHECK(table.out.find("per_product_usd") != std::string::npos);
    CHECK(table.out.find("0.0021576") != std::string::npos);

    auto csv = run({"cost", "--n", "10", "--price-out", "0", "--format", "csv"});
    REQUIRE(csv.code == 0);
    CHECK(csv.out.rfind("products,per_product_usd,total_usd\n", 0) == 0);
    CHECK(csv.out.find("0.0015536") != std::string::npos);
}

TEST_CASE("usage errors exit with code 2 and a json message") {
    auto dir = fixtures::temp_dir("cli_usage");
    auto r = run({"generate", "--seed", "1", "--out", dir});
    CHECK(r.code == 2);
    CHECK(last_error(r)["error"] == "usage");
    CHECK(last_error(r)["message"].get<std::string>().find("--catalog") != std::string::npos);

    auto unknown = run({"frobnicate"});
    CHECK(unknown.code == 2);
    CHECK(last_error(unknown)["message"].get<std::string>().find("frobnicate") != std::string::npos);

    CHECK(run({}).code == 2);
    CHECK(run({"cost", "--format", "xml"}).code == 2);
    CHECK(run({"generate", "--catalog", "x", "--out", dir, "--seed", "1", "--pi", "0.5,0.5,0.5"}).code == 2);
}

TEST_CASE("help exits with code 0") {
    auto r = run({"--help"});
    CHECK(r.code == 0);
    CHECK(r.out.find("generate") != std::string::npos);
    CHECK(run({"cost", "--help"}).code == 0);
}

TEST_CASE("missing files are io errors") {
    auto r = run({"stats", "--catalog", "/nonexistent/catalog.jsonl"});
    CHECK(r.code == 3);
    CHECK(last_error(r)["error"] == "io");
}

TEST_CASE("config file values merge under flags") {
    auto dir = fixtures::temp_dir("cli_config");
    auto cfg = dir + "/config.json";
    fixtures::write_file(cfg, json{{"pricing.price_out", 0.0}, {"pricing.price_in", 1.6}}.dump());
    auto r = run({"--config", cfg, "cost", "--n", "1", "--format", "jsonlines"});
    REQUIRE(r.code == 0);
    CHECK(json::parse(r.out)["per_product_usd"].get<double>() == doctest::Approx(1942 * 1.6 / 1e6));

    auto flag_wins = run({"--config", cfg, "cost", "--n", "1", "--price-in", "0.8", "--format", "jsonlines"});
    REQUIRE(flag_wins.code == 0);
    CHECK(json::parse(flag_wins.out)["per_product_usd"].get<double>() == doctest::Approx(1942 * 0.8 / 1e6));

    fixtures::write_file(cfg, json{{"pricing.price_inn", 1.0}}.dump());
    auto bad = run({"--config", cfg, "cost"});
    CHECK(bad.code == 2);
    CHECK(last_error(bad)["message"].get<std::string>().find("pricing.price_inn") != std::string::npos);

    fixtures::write_file(cfg, json{{"seed", "seven"}}.dump());
    CHECK(run({"--config", cfg, "cost"}).code == 2);
}

TEST_CASE("ingest and stats") {
    auto dir = fixtures::temp_dir("cli_stats");
    auto catalog = make_catalog_file(dir);
    auto r = run({"stats", "--catalog", catalog, "--format", "csv"});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("products,50") != std::string::npos);
}

TEST_CASE("two generate runs with the same seed produce identical files") {
    auto dir = fixtures::temp_dir("cli_generate");
    auto catalog = make_catalog_file(dir);
    for (const char* name : {"a", "b"}) {
        auto r = run({"generate", "--catalog", catalog, "--tasks", "20", "--seed", "11", "--top-k", "5", "--out",
                      dir + "/" + name});
        REQUIRE(r.code == 0);
        CHECK(r.out.find("tasks 20") != std::string::npos);
    }
    for (const char* file : {"synthetic.jsonl", "manifest.json"})
        CHECK(fixtures::read_file(dir + "/a/" + file) == fixtures::read_file(dir + "/b/" + file));

    auto m = json::parse(fixtures::read_file(dir + "/a/manifest.json"));
    CHECK(m["seed"] == 11);
    CHECK(m["task_count"] == 20);

    auto other = run({"generate", "--catalog", catalog, "--tasks", "20", "--seed", "12", "--top-k", "5", "--out",
                      dir + "/c"});
    REQUIRE(other.code == 0);
    CHECK(fixtures::read_file(dir + "/a/synthetic.jsonl") != fixtures::read_file(dir + "/c/synthetic.jsonl"));
}

TEST_CASE("metrics, export and extraction subcommands run on a generated set") {
    auto dir = fixtures::temp_dir("cli_pipeline");
    auto catalog = make_catalog_file(dir);
    REQUIRE(run({"generate", "--catalog", catalog, "--tasks", "30", "--seed", "3", "--top-k", "5", "--out", dir + "/run"})
                .code == 0);
    auto synthetic = dir + "/run/synthetic.jsonl";

    auto metrics = run({"metrics", "--original", catalog, "--synthetic", synthetic, "--format", "jsonlines"});
    REQUIRE(metrics.code == 0);
    std::istringstream lines(metrics.out);
    std::string line;
    std::vector<std::string> fields;
    while (std::getline(lines, line)) {
        auto j = json::parse(line);
        fields.push_back(j["field"]);
        CHECK(j["kl_divergence"].get<double>() >= 0.0);
    }
    CHECK(fields == std::vector<std::string>{"title", "description", "features"});

    auto exported = run({"export-annotation", "--catalog", catalog, "--synthetic", synthetic, "--out", dir + "/tasks.jsonl"});
    REQUIRE(exported.code == 0);
    CHECK(exported.out.find("wrote") != std::string::npos);

    auto prepared = run({"prepare-extraction", "--original", catalog, "--synthetic", synthetic, "--out", dir + "/ex",
                         "--seed", "5"});
    REQUIRE(prepared.code == 0);
    CHECK(prepared.out.find("zero_shot") != std::string::npos);
    CHECK(fs::exists(dir + "/ex/zero_shot/test.tsv"));
}

TEST_CASE("score subcommand") {
    auto dir = fixtures::temp_dir("cli_score");
    fixtures::write_file(dir + "/pred.txt", "Red\nwall stickers\nblue\n");
    fixtures::write_file(dir + "/gold.txt", "red\nWall Sticker\ngreen\n");
    auto r = run({"score", "--pred", dir + "/pred.txt", "--gold", dir + "/gold.txt", "--format", "jsonlines"});
    REQUIRE(r.code == 0);
    auto j = json::parse(r.out);
    CHECK(j["accuracy"].get<double>() == doctest::Approx(1.0 / 3.0));
    auto n = run({"score", "--pred", dir + "/pred.txt", "--gold", dir + "/gold.txt", "--normalized", "--format",
                  "jsonlines"});
    REQUIRE(n.code == 0);
    CHECK(json::parse(n.out)["accuracy"].get<double>() == doctest::Approx(2.0 / 3.0));

    fixtures::write_file(dir + "/short.txt", "red\n");
    auto mismatch = run({"score", "--pred", dir + "/short.txt", "--gold", dir + "/gold.txt"});
    CHECK(mismatch.code == 4);
}

TEST_CASE("exit codes by error kind") {
    using synthprod::ErrorKind;
    CHECK(synthprod::cli::exit_code(ErrorKind::usage) == 2);
    CHECK(synthprod::cli::exit_code(ErrorKind::io) == 3);
    CHECK(synthprod::cli::exit_code(ErrorKind::invalid) == 4);
    CHECK(synthprod::cli::exit_code(ErrorKind::provider) == 5);
    CHECK(synthprod::cli::exit_code(ErrorKind::internal) == 1);
}

} // TEST_SUITE
