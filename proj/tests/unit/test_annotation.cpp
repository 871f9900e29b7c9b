#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <thread>

#include <doctest.h>
#include <httplib.h>

#include "fixtures.hpp"
#include "synthprod/annotation.hpp"
#include "synthprod/annotation_server.hpp"

using namespace synthprod;
using nlohmann::json;

namespace {

const AnnotationProtocol& protocol() {
    static const AnnotationProtocol p = AnnotationProtocol::load(AnnotationProtocol::default_path());
    return p;
}

std::vector<AnnotationTask> small_tasks(std::size_t n) {
    std::vector<AnnotationTask> out;
    for (std::size_t i = 0; i < n; ++i) {
        AnnotationTask t;
        t.task_id = t.synthetic_id = "T" + std::to_string(i);
        t.strategy = all_strategies[i % 3];
        t.attribute_key = "Color";
        t.base_fields = {{"title", "Red Shoe"}};
        t.synthetic_fields = {{"title", "Blue Shoe"}};
        t.questions = protocol().questions;
        out.push_back(t);
    }
    return out;
}

std::map<std::string, std::string> all_valid() {
    return {{question::attribute_value_quality, "valid"},   {question::negative_example_coherence, "valid"},
            {question::cross_field_consistency, "valid"},   {question::brand_modification, "valid"},
            {question::content_preservation, "none"},       {question::professional_writing, "valid"}};
}

AnnotationLabel label(const std::string& task, const std::string& who,
                      std::map<std::string, std::string> answers = all_valid()) {
    return {task, who, std::move(answers), 0};
}

struct Clock {
    std::shared_ptr<std::int64_t> now = std::make_shared<std::int64_t>(1000);
    AnnotationService::Clock fn() const {
        auto n = now;
        return [n] { return *n; };
    }
};

struct ServerRun {
    AnnotationHttpServer server;
    int port = -1;
    std::thread thread;

    ServerRun(AnnotationService& s) : server(s, protocol()) {
        port = server.bind_any_port("127.0.0.1");
        thread = std::thread([this] { server.serve(); });
        server.wait_until_ready();
    }
    ~ServerRun() {
        server.stop();
        thread.join();
    }
};

} // namespace

TEST_SUITE("annotation") {

TEST_CASE("protocol asset defines six questions") {
    const auto& p = protocol();
    CHECK(p.version == "1");
    CHECK_FALSE(p.preamble.empty());
    REQUIRE(p.questions.size() == 6);
    CHECK(p.find(question::negative_example_coherence)->options ==
          std::vector<std::string>{"valid", "invalid", "not_applicable"});
    CHECK(p.find(question::content_preservation)->options ==
          std::vector<std::string>{"none", "acceptable", "major"});
    CHECK(p.find("nope") == nullptr);
}

TEST_CASE("protocol with the wrong question count is rejected") {
    auto dir = fixtures::temp_dir("annotation_protocol");
    fixtures::write_file(dir + "/p.json",
                         R"({"version": "1", "preamble": "x", "questions": [{"id": "a", "text": "t", "options": ["y"]}]})");
    CHECK_THROWS_AS(AnnotationProtocol::load(dir + "/p.json"), Error);
}

TEST_CASE("majority vote over every ordering") {
    std::vector<std::string> options{"valid", "invalid", "not_applicable"};
    for (const auto& a : options)
        for (const auto& b : options)
            for (const auto& c : options) {
                std::optional<std::string> expected;
                if (a == b || a == c) expected = a;
                else if (b == c) expected = b;
                CHECK(majority_vote({a, b, c}) == expected);
            }
    CHECK(majority_vote({}) == std::nullopt);
}

TEST_CASE("export produces one task per synthetic product") {
    auto catalog = fixtures::make_catalog({});
    fixtures::MockPipeline m;
    auto pairs = sample_generation_tasks(catalog, 5, 30, 2);
    auto run = run_batch(pairs, m.ctx, 2, json::object()).products;
    auto tasks = export_tasks(run, catalog, protocol());
    REQUIRE(tasks.size() == run.size());
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        const auto& t = tasks[i];
        CHECK(t.task_id == run[i].id);
        CHECK(t.questions.size() == 6);
        CHECK(t.base_fields.at("title") == catalog.find(run[i].base_id)->field_text("title"));
        CHECK(t.synthetic_fields == run[i].text_fields);
        if (t.strategy == StrategyLabel::incorrect) {
            REQUIRE(t.wrong_value);
            CHECK(t.header == "Type: incorrect | Attribute: " + t.attribute_key + " | Correct value: " + t.value +
                                  " | Wrong value: " + *t.wrong_value);
        } else {
            CHECK_FALSE(t.wrong_value);
        }
    }
    CHECK(export_tasks({}, catalog, protocol()).empty());
}

TEST_CASE("export rejects records that do not line up") {
    auto catalog = fixtures::make_catalog({});
    fixtures::MockPipeline m;
    auto run = run_batch(sample_generation_tasks(catalog, 5, 3, 2), m.ctx, 2, json::object()).products;

    auto orphan = run;
    orphan[0].base_id = "missing";
    auto dup = run;
    dup[1].id = dup[0].id;
    auto bad_diff = run;
    bad_diff[2].diff.push_back({"title", DiffKind::added, 0, 3, "zzz"});

    for (auto* r : {&orphan, &dup, &bad_diff}) {
        try {
            export_tasks(*r, catalog, protocol());
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::invalid);
        }
    }
}

TEST_CASE("tasks and labels round trip through json") {
    auto tasks = small_tasks(3);
    tasks[1].wrong_value = "Olive";
    tasks[1].diff = {{"title", DiffKind::added, 0, 4, "Blue"}};
    auto dir = fixtures::temp_dir("annotation_tasks");
    write_tasks(dir + "/tasks.jsonl", tasks);
    auto back = load_tasks(dir + "/tasks.jsonl");
    REQUIRE(back.size() == 3);
    CHECK(to_json(back[1]) == to_json(tasks[1]));
    CHECK(back[1].wrong_value == "Olive");

    auto l = label("T0", "ann", all_valid());
    l.timestamp_ms = 42;
    auto lb = annotation_label_from_json(to_json(l));
    CHECK(lb.answers == l.answers);
    CHECK(lb.timestamp_ms == 42);
    CHECK_THROWS_AS(annotation_label_from_json(json{{"task_id", "T0"}}), Error);
}

TEST_CASE("next_task balances load and keeps held claims") {
    AnnotationService s(small_tasks(2));
    CHECK(s.next_task("a")->task_id == "T0");
    CHECK(s.next_task("b")->task_id == "T1");
    CHECK(s.next_task("c")->task_id == "T0");
    CHECK(s.next_task("a")->task_id == "T0");
    REQUIRE(s.submit_label(label("T0", "a")).ok());
    CHECK(s.next_task("a")->task_id == "T1");
    REQUIRE(s.submit_label(label("T1", "a")).ok());
    CHECK_FALSE(s.next_task("a"));
    CHECK(s.labeled_by("a") == 2);
    auto who = s.annotators();
    CHECK(std::find(who.begin(), who.end(), "c") != who.end());
}

TEST_CASE("full tasks are not offered and expired claims are released") {
    Clock clock;
    AnnotationServiceOptions o;
    o.labels_per_task = 1;
    o.claim_ttl_ms = 100;
    AnnotationService s(small_tasks(2), {}, o, clock.fn());
    CHECK(s.next_task("a")->task_id == "T0");
    CHECK(s.next_task("b")->task_id == "T1");
    CHECK_FALSE(s.next_task("c"));
    *clock.now += 200;
    CHECK(s.next_task("c")->task_id == "T0");
    REQUIRE(s.submit_label(label("T0", "c")).ok());
    CHECK(s.next_task("d")->task_id == "T1");
    REQUIRE(s.submit_label(label("T1", "d")).ok());
    CHECK_FALSE(s.next_task("e"));
}

TEST_CASE("submit error codes") {
    AnnotationService s(small_tasks(1));
    CHECK(s.submit_label(label("T9", "a")).code == SubmitCode::unknown_task);
    CHECK(s.submit_label(label("T0", "")).code == SubmitCode::malformed);

    auto missing = all_valid();
    missing.erase(question::brand_modification);
    CHECK(s.submit_label(label("T0", "a", missing)).code == SubmitCode::missing_answer);

    auto wrong = all_valid();
    wrong[question::content_preservation] = "valid";
    CHECK(s.submit_label(label("T0", "a", wrong)).code == SubmitCode::invalid_option);

    auto extra = all_valid();
    extra["mood"] = "valid";
    CHECK(s.submit_label(label("T0", "a", extra)).code == SubmitCode::invalid_option);

    CHECK(s.submit_label(label("T0", "a")).ok());
    auto dup = s.submit_label(label("T0", "a"));
    CHECK(dup.code == SubmitCode::duplicate);
    CHECK(dup.message.find("already labeled") != std::string::npos);
    CHECK(s.submit_label(label("T0", "b")).ok());
    CHECK(s.submit_label(label("T0", "c")).ok());
    CHECK(s.submit_label(label("T0", "d")).code == SubmitCode::task_full);
    CHECK(s.labels_for("T0") == 3);
    CHECK(to_string(SubmitCode::task_full) == "task_full");
}

TEST_CASE("report over the fixture reproduces the reference rates") {
    auto f = fixtures::annotation_report_fixture(protocol());
    auto r = build_report(f.tasks, f.labels);
    CHECK(r.n == 1000);
    CHECK(r.attribute_value_correctness.count == 965);
    CHECK(r.attribute_value_correctness.percent() == doctest::Approx(96.5));
    CHECK(r.readability.percent() == doctest::Approx(99.6));
    CHECK(r.brand_modification_success.percent() == doctest::Approx(95.8));
    CHECK(r.input_distribution.at("correct").percent() == doctest::Approx(52.0));
    CHECK(r.input_distribution.at("incorrect").percent() == doctest::Approx(24.1));
    CHECK(r.input_distribution.at("unknown").percent() == doctest::Approx(23.9));
    CHECK(r.consistency_by_input_label.at("correct").count == 490);
    CHECK(r.consistency_by_input_label.at("correct").total == 520);
    CHECK(r.consistency_by_input_label.at("correct").percent() == doctest::Approx(94.2).epsilon(0.001));
    CHECK(r.consistency_by_input_label.at("incorrect").percent() == doctest::Approx(93.0).epsilon(0.001));
    CHECK(r.consistency_by_input_label.at("unknown").percent() == doctest::Approx(88.3).epsilon(0.001));
    CHECK(r.additional_changes.at("none").percent() == doctest::Approx(88.8));
    CHECK(r.additional_changes.at("acceptable").percent() == doctest::Approx(7.0));
    CHECK(r.additional_changes.at("major").percent() == doctest::Approx(4.2));
    CHECK(r.negative_example_coherence.total == 230);
    CHECK(r.negative_example_coherence.count == 230);
    CHECK(r.no_majority.empty());
}

TEST_CASE("report skips incomplete tasks and counts ties") {
    auto tasks = small_tasks(2);
    std::vector<AnnotationLabel> labels;
    for (const char* who : {"a", "b"}) labels.push_back(label("T1", who));
    auto tie = [](const std::string& v) {
        auto a = all_valid();
        a[question::content_preservation] = v;
        return a;
    };
    labels.push_back(label("T0", "a", tie("none")));
    labels.push_back(label("T0", "b", tie("acceptable")));
    labels.push_back(label("T0", "c", tie("major")));
    auto r = build_report(tasks, labels);
    CHECK(r.n == 1);
    CHECK(r.no_majority.at(question::content_preservation) == 1);
    CHECK(r.additional_changes.at("none").total == 0);
    CHECK(r.attribute_value_correctness.percent() == doctest::Approx(100.0));
    CHECK_THROWS_AS(build_report(tasks, {}), Error);
}

TEST_CASE("labels survive a restart") {
    auto dir = fixtures::temp_dir("annotation_store");
    AnnotationServiceOptions o;
    o.snapshot_every = 2;
    {
        AnnotationService s(small_tasks(3), dir, o);
        CHECK(s.next_task("a")->task_id == "T0");
        REQUIRE(s.submit_label(label("T0", "a")).ok());
        REQUIRE(s.submit_label(label("T0", "b")).ok());
        REQUIRE(s.submit_label(label("T1", "a")).ok());
        CHECK(s.next_task("c")->task_id == "T2");
    }
    CHECK(std::filesystem::exists(dir + "/snapshot.json"));
    CHECK(std::filesystem::exists(dir + "/tasks.jsonl"));
    {
        std::ofstream log(dir + "/labels.log", std::ios::app);
        log << "{\"type\": \"label\", \"label\": {\"task_id\"";
    }
    AnnotationService again(load_tasks(dir + "/tasks.jsonl"), dir, o);
    CHECK(again.labels_for("T0") == 2);
    CHECK(again.labels_for("T1") == 1);
    CHECK(again.labels().size() == 3);
    CHECK(again.labeled_by("a") == 2);
    CHECK(again.next_task("c")->task_id == "T2");
    CHECK(again.submit_label(label("T0", "a")).code == SubmitCode::duplicate);
}

TEST_CASE("concurrent submissions never exceed three labels") {
    AnnotationService s(small_tasks(1));
    std::atomic<int> ok{0}, full{0};
    {
        std::vector<std::jthread> threads;
        for (int i = 0; i < 16; ++i)
            threads.emplace_back([&, i] {
                auto r = s.submit_label(label("T0", "ann" + std::to_string(i)));
                if (r.ok()) ++ok;
                else if (r.code == SubmitCode::task_full) ++full;
            });
    }
    CHECK(ok == 3);
    CHECK(full == 13);
    CHECK(s.labels_for("T0") == 3);
}

TEST_CASE("concurrent annotators drain the queue") {
    auto dir = fixtures::temp_dir("annotation_concurrent");
    AnnotationServiceOptions o;
    o.snapshot_every = 7;
    AnnotationService s(small_tasks(20), dir, o);
    {
        std::vector<std::jthread> threads;
        for (int i = 0; i < 8; ++i)
            threads.emplace_back([&, i] {
                std::string who = "ann" + std::to_string(i);
                while (auto t = s.next_task(who)) s.submit_label(label(t->task_id, who));
            });
    }
    for (int i = 0; i < 20; ++i) CHECK(s.labels_for("T" + std::to_string(i)) == 3);
    AnnotationService again(small_tasks(20), dir, o);
    CHECK(again.labels().size() == 60);
}

TEST_CASE("http api round trip") {
    AnnotationService s(small_tasks(2));
    ServerRun run(s);
    REQUIRE(run.port > 0);
    httplib::Client cli("127.0.0.1", run.port);

    auto next = cli.Get("/api/tasks/next?annotator=a");
    REQUIRE(next);
    CHECK(next->status == 200);
    auto body = json::parse(next->body);
    CHECK(body["done"] == false);
    CHECK(body["total"] == 2);
    std::string id = body["task"]["task_id"];
    CHECK(id == "T0");
    CHECK(body["task"]["questions"].size() == 6);

    CHECK(cli.Get("/api/tasks/next")->status == 400);
    CHECK(cli.Get("/api/tasks/T1")->status == 200);
    CHECK(cli.Get("/api/tasks/T7")->status == 404);
    CHECK(json::parse(cli.Get("/api/protocol")->body)["questions"].size() == 6);
    CHECK(cli.Get("/api/report")->status == 409);

    auto post = [&](const json& j) { return cli.Post("/api/labels", j.dump(), "application/json"); };
    auto r = post(to_json(label(id, "a")));
    REQUIRE(r);
    CHECK(r->status == 200);
    CHECK(json::parse(r->body)["status"] == "ok");
    r = post(to_json(label(id, "a")));
    CHECK(r->status == 409);
    CHECK(json::parse(r->body)["error"] == "duplicate");
    CHECK(post(to_json(label("T9", "a")))->status == 404);
    auto bad = all_valid();
    bad[question::brand_modification] = "maybe";
    CHECK(post(to_json(label(id, "b", bad)))->status == 400);
    CHECK(cli.Post("/api/labels", "{not json", "application/json")->status == 400);

    post(to_json(label(id, "b")));
    post(to_json(label(id, "c")));
    CHECK(post(to_json(label(id, "d")))->status == 409);
    auto report = cli.Get("/api/report");
    CHECK(report->status == 200);
    CHECK(json::parse(report->body)["n"] == 1);
}

} // TEST_SUITE
