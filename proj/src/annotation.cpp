#include "synthprod/annotation.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "synthprod/error.hpp"
#include "synthprod/text.hpp"

namespace synthprod {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw invalid_input(path + ": " + e.what());
    }
}

std::int64_t system_now_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

std::string task_header(const AnnotationTask& t) {
    std::ostringstream out;
    out << "Type: " << to_string(t.strategy) << " | Attribute: " << t.attribute_key;
    switch (t.strategy) {
    case StrategyLabel::correct:
        out << " | Original value: " << t.original_value << " | New value: " << t.value;
        break;
    case StrategyLabel::incorrect:
        out << " | Correct value: " << t.value << " | Wrong value: " << t.wrong_value.value_or("");
        break;
    case StrategyLabel::unknown:
        out << " | Value to remove: " << t.original_value;
        if (!text::iequals(t.value, t.original_value)) out << " (and " << t.value << ")";
        break;
    }
    return out.str();
}

} // namespace

AnnotationProtocol AnnotationProtocol::load(const std::string& path) {
    json j = read_json_file(path);
    AnnotationProtocol p;
    try {
        p.version = j.at("version").get<std::string>();
        p.preamble = j.at("preamble").get<std::string>();
        for (const auto& q : j.at("questions")) {
            Question question{q.at("id").get<std::string>(), q.at("text").get<std::string>(),
                              q.at("options").get<std::vector<std::string>>()};
            if (question.options.empty()) throw invalid_input(path + ": question " + question.id + " has no options");
            p.questions.push_back(std::move(question));
        }
    } catch (const json::exception& e) {
        throw invalid_input(path + ": " + e.what());
    }
    if (p.questions.size() != 6) throw invalid_input(path + ": protocol must define six questions");
    return p;
}

std::string AnnotationProtocol::default_path() {
    return std::string(SYNTHPROD_ASSET_DIR) + "/annotation/protocol_v1.json";
}

const Question* AnnotationProtocol::find(const std::string& id) const {
    for (const auto& q : questions)
        if (q.id == id) return &q;
    return nullptr;
}

json to_json(const AnnotationTask& t) {
    json questions = json::array();
    for (const auto& q : t.questions) questions.push_back({{"id", q.id}, {"text", q.text}, {"options", q.options}});
    json diff = json::array();
    for (const auto& d : t.diff) diff.push_back(to_json(d));
    json j = {{"task_id", t.task_id},
              {"synthetic_id", t.synthetic_id},
              {"strategy", to_string(t.strategy)},
              {"category", t.category},
              {"attribute_key", t.attribute_key},
              {"original_value", t.original_value},
              {"value", t.value},
              {"header", t.header},
              {"base", t.base_fields},
              {"synthetic", t.synthetic_fields},
              {"diff", diff},
              {"questions", questions}};
    if (t.wrong_value) j["wrong_value"] = *t.wrong_value;
    return j;
}

AnnotationTask annotation_task_from_json(const json& j) {
    AnnotationTask t;
    t.task_id = j.at("task_id").get<std::string>();
    t.synthetic_id = j.value("synthetic_id", t.task_id);
    auto strategy = parse_strategy(j.at("strategy").get<std::string>());
    if (!strategy) throw invalid_input("unknown strategy in task " + t.task_id);
    t.strategy = *strategy;
    t.category = j.value("category", "");
    t.attribute_key = j.at("attribute_key").get<std::string>();
    t.original_value = j.value("original_value", "");
    t.value = j.value("value", "");
    if (j.contains("wrong_value")) t.wrong_value = j.at("wrong_value").get<std::string>();
    t.header = j.value("header", "");
    t.base_fields = j.at("base").get<std::map<std::string, std::string>>();
    t.synthetic_fields = j.at("synthetic").get<std::map<std::string, std::string>>();
    for (const auto& d : j.at("diff")) t.diff.push_back(diff_span_from_json(d));
    for (const auto& q : j.at("questions"))
        t.questions.push_back({q.at("id").get<std::string>(), q.at("text").get<std::string>(),
                               q.at("options").get<std::vector<std::string>>()});
    return t;
}

std::vector<AnnotationTask> export_tasks(const std::vector<SyntheticProduct>& run, const Catalog& originals,
                                         const AnnotationProtocol& protocol) {
    std::vector<AnnotationTask> tasks;
    std::vector<std::string> problems;
    std::set<std::string> seen;
    for (const auto& sp : run) {
        const Product* base = originals.find(sp.base_id);
        if (!base) {
            problems.push_back(sp.id + ": base product " + sp.base_id + " not in catalog");
            continue;
        }
        if (!seen.insert(sp.id).second) {
            problems.push_back(sp.id + ": duplicate synthetic id");
            continue;
        }
        AnnotationTask t;
        t.task_id = sp.id;
        t.synthetic_id = sp.id;
        t.strategy = sp.strategy;
        t.category = sp.category;
        t.attribute_key = sp.attribute_key;
        t.original_value = sp.original_value;
        t.value = sp.recorded_value;
        if (sp.strategy == StrategyLabel::incorrect) t.wrong_value = sp.negative_value;
        for (const auto& f : canonical_fields()) t.base_fields[f] = base->field_text(f);
        t.synthetic_fields = sp.text_fields;
        t.diff = sp.diff;
        bool diff_ok = std::all_of(t.diff.begin(), t.diff.end(), [&](const DiffSpan& d) {
            return span_matches(d, t.base_fields, t.synthetic_fields);
        });
        if (!diff_ok) {
            problems.push_back(sp.id + ": diff spans do not match the product texts");
            continue;
        }
        t.questions = protocol.questions;
        t.header = task_header(t);
        tasks.push_back(std::move(t));
    }
    if (!problems.empty()) {
        std::string msg = "cannot export annotation tasks:";
        for (const auto& p : problems) msg += "\n  " + p;
        throw invalid_input(msg);
    }
    return tasks;
}

void write_tasks(const std::string& path, const std::vector<AnnotationTask>& tasks) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write " + path);
    for (const auto& t : tasks) out << to_json(t).dump() << '\n';
    if (!out) throw io_error("write failed: " + path);
}

std::vector<AnnotationTask> load_tasks(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open " + path);
    std::vector<AnnotationTask> tasks;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (text::trim(line).empty()) continue;
        try {
            tasks.push_back(annotation_task_from_json(json::parse(line)));
        } catch (const json::exception& e) {
            throw invalid_input(path + ":" + std::to_string(n) + ": " + e.what());
        }
    }
    return tasks;
}

json to_json(const AnnotationLabel& l) {
    return {{"task_id", l.task_id}, {"annotator_id", l.annotator_id}, {"answers", l.answers}, {"timestamp", l.timestamp_ms}};
}

AnnotationLabel annotation_label_from_json(const json& j) {
    AnnotationLabel l;
    try {
        l.task_id = j.at("task_id").get<std::string>();
        l.annotator_id = j.at("annotator_id").get<std::string>();
        l.answers = j.at("answers").get<std::map<std::string, std::string>>();
        l.timestamp_ms = j.value("timestamp", std::int64_t{0});
    } catch (const json::exception& e) {
        throw invalid_input(std::string("malformed label: ") + e.what());
    }
    return l;
}

std::optional<std::string> majority_vote(const std::vector<std::string>& answers) {
    std::map<std::string, std::size_t> counts;
    for (const auto& a : answers) ++counts[a];
    for (const auto& [option, c] : counts)
        if (c >= 2) return option;
    return std::nullopt;
}

std::string_view to_string(SubmitCode c) {
    switch (c) {
    case SubmitCode::ok: return "ok";
    case SubmitCode::unknown_task: return "unknown_task";
    case SubmitCode::duplicate: return "duplicate";
    case SubmitCode::task_full: return "task_full";
    case SubmitCode::missing_answer: return "missing_answer";
    case SubmitCode::invalid_option: return "invalid_option";
    case SubmitCode::malformed: return "malformed";
    }
    return "unknown";
}

namespace {

json rate_json(const Rate& r) {
    return {{"count", r.count}, {"total", r.total}, {"percent", r.percent()}};
}

json rate_map_json(const std::map<std::string, Rate>& m) {
    json j = json::object();
    for (const auto& [k, r] : m) j[k] = rate_json(r);
    return j;
}

} // namespace

json AggregateReport::to_json() const {
    return {{"n", n},
            {"attribute_value_correctness", rate_json(attribute_value_correctness)},
            {"readability", rate_json(readability)},
            {"brand_modification_success", rate_json(brand_modification_success)},
            {"negative_example_coherence", rate_json(negative_example_coherence)},
            {"consistency_by_input_label", rate_map_json(consistency_by_input_label)},
            {"additional_changes", rate_map_json(additional_changes)},
            {"input_distribution", rate_map_json(input_distribution)},
            {"no_majority", no_majority}};
}

AggregateReport build_report(const std::vector<AnnotationTask>& tasks, const std::vector<AnnotationLabel>& labels,
                             std::size_t labels_per_task) {
    std::map<std::string, std::vector<const AnnotationLabel*>> by_task;
    for (const auto& l : labels) by_task[l.task_id].push_back(&l);

    AggregateReport r;
    for (auto s : all_strategies) {
        r.consistency_by_input_label[std::string(to_string(s))];
        r.input_distribution[std::string(to_string(s))];
    }
    for (auto c : {AdditionalChanges::none, AdditionalChanges::acceptable, AdditionalChanges::major})
        r.additional_changes[std::string(to_string(c))];

    std::vector<const AnnotationTask*> complete;
    for (const auto& t : tasks) {
        auto it = by_task.find(t.task_id);
        if (it != by_task.end() && it->second.size() >= labels_per_task) complete.push_back(&t);
    }
    r.n = complete.size();
    for (const auto* t : complete) r.input_distribution[std::string(to_string(t->strategy))].count++;
    for (auto& [_, rate] : r.input_distribution) rate.total = r.n;

    auto vote = [&](const AnnotationTask& t, const char* qid) -> std::optional<std::string> {
        std::vector<std::string> answers;
        for (const auto* l : by_task[t.task_id]) {
            auto a = l->answers.find(qid);
            if (a != l->answers.end()) answers.push_back(a->second);
        }
        auto m = majority_vote(answers);
        if (!m) r.no_majority[qid]++;
        return m;
    };
    auto tally = [](Rate& rate, const std::optional<std::string>& m, const char* positive) {
        if (!m) return;
        rate.total++;
        if (*m == positive) rate.count++;
    };

    std::size_t change_total = 0;
    for (const auto* t : complete) {
        tally(r.attribute_value_correctness, vote(*t, question::attribute_value_quality), "valid");
        tally(r.readability, vote(*t, question::professional_writing), "valid");
        tally(r.brand_modification_success, vote(*t, question::brand_modification), "valid");
        tally(r.consistency_by_input_label[std::string(to_string(t->strategy))],
              vote(*t, question::cross_field_consistency), "valid");
        if (t->strategy == StrategyLabel::incorrect) {
            auto m = vote(*t, question::negative_example_coherence);
            if (m && *m != "not_applicable") tally(r.negative_example_coherence, m, "valid");
        }
        if (auto m = vote(*t, question::content_preservation)) {
            ++change_total;
            auto it = r.additional_changes.find(*m);
            if (it != r.additional_changes.end()) it->second.count++;
        }
    }
    for (auto& [_, rate] : r.additional_changes) rate.total = change_total;
    if (r.n == 0) throw invalid_input("no task has a complete set of labels");
    return r;
}

AnnotationService::AnnotationService(std::vector<AnnotationTask> tasks, std::string store_dir,
                                     AnnotationServiceOptions options, Clock clock)
    : tasks_(std::move(tasks)), store_dir_(std::move(store_dir)), options_(options), clock_(std::move(clock)) {
    if (!clock_) clock_ = system_now_ms;
    if (options_.labels_per_task == 0) throw invalid_input("labels_per_task must be positive");
    for (std::size_t i = 0; i < tasks_.size(); ++i) {
        if (!index_.emplace(tasks_[i].task_id, i).second)
            throw invalid_input("duplicate task id " + tasks_[i].task_id);
    }
    labels_.resize(tasks_.size());
    if (!store_dir_.empty()) {
        std::error_code ec;
        fs::create_directories(store_dir_, ec);
        if (ec) throw io_error("cannot create " + store_dir_ + ": " + ec.message());
        fs::path task_file = fs::path(store_dir_) / "tasks.jsonl";
        if (!fs::exists(task_file)) write_tasks(task_file.string(), tasks_);
        recover();
    }
}

void AnnotationService::apply_label(const AnnotationLabel& label) {
    auto it = index_.find(label.task_id);
    if (it == index_.end()) return;
    auto& bucket = labels_[it->second];
    for (const auto& l : bucket)
        if (l.annotator_id == label.annotator_id) return;
    if (bucket.size() >= options_.labels_per_task) return;
    bucket.push_back(label);
    annotators_[label.annotator_id]++;
    auto c = claims_.find(label.annotator_id);
    if (c != claims_.end() && c->second.task == it->second) claims_.erase(c);
}

void AnnotationService::recover() {
    fs::path snap = fs::path(store_dir_) / "snapshot.json";
    if (fs::exists(snap)) {
        json j = read_json_file(snap.string());
        for (const auto& l : j.value("labels", json::array())) apply_label(annotation_label_from_json(l));
        for (const auto& c : j.value("claims", json::array())) {
            auto it = index_.find(c.value("task_id", ""));
            if (it != index_.end())
                claims_[c.at("annotator_id").get<std::string>()] = {it->second, c.value("at", std::int64_t{0})};
        }
    }
    fs::path log = fs::path(store_dir_) / "labels.log";
    std::ifstream in(log);
    std::string line;
    while (std::getline(in, line)) {
        if (text::trim(line).empty()) continue;
        json e;
        try {
            e = json::parse(line);
        } catch (const json::exception&) {
            continue; // torn final write
        }
        const std::string type = e.value("type", "");
        if (type == "label") {
            apply_label(annotation_label_from_json(e.at("label")));
        } else if (type == "claim") {
            auto it = index_.find(e.value("task_id", ""));
            if (it != index_.end())
                claims_[e.value("annotator_id", "")] = {it->second, e.value("at", std::int64_t{0})};
        }
    }
}

void AnnotationService::append_event(const json& event) {
    if (store_dir_.empty()) return;
    std::ofstream out(fs::path(store_dir_) / "labels.log", std::ios::app);
    if (!out) throw io_error("cannot append to label log in " + store_dir_);
    out << event.dump() << '\n';
    out.flush();
    if (!out) throw io_error("label log write failed in " + store_dir_);
}

void AnnotationService::write_snapshot_locked() {
    if (store_dir_.empty()) return;
    json labels = json::array();
    for (const auto& bucket : labels_)
        for (const auto& l : bucket) labels.push_back(to_json(l));
    json claims = json::array();
    for (const auto& [annotator, c] : claims_)
        claims.push_back({{"annotator_id", annotator}, {"task_id", tasks_[c.task].task_id}, {"at", c.at_ms}});
    json doc = {{"labels", labels}, {"claims", claims}};

    fs::path dir(store_dir_);
    fs::path tmp = dir / "snapshot.json.tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw io_error("cannot write " + tmp.string());
        out << doc.dump() << '\n';
        if (!out) throw io_error("snapshot write failed");
    }
    fs::rename(tmp, dir / "snapshot.json");
    std::ofstream(dir / "labels.log", std::ios::trunc);
    since_snapshot_ = 0;
}

void AnnotationService::snapshot() {
    std::lock_guard lock(mu_);
    write_snapshot_locked();
}

std::size_t AnnotationService::active_claims_locked(std::size_t task, std::int64_t now) const {
    std::size_t n = 0;
    for (const auto& [annotator, c] : claims_) {
        if (c.task != task || now - c.at_ms > options_.claim_ttl_ms) continue;
        bool labeled = std::any_of(labels_[task].begin(), labels_[task].end(),
                                   [&](const AnnotationLabel& l) { return l.annotator_id == annotator; });
        if (!labeled) ++n;
    }
    return n;
}

std::optional<AnnotationTask> AnnotationService::next_task(const std::string& annotator_id) {
    std::lock_guard lock(mu_);
    const std::int64_t now = clock_();
    annotators_.try_emplace(annotator_id, 0);
    auto has_labeled = [&](std::size_t i) {
        return std::any_of(labels_[i].begin(), labels_[i].end(),
                           [&](const AnnotationLabel& l) { return l.annotator_id == annotator_id; });
    };

    auto held = claims_.find(annotator_id);
    if (held != claims_.end() && now - held->second.at_ms <= options_.claim_ttl_ms &&
        !has_labeled(held->second.task) && labels_[held->second.task].size() < options_.labels_per_task)
        return tasks_[held->second.task];

    std::optional<std::size_t> best;
    std::size_t best_load = 0;
    for (std::size_t i = 0; i < tasks_.size(); ++i) {
        if (has_labeled(i)) continue;
        std::size_t load = labels_[i].size() + active_claims_locked(i, now);
        if (load >= options_.labels_per_task) continue;
        if (!best || load < best_load) {
            best = i;
            best_load = load;
        }
    }
    if (!best) {
        claims_.erase(annotator_id);
        return std::nullopt;
    }
    append_event({{"type", "claim"}, {"annotator_id", annotator_id}, {"task_id", tasks_[*best].task_id}, {"at", now}});
    claims_[annotator_id] = {*best, now};
    return tasks_[*best];
}

SubmitResult AnnotationService::submit_label(AnnotationLabel label) {
    if (label.annotator_id.empty()) return {SubmitCode::malformed, "annotator_id is required"};
    auto it = index_.find(label.task_id);
    if (it == index_.end()) return {SubmitCode::unknown_task, "no task " + label.task_id};
    const AnnotationTask& t = tasks_[it->second];
    for (const auto& q : t.questions) {
        auto a = label.answers.find(q.id);
        if (a == label.answers.end()) return {SubmitCode::missing_answer, "missing answer for " + q.id};
        if (std::find(q.options.begin(), q.options.end(), a->second) == q.options.end())
            return {SubmitCode::invalid_option, "option '" + a->second + "' is not valid for " + q.id};
    }
    for (const auto& [qid, _] : label.answers) {
        bool known = std::any_of(t.questions.begin(), t.questions.end(), [&](const Question& q) { return q.id == qid; });
        if (!known) return {SubmitCode::invalid_option, "unknown question " + qid};
    }

    std::lock_guard lock(mu_);
    auto& bucket = labels_[it->second];
    for (const auto& l : bucket)
        if (l.annotator_id == label.annotator_id)
            return {SubmitCode::duplicate, label.annotator_id + " already labeled " + label.task_id};
    if (bucket.size() >= options_.labels_per_task)
        return {SubmitCode::task_full, label.task_id + " already has " + std::to_string(bucket.size()) + " labels"};
    if (label.timestamp_ms == 0) label.timestamp_ms = clock_();
    append_event({{"type", "label"}, {"label", to_json(label)}});
    apply_label(label);
    if (!store_dir_.empty() && ++since_snapshot_ >= options_.snapshot_every) write_snapshot_locked();
    return {};
}

AggregateReport AnnotationService::build_report() const {
    return synthprod::build_report(tasks_, labels(), options_.labels_per_task);
}

std::optional<AnnotationTask> AnnotationService::task(const std::string& task_id) const {
    auto it = index_.find(task_id);
    if (it == index_.end()) return std::nullopt;
    return tasks_[it->second];
}

std::size_t AnnotationService::labels_for(const std::string& task_id) const {
    auto it = index_.find(task_id);
    if (it == index_.end()) return 0;
    std::lock_guard lock(mu_);
    return labels_[it->second].size();
}

std::size_t AnnotationService::labeled_by(const std::string& annotator_id) const {
    std::lock_guard lock(mu_);
    auto it = annotators_.find(annotator_id);
    return it == annotators_.end() ? 0 : it->second;
}

std::vector<AnnotationLabel> AnnotationService::labels() const {
    std::lock_guard lock(mu_);
    std::vector<AnnotationLabel> out;
    for (const auto& bucket : labels_) out.insert(out.end(), bucket.begin(), bucket.end());
    return out;
}

std::vector<std::string> AnnotationService::annotators() const {
    std::lock_guard lock(mu_);
    std::vector<std::string> out;
    for (const auto& [a, _] : annotators_) out.push_back(a);
    return out;
}

} // namespace synthprod
