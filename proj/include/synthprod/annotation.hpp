#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "synthprod/catalog.hpp"
#include "synthprod/diff.hpp"
#include "synthprod/generator.hpp"

namespace synthprod {

struct Question {
    std::string id;
    std::string text;
    std::vector<std::string> options;
};

struct AnnotationProtocol {
    std::string version;
    std::string preamble;
    std::vector<Question> questions; // exactly six

    static AnnotationProtocol load(const std::string& path);
    static std::string default_path();
    const Question* find(const std::string& id) const;
};

namespace question {
inline constexpr const char* attribute_value_quality = "attribute_value_quality";
inline constexpr const char* negative_example_coherence = "negative_example_coherence";
inline constexpr const char* cross_field_consistency = "cross_field_consistency";
inline constexpr const char* brand_modification = "brand_modification";
inline constexpr const char* content_preservation = "content_preservation";
inline constexpr const char* professional_writing = "professional_writing";
} // namespace question

struct AnnotationTask {
    std::string task_id;
    std::string synthetic_id;
    StrategyLabel strategy = StrategyLabel::correct;
    std::string category;
    std::string attribute_key;
    std::string original_value;
    std::string value;                       // value the synthetic text should reflect
    std::optional<std::string> wrong_value;  // incorrect strategy only
    std::string header;                      // shown above the two panes
    std::map<std::string, std::string> base_fields;
    std::map<std::string, std::string> synthetic_fields;
    std::vector<DiffSpan> diff;
    std::vector<Question> questions;
};

nlohmann::json to_json(const AnnotationTask& t);
AnnotationTask annotation_task_from_json(const nlohmann::json& j);

// One task per synthetic product. Throws Error(invalid) listing synthetic
// records whose base product is missing or whose diff does not validate.
std::vector<AnnotationTask> export_tasks(const std::vector<SyntheticProduct>& run, const Catalog& originals,
                                         const AnnotationProtocol& protocol);
void write_tasks(const std::string& path, const std::vector<AnnotationTask>& tasks);
std::vector<AnnotationTask> load_tasks(const std::string& path);

struct AnnotationLabel {
    std::string task_id;
    std::string annotator_id;
    std::map<std::string, std::string> answers; // question id -> option
    std::int64_t timestamp_ms = 0;
};

nlohmann::json to_json(const AnnotationLabel& l);
AnnotationLabel annotation_label_from_json(const nlohmann::json& j);

// Option chosen by at least two of the answers; nullopt when there is none
// (three distinct answers).
std::optional<std::string> majority_vote(const std::vector<std::string>& answers);

enum class SubmitCode { ok, unknown_task, duplicate, task_full, missing_answer, invalid_option, malformed };
std::string_view to_string(SubmitCode c);

struct SubmitResult {
    SubmitCode code = SubmitCode::ok;
    std::string message;
    bool ok() const { return code == SubmitCode::ok; }
};

struct Rate {
    std::size_t count = 0;
    std::size_t total = 0;
    double percent() const { return total == 0 ? 0.0 : 100.0 * static_cast<double>(count) / static_cast<double>(total); }
};

struct AggregateReport {
    std::size_t n = 0; // tasks with a full set of labels
    Rate attribute_value_correctness;
    Rate readability;
    Rate brand_modification_success;
    Rate negative_example_coherence;
    std::map<std::string, Rate> consistency_by_input_label;
    std::map<std::string, Rate> additional_changes;
    std::map<std::string, Rate> input_distribution;
    std::map<std::string, std::size_t> no_majority; // per question id

    nlohmann::json to_json() const;
};

struct AnnotationServiceOptions {
    std::size_t labels_per_task = 3;
    std::int64_t claim_ttl_ms = 30 * 60 * 1000;
    std::size_t snapshot_every = 50; // labels between snapshots
};

// Task queue and label store. All public members are thread-safe. With a
// non-empty store_dir every claim and label is appended to labels.log
// before it takes effect; snapshot.json is rewritten periodically and the
// log truncated after it.
class AnnotationService {
public:
    using Clock = std::function<std::int64_t()>;

    AnnotationService(std::vector<AnnotationTask> tasks, std::string store_dir = {},
                      AnnotationServiceOptions options = {}, Clock clock = {});

    std::optional<AnnotationTask> next_task(const std::string& annotator_id);
    SubmitResult submit_label(AnnotationLabel label);
    AggregateReport build_report() const;

    std::optional<AnnotationTask> task(const std::string& task_id) const;
    std::size_t task_count() const { return tasks_.size(); }
    std::size_t labels_for(const std::string& task_id) const;
    std::size_t labeled_by(const std::string& annotator_id) const;
    std::vector<AnnotationLabel> labels() const;
    std::vector<std::string> annotators() const;
    void snapshot();

private:
    void recover();
    void append_event(const nlohmann::json& event);
    void apply_label(const AnnotationLabel& label);
    void write_snapshot_locked();
    std::size_t active_claims_locked(std::size_t task, std::int64_t now) const;

    std::vector<AnnotationTask> tasks_;
    std::map<std::string, std::size_t> index_;
    std::string store_dir_;
    AnnotationServiceOptions options_;
    Clock clock_;

    mutable std::mutex mu_;
    std::vector<std::vector<AnnotationLabel>> labels_; // per task
    struct Claim {
        std::size_t task;
        std::int64_t at_ms;
    };
    std::map<std::string, Claim> claims_; // annotator -> outstanding claim
    std::map<std::string, std::size_t> annotators_;
    std::size_t since_snapshot_ = 0;
};

AggregateReport build_report(const std::vector<AnnotationTask>& tasks, const std::vector<AnnotationLabel>& labels,
                             std::size_t labels_per_task = 3);

} // namespace synthprod
