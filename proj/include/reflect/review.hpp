#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "reflect/judge.hpp"

namespace reflect::review {

enum class Stage { Adherence, Type };
enum class ReviewState { AwaitingAdherence, AwaitingType, Closed };

struct ReviewTask {
    std::string task_id;  // opaque, see task_id_for
    std::string pair_id;
    std::string model;
    ReflectionKind kind = ReflectionKind::Simple;
    std::string question;
    std::string answer;
    std::string reflection;
    std::string stratum;
    std::array<std::string, 3> annotators;
    ReviewState state = ReviewState::AwaitingAdherence;

    bool operator==(const ReviewTask&) const = default;
};

// `value` is "adherent?" for the adherence stage and "complex?" for the type stage.
struct AnnotatorDecision {
    std::string task_id;
    std::string annotator_id;
    Stage stage = Stage::Adherence;
    bool value = false;
    std::int64_t timestamp_ms = 0;

    bool operator==(const AnnotatorDecision&) const = default;
};

struct AggregatedLabel {
    std::string task_id;
    Stage stage = Stage::Adherence;
    bool value = false;
    int yes = 0;
    int no = 0;

    bool operator==(const AggregatedLabel&) const = default;
};

// "rv-" plus 16 hex digits derived from (model, pair_id). Stable across runs and reveals neither.
std::string task_id_for(const std::string& model, const std::string& pair_id);

// Stratified by normalized question. Target size is round(N x fraction); per-stratum quotas by
// largest remainder; members chosen by seeded shuffle. Output keeps input order and has no
// annotators assigned. Throws ConfigError for a fraction outside (0, 1], ValidationError for
// empty input.
std::vector<ReviewTask> sample_for_review(std::span<const judge::EvaluationRecord> records, double fraction,
                                          std::uint64_t seed);

// Round-robin over `pool` (>= 3 distinct ids), three consecutive annotators per task. `cursor`
// carries the rotation between calls so load stays balanced across models.
void assign_annotators(std::span<ReviewTask> tasks, std::span<const std::string> pool, std::size_t& cursor);

// Majority of exactly three decisions for one (task, stage). Throws IncompleteTaskError for any
// other count and DataIntegrityError for mixed tasks/stages or a repeated annotator.
AggregatedLabel aggregate_majority(std::span<const AnnotatorDecision> decisions);

struct AdvanceOutcome {
    ReviewState state;
    std::optional<std::string> warning;
};

// Adherent majority opens the type stage; otherwise the task closes. Advancing a task that is
// not awaiting adherence is a no-op with a warning.
AdvanceOutcome advance_task(ReviewTask& task, const AggregatedLabel& adherence_label);

// Closes a task once its type majority is known.
AdvanceOutcome complete_type_stage(ReviewTask& task, const AggregatedLabel& type_label);

// The human pipeline's final say on one reflection.
struct HumanOutcome {
    std::string model;
    std::string pair_id;
    ReflectionKind kind = ReflectionKind::Simple;
    bool adherent = false;
    std::optional<bool> complex;  // set iff adherent
};

// Closed tasks only.
std::vector<HumanOutcome> human_outcomes(std::span<const ReviewTask> tasks, std::span<const AggregatedLabel> labels);

// Summarizes one model's human outcomes with the same arithmetic as the judge report.
judge::EvaluationReport human_report(std::span<const HumanOutcome> outcomes, const std::string& model,
                                     ReflectionKind kind);

struct AnnotatorProgress {
    std::size_t assigned = 0;
    std::size_t adherence_done = 0;
    std::size_t type_done = 0;
    std::size_t pending = 0;  // tasks currently waiting on this annotator
};

struct ModelProgress {
    std::size_t tasks = 0;
    std::size_t awaiting_adherence = 0;
    std::size_t awaiting_type = 0;
    std::size_t closed = 0;
};

struct Progress {
    std::map<std::string, AnnotatorProgress> annotators;
    std::map<std::string, ModelProgress> models;
};

// Live review state shared by the annotation service and the batch aggregator.
// All methods are safe to call concurrently; writes are serialized.
class ReviewBoard {
  public:
    ReviewBoard(std::vector<ReviewTask> tasks, std::vector<std::string> annotator_pool);

    struct SubmitOutcome {
        bool duplicate = false;
        ReviewState state = ReviewState::AwaitingAdherence;
        std::optional<AggregatedLabel> aggregated;
    };

    // Throws NotFoundError (unknown task), UnknownAnnotatorError (not in the pool or not
    // assigned), StageOrderError (wrong stage, closed task, or a conflicting resubmission).
    // An identical resubmission is accepted as a duplicate and changes nothing.
    SubmitOutcome submit(const AnnotatorDecision& decision);

    // Tasks assigned to `annotator` that still need this annotator's vote at their current
    // stage, optionally filtered by state.
    std::vector<ReviewTask> open_tasks(const std::string& annotator, std::optional<ReviewState> state = {}) const;

    Progress progress() const;
    bool is_annotator(const std::string& id) const;
    std::optional<ReviewTask> task(const std::string& task_id) const;
    std::vector<ReviewTask> tasks() const;
    std::vector<AnnotatorDecision> decisions() const;
    std::vector<AggregatedLabel> labels() const;
    // Whether `annotator` already voted on `task_id` at `stage`.
    bool has_decided(const std::string& task_id, const std::string& annotator, Stage stage) const;

    // Accepted (non-duplicate) decisions are appended to this file.
    void set_decision_log(std::filesystem::path path);

  private:
    struct Key {
        std::string task_id;
        std::string annotator;
        Stage stage;
        auto operator<=>(const Key&) const = default;
    };

    mutable std::mutex mu_;
    std::vector<ReviewTask> tasks_;
    std::map<std::string, std::size_t> index_;
    std::vector<std::string> pool_;
    std::map<Key, AnnotatorDecision> decisions_;
    std::vector<AnnotatorDecision> decision_order_;
    std::vector<AggregatedLabel> labels_;
    std::optional<std::filesystem::path> log_;
};

std::string_view to_string(Stage s);
std::string_view to_string(ReviewState s);
Stage parse_stage(std::string_view s);
ReviewState parse_state(std::string_view s);

nlohmann::json to_json(const ReviewTask& t);
ReviewTask review_task_from_json(const nlohmann::json& j);
nlohmann::json to_json(const AnnotatorDecision& d);
AnnotatorDecision decision_from_json(const nlohmann::json& j);
nlohmann::json to_json(const AggregatedLabel& l);
AggregatedLabel label_from_json(const nlohmann::json& j);
nlohmann::json to_json(const HumanOutcome& o);
HumanOutcome human_outcome_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Progress& p);

}  // namespace reflect::review
