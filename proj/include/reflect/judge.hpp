#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "reflect/model_client.hpp"
#include "reflect/reflection_record.hpp"

namespace reflect::judge {

enum class Stage { Adherence, Type };
enum class Adherence { Adherent, NotAdherent, Unparseable };
enum class ReflectionType { Simple, Complex, Unparseable };

struct AdherenceVerdict {
    Adherence value = Adherence::Unparseable;
    std::string raw;
    bool operator==(const AdherenceVerdict&) const = default;
};

struct TypeVerdict {
    ReflectionType value = ReflectionType::Unparseable;
    std::string raw;
    bool operator==(const TypeVerdict&) const = default;
};

// Trim, lowercase, first whitespace-separated token, surrounding punctuation removed.
std::string normalize_verdict(std::string_view raw);

AdherenceVerdict parse_adherence(std::string_view raw);
TypeVerdict parse_type(std::string_view raw);

// One reflection's path through the two stages. `rtype` is set exactly when the
// adherence verdict is Adherent.
struct EvaluationRecord {
    std::string pair_id;
    std::string model;
    ReflectionKind kind_requested = ReflectionKind::Simple;
    std::string question;
    std::string answer;
    std::string reflection;
    AdherenceVerdict adherence;
    std::optional<TypeVerdict> rtype;
    std::optional<std::string> error;  // transport failure annotation

    bool operator==(const EvaluationRecord&) const = default;
};

// Rates for one model as judged by one rater (the LLM judge or the human majority).
struct EvaluationReport {
    std::string model;
    ReflectionKind kind = ReflectionKind::Simple;
    std::string rater = "judge";
    std::string run_id;
    std::optional<double> model_size;  // parameter count, used for table ordering
    std::size_t n_total = 0;
    std::size_t n_adherent = 0;
    std::size_t n_not_adherent = 0;
    std::size_t n_stage1_unparseable = 0;
    std::size_t n_stage2 = 0;  // == n_adherent
    std::size_t n_simple = 0;
    std::size_t n_complex = 0;
    std::size_t n_stage2_unparseable = 0;
    double adherence_rate = 0;
    double simple_rate = 0;
    double complex_rate = 0;
    // False when nothing reached stage 2; the type rates are then reported as zero.
    bool type_rates_defined = false;
};

// Builds a report from stage outcomes. Exposed so that human labels can be summarized identically.
EvaluationReport summarize(std::span<const EvaluationRecord> records, const std::string& model,
                           ReflectionKind kind);

struct EvaluationOptions {
    std::string model;
    client::GenerationConfig decoding = client::GenerationConfig::judge();
    std::size_t workers = 4;
};

struct EvaluationResult {
    std::vector<EvaluationRecord> records;  // input order
    EvaluationReport report;
};

// Stage 1 for every reflection; stage 2 only for Adherent ones. Unparseable answers are
// re-asked once. Transport failures leave the record Unparseable with `error` set.
// Throws ValidationError on empty input.
EvaluationResult evaluate_model(std::span<const ReflectionRecord> reflections, const client::ModelEndpoint& judge,
                                client::ModelClient& client, const EvaluationOptions& options);

struct ResultsRow {
    std::string display_name;
    ReflectionKind kind = ReflectionKind::Simple;
    std::optional<double> model_size;
    const EvaluationReport* judge = nullptr;
    const EvaluationReport* human = nullptr;
};

struct ResultsTable {
    std::vector<ResultsRow> rows;
    std::string to_csv() const;
    std::string to_text() const;
};

// Rows ordered by (kind, model size), unknown sizes last. Human reports are matched by model
// name. Duplicate model names are disambiguated with the run id. The returned table points
// into the argument spans, which must outlive it.
ResultsTable compare_reports(std::span<const EvaluationReport> judge_reports,
                             std::span<const EvaluationReport> human_reports = {});

// Parses "124M", "1.5B", "774m" into a parameter count.
std::optional<double> parse_model_size(std::string_view s);

std::string_view to_string(Adherence a);
std::string_view to_string(ReflectionType t);

nlohmann::json to_json(const EvaluationRecord& r);
EvaluationRecord evaluation_record_from_json(const nlohmann::json& j);
nlohmann::json to_json(const EvaluationReport& r);
EvaluationReport evaluation_report_from_json(const nlohmann::json& j);

}  // namespace reflect::judge
