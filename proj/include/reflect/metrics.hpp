#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "reflect/judge.hpp"
#include "reflect/review.hpp"

namespace reflect::metrics {

// Binary 2x2 table. `counts[a][b]` counts items rated `a` by the first rater (or gold)
// and `b` by the second (or predicted); index 1 is the positive class.
struct ConfusionMatrix {
    std::array<std::array<std::size_t, 2>, 2> counts{};

    static ConfusionMatrix from_pairs(std::span<const std::pair<bool, bool>> pairs);
    std::size_t total() const;
    std::size_t row_sum(bool a) const;
    std::size_t col_sum(bool b) const;
};

enum class KappaStrength { BelowSubstantial, Substantial };

// Threshold at which agreement is called substantial.
inline constexpr double kSubstantialKappa = 0.6;

struct AgreementResult {
    double p_o = 0;
    double p_e = 0;
    double kappa = 0;
    std::size_t n = 0;
    KappaStrength strength = KappaStrength::BelowSubstantial;
    // Chance agreement was 1 (both raters used one label throughout).
    bool degenerate = false;
};

KappaStrength kappa_strength(double kappa);
std::string_view to_string(KappaStrength s);

// Throws DomainError for an empty table.
AgreementResult cohen_kappa(const ConfusionMatrix& m);
// Throws DomainError for empty input.
AgreementResult cohen_kappa(std::span<const std::pair<bool, bool>> pairs);

struct PrfScores {
    double precision = 0;
    double recall = 0;
    double f1 = 0;
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    bool precision_undefined = false;
    bool recall_undefined = false;
    bool f1_undefined = false;
};

// Positive class is `true`. Throws DomainError on empty input or a length mismatch.
PrfScores precision_recall_f1(std::span<const bool> gold, std::span<const bool> predicted);

double harmonic_mean(double a, double b);

// Whether a reported F1 agrees with the harmonic mean of the reported P and R to `decimals`
// places, i.e. |hm(P, R) - F1| <= 0.5 * 10^-decimals.
bool f1_consistent(double precision, double recall, double f1, int decimals);

struct SuccessRate {
    double raw = 0;
    double rounded = 0;  // 2 dp, for tables
};

// Throws DomainError when total is 0 or successes exceed it.
SuccessRate success_rate(std::size_t successes, std::size_t total);

double round_to(double value, int decimals);

// One item rated by both the judge and the human majority.
struct LabeledPair {
    std::string model;
    std::string pair_id;
    ReflectionKind kind = ReflectionKind::Simple;
    bool judge = false;
    bool human = false;
};

struct JoinedLabels {
    std::vector<LabeledPair> adherence;  // value = adherent?
    std::vector<LabeledPair> type;       // value = complex?
    std::size_t judge_unparseable = 0;   // overlapping items dropped because the judge gave no usable verdict
};

// Joins on (model, pair_id). Type pairs exist only where both pipelines reached stage 2.
// Throws DataIntegrityError on duplicate keys on either side.
JoinedLabels overlap_join(std::span<const judge::EvaluationRecord> judge_records,
                          std::span<const review::HumanOutcome> human);

std::vector<std::pair<bool, bool>> as_pairs(std::span<const LabeledPair> pairs);

struct AgreementRow {
    std::string task;  // "simple", "complex", "all"
    std::string stage;  // "adherence", "type"
    AgreementResult result;
    bool empty = false;
};

// Per-kind rows plus an "all" row that pools raw pairs (not an average of kappas).
std::vector<AgreementRow> agreement_table(const JoinedLabels& joined);
std::string agreement_csv(std::span<const AgreementRow> rows);

struct PrfRow {
    std::string stage;
    PrfScores scores;
    std::size_t n = 0;
};

// Human majority as gold, judge as predicted, pooled over kinds.
std::vector<PrfRow> prf_table(const JoinedLabels& joined);
std::string prf_csv(std::span<const PrfRow> rows);

}  // namespace reflect::metrics
