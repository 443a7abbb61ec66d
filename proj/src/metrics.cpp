#include "reflect/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <set>

#include <fmt/format.h>

#include "reflect/errors.hpp"

namespace reflect::metrics {

ConfusionMatrix ConfusionMatrix::from_pairs(std::span<const std::pair<bool, bool>> pairs) {
    ConfusionMatrix m;
    for (const auto& [a, b] : pairs) ++m.counts[a][b];
    return m;
}

std::size_t ConfusionMatrix::total() const {
    return counts[0][0] + counts[0][1] + counts[1][0] + counts[1][1];
}

std::size_t ConfusionMatrix::row_sum(bool a) const { return counts[a][0] + counts[a][1]; }
std::size_t ConfusionMatrix::col_sum(bool b) const { return counts[0][b] + counts[1][b]; }

KappaStrength kappa_strength(double kappa) {
    return kappa >= kSubstantialKappa ? KappaStrength::Substantial : KappaStrength::BelowSubstantial;
}

std::string_view to_string(KappaStrength s) {
    return s == KappaStrength::Substantial ? "substantial" : "below_substantial";
}

AgreementResult cohen_kappa(const ConfusionMatrix& m) {
    const auto n = m.total();
    if (n == 0) throw DomainError("cohen kappa of an empty sample");
    const auto dn = static_cast<double>(n);

    AgreementResult r;
    r.n = n;
    r.p_o = static_cast<double>(m.counts[0][0] + m.counts[1][1]) / dn;
    for (bool c : {false, true}) {
        r.p_e += (static_cast<double>(m.row_sum(c)) / dn) * (static_cast<double>(m.col_sum(c)) / dn);
    }
    // p_e == 1 only when both raters used a single, identical label for every item.
    if ((m.row_sum(false) == n && m.col_sum(false) == n) || (m.row_sum(true) == n && m.col_sum(true) == n)) {
        r.degenerate = true;
        r.kappa = r.p_o == 1.0 ? 1.0 : 0.0;
    } else {
        r.kappa = (r.p_o - r.p_e) / (1.0 - r.p_e);
    }
    r.kappa = std::clamp(r.kappa, -1.0, 1.0);
    r.strength = kappa_strength(r.kappa);
    return r;
}

AgreementResult cohen_kappa(std::span<const std::pair<bool, bool>> pairs) {
    if (pairs.empty()) throw DomainError("cohen kappa of an empty sample");
    return cohen_kappa(ConfusionMatrix::from_pairs(pairs));
}

double harmonic_mean(double a, double b) { return a + b > 0 ? 2.0 * a * b / (a + b) : 0.0; }

PrfScores precision_recall_f1(std::span<const bool> gold, std::span<const bool> predicted) {
    if (gold.size() != predicted.size()) throw DomainError("gold and predicted differ in length");
    if (gold.empty()) throw DomainError("precision/recall of an empty sample");
    PrfScores s;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        if (gold[i] && predicted[i]) ++s.tp;
        else if (!gold[i] && predicted[i]) ++s.fp;
        else if (gold[i] && !predicted[i]) ++s.fn;
        else ++s.tn;
    }
    if (s.tp + s.fp == 0) {
        s.precision_undefined = true;
    } else {
        s.precision = static_cast<double>(s.tp) / static_cast<double>(s.tp + s.fp);
    }
    if (s.tp + s.fn == 0) {
        s.recall_undefined = true;
    } else {
        s.recall = static_cast<double>(s.tp) / static_cast<double>(s.tp + s.fn);
    }
    if (s.precision + s.recall > 0) {
        s.f1 = harmonic_mean(s.precision, s.recall);
    } else {
        s.f1_undefined = true;
    }
    return s;
}

bool f1_consistent(double precision, double recall, double f1, int decimals) {
    // A hair of slack absorbs binary representation error at the boundary.
    return std::abs(harmonic_mean(precision, recall) - f1) <= 0.5 * std::pow(10.0, -decimals) + 1e-12;
}

double round_to(double value, int decimals) {
    const double scale = std::pow(10.0, decimals);
    return std::round(value * scale) / scale;
}

SuccessRate success_rate(std::size_t successes, std::size_t total) {
    if (total == 0) throw DomainError("success rate over an empty set");
    if (successes > total) throw DomainError("successes exceed total");
    const double raw = static_cast<double>(successes) / static_cast<double>(total);
    return {raw, round_to(raw, 2)};
}

JoinedLabels overlap_join(std::span<const judge::EvaluationRecord> judge_records,
                          std::span<const review::HumanOutcome> human) {
    using Key = std::pair<std::string, std::string>;
    std::map<Key, const judge::EvaluationRecord*> judged;
    for (const auto& r : judge_records) {
        if (!judged.emplace(Key{r.model, r.pair_id}, &r).second) {
            throw DataIntegrityError("duplicate judge record for " + r.model + ":" + r.pair_id);
        }
    }
    std::set<Key> seen;
    JoinedLabels out;
    for (const auto& h : human) {
        const Key key{h.model, h.pair_id};
        if (!seen.insert(key).second) throw DataIntegrityError("duplicate human outcome for " + h.model + ":" + h.pair_id);
        auto it = judged.find(key);
        if (it == judged.end()) continue;
        const auto& j = *it->second;
        if (j.adherence.value == judge::Adherence::Unparseable) {
            ++out.judge_unparseable;
            continue;
        }
        const bool judge_adherent = j.adherence.value == judge::Adherence::Adherent;
        out.adherence.push_back({h.model, h.pair_id, h.kind, judge_adherent, h.adherent});
        if (judge_adherent && h.adherent && j.rtype && j.rtype->value != judge::ReflectionType::Unparseable) {
            out.type.push_back({h.model, h.pair_id, h.kind, j.rtype->value == judge::ReflectionType::Complex,
                                h.complex.value_or(false)});
        }
    }
    return out;
}

std::vector<std::pair<bool, bool>> as_pairs(std::span<const LabeledPair> pairs) {
    std::vector<std::pair<bool, bool>> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) out.emplace_back(p.judge, p.human);
    return out;
}

namespace {

AgreementRow make_row(std::string task, std::string stage, const std::vector<LabeledPair>& pairs) {
    AgreementRow row{std::move(task), std::move(stage), {}, pairs.empty()};
    if (!pairs.empty()) row.result = cohen_kappa(as_pairs(pairs));
    return row;
}

std::vector<LabeledPair> of_kind(const std::vector<LabeledPair>& pairs, ReflectionKind k) {
    std::vector<LabeledPair> out;
    for (const auto& p : pairs) {
        if (p.kind == k) out.push_back(p);
    }
    return out;
}

}  // namespace

std::vector<AgreementRow> agreement_table(const JoinedLabels& joined) {
    std::vector<AgreementRow> rows;
    for (const auto& [stage, pairs] : {std::pair{"adherence", &joined.adherence}, std::pair{"type", &joined.type}}) {
        for (auto k : kAllKinds) rows.push_back(make_row(std::string(to_string(k)), stage, of_kind(*pairs, k)));
        rows.push_back(make_row("all", stage, *pairs));
    }
    return rows;
}

std::string agreement_csv(std::span<const AgreementRow> rows) {
    std::string out = "task,stage,n,p_o,p_e,kappa,strength\n";
    for (const auto& r : rows) {
        if (r.empty) {
            out += fmt::format("{},{},0,,,,\n", r.task, r.stage);
            continue;
        }
        out += fmt::format("{},{},{},{:.4f},{:.4f},{:.4f},{}\n", r.task, r.stage, r.result.n, r.result.p_o,
                           r.result.p_e, r.result.kappa, to_string(r.result.strength));
    }
    return out;
}

std::vector<PrfRow> prf_table(const JoinedLabels& joined) {
    std::vector<PrfRow> rows;
    for (const auto& [stage, pairs] : {std::pair{"adherence", &joined.adherence}, std::pair{"type", &joined.type}}) {
        if (pairs->empty()) {
            rows.push_back({stage, {}, 0});
            continue;
        }
        const auto n = pairs->size();
        auto gold = std::make_unique<bool[]>(n);
        auto pred = std::make_unique<bool[]>(n);
        for (std::size_t i = 0; i < n; ++i) {
            gold[i] = (*pairs)[i].human;
            pred[i] = (*pairs)[i].judge;
        }
        const std::span<const bool> g(gold.get(), n);
        const std::span<const bool> pr(pred.get(), n);
        rows.push_back({stage, precision_recall_f1(g, pr), pairs->size()});
    }
    return rows;
}

std::string prf_csv(std::span<const PrfRow> rows) {
    std::string out = "stage,n,precision,recall,f1,tp,fp,fn,tn\n";
    for (const auto& r : rows) {
        if (r.n == 0) {
            out += fmt::format("{},0,,,,,,,\n", r.stage);
            continue;
        }
        const auto& s = r.scores;
        out += fmt::format("{},{},{:.3f},{:.3f},{:.3f},{},{},{},{}\n", r.stage, r.n, s.precision, s.recall, s.f1, s.tp,
                           s.fp, s.fn, s.tn);
    }
    return out;
}

}  // namespace reflect::metrics
