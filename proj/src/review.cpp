#include "reflect/review.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "reflect/corpus.hpp"
#include "reflect/digest.hpp"
#include "reflect/errors.hpp"
#include "reflect/io.hpp"
#include "reflect/shuffle.hpp"
#include "reflect/text.hpp"

namespace reflect::review {

using nlohmann::json;

std::string_view to_string(Stage s) { return s == Stage::Adherence ? "adherence" : "type"; }

std::string_view to_string(ReviewState s) {
    switch (s) {
        case ReviewState::AwaitingAdherence: return "awaiting_adherence";
        case ReviewState::AwaitingType: return "awaiting_type";
        case ReviewState::Closed: return "closed";
    }
    return "?";
}

Stage parse_stage(std::string_view s) {
    const auto v = text::to_lower(text::trim(s));
    if (v == "adherence") return Stage::Adherence;
    if (v == "type") return Stage::Type;
    throw ValidationError("unknown stage '" + std::string(s) + "'");
}

ReviewState parse_state(std::string_view s) {
    const auto v = text::to_lower(text::trim(s));
    if (v == "awaiting_adherence") return ReviewState::AwaitingAdherence;
    if (v == "awaiting_type") return ReviewState::AwaitingType;
    if (v == "closed") return ReviewState::Closed;
    throw ValidationError("unknown review state '" + std::string(s) + "'");
}

std::string task_id_for(const std::string& model, const std::string& pair_id) {
    std::string key = model;
    key.push_back('\0');
    key += pair_id;
    return "rv-" + sha256_hex(key).substr(0, 16);
}

std::vector<ReviewTask> sample_for_review(std::span<const judge::EvaluationRecord> records, double fraction,
                                          std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("review fraction must lie in (0, 1]");
    if (records.empty()) throw ValidationError("no records to sample from");

    std::map<std::string, std::vector<std::size_t>> strata;
    std::vector<std::string> stratum_of(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        stratum_of[i] = corpus::normalize_stratum(records[i].question);
        strata[stratum_of[i]].push_back(i);
    }

    const auto target = static_cast<std::size_t>(std::llround(static_cast<double>(records.size()) * fraction));
    std::vector<double> weights;
    weights.reserve(strata.size());
    for (const auto& [key, members] : strata) weights.push_back(static_cast<double>(members.size()));
    const auto quotas = corpus::largest_remainder(target, weights);

    StableRng rng(seed);
    std::vector<std::size_t> chosen;
    std::size_t s = 0;
    for (auto& [key, members] : strata) {
        rng.shuffle(std::span<std::size_t>(members));
        chosen.insert(chosen.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(quotas[s++]));
    }
    std::sort(chosen.begin(), chosen.end());

    std::vector<ReviewTask> tasks;
    tasks.reserve(chosen.size());
    for (auto i : chosen) {
        const auto& r = records[i];
        ReviewTask t;
        t.task_id = task_id_for(r.model, r.pair_id);
        t.pair_id = r.pair_id;
        t.model = r.model;
        t.kind = r.kind_requested;
        t.question = r.question;
        t.answer = r.answer;
        t.reflection = r.reflection;
        t.stratum = stratum_of[i];
        tasks.push_back(std::move(t));
    }
    return tasks;
}

void assign_annotators(std::span<ReviewTask> tasks, std::span<const std::string> pool, std::size_t& cursor) {
    const std::set<std::string> distinct(pool.begin(), pool.end());
    if (pool.size() < 3 || distinct.size() != pool.size()) {
        throw ConfigError("annotator pool needs at least three distinct ids");
    }
    for (auto& t : tasks) {
        for (std::size_t k = 0; k < 3; ++k) t.annotators[k] = pool[(cursor + k) % pool.size()];
        cursor = (cursor + 3) % pool.size();
    }
}

AggregatedLabel aggregate_majority(std::span<const AnnotatorDecision> decisions) {
    if (decisions.size() != 3) {
        throw IncompleteTaskError("majority needs exactly 3 decisions, got " + std::to_string(decisions.size()));
    }
    std::set<std::string> annotators;
    AggregatedLabel label;
    label.task_id = decisions[0].task_id;
    label.stage = decisions[0].stage;
    for (const auto& d : decisions) {
        if (d.task_id != label.task_id || d.stage != label.stage) {
            throw DataIntegrityError("decisions span more than one task/stage");
        }
        if (!annotators.insert(d.annotator_id).second) {
            throw DataIntegrityError("annotator '" + d.annotator_id + "' voted twice on " + d.task_id);
        }
        (d.value ? label.yes : label.no)++;
    }
    label.value = label.yes >= 2;
    return label;
}

AdvanceOutcome advance_task(ReviewTask& task, const AggregatedLabel& adherence_label) {
    if (adherence_label.stage != Stage::Adherence) throw ContractError("advance_task needs an adherence label");
    if (task.state != ReviewState::AwaitingAdherence) {
        return {task.state, "task " + task.task_id + " is " + std::string(to_string(task.state)) + "; nothing to advance"};
    }
    task.state = adherence_label.value ? ReviewState::AwaitingType : ReviewState::Closed;
    return {task.state, std::nullopt};
}

AdvanceOutcome complete_type_stage(ReviewTask& task, const AggregatedLabel& type_label) {
    if (type_label.stage != Stage::Type) throw ContractError("complete_type_stage needs a type label");
    if (task.state != ReviewState::AwaitingType) {
        return {task.state, "task " + task.task_id + " is " + std::string(to_string(task.state)) + "; no type stage open"};
    }
    task.state = ReviewState::Closed;
    return {task.state, std::nullopt};
}

std::vector<HumanOutcome> human_outcomes(std::span<const ReviewTask> tasks, std::span<const AggregatedLabel> labels) {
    std::map<std::pair<std::string, Stage>, const AggregatedLabel*> by_key;
    for (const auto& l : labels) {
        if (!by_key.emplace(std::pair{l.task_id, l.stage}, &l).second) {
            throw DataIntegrityError("duplicate label for " + l.task_id);
        }
    }
    std::vector<HumanOutcome> out;
    for (const auto& t : tasks) {
        if (t.state != ReviewState::Closed) continue;
        auto a = by_key.find({t.task_id, Stage::Adherence});
        if (a == by_key.end()) throw DataIntegrityError("closed task " + t.task_id + " has no adherence label");
        HumanOutcome o{t.model, t.pair_id, t.kind, a->second->value, std::nullopt};
        if (o.adherent) {
            auto ty = by_key.find({t.task_id, Stage::Type});
            if (ty == by_key.end()) throw DataIntegrityError("closed adherent task " + t.task_id + " has no type label");
            o.complex = ty->second->value;
        }
        out.push_back(std::move(o));
    }
    return out;
}

judge::EvaluationReport human_report(std::span<const HumanOutcome> outcomes, const std::string& model,
                                     ReflectionKind kind) {
    std::vector<judge::EvaluationRecord> as_records;
    for (const auto& o : outcomes) {
        if (o.model != model) continue;
        judge::EvaluationRecord r;
        r.pair_id = o.pair_id;
        r.model = o.model;
        r.kind_requested = o.kind;
        r.adherence.value = o.adherent ? judge::Adherence::Adherent : judge::Adherence::NotAdherent;
        if (o.adherent) {
            r.rtype = judge::TypeVerdict{*o.complex ? judge::ReflectionType::Complex : judge::ReflectionType::Simple, {}};
        }
        as_records.push_back(std::move(r));
    }
    auto rep = judge::summarize(as_records, model, kind);
    rep.rater = "human";
    return rep;
}

// ---------------------------------------------------------------- board

ReviewBoard::ReviewBoard(std::vector<ReviewTask> tasks, std::vector<std::string> annotator_pool)
    : tasks_(std::move(tasks)), pool_(std::move(annotator_pool)) {
    for (std::size_t i = 0; i < tasks_.size(); ++i) {
        if (!index_.emplace(tasks_[i].task_id, i).second) {
            throw DataIntegrityError("duplicate task id " + tasks_[i].task_id);
        }
        const std::set<std::string> assigned(tasks_[i].annotators.begin(), tasks_[i].annotators.end());
        if (assigned.size() != 3 || assigned.contains("")) {
            throw DataIntegrityError("task " + tasks_[i].task_id + " needs three distinct annotators");
        }
    }
}

bool ReviewBoard::is_annotator(const std::string& id) const {
    return std::find(pool_.begin(), pool_.end(), id) != pool_.end();
}

void ReviewBoard::set_decision_log(std::filesystem::path path) {
    std::lock_guard lock(mu_);
    log_ = std::move(path);
}

ReviewBoard::SubmitOutcome ReviewBoard::submit(const AnnotatorDecision& d) {
    std::lock_guard lock(mu_);
    auto it = index_.find(d.task_id);
    if (it == index_.end()) throw NotFoundError("unknown task " + d.task_id);
    auto& task = tasks_[it->second];
    if (!is_annotator(d.annotator_id)) throw UnknownAnnotatorError("unknown annotator " + d.annotator_id);
    if (std::find(task.annotators.begin(), task.annotators.end(), d.annotator_id) == task.annotators.end()) {
        throw UnknownAnnotatorError("annotator " + d.annotator_id + " is not assigned to " + d.task_id);
    }

    const Key key{d.task_id, d.annotator_id, d.stage};
    if (auto prior = decisions_.find(key); prior != decisions_.end()) {
        if (prior->second.value != d.value) {
            throw StageOrderError("annotator " + d.annotator_id + " already submitted a different " +
                                  std::string(to_string(d.stage)) + " decision for " + d.task_id);
        }
        return {true, task.state, std::nullopt};
    }

    const Stage expected = task.state == ReviewState::AwaitingType ? Stage::Type : Stage::Adherence;
    if (task.state == ReviewState::Closed) throw StageOrderError("task " + d.task_id + " is closed");
    if (d.stage != expected) {
        throw StageOrderError("task " + d.task_id + " is " + std::string(to_string(task.state)) + ", not accepting " +
                              std::string(to_string(d.stage)) + " decisions");
    }

    if (log_) io::append_jsonl(*log_, to_json(d));
    decisions_.emplace(key, d);
    decision_order_.push_back(d);

    SubmitOutcome out;
    std::vector<AnnotatorDecision> stage_votes;
    for (const auto& a : task.annotators) {
        if (auto v = decisions_.find(Key{d.task_id, a, d.stage}); v != decisions_.end()) stage_votes.push_back(v->second);
    }
    if (stage_votes.size() == 3) {
        auto label = aggregate_majority(stage_votes);
        labels_.push_back(label);
        if (d.stage == Stage::Adherence) {
            advance_task(task, label);
        } else {
            complete_type_stage(task, label);
        }
        out.aggregated = label;
    }
    out.state = task.state;
    return out;
}

bool ReviewBoard::has_decided(const std::string& task_id, const std::string& annotator, Stage stage) const {
    std::lock_guard lock(mu_);
    return decisions_.contains(Key{task_id, annotator, stage});
}

std::vector<ReviewTask> ReviewBoard::open_tasks(const std::string& annotator, std::optional<ReviewState> state) const {
    std::lock_guard lock(mu_);
    std::vector<ReviewTask> out;
    for (const auto& t : tasks_) {
        if (t.state == ReviewState::Closed) continue;
        if (state && t.state != *state) continue;
        if (std::find(t.annotators.begin(), t.annotators.end(), annotator) == t.annotators.end()) continue;
        const Stage stage = t.state == ReviewState::AwaitingType ? Stage::Type : Stage::Adherence;
        if (decisions_.contains(Key{t.task_id, annotator, stage})) continue;
        out.push_back(t);
    }
    return out;
}

Progress ReviewBoard::progress() const {
    std::lock_guard lock(mu_);
    Progress p;
    for (const auto& a : pool_) p.annotators[a];
    for (const auto& t : tasks_) {
        auto& m = p.models[t.model];
        ++m.tasks;
        switch (t.state) {
            case ReviewState::AwaitingAdherence: ++m.awaiting_adherence; break;
            case ReviewState::AwaitingType: ++m.awaiting_type; break;
            case ReviewState::Closed: ++m.closed; break;
        }
        const Stage stage = t.state == ReviewState::AwaitingType ? Stage::Type : Stage::Adherence;
        for (const auto& a : t.annotators) {
            auto& ap = p.annotators[a];
            ++ap.assigned;
            if (decisions_.contains(Key{t.task_id, a, Stage::Adherence})) ++ap.adherence_done;
            if (decisions_.contains(Key{t.task_id, a, Stage::Type})) ++ap.type_done;
            if (t.state != ReviewState::Closed && !decisions_.contains(Key{t.task_id, a, stage})) ++ap.pending;
        }
    }
    return p;
}

std::optional<ReviewTask> ReviewBoard::task(const std::string& task_id) const {
    std::lock_guard lock(mu_);
    auto it = index_.find(task_id);
    if (it == index_.end()) return std::nullopt;
    return tasks_[it->second];
}

std::vector<ReviewTask> ReviewBoard::tasks() const {
    std::lock_guard lock(mu_);
    return tasks_;
}

std::vector<AnnotatorDecision> ReviewBoard::decisions() const {
    std::lock_guard lock(mu_);
    return decision_order_;
}

std::vector<AggregatedLabel> ReviewBoard::labels() const {
    std::lock_guard lock(mu_);
    return labels_;
}

// ---------------------------------------------------------------- json

json to_json(const ReviewTask& t) {
    return {
        {"task_id", t.task_id},
        {"pair_id", t.pair_id},
        {"model", t.model},
        {"kind", std::string(to_string(t.kind))},
        {"question", t.question},
        {"answer", t.answer},
        {"reflection", t.reflection},
        {"stratum", t.stratum},
        {"annotators", t.annotators},
        {"state", std::string(to_string(t.state))},
    };
}

ReviewTask review_task_from_json(const json& j) {
    try {
        ReviewTask t;
        t.task_id = j.at("task_id").get<std::string>();
        t.pair_id = j.at("pair_id").get<std::string>();
        t.model = j.at("model").get<std::string>();
        t.kind = parse_kind(j.at("kind").get<std::string>());
        t.question = j.value("question", std::string{});
        t.answer = j.value("answer", std::string{});
        t.reflection = j.at("reflection").get<std::string>();
        t.stratum = j.value("stratum", corpus::normalize_stratum(t.question));
        const auto ann = j.at("annotators").get<std::vector<std::string>>();
        if (ann.size() != 3) throw DataIntegrityError("task " + t.task_id + " must list exactly 3 annotators");
        std::copy(ann.begin(), ann.end(), t.annotators.begin());
        t.state = parse_state(j.value("state", std::string("awaiting_adherence")));
        return t;
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad review task: ") + e.what());
    }
}

json to_json(const AnnotatorDecision& d) {
    return {{"task_id", d.task_id},
            {"annotator_id", d.annotator_id},
            {"stage", std::string(to_string(d.stage))},
            {"value", d.value},
            {"timestamp_ms", d.timestamp_ms}};
}

AnnotatorDecision decision_from_json(const json& j) {
    try {
        AnnotatorDecision d;
        d.task_id = j.at("task_id").get<std::string>();
        d.annotator_id = j.at("annotator_id").get<std::string>();
        d.stage = parse_stage(j.at("stage").get<std::string>());
        d.value = j.at("value").get<bool>();
        d.timestamp_ms = j.value("timestamp_ms", std::int64_t{0});
        return d;
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad decision: ") + e.what());
    }
}

json to_json(const AggregatedLabel& l) {
    return {{"task_id", l.task_id},
            {"stage", std::string(to_string(l.stage))},
            {"value", l.value},
            {"votes", {{"yes", l.yes}, {"no", l.no}}}};
}

AggregatedLabel label_from_json(const json& j) {
    try {
        AggregatedLabel l;
        l.task_id = j.at("task_id").get<std::string>();
        l.stage = parse_stage(j.at("stage").get<std::string>());
        l.value = j.at("value").get<bool>();
        l.yes = j.at("votes").at("yes").get<int>();
        l.no = j.at("votes").at("no").get<int>();
        if (l.yes + l.no != 3 || l.value != (l.yes >= 2)) {
            throw DataIntegrityError("label for " + l.task_id + " is not a majority of three");
        }
        return l;
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad label: ") + e.what());
    }
}

json to_json(const HumanOutcome& o) {
    json j{{"model", o.model}, {"pair_id", o.pair_id}, {"kind", std::string(to_string(o.kind))}, {"adherent", o.adherent}};
    j["complex"] = o.complex ? json(*o.complex) : json(nullptr);
    return j;
}

HumanOutcome human_outcome_from_json(const json& j) {
    try {
        HumanOutcome o;
        o.model = j.at("model").get<std::string>();
        o.pair_id = j.at("pair_id").get<std::string>();
        o.kind = parse_kind(j.at("kind").get<std::string>());
        o.adherent = j.at("adherent").get<bool>();
        if (j.contains("complex") && !j["complex"].is_null()) o.complex = j["complex"].get<bool>();
        return o;
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad human outcome: ") + e.what());
    }
}

json to_json(const Progress& p) {
    json ann = json::object();
    for (const auto& [id, a] : p.annotators) {
        ann[id] = {{"assigned", a.assigned},
                   {"adherence_done", a.adherence_done},
                   {"type_done", a.type_done},
                   {"pending", a.pending}};
    }
    json models = json::object();
    for (const auto& [id, m] : p.models) {
        models[id] = {{"tasks", m.tasks},
                      {"awaiting_adherence", m.awaiting_adherence},
                      {"awaiting_type", m.awaiting_type},
                      {"closed", m.closed}};
    }
    return {{"annotators", std::move(ann)}, {"models", std::move(models)}};
}

}  // namespace reflect::review
