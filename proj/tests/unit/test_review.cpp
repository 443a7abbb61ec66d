#include <gtest/gtest.h>

#include <map>
#include <random>
#include <set>
#include <thread>

#include "reflect/errors.hpp"
#include "reflect/io.hpp"
#include "reflect/review.hpp"
#include "support.hpp"

using namespace reflect;
using namespace reflect::review;

namespace {

const std::vector<std::string> kPool{"ann-1", "ann-2", "ann-3", "ann-4"};

std::vector<judge::EvaluationRecord> records(std::size_t n, const std::string& model = "m") {
    return testsupport::judged_records(testsupport::synthetic_pairs(n, 9), model, ReflectionKind::Simple,
                                       [](auto i) { return i % 4 != 0; }, [](auto i) { return i % 2 == 0; });
}

std::vector<ReviewTask> assigned(std::size_t n) {
    auto tasks = sample_for_review(records(n), 1.0, 1);
    std::size_t cursor = 0;
    assign_annotators(tasks, kPool, cursor);
    return tasks;
}

AnnotatorDecision vote(const ReviewTask& t, std::size_t a, Stage s, bool v) {
    return {t.task_id, t.annotators[a], s, v, 0};
}

}  // namespace

TEST(Sampling, TargetSizeAndOrder) {
    const auto recs = records(1201);
    const auto tasks = sample_for_review(recs, 0.0508, 3);
    EXPECT_EQ(tasks.size(), 61u);
    for (std::size_t i = 1; i < tasks.size(); ++i) EXPECT_LT(tasks[i - 1].pair_id, tasks[i].pair_id);
    EXPECT_EQ(tasks[0].task_id, task_id_for("m", tasks[0].pair_id));
    EXPECT_EQ(tasks[0].task_id.find('m'), std::string::npos);
    EXPECT_NE(task_id_for("m", "x"), task_id_for("n", "x"));
    EXPECT_NE(sample_for_review(recs, 0.0508, 4), tasks);
}

TEST(Sampling, SameSeedSamePairsAcrossModels) {
    const auto a = sample_for_review(records(500, "a"), 0.1, 8);
    const auto b = sample_for_review(records(500, "b"), 0.1, 8);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].pair_id, b[i].pair_id);
}

// Property: exact target size and per-stratum counts within 1 of the proportional share.
TEST(Sampling, StratumProperty) {
    std::mt19937_64 rng(44);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 1 + rng() % 2000;
        const std::size_t strata = 1 + rng() % 30;
        const double f = (1 + rng() % 1000) / 1000.0;
        const auto recs = testsupport::judged_records(testsupport::synthetic_pairs(n, strata), "m",
                                                      ReflectionKind::Simple, [](auto) { return true; },
                                                      [](auto) { return true; });
        const auto tasks = sample_for_review(recs, f, rng());
        const auto target = static_cast<std::size_t>(std::llround(n * f));
        EXPECT_EQ(tasks.size(), target);
        std::map<std::string, std::size_t> pop, got;
        for (const auto& r : recs) ++pop[corpus::normalize_stratum(r.question)];
        for (const auto& t : tasks) ++got[t.stratum];
        for (const auto& [s, k] : pop) EXPECT_LT(std::abs(got[s] - static_cast<double>(k) * target / n), 1.0);
    }
}

TEST(Sampling, RejectsBadFraction) {
    EXPECT_THROW(sample_for_review(records(10), 0.0, 1), ConfigError);
    EXPECT_THROW(sample_for_review(records(10), 1.5, 1), ConfigError);
    EXPECT_THROW(sample_for_review({}, 0.5, 1), ValidationError);
}

TEST(Assignment, RoundRobinDistinctTriples) {
    auto tasks = sample_for_review(records(40), 1.0, 1);
    std::size_t cursor = 0;
    assign_annotators(tasks, kPool, cursor);
    std::map<std::string, int> load;
    for (const auto& t : tasks) {
        EXPECT_EQ(std::set<std::string>(t.annotators.begin(), t.annotators.end()).size(), 3u);
        for (const auto& a : t.annotators) ++load[a];
    }
    for (const auto& [a, n] : load) EXPECT_EQ(n, 30);
    const std::vector<std::string> dup{"a", "a", "b"};
    EXPECT_THROW(assign_annotators(tasks, dup, cursor), ConfigError);
}

TEST(Majority, TwoOfThree) {
    const auto t = assigned(1)[0];
    const std::vector<AnnotatorDecision> d{vote(t, 0, Stage::Adherence, true), vote(t, 1, Stage::Adherence, false),
                                           vote(t, 2, Stage::Adherence, true)};
    const auto l = aggregate_majority(d);
    EXPECT_TRUE(l.value);
    EXPECT_EQ(l.yes, 2);
    EXPECT_EQ(l.no, 1);
    EXPECT_THROW(aggregate_majority(std::span(d).first(2)), IncompleteTaskError);
    auto repeated = d;
    repeated[2].annotator_id = repeated[0].annotator_id;
    EXPECT_THROW(aggregate_majority(repeated), DataIntegrityError);
}

TEST(Advance, StateMachine) {
    auto t = assigned(1)[0];
    AggregatedLabel yes{t.task_id, Stage::Adherence, true, 3, 0};
    EXPECT_EQ(advance_task(t, yes).state, ReviewState::AwaitingType);
    EXPECT_TRUE(advance_task(t, yes).warning.has_value());
    EXPECT_EQ(complete_type_stage(t, {t.task_id, Stage::Type, false, 1, 2}).state, ReviewState::Closed);
    auto u = assigned(1)[0];
    EXPECT_EQ(advance_task(u, {u.task_id, Stage::Adherence, false, 1, 2}).state, ReviewState::Closed);
}

TEST(Board, FullFlowAndOutcomes) {
    testsupport::TempDir tmp;
    const auto tasks = assigned(2);
    ReviewBoard board(tasks, kPool);
    board.set_decision_log(tmp.path() / "log.jsonl");
    const auto& a = tasks[0];
    const auto& b = tasks[1];
    for (std::size_t i = 0; i < 3; ++i) board.submit(vote(a, i, Stage::Adherence, true));
    EXPECT_EQ(board.task(a.task_id)->state, ReviewState::AwaitingType);
    for (std::size_t i = 0; i < 3; ++i) board.submit(vote(a, i, Stage::Type, i == 0));
    for (std::size_t i = 0; i < 3; ++i) board.submit(vote(b, i, Stage::Adherence, i == 0));
    EXPECT_EQ(board.task(a.task_id)->state, ReviewState::Closed);
    EXPECT_EQ(board.task(b.task_id)->state, ReviewState::Closed);

    const auto outcomes = human_outcomes(board.tasks(), board.labels());
    ASSERT_EQ(outcomes.size(), 2u);
    EXPECT_TRUE(outcomes[0].adherent);
    EXPECT_EQ(outcomes[0].complex, false);
    EXPECT_FALSE(outcomes[1].adherent);
    EXPECT_FALSE(outcomes[1].complex.has_value());
    EXPECT_EQ(io::read_jsonl(tmp.path() / "log.jsonl").size(), 9u);

    const auto rep = human_report(outcomes, "m", ReflectionKind::Simple);
    EXPECT_EQ(rep.rater, "human");
    EXPECT_DOUBLE_EQ(rep.adherence_rate, 0.5);
    EXPECT_EQ(rep.n_stage2, 1u);
}

TEST(Board, SubmitErrors) {
    const auto tasks = assigned(1);
    const auto& t = tasks[0];
    ReviewBoard board(tasks, kPool);
    EXPECT_THROW(board.submit({"nope", t.annotators[0], Stage::Adherence, true, 0}), NotFoundError);
    EXPECT_THROW(board.submit({t.task_id, "stranger", Stage::Adherence, true, 0}), UnknownAnnotatorError);
    std::string outsider;
    for (const auto& p : kPool) {
        if (std::find(t.annotators.begin(), t.annotators.end(), p) == t.annotators.end()) outsider = p;
    }
    EXPECT_THROW(board.submit({t.task_id, outsider, Stage::Adherence, true, 0}), UnknownAnnotatorError);
    EXPECT_THROW(board.submit(vote(t, 0, Stage::Type, true)), StageOrderError);

    EXPECT_FALSE(board.submit(vote(t, 0, Stage::Adherence, true)).duplicate);
    EXPECT_TRUE(board.submit(vote(t, 0, Stage::Adherence, true)).duplicate);
    EXPECT_THROW(board.submit(vote(t, 0, Stage::Adherence, false)), StageOrderError);
    board.submit(vote(t, 1, Stage::Adherence, false));
    board.submit(vote(t, 2, Stage::Adherence, false));
    EXPECT_THROW(board.submit(vote(t, 0, Stage::Type, true)), StageOrderError);
    EXPECT_EQ(board.decisions().size(), 3u);
}

TEST(Board, OpenTasksAndProgress) {
    const auto tasks = assigned(6);
    ReviewBoard board(tasks, kPool);
    const auto mine = board.open_tasks("ann-1");
    for (const auto& t : mine) EXPECT_NE(std::find(t.annotators.begin(), t.annotators.end(), "ann-1"), t.annotators.end());
    board.submit({mine[0].task_id, "ann-1", Stage::Adherence, true, 0});
    EXPECT_EQ(board.open_tasks("ann-1").size(), mine.size() - 1);
    const auto p = board.progress();
    EXPECT_EQ(p.annotators.at("ann-1").adherence_done, 1u);
    EXPECT_EQ(p.models.at("m").tasks, 6u);
}

// Concurrent submissions of complete vote sets must leave every task closed exactly once.
TEST(Board, ConcurrentSubmissions) {
    const auto tasks = assigned(30);
    ReviewBoard board(tasks, kPool);
    std::vector<std::thread> threads;
    for (std::size_t a = 0; a < 3; ++a) {
        threads.emplace_back([&, a] {
            for (const auto& t : tasks) {
                board.submit(vote(t, a, Stage::Adherence, false));
                board.submit(vote(t, a, Stage::Adherence, false));
            }
        });
    }
    for (auto& th : threads) th.join();
    for (const auto& t : board.tasks()) EXPECT_EQ(t.state, ReviewState::Closed);
    EXPECT_EQ(board.labels().size(), 30u);
}

TEST(ReviewJson, RoundTrips) {
    const auto t = assigned(1)[0];
    EXPECT_EQ(review_task_from_json(to_json(t)), t);
    const AnnotatorDecision d{t.task_id, "ann-1", Stage::Type, true, 17};
    EXPECT_EQ(decision_from_json(to_json(d)), d);
    const AggregatedLabel l{t.task_id, Stage::Adherence, false, 1, 2};
    EXPECT_EQ(label_from_json(to_json(l)), l);
    auto bad = to_json(l);
    bad["value"] = true;
    EXPECT_ANY_THROW(label_from_json(bad));
}
