// Acceptance checks. One PASS/FAIL line per criterion; exit status is the number of failures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "reflect/cli.hpp"
#include "reflect/corpus.hpp"
#include "reflect/digest.hpp"
#include "reflect/io.hpp"
#include "reflect/judge.hpp"
#include "reflect/metrics.hpp"
#include "reflect/model_client.hpp"
#include "reflect/prompts.hpp"
#include "reflect/review.hpp"
#include "reflect/text.hpp"
#include "support.hpp"

using namespace reflect;
using nlohmann::json;
namespace ts = testsupport;
namespace fs = std::filesystem;

namespace {

// Tolerances and limits.
constexpr double kKappaTol = 1e-12;
constexpr double kF1Tol = 1e-12;

struct Outcome {
    bool ok = true;
    std::string detail;
};

class Check {
  public:
    explicit Check(Outcome& o) : o_(o) {}
    void expect(bool cond, const std::string& what) {
        if (!cond && o_.ok) {
            o_.ok = false;
            o_.detail = what;
        }
    }

  private:
    Outcome& o_;
};

int failures = 0;

void criterion(const std::string& name, std::chrono::milliseconds limit, const std::function<void(Check&, Outcome&)>& body) {
    Outcome out;
    Check c(out);
    const auto t0 = std::chrono::steady_clock::now();
    try {
        body(c, out);
    } catch (const std::exception& e) {
        out.ok = false;
        out.detail = std::string("exception: ") + e.what();
    }
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0);
    if (out.ok && ms > limit) {
        out.ok = false;
        out.detail = fmt::format("took {} ms, limit {} ms", ms.count(), limit.count());
    }
    if (!out.ok) ++failures;
    std::cout << fmt::format("{} {} ({} ms){}{}\n", out.ok ? "PASS" : "FAIL", name, ms.count(),
                             out.detail.empty() ? "" : ": ", out.detail)
              << std::flush;
}

using namespace std::chrono_literals;

client::ModelEndpoint mock_endpoint(const std::string& name) { return {name, "mock://" + name, name, "", 4}; }

client::ModelClient offline_client(std::shared_ptr<client::MockBackend> backend) {
    client::ModelClient::Options opts;
    opts.sleeper = [](std::chrono::milliseconds) {};
    return client::ModelClient(std::move(backend), std::move(opts));
}

std::string user_index(const prompts::ChatPrompt& p) {
    return p.user_message.substr(p.user_message.rfind(' ') + 1);
}

// Brute-force kappa straight from the definition: label frequencies per rater.
double kappa_oracle(const std::vector<std::pair<bool, bool>>& pairs) {
    const double n = static_cast<double>(pairs.size());
    double agree = 0, a1 = 0, b1 = 0;
    for (const auto& [a, b] : pairs) {
        agree += (a == b) ? 1 : 0;
        a1 += a ? 1 : 0;
        b1 += b ? 1 : 0;
    }
    const double po = agree / n;
    const double pe = (a1 / n) * (b1 / n) + ((n - a1) / n) * ((n - b1) / n);
    return (po - pe) / (1 - pe);
}

void split_arithmetic() {
    criterion("split arithmetic 4194 -> 2394/599/1201, stable over 5 reruns", 5000ms, [](Check& c, Outcome& o) {
        std::vector<corpus::QAPair> pairs;
        for (std::size_t f = 0; f < 3; ++f) {
            const auto raw = ts::synthetic_transcript(1398, 40, f * 1398);
            const auto u = corpus::parse_transcripts(raw);
            auto p = corpus::extract_qa_pairs(u, fmt::format("file{}", f));
            pairs.insert(pairs.end(), p.begin(), p.end());
        }
        c.expect(pairs.size() == 4194, fmt::format("ingested {} pairs", pairs.size()));
        std::optional<std::vector<corpus::QAPair>> first;
        for (int run = 0; run < 5; ++run) {
            const auto r = corpus::split_dataset(pairs, corpus::SplitFractions::reference(), 20240601);
            const auto& k = r.manifest.counts;
            c.expect(k.train == 2394 && k.validation == 599 && k.holdout == 1201,
                     fmt::format("counts {}/{}/{}", k.train, k.validation, k.holdout));
            std::size_t tr = 0, va = 0, ho = 0;
            for (const auto& p : r.pairs) (p.split == Split::Train ? tr : p.split == Split::Validation ? va : ho)++;
            c.expect(tr == 2394 && va == 599 && ho == 1201, "assigned labels disagree with manifest");
            if (!first) first = r.pairs;
            c.expect(*first == r.pairs, fmt::format("rerun {} differs", run));
        }
        o.detail = "(2394, 599, 1201)";
    });
}

void golden_records() {
    criterion("golden fine-tune records reproduce byte-for-byte", 1000ms, [](Check& c, Outcome&) {
        ReflectionRecord simple{"golden-1", ReflectionKind::Simple,
                                "Now, what is the thing you like least about smoking?",
                                "That I have to hide it from my family.",
                                "You feel the need to keep your smoking habit a secret from your family.",
                                "teacher", Split::Train};
        ReflectionRecord complex = simple;
        complex.kind = ReflectionKind::Complex;
        complex.reflection = "You're feeling guilty and secretive about your smoking habit.";

        const auto want_s = ts::entry_from_latex(ts::slurp(ts::data_dir() / "finetune_simple.tex"));
        const auto want_c = ts::entry_from_latex(ts::slurp(ts::data_dir() / "finetune_complex.tex"));
        const auto got_s = prompts::render_finetune_record(prompts::PromptKind::SimpleGeneration, simple);
        const auto got_c = prompts::render_finetune_record(prompts::PromptKind::ComplexGeneration, complex);
        c.expect(got_s == want_s, "simple entry differs:\n" + got_s + "---\n" + want_s);
        c.expect(got_c == want_c, "complex entry differs:\n" + got_c + "---\n" + want_c);
        c.expect(got_s.starts_with("### Instruction:\n"), "missing instruction header");
    });
}

void prompt_fidelity() {
    criterion("built-in prompts match pinned digests of the reference texts", 1000ms, [](Check& c, Outcome&) {
        const std::map<prompts::PromptKind, std::pair<std::string, std::string>> pinned{
            {prompts::PromptKind::SimpleGeneration,
             {"simple_generation", "1c93ad67d0230ab5f1a6db936930ff60696e25509bc59af6d432fb479142dc26"}},
            {prompts::PromptKind::ComplexGeneration,
             {"complex_generation", "1f11a56f00bd7d5bc2fd94785c97ff2737c87ce184a371c64ef44ff182c6c04e"}},
            {prompts::PromptKind::MiAdherence,
             {"mi_adherence", "2bef581a8b46abdb26563594fe04d705009fed3fdff95e10a7e7f2d020324024"}},
            {prompts::PromptKind::ReflectionTypeCls,
             {"reflection_type_cls", "7e2ebcb6e09f2f4c168501a601efd63c20ced80acc9a2ed7d049b55b3750bd5b"}},
        };
        for (const auto& [kind, p] : pinned) {
            const auto& [file, digest] = p;
            const auto expected = ts::prompt_from_latex(ts::slurp(ts::data_dir() / "prompts" / (file + ".tex")));
            c.expect(sha256_hex(expected) == digest, file + ": fixture does not hash to the pinned digest");
            c.expect(std::string(prompts::builtin_prompt(kind)) == expected, file + ": built-in text differs");
            c.expect(prompts::prompt_digest(kind) == digest, file + ": digest " + prompts::prompt_digest(kind));
        }
        c.expect(prompts::builtin_prompt(prompts::PromptKind::MiAdherence)
                         .find("output \"True\"; otherwise, output \"False\"") != std::string_view::npos,
                 "True/False instruction missing");
    });
}

void gate_invariant() {
    criterion("gate: no stage-2 call for False or unparseable items (1000 items)", 10000ms, [](Check& c, Outcome& o) {
        const auto pairs = ts::synthetic_pairs(1000, 25);
        auto recs = ts::reflections_for(pairs, ReflectionKind::Simple);
        for (std::size_t i = 0; i < recs.size(); ++i) recs[i].reflection = fmt::format("item {}", i);
        // i % 3: 0 -> True, 1 -> False, 2 -> unparseable
        auto mock = std::make_shared<client::MockBackend>(
            [](const prompts::ChatPrompt& p) -> std::optional<std::string> {
                const auto i = std::stoul(user_index(p));
                if (p.system_role.starts_with("Decide whether the \"reflection\" sentence in the following "
                                              "smoking-related conversation meets")) {
                    return i % 3 == 0 ? "True" : i % 3 == 1 ? "False." : "I cannot say";
                }
                return i % 2 ? "complex" : "simple";
            },
            std::nullopt);
        auto cl = offline_client(mock);
        judge::EvaluationOptions opts;
        opts.model = "gate-model";
        const auto result = judge::evaluate_model(recs, mock_endpoint("judge"), cl, opts);

        std::vector<int> stage1(1000, 0), stage2(1000, 0);
        for (const auto& call : mock->calls()) {
            const auto i = std::stoul(user_index(call.prompt));
            (call.prompt.system_role == prompts::builtin_prompt(prompts::PromptKind::MiAdherence) ? stage1 : stage2)[i]++;
        }
        std::size_t leaks = 0, missing = 0;
        for (std::size_t i = 0; i < 1000; ++i) {
            const bool adherent = result.records[i].adherence.value == judge::Adherence::Adherent;
            c.expect(adherent == (i % 3 == 0), fmt::format("item {} verdict wrong", i));
            if (!adherent && stage2[i] != 0) ++leaks;
            if (adherent && stage2[i] != 1) ++missing;
            c.expect(stage1[i] == (i % 3 == 2 ? 2 : 1), fmt::format("item {} stage-1 calls {}", i, stage1[i]));
        }
        c.expect(leaks == 0, fmt::format("{} stage-2 leaks", leaks));
        c.expect(missing == 0, fmt::format("{} adherent items without exactly one stage-2 call", missing));
        c.expect(result.report.n_stage2 == 334, fmt::format("n_stage2 {}", result.report.n_stage2));
        o.detail = fmt::format("{} calls logged, 0 leaks", mock->call_count());
    });
}

void report_arithmetic() {
    criterion("report arithmetic: 1189/1201 True -> 0.99, n_stage2 = 1189", 30000ms, [](Check& c, Outcome& o) {
        const auto pairs = ts::synthetic_pairs(1201, 30);
        auto recs = ts::reflections_for(pairs, ReflectionKind::Simple);
        for (std::size_t i = 0; i < recs.size(); ++i) recs[i].reflection = fmt::format("item {}", i);
        auto mock = std::make_shared<client::MockBackend>(
            [](const prompts::ChatPrompt& p) -> std::optional<std::string> {
                const auto i = std::stoul(user_index(p));
                if (p.system_role == prompts::builtin_prompt(prompts::PromptKind::MiAdherence)) {
                    return i < 1189 ? "True" : "False";
                }
                return i % 4 == 0 ? "complex" : "simple";
            },
            std::nullopt);
        auto cl = offline_client(mock);
        judge::EvaluationOptions opts;
        opts.model = "teacher-simple";
        const auto r = judge::evaluate_model(recs, mock_endpoint("judge"), cl, opts).report;
        c.expect(r.n_total == 1201, fmt::format("n_total {}", r.n_total));
        c.expect(r.n_adherent == 1189, fmt::format("n_adherent {}", r.n_adherent));
        c.expect(r.n_stage2 == 1189, fmt::format("n_stage2 {}", r.n_stage2));
        c.expect(fmt::format("{:.2f}", r.adherence_rate) == "0.99", fmt::format("adherence {}", r.adherence_rate));
        c.expect(std::abs(r.adherence_rate - 1189.0 / 1201.0) < 1e-12, "raw adherence rate");
        c.expect(metrics::success_rate(1189, 1201).rounded == 0.99, "success_rate rounding");
        // n_stage2 recovered from the table as size x rate
        c.expect(std::llround(1201 * r.adherence_rate) == 1189, "size x rate does not recover n_stage2");
        c.expect(r.n_simple + r.n_complex == 1189, "type counts do not add up");
        const std::size_t stage2_calls = mock->call_count() - 1201;
        c.expect(stage2_calls == 1189, fmt::format("{} stage-2 calls", stage2_calls));
        o.detail = fmt::format("adherence {:.6f}", r.adherence_rate);
    });
}

void kappa_oracle_check() {
    criterion("kappa matches brute-force oracle on 200 random sets; strength labels", 10000ms, [](Check& c, Outcome& o) {
        std::mt19937_64 rng(7);
        double worst = 0;
        int degenerate = 0;
        for (int set = 0; set < 200; ++set) {
            const std::size_t n = 1 + rng() % 1000;
            double pa = (rng() % 1001) / 1000.0;
            double flip = (rng() % 1001) / 1000.0;
            if (set % 20 == 0) {
                pa = set % 40 == 0 ? 1.0 : 0.0;
                flip = 0.0;
            }
            std::vector<std::pair<bool, bool>> pairs;
            for (std::size_t i = 0; i < n; ++i) {
                const bool a = (rng() % 1000) < pa * 1000;
                const bool b = (rng() % 1000) < flip * 1000 ? !a : a;
                pairs.emplace_back(a, b);
            }
            const auto k = metrics::cohen_kappa(pairs);
            const bool all_same = std::all_of(pairs.begin(), pairs.end(), [&](auto& p) {
                return p.first == pairs[0].first && p.second == pairs[0].first;
            });
            if (all_same) {
                ++degenerate;
                c.expect(k.degenerate && k.kappa == 1.0, "single shared label should give kappa 1");
                continue;
            }
            const double want = kappa_oracle(pairs);
            worst = std::max(worst, std::abs(k.kappa - want));
            c.expect(std::abs(k.kappa - want) <= kKappaTol, fmt::format("set {}: {} vs {}", set, k.kappa, want));
        }
        std::vector<std::pair<bool, bool>> perfect;
        for (int i = 0; i < 50; ++i) perfect.emplace_back(i % 3 == 0, i % 3 == 0);
        c.expect(metrics::cohen_kappa(perfect).kappa == 1.0, "perfect agreement is not 1.0");
        c.expect(metrics::kappa_strength(0.66) == metrics::KappaStrength::Substantial, "0.66 not substantial");
        c.expect(metrics::kappa_strength(0.54) == metrics::KappaStrength::BelowSubstantial, "0.54 labelled substantial");
        c.expect(metrics::kappa_strength(0.6) == metrics::KappaStrength::Substantial, "threshold is inclusive");
        o.detail = fmt::format("max |diff| {:.2e}, {} degenerate sets", worst, degenerate);
    });
}

void prf_consistency() {
    criterion("F1 is the harmonic mean of P and R; reference triple consistent at 2 dp", 1000ms, [](Check& c, Outcome& o) {
        std::mt19937_64 rng(11);
        for (int set = 0; set < 200; ++set) {
            const std::size_t n = 1 + rng() % 500;
            auto gold = std::make_unique<bool[]>(n);
            auto pred = std::make_unique<bool[]>(n);
            std::size_t tp = 0, fp = 0, fn = 0;
            for (std::size_t i = 0; i < n; ++i) {
                gold[i] = rng() % 3 != 0;
                pred[i] = rng() % 4 != 0;
                tp += gold[i] && pred[i];
                fp += !gold[i] && pred[i];
                fn += gold[i] && !pred[i];
            }
            const auto s = metrics::precision_recall_f1({gold.get(), n}, {pred.get(), n});
            if (tp == 0) continue;
            const double p = static_cast<double>(tp) / static_cast<double>(tp + fp);
            const double r = static_cast<double>(tp) / static_cast<double>(tp + fn);
            c.expect(std::abs(s.precision - p) <= kF1Tol && std::abs(s.recall - r) <= kF1Tol, "P/R mismatch");
            c.expect(std::abs(s.f1 - 2 * p * r / (p + r)) <= kF1Tol, fmt::format("set {} F1 {}", set, s.f1));
        }
        c.expect(metrics::f1_consistent(0.967, 0.935, 0.951, 2), "reference triple fails at 2 dp");
        o.detail = fmt::format("hm(0.967, 0.935) = {:.5f}", metrics::harmonic_mean(0.967, 0.935));
    });
}

void stratified_sampling() {
    criterion("stratified review sample: 61 of 1201, per-stratum within 1, deterministic", 5000ms, [](Check& c, Outcome& o) {
        const auto pairs = ts::synthetic_pairs(1201, 17);
        const auto recs = ts::judged_records(pairs, "m", ReflectionKind::Simple, [](auto) { return true; },
                                             [](auto) { return false; });
        const auto a = review::sample_for_review(recs, 0.0508, 99);
        const auto b = review::sample_for_review(recs, 0.0508, 99);
        c.expect(a.size() == 61, fmt::format("{} tasks", a.size()));
        c.expect(a == b, "same seed gave different samples");
        std::map<std::string, std::size_t> pop, got;
        for (const auto& p : pairs) ++pop[p.stratum];
        for (const auto& t : a) ++got[t.stratum];
        double worst = 0;
        for (const auto& [s, n] : pop) {
            const double share = static_cast<double>(n) * 61.0 / 1201.0;
            worst = std::max(worst, std::abs(static_cast<double>(got[s]) - share));
        }
        c.expect(worst < 1.0, fmt::format("stratum off by {}", worst));
        std::set<std::string> ids;
        for (const auto& t : a) ids.insert(t.pair_id);
        c.expect(ids.size() == 61, "duplicate picks");
        o.detail = fmt::format("{} strata, max deviation {:.3f}", pop.size(), worst);
    });
}

void overlap_join_sizes() {
    criterion("overlap join: 305 adherence pairs per task kind, type pairs = both-adherent", 5000ms,
              [](Check& c, Outcome& o) {
        const auto pairs = ts::synthetic_pairs(1201, 20);
        std::vector<judge::EvaluationRecord> judged;
        std::vector<review::HumanOutcome> human;
        std::map<ReflectionKind, std::size_t> both;
        for (auto kind : kAllKinds) {
            for (int m = 0; m < 5; ++m) {
                const auto model = fmt::format("{}-model-{}", to_string(kind), m);
                auto recs = ts::judged_records(pairs, model, kind, [m](std::size_t i) { return (i + m) % 5 != 0; },
                                               [](std::size_t i) { return i % 2 == 0; });
                const auto tasks = review::sample_for_review(recs, 0.0508, 1234);
                c.expect(tasks.size() == 61, "sample size");
                std::map<std::string, const judge::EvaluationRecord*> by_id;
                for (const auto& r : recs) by_id[r.pair_id] = &r;
                for (std::size_t t = 0; t < tasks.size(); ++t) {
                    review::HumanOutcome h{model, tasks[t].pair_id, kind, t % 4 != 1, std::nullopt};
                    if (h.adherent) h.complex = t % 3 == 0;
                    if (h.adherent && by_id[h.pair_id]->adherence.value == judge::Adherence::Adherent) ++both[kind];
                    human.push_back(h);
                }
                judged.insert(judged.end(), recs.begin(), recs.end());
            }
        }
        const auto j = metrics::overlap_join(judged, human);
        for (auto kind : kAllKinds) {
            const auto a = std::count_if(j.adherence.begin(), j.adherence.end(), [&](auto& p) { return p.kind == kind; });
            const auto t = std::count_if(j.type.begin(), j.type.end(), [&](auto& p) { return p.kind == kind; });
            c.expect(a == 305, fmt::format("{}: {} adherence pairs", to_string(kind), a));
            c.expect(static_cast<std::size_t>(t) == both[kind],
                     fmt::format("{}: {} type pairs, {} both adherent", to_string(kind), t, both[kind]));
        }
        o.detail = fmt::format("type pairs simple {} complex {}", both[ReflectionKind::Simple],
                               both[ReflectionKind::Complex]);
    });
}

json e2e_config(const fs::path& dir) {
    const json teacher_mock{
        {"rules", json::array({{{"match", "The following is an interaction between you and a user*"},
                                {"response", "\"Perhaps you worry that {{user_message}}\""}}})},
        {"default", "You said {{user_message}}"}};
    const json judge_mock{
        {"rules", json::array({
                      {{"match", "*Motivational Interviewing*Answer *7 from*"}, {"response", "False"}},
                      {{"match", "*Motivational Interviewing*"}, {"response", "True."}},
                      {{"match", "*SIMPLE or COMPLEX*reflection: Perhaps*"}, {"response", "Complex"}},
                      {{"match", "*SIMPLE or COMPLEX*Answer *3 from*"}, {"response", "complex"}},
                  })},
        {"default", "simple"}};
    const json student_mock{{"default", "You mentioned {{user_message}}"}};
    return {
        {"output_dir", (dir / "runs").string()},
        {"corpus", {{"transcripts", json::array({"transcripts"})}, {"split", {{"seed", 42}}}}},
        {"endpoints", json::array({
                          {{"name", "teacher"}, {"base_url", "mock://teacher"}, {"mock", teacher_mock}},
                          {{"name", "judge"}, {"base_url", "mock://judge"}, {"mock", judge_mock}},
                          {{"name", "student-small"}, {"base_url", "mock://student"}, {"mock", student_mock}},
                      })},
        {"teacher", {{"endpoint", "teacher"}}},
        {"judge", {{"endpoint", "judge"}}},
        {"candidates", json::array({
                           {{"name", "teacher-simple"}, {"kind", "simple"}, {"from_teacher", true}},
                           {{"name", "teacher-complex"}, {"kind", "complex"}, {"from_teacher", true}},
                           {{"name", "student-small-simple"},
                            {"kind", "simple"},
                            {"endpoint", "student-small"},
                            {"size", "124M"},
                            {"manifest_name", "GPT-2 Small - Simple"}},
                       })},
        {"review", {{"seed", 7}, {"annotators", json::array({"ann-a", "ann-b", "ann-c", "ann-d"})}}},
        {"client", {{"initial_backoff_ms", 1}, {"max_backoff_ms", 2}}},
    };
}

// Every assigned annotator votes; the last one disagrees on some items.
std::string synthetic_decisions(const fs::path& tasks_file) {
    std::string out;
    std::int64_t ts = 1'700'000'000'000;
    for (const auto& t : io::read_jsonl(tasks_file)) {
        const auto id = t.at("task_id").get<std::string>();
        const auto ann = t.at("annotators").get<std::vector<std::string>>();
        const auto reflection = t.at("reflection").get<std::string>();
        const auto h = std::hash<std::string>{}(id);
        const bool adherent = h % 6 != 0;
        const bool complex = reflection.starts_with("Perhaps") ? h % 9 != 0 : h % 9 == 0;
        for (std::size_t a = 0; a < 3; ++a) {
            const bool v = (a == 2 && h % 5 == 0) ? !adherent : adherent;
            out += json{{"task_id", id}, {"annotator_id", ann[a]}, {"stage", "adherence"}, {"value", v},
                        {"timestamp_ms", ts++}}.dump() + "\n";
        }
        if (!adherent) continue;
        for (std::size_t a = 0; a < 3; ++a) {
            const bool v = (a == 1 && h % 7 == 0) ? !complex : complex;
            out += json{{"task_id", id}, {"annotator_id", ann[a]}, {"stage", "type"}, {"value", v},
                        {"timestamp_ms", ts++}}.dump() + "\n";
        }
    }
    return out;
}

void end_to_end() {
    criterion("end-to-end offline CLI run exits 0 with results and agreement tables", 120000ms, [](Check& c, Outcome& o) {
        ts::TempDir tmp;
        fs::create_directories(tmp.path() / "transcripts");
        for (std::size_t f = 0; f < 3; ++f) {
            io::write_file_atomic(tmp.path() / "transcripts" / fmt::format("session{}.txt", f),
                                  ts::synthetic_transcript(1398, 40, f * 1398));
        }
        const auto cfg = tmp.path() / "config.json";
        io::write_file_atomic(cfg, e2e_config(tmp.path()).dump(2));

        std::ostringstream out, err;
        auto step = [&](std::vector<std::string> args) {
            args.insert(args.begin(), {"reflect"});
            args.insert(args.begin() + 2, {"--config", cfg.string()});
            if (args[1] != "ingest") args.insert(args.end(), {"--run", "e2e"});
            const int code = cli::run(args, out, err);
            c.expect(code == 0, fmt::format("`{}` exited {}: {}", args[1], code, err.str()));
            return code;
        };
        step({"ingest", "--run-id", "e2e"});
        step({"split"});
        step({"generate", "--kind", "all"});
        step({"export-finetune"});
        step({"evaluate", "--all"});
        step({"sample-review"});
        const auto run = tmp.path() / "runs" / "e2e";
        io::write_file_atomic(tmp.path() / "decisions.jsonl", synthetic_decisions(run / "review" / "tasks.jsonl"));
        step({"aggregate", "--decisions", (tmp.path() / "decisions.jsonl").string()});
        step({"agreement"});
        step({"report"});
        if (!o.ok) return;

        const auto manifest = json::parse(io::read_file(run / "split_manifest.json"));
        c.expect(manifest["counts"]["holdout"] == 1201, "holdout size");
        for (const auto* f : {"finetune/simple_train.jsonl", "finetune/complex_train.jsonl", "finetune/manifest.json"}) {
            c.expect(fs::is_regular_file(run / f), std::string(f) + " missing");
        }
        c.expect(io::read_jsonl(run / "finetune/simple_train.jsonl").size() == 2394, "simple train lines");

        const auto table = io::read_file(run / "report_e2e.csv");
        const auto lines = text::split_lines(table);
        c.expect(lines.size() >= 4, "report rows");
        c.expect(lines[0] ==
                     "model,task,size,n_judge,adherence_judge,adherence_hr,simple_judge,simple_hr,complex_judge,"
                     "complex_hr,n_stage2_judge,n_hr,n_stage2_hr",
                 "report header: " + std::string(lines[0]));
        for (std::size_t i = 1; i < lines.size(); ++i) {
            if (lines[i].empty()) continue;
            const auto cells = std::count(lines[i].begin(), lines[i].end(), ',') + 1;
            c.expect(cells == 13, "report row width");
            c.expect(lines[i].find(",1201,") != std::string_view::npos, "report row without n=1201");
            c.expect(lines[i].find(",61,") != std::string_view::npos, "report row without human n=61");
        }

        const auto agreement = io::read_file(run / "agreement_e2e.csv");
        const auto alines = text::split_lines(agreement);
        c.expect(alines[0] == "task,stage,n,p_o,p_e,kappa,strength", "agreement header");
        c.expect(alines.size() >= 7, "agreement rows");
        const auto prf = io::read_file(run / "prf_e2e.csv");
        c.expect(prf.starts_with("stage,n,precision,recall,f1"), "prf header");

        const auto record = json::parse(io::read_file(run / "run.json"));
        c.expect(record["steps"].size() == 9, fmt::format("{} steps recorded", record["steps"].size()));
        o.detail = fmt::format("{} report rows, {} agreement rows", lines.size() - 1, alines.size() - 1);
    });
}

}  // namespace

int main() {
    split_arithmetic();
    golden_records();
    prompt_fidelity();
    gate_invariant();
    report_arithmetic();
    kappa_oracle_check();
    prf_consistency();
    stratified_sampling();
    overlap_join_sizes();
    end_to_end();
    std::cout << fmt::format("{} failure(s)\n", failures);
    return failures == 0 ? 0 : 1;
}
