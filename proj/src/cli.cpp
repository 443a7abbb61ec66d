#include "reflect/cli.hpp"

#include <algorithm>
#include <csignal>
#include <functional>
#include <iostream>
#include <map>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "reflect/annotation_api.hpp"
#include "reflect/config.hpp"
#include "reflect/corpus.hpp"
#include "reflect/digest.hpp"
#include "reflect/distill.hpp"
#include "reflect/errors.hpp"
#include "reflect/io.hpp"
#include "reflect/judge.hpp"
#include "reflect/metrics.hpp"
#include "reflect/review.hpp"
#include "reflect/run.hpp"

namespace reflect::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Work completed but some of it failed; artifacts already written stay in place.
class PartialFailure : public Error {
  public:
    using Error::Error;
};

struct Context {
    config::RunConfig cfg;
    run::RunRecord record;
    std::ostream& out;
    std::ostream& err;

    fs::path path(const std::string& rel) const { return record.dir() / rel; }
};

std::string file_safe(std::string_view name) {
    std::string s(name);
    for (auto& c : s) {
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_' && c != '.') c = '_';
    }
    return s;
}

std::unique_ptr<client::ModelClient> make_client(const config::RunConfig& cfg) {
    client::ModelClient::Options opts;
    opts.retry = cfg.client.retry;
    if (cfg.client.cache) opts.cache_dir = cfg.output_dir / "cache";
    auto c = std::make_unique<client::ModelClient>(std::make_shared<client::HttpBackend>(), std::move(opts));
    for (const auto& e : cfg.endpoints) {
        if (e.is_mock()) c->route(e.endpoint.name, client::MockBackend::from_json(*e.mock_script));
    }
    return c;
}

template <typename T, typename F>
std::vector<T> load_jsonl(const fs::path& path, F from_json, const std::string& hint) {
    if (!fs::is_regular_file(path)) throw ValidationError(path.string() + " is missing (run `" + hint + "` first)");
    std::vector<T> out;
    for (const auto& row : io::read_jsonl(path)) out.push_back(from_json(row));
    return out;
}

template <typename T>
std::vector<json> to_rows(const std::vector<T>& items) {
    std::vector<json> rows;
    rows.reserve(items.size());
    for (const auto& i : items) rows.push_back(to_json(i));
    return rows;
}

std::vector<corpus::QAPair> load_split_corpus(const Context& ctx) {
    return load_jsonl<corpus::QAPair>(ctx.path("corpus_split.jsonl"), corpus::qa_pair_from_json, "split");
}

distill::FinetuneDataset load_reflections(const Context& ctx, ReflectionKind kind) {
    const auto base = std::string("reflections/") + std::string(to_string(kind));
    distill::FinetuneDataset ds;
    ds.kind = kind;
    ds.records = load_jsonl<ReflectionRecord>(ctx.path(base + ".jsonl"), reflection_record_from_json, "generate");
    if (fs::is_regular_file(ctx.path(base + "_gaps.jsonl"))) {
        for (const auto& g : io::read_jsonl(ctx.path(base + "_gaps.jsonl"))) {
            ds.gaps.push_back({g.at("pair_id").get<std::string>(), g.value("error", std::string{})});
        }
    }
    return ds;
}

std::vector<json> gap_rows(const distill::FinetuneDataset& ds) {
    std::vector<json> rows;
    for (const auto& g : ds.gaps) rows.push_back({{"pair_id", g.pair_id}, {"error", g.error}});
    return rows;
}

std::vector<ReflectionKind> kinds_from_flag(const std::string& flag) {
    if (flag == "all") return {kAllKinds.begin(), kAllKinds.end()};
    return {parse_kind(flag)};
}

// ---------------------------------------------------------------- commands

void cmd_ingest(Context& ctx) {
    std::string corpus_bytes;
    std::vector<corpus::QAPair> pairs;
    std::size_t utterances = 0;
    for (const auto& file : ctx.cfg.transcripts) {
        const auto raw = io::read_file(file);
        std::vector<corpus::Utterance> parsed;
        try {
            parsed = corpus::parse_transcripts(raw);
        } catch (const ParseError& e) {
            throw ParseError(file.string() + ": " + e.what());
        }
        utterances += parsed.size();
        auto extracted = corpus::extract_qa_pairs(parsed, file_safe(file.stem().string()));
        pairs.insert(pairs.end(), extracted.begin(), extracted.end());
        corpus_bytes += file.filename().string();
        corpus_bytes.push_back('\0');
        corpus_bytes += raw;
        corpus_bytes.push_back('\0');
    }
    corpus::check_unique_ids(pairs);
    const auto out = ctx.path("corpus.jsonl");
    io::write_jsonl(out, to_rows(pairs));
    ctx.record.set("corpus_hash", sha256_hex(corpus_bytes));
    ctx.record.set("corpus", {{"files", ctx.cfg.transcripts.size()}, {"utterances", utterances}, {"pairs", pairs.size()}});
    ctx.record.add_artifact("corpus", out);
    ctx.out << fmt::format("run {}: {} QA pairs from {} utterances in {} file(s)\n", ctx.record.run_id(), pairs.size(),
                           utterances, ctx.cfg.transcripts.size());
}

void cmd_split(Context& ctx) {
    const auto pairs = load_jsonl<corpus::QAPair>(ctx.path("corpus.jsonl"), corpus::qa_pair_from_json, "ingest");
    const auto result = corpus::split_dataset(pairs, ctx.cfg.split_fractions, ctx.cfg.split_seed);
    io::write_jsonl(ctx.path("corpus_split.jsonl"), to_rows(result.pairs));
    io::write_file_atomic(ctx.path("split_manifest.json"), corpus::to_json(result.manifest).dump(2) + "\n");
    ctx.record.set("split", corpus::to_json(result.manifest));
    ctx.record.add_artifact("corpus_split", ctx.path("corpus_split.jsonl"));
    ctx.record.add_artifact("split_manifest", ctx.path("split_manifest.json"));
    const auto& c = result.manifest.counts;
    ctx.out << fmt::format("train {}  validation {}  holdout {}\n", c.train, c.validation, c.holdout);
}

void cmd_generate(Context& ctx, const std::string& kind_flag) {
    const auto pairs = load_split_corpus(ctx);
    auto client = make_client(ctx.cfg);
    const auto& teacher = ctx.cfg.endpoint(ctx.cfg.teacher.endpoint).endpoint;
    distill::GenerationOptions opts;
    opts.decoding = ctx.cfg.teacher.decoding;
    opts.max_failure_fraction = ctx.cfg.client.max_failure_fraction;
    opts.workers = std::min(ctx.cfg.client.workers, teacher.max_in_flight);

    ctx.record.set("teacher", {{"endpoint", teacher.name}, {"decoding", client::to_json(opts.decoding)}});
    for (auto kind : kinds_from_flag(kind_flag)) {
        const auto base = std::string("reflections/") + std::string(to_string(kind));
        distill::FinetuneDataset ds;
        try {
            ds = distill::generate_reflections(pairs, kind, teacher, *client, opts);
        } catch (const distill::GenerationAborted& e) {
            const auto partial = ctx.path(base + ".partial.jsonl");
            io::write_jsonl(partial, to_rows(e.partial().records));
            io::write_jsonl(ctx.path(base + "_gaps.jsonl"), gap_rows(e.partial()));
            throw PartialFailure(std::string(e.what()) + "; partial output at " + partial.string());
        }
        io::write_jsonl(ctx.path(base + ".jsonl"), to_rows(ds.records));
        io::write_jsonl(ctx.path(base + "_gaps.jsonl"), gap_rows(ds));
        ctx.record.add_artifact(base, ctx.path(base + ".jsonl"));
        const auto c = ds.counts();
        ctx.record.set("generation_" + std::string(to_string(kind)),
                       {{"records", ds.records.size()},
                        {"gaps", ds.gaps.size()},
                        {"counts", {{"train", c.train}, {"validation", c.validation}, {"holdout", c.holdout}}}});
        ctx.out << fmt::format("{}: {} reflections ({} train, {} validation, {} holdout), {} gap(s)\n", to_string(kind),
                               ds.records.size(), c.train, c.validation, c.holdout, ds.gaps.size());
    }
}

void cmd_export(Context& ctx) {
    json manifest{
        {"run_id", ctx.record.run_id()},
        {"corpus_hash", ctx.record.data().value("corpus_hash", std::string{})},
        {"prompt_digests", ctx.record.get("prompt_digests")},
        {"endpoints", {{"teacher", ctx.cfg.teacher.endpoint}, {"judge", ctx.cfg.judge.endpoint}}},
        {"decoding",
         {{"teacher", client::to_json(ctx.cfg.teacher.decoding)},
          {"student_inference", client::to_json(client::GenerationConfig::student())}}},
        {"datasets", json::object()},
        {"gap_report", json::object()},
        {"training", json::array()},
    };
    std::size_t exported_kinds = 0;
    for (auto kind : kAllKinds) {
        const auto k = std::string(to_string(kind));
        if (!fs::is_regular_file(ctx.path("reflections/" + k + ".jsonl"))) continue;
        const auto ds = load_reflections(ctx, kind);
        ++exported_kinds;
        for (auto split : kAllSplits) {
            if (ds.counts().of(split) == 0) continue;
            const auto rel = "finetune/" + distill::export_file_name(kind, split);
            const auto lines = distill::export_finetune_jsonl(ds, split, ctx.path(rel));
            manifest["datasets"][k][std::string(to_string(split))] = {{"path", rel}, {"lines", lines}};
            ctx.record.add_artifact(rel, ctx.path(rel));
            ctx.out << fmt::format("{}: {} lines\n", rel, lines);
        }
        manifest["gap_report"][k] = gap_rows(ds);
        const auto train_rel = "finetune/" + distill::export_file_name(kind, Split::Train);
        for (const auto& cand : ctx.cfg.candidates) {
            if (cand.kind != kind || cand.from_teacher) continue;
            auto tm = distill::build_training_manifest(train_rel, cand.manifest_name);
            tm.inference = cand.decoding;
            manifest["training"].push_back(distill::to_json(tm));
        }
    }
    if (exported_kinds == 0) throw ValidationError("no generated reflections to export (run `generate` first)");
    io::write_file_atomic(ctx.path("finetune/manifest.json"), manifest.dump(2) + "\n");
    ctx.record.add_artifact("finetune_manifest", ctx.path("finetune/manifest.json"));
}

std::vector<ReflectionRecord> candidate_reflections(Context& ctx, const config::CandidateConfig& cand,
                                                    client::ModelClient& client) {
    if (cand.from_teacher) {
        auto records = load_reflections(ctx, cand.kind).records_in(Split::Holdout);
        if (records.empty()) throw ValidationError("teacher produced no holdout reflections for " + cand.name);
        return records;
    }
    std::vector<corpus::QAPair> holdout;
    for (auto& p : load_split_corpus(ctx)) {
        if (p.split == Split::Holdout) holdout.push_back(std::move(p));
    }
    const auto& ep = ctx.cfg.endpoint(cand.endpoint).endpoint;
    distill::GenerationOptions opts;
    opts.decoding = cand.decoding;
    opts.max_failure_fraction = ctx.cfg.client.max_failure_fraction;
    opts.workers = std::min(ctx.cfg.client.workers, ep.max_in_flight);
    const auto rel = "candidates/" + file_safe(cand.name) + ".jsonl";
    try {
        auto ds = distill::generate_reflections(holdout, cand.kind, ep, client, opts);
        io::write_jsonl(ctx.path(rel), to_rows(ds.records));
        return ds.records;
    } catch (const distill::GenerationAborted& e) {
        io::write_jsonl(ctx.path(rel), to_rows(e.partial().records));
        throw PartialFailure(cand.name + ": " + e.what());
    }
}

void cmd_evaluate(Context& ctx, const std::vector<std::string>& models, bool all) {
    std::vector<const config::CandidateConfig*> chosen;
    if (all) {
        for (const auto& c : ctx.cfg.candidates) chosen.push_back(&c);
    } else {
        for (const auto& m : models) chosen.push_back(&ctx.cfg.candidate(m));
    }
    if (chosen.empty()) throw ValidationError("nothing to evaluate: pass --model NAME or --all");

    auto client = make_client(ctx.cfg);
    const auto& judge_ep = ctx.cfg.endpoint(ctx.cfg.judge.endpoint).endpoint;
    ctx.record.set("judge", {{"endpoint", judge_ep.name},
                             {"decoding", client::to_json(ctx.cfg.judge.decoding)},
                             {"layout", std::string(prompts::kJudgeLayout)}});
    std::size_t failures = 0;
    for (const auto* cand : chosen) {
        const auto reflections = candidate_reflections(ctx, *cand, *client);
        judge::EvaluationOptions opts;
        opts.model = cand->name;
        opts.decoding = ctx.cfg.judge.decoding;
        opts.workers = std::min(ctx.cfg.client.workers, judge_ep.max_in_flight);
        auto result = judge::evaluate_model(reflections, judge_ep, *client, opts);
        result.report.model_size = cand->size;
        result.report.run_id = ctx.record.run_id();

        const auto name = file_safe(cand->name);
        io::write_jsonl(ctx.path("evaluation_" + name + ".jsonl"), to_rows(result.records));
        io::write_file_atomic(ctx.path("report_" + name + ".json"), judge::to_json(result.report).dump(2) + "\n");
        const std::vector<judge::EvaluationReport> one{result.report};
        io::write_file_atomic(ctx.path("report_" + name + ".csv"), judge::compare_reports(one).to_csv());
        ctx.record.add_artifact("evaluation_" + name, ctx.path("evaluation_" + name + ".jsonl"));

        const auto& r = result.report;
        const auto errors = std::count_if(result.records.begin(), result.records.end(),
                                          [](const judge::EvaluationRecord& e) { return e.error.has_value(); });
        failures += static_cast<std::size_t>(errors);
        ctx.out << fmt::format("{}: n={} adherence={:.2f} stage2={} simple={:.2f} complex={:.2f} unparseable={}/{}{}\n",
                               cand->name, r.n_total, r.adherence_rate, r.n_stage2, r.simple_rate, r.complex_rate,
                               r.n_stage1_unparseable, r.n_stage2_unparseable,
                               errors ? fmt::format(" transport-errors={}", errors) : std::string{});
    }
    if (failures > 0) throw PartialFailure(fmt::format("{} judge call(s) failed after retries", failures));
}

std::vector<const config::CandidateConfig*> evaluated_candidates(const Context& ctx) {
    std::vector<const config::CandidateConfig*> out;
    for (const auto& c : ctx.cfg.candidates) {
        if (fs::is_regular_file(ctx.path("evaluation_" + file_safe(c.name) + ".jsonl"))) out.push_back(&c);
    }
    return out;
}

std::vector<judge::EvaluationRecord> load_evaluations(const Context& ctx, const config::CandidateConfig& c) {
    return load_jsonl<judge::EvaluationRecord>(ctx.path("evaluation_" + file_safe(c.name) + ".jsonl"),
                                               judge::evaluation_record_from_json, "evaluate");
}

void cmd_sample_review(Context& ctx) {
    const auto decisions = ctx.path("review/decisions.jsonl");
    if (fs::is_regular_file(decisions) && fs::file_size(decisions) > 0) {
        throw ValidationError("review decisions already exist; refusing to resample");
    }
    const auto cands = evaluated_candidates(ctx);
    if (cands.empty()) throw ValidationError("no evaluations found (run `evaluate` first)");

    std::vector<review::ReviewTask> all;
    std::size_t cursor = 0;
    for (const auto* c : cands) {
        auto tasks = review::sample_for_review(load_evaluations(ctx, *c), ctx.cfg.review.fraction, ctx.cfg.review.seed);
        review::assign_annotators(tasks, ctx.cfg.review.annotators, cursor);
        ctx.out << fmt::format("{}: {} review tasks\n", c->name, tasks.size());
        all.insert(all.end(), tasks.begin(), tasks.end());
    }
    io::write_jsonl(ctx.path("review/tasks.jsonl"), to_rows(all));
    ctx.record.add_artifact("review_tasks", ctx.path("review/tasks.jsonl"));
    ctx.record.set("review", {{"fraction", ctx.cfg.review.fraction},
                              {"seed", ctx.cfg.review.seed},
                              {"annotators", ctx.cfg.review.annotators},
                              {"tasks", all.size()}});
    ctx.out << fmt::format("{} tasks total\n", all.size());
}

// Rebuilds the board from the sampled tasks and the append-only decision log.
std::unique_ptr<review::ReviewBoard> load_board(const Context& ctx) {
    auto tasks = load_jsonl<review::ReviewTask>(ctx.path("review/tasks.jsonl"), review::review_task_from_json,
                                                "sample-review");
    auto board = std::make_unique<review::ReviewBoard>(std::move(tasks), ctx.cfg.review.annotators);
    const auto log = ctx.path("review/decisions.jsonl");
    if (fs::is_regular_file(log)) {
        for (const auto& row : io::read_jsonl(log)) board->submit(review::decision_from_json(row));
    }
    board->set_decision_log(log);
    return board;
}

std::atomic<service::AnnotationServer*> g_server{nullptr};

void cmd_serve(Context& ctx, const std::string& host, int port) {
    auto board = load_board(ctx);
    service::AnnotationApi api(*board);
    service::AnnotationServer server(api);
    g_server = &server;
    auto on_signal = [](int) {
        if (auto* s = g_server.load()) s->stop();
    };
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    ctx.out << fmt::format("serving {} review tasks on http://{}:{}\n", board->tasks().size(), host, port) << std::flush;
    server.listen(host, port);
    g_server = nullptr;
}

void cmd_aggregate(Context& ctx, const std::string& import_path) {
    auto board = load_board(ctx);
    std::size_t rejected = 0, imported = 0, duplicates = 0;
    if (!import_path.empty()) {
        for (const auto& row : io::read_jsonl(import_path)) {
            try {
                const auto out = board->submit(review::decision_from_json(row));
                (out.duplicate ? duplicates : imported)++;
            } catch (const Error& e) {
                ++rejected;
                ctx.err << "rejected decision: " << e.what() << "\n";
            }
        }
    }
    const auto tasks = board->tasks();
    const auto labels = board->labels();
    const auto outcomes = review::human_outcomes(tasks, labels);
    io::write_jsonl(ctx.path("review/labels.jsonl"), to_rows(labels));
    io::write_jsonl(ctx.path("review/outcomes.jsonl"), to_rows(outcomes));
    io::write_jsonl(ctx.path("review/task_states.jsonl"), to_rows(tasks));
    ctx.record.add_artifact("review_labels", ctx.path("review/labels.jsonl"));
    ctx.record.add_artifact("review_outcomes", ctx.path("review/outcomes.jsonl"));

    const auto open = std::count_if(tasks.begin(), tasks.end(),
                                    [](const review::ReviewTask& t) { return t.state != review::ReviewState::Closed; });
    ctx.out << fmt::format("imported {} decision(s) ({} duplicate, {} rejected); {} of {} tasks closed\n", imported,
                           duplicates, rejected, tasks.size() - static_cast<std::size_t>(open), tasks.size());
    if (rejected > 0 || open > 0) {
        throw PartialFailure(fmt::format("{} task(s) still open, {} decision(s) rejected", open, rejected));
    }
}

std::vector<review::HumanOutcome> load_outcomes(const Context& ctx) {
    return load_jsonl<review::HumanOutcome>(ctx.path("review/outcomes.jsonl"), review::human_outcome_from_json,
                                            "aggregate");
}

void cmd_agreement(Context& ctx) {
    std::vector<judge::EvaluationRecord> judged;
    for (const auto* c : evaluated_candidates(ctx)) {
        auto recs = load_evaluations(ctx, *c);
        judged.insert(judged.end(), recs.begin(), recs.end());
    }
    const auto outcomes = load_outcomes(ctx);
    const auto joined = metrics::overlap_join(judged, outcomes);
    const auto rows = metrics::agreement_table(joined);
    const auto prf = metrics::prf_table(joined);
    const auto csv = "agreement_" + ctx.record.run_id() + ".csv";
    const auto prf_csv = "prf_" + ctx.record.run_id() + ".csv";
    io::write_file_atomic(ctx.path(csv), metrics::agreement_csv(rows));
    io::write_file_atomic(ctx.path(prf_csv), metrics::prf_csv(prf));
    ctx.record.add_artifact("agreement", ctx.path(csv));
    ctx.record.add_artifact("prf", ctx.path(prf_csv));
    ctx.out << metrics::agreement_csv(rows) << metrics::prf_csv(prf);
    if (joined.judge_unparseable > 0) {
        ctx.out << fmt::format("{} overlapping item(s) skipped: judge verdict unparseable\n", joined.judge_unparseable);
    }
}

void cmd_report(Context& ctx) {
    std::vector<judge::EvaluationReport> judge_reports, human_reports;
    const auto cands = evaluated_candidates(ctx);
    if (cands.empty()) throw ValidationError("no evaluations found (run `evaluate` first)");
    std::optional<std::vector<review::HumanOutcome>> outcomes;
    if (fs::is_regular_file(ctx.path("review/outcomes.jsonl"))) outcomes = load_outcomes(ctx);
    for (const auto* c : cands) {
        const auto path = ctx.path("report_" + file_safe(c->name) + ".json");
        judge_reports.push_back(judge::evaluation_report_from_json(json::parse(io::read_file(path))));
        if (outcomes) {
            auto h = review::human_report(*outcomes, c->name, c->kind);
            h.model_size = c->size;
            h.run_id = ctx.record.run_id();
            if (h.n_total > 0) human_reports.push_back(std::move(h));
        }
    }
    const auto table = judge::compare_reports(judge_reports, human_reports);
    const auto base = "report_" + ctx.record.run_id();
    io::write_file_atomic(ctx.path(base + ".csv"), table.to_csv());
    io::write_file_atomic(ctx.path(base + ".txt"), table.to_text());
    ctx.record.add_artifact("report", ctx.path(base + ".csv"));
    ctx.out << table.to_text();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Reflection distillation and two-stage judge evaluation pipeline", "reflect"};
    app.require_subcommand(1);

    std::string config_path, run_id, kind = "all", decisions, host = "127.0.0.1";
    std::vector<std::string> models;
    bool all_models = false;
    int port = 8080;

    auto add = [&](const char* name, const char* help, bool needs_run) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("-c,--config", config_path, "Run configuration (JSON)")->required();
        if (needs_run) sub->add_option("-r,--run", run_id, "Run id under the output directory")->required();
        return sub;
    };
    auto* ingest = add("ingest", "Parse transcripts and extract QA pairs into a new run", false);
    ingest->add_option("--run-id", run_id, "Name for the new run (default: timestamp)");
    add("split", "Assign train/validation/holdout splits", true);
    add("generate", "Generate teacher reflections", true)->add_option("--kind", kind, "simple|complex|all");
    add("export-finetune", "Write fine-tuning JSONL datasets and the training manifest", true);
    auto* evaluate = add("evaluate", "Run candidate models through the two-stage judge", true);
    evaluate->add_option("-m,--model", models, "Candidate name (repeatable)");
    evaluate->add_flag("--all", all_models, "Evaluate every configured candidate");
    add("sample-review", "Draw stratified human-review tasks and assign annotators", true);
    auto* serve = add("serve", "Serve the annotation HTTP API", true);
    serve->add_option("--host", host, "Bind address");
    serve->add_option("--port", port, "Port");
    add("aggregate", "Aggregate annotator decisions by majority", true)
        ->add_option("--decisions", decisions, "JSONL decisions file to import");
    add("agreement", "Judge-vs-human Cohen kappa and precision/recall/F1", true);
    add("report", "Results table across evaluated models", true);

    std::vector<const char*> argv;
    argv.reserve(args.size());
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kValidation;
    }
    auto* sub = app.get_subcommands().front();
    const std::string command = sub->get_name();

    std::optional<Context> ctx;
    std::optional<run::RunLock> lock;
    try {
        auto cfg = config::load_run_config(config_path);
        if (command == "ingest") {
            if (run_id.empty()) run_id = run::new_run_id();
            if (file_safe(run_id) != run_id) throw ValidationError("run id '" + run_id + "' has unsafe characters");
            const auto dir = cfg.output_dir / run_id;
            if (fs::exists(dir)) throw ValidationError("run directory " + dir.string() + " already exists");
            fs::create_directories(dir);
            lock.emplace(dir);
            auto record = run::RunRecord::create(dir, run_id, cfg);
            ctx.emplace(Context{std::move(cfg), std::move(record), out, err});
        } else {
            const auto dir = cfg.output_dir / run_id;
            if (!fs::is_directory(dir)) throw ValidationError("no run directory " + dir.string());
            lock.emplace(dir);
            auto record = run::RunRecord::open(dir, cfg);
            ctx.emplace(Context{std::move(cfg), std::move(record), out, err});
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kValidation;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kValidation;
    }

    int code = kOk;
    std::string note;
    try {
        if (command == "ingest") cmd_ingest(*ctx);
        else if (command == "split") cmd_split(*ctx);
        else if (command == "generate") cmd_generate(*ctx, kind);
        else if (command == "export-finetune") cmd_export(*ctx);
        else if (command == "evaluate") cmd_evaluate(*ctx, models, all_models);
        else if (command == "sample-review") cmd_sample_review(*ctx);
        else if (command == "serve") cmd_serve(*ctx, host, port);
        else if (command == "aggregate") cmd_aggregate(*ctx, decisions);
        else if (command == "agreement") cmd_agreement(*ctx);
        else if (command == "report") cmd_report(*ctx);
    } catch (const PartialFailure& e) {
        code = kPartial;
        note = e.what();
    } catch (const ConfigError& e) {
        code = kValidation;
        note = e.what();
    } catch (const ValidationError& e) {
        code = kValidation;
        note = e.what();
    } catch (const ParseError& e) {
        code = kValidation;
        note = e.what();
    } catch (const DataIntegrityError& e) {
        code = kValidation;
        note = e.what();
    } catch (const std::exception& e) {
        code = kPartial;
        note = e.what();
    }
    if (code != kOk) err << "error: " << note << "\n";
    try {
        ctx->record.add_step(command, code, note);
        ctx->record.save();
    } catch (const std::exception& e) {
        err << "error: could not update run record: " << e.what() << "\n";
        if (code == kOk) code = kPartial;
    }
    return code;
}

}  // namespace reflect::cli
