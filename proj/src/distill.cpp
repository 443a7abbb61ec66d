#include "reflect/distill.hpp"

#include <algorithm>
#include <array>
#include <mutex>

#include <fmt/format.h>

#include "reflect/concurrency.hpp"
#include "reflect/io.hpp"
#include "reflect/text.hpp"

namespace reflect::distill {

using nlohmann::json;

corpus::SplitCounts FinetuneDataset::counts() const {
    corpus::SplitCounts c;
    for (const auto& r : records) {
        switch (r.split) {
            case Split::Train: ++c.train; break;
            case Split::Validation: ++c.validation; break;
            case Split::Holdout: ++c.holdout; break;
        }
    }
    return c;
}

std::vector<ReflectionRecord> FinetuneDataset::records_in(Split split) const {
    std::vector<ReflectionRecord> out;
    std::copy_if(records.begin(), records.end(), std::back_inserter(out),
                 [&](const ReflectionRecord& r) { return r.split == split; });
    return out;
}

std::string clean_reflection(std::string_view raw) {
    auto s = text::collapse_whitespace(text::normalize_newlines(raw));
    static constexpr std::array<std::pair<std::string_view, std::string_view>, 3> kQuotes{{
        {"\"", "\""},
        {"'", "'"},
        {"“", "”"},
    }};
    for (const auto& [open, close] : kQuotes) {
        if (s.size() >= open.size() + close.size() && s.starts_with(open) && s.ends_with(close)) {
            s = text::collapse_whitespace(s.substr(open.size(), s.size() - open.size() - close.size()));
            break;
        }
    }
    return s;
}

namespace {

struct Attempt {
    std::optional<ReflectionRecord> record;
    std::string error;
};

Attempt generate_one(const corpus::QAPair& pair, ReflectionKind kind, const client::ModelEndpoint& teacher,
                     client::ModelClient& client, const client::GenerationConfig& decoding,
                     const std::string& salt) {
    try {
        const auto prompt = prompts::render_generation_prompt(prompts::generation_kind(kind), pair);
        const auto result = client.complete_chat(teacher, prompt, decoding, {salt});
        auto reflection = clean_reflection(result.text);
        if (reflection.empty()) return {std::nullopt, "teacher returned an empty reflection"};
        ReflectionRecord r;
        r.pair_id = pair.id;
        r.kind = kind;
        r.question = pair.question;
        r.answer = pair.answer;
        r.reflection = std::move(reflection);
        r.source = teacher.name;
        r.split = *pair.split;
        return {std::move(r), {}};
    } catch (const Error& e) {
        return {std::nullopt, e.what()};
    }
}

}  // namespace

FinetuneDataset generate_reflections(std::span<const corpus::QAPair> pairs, ReflectionKind kind,
                                     const client::ModelEndpoint& teacher, client::ModelClient& client,
                                     const GenerationOptions& options) {
    options.decoding.validate();
    corpus::check_unique_ids(pairs);
    for (const auto& p : pairs) {
        if (!p.split) throw ValidationError("pair '" + p.id + "' has no split assigned");
    }

    std::vector<Attempt> attempts(pairs.size());
    parallel_for(pairs.size(), options.workers, [&](std::size_t i) {
        attempts[i] = generate_one(pairs[i], kind, teacher, client, options.decoding, {});
    });
    // Final sweep: one more try for each gap. The salt keeps an empty first answer from being
    // replayed out of the cache.
    parallel_for(pairs.size(), options.workers, [&](std::size_t i) {
        if (!attempts[i].record) {
            attempts[i] = generate_one(pairs[i], kind, teacher, client, options.decoding, "gap-sweep");
        }
    });

    FinetuneDataset ds;
    ds.kind = kind;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (attempts[i].record) {
            ds.records.push_back(std::move(*attempts[i].record));
        } else {
            ds.gaps.push_back({pairs[i].id, attempts[i].error});
        }
    }
    if (!pairs.empty()) {
        const double failed = static_cast<double>(ds.gaps.size()) / static_cast<double>(pairs.size());
        if (failed > options.max_failure_fraction) {
            throw GenerationAborted(fmt::format("{} of {} {} generations failed ({:.2f}% > {:.2f}% allowed)",
                                                ds.gaps.size(), pairs.size(), to_string(kind), failed * 100.0,
                                                options.max_failure_fraction * 100.0),
                                    std::move(ds));
        }
    }
    return ds;
}

std::string export_file_name(ReflectionKind kind, Split split) {
    return fmt::format("{}_{}.jsonl", to_string(kind), to_string(split));
}

std::string finetune_jsonl(const FinetuneDataset& dataset, Split split) {
    const auto prompt_kind = prompts::generation_kind(dataset.kind);
    std::string out;
    std::size_t lines = 0;
    for (const auto& r : dataset.records) {
        if (r.split != split) continue;
        json row{
            {"text", prompts::render_finetune_record(prompt_kind, r)},
            {"pair_id", r.pair_id},
            {"kind", std::string(to_string(r.kind))},
            {"split", std::string(to_string(r.split))},
        };
        out += row.dump();
        out += '\n';
        ++lines;
    }
    if (lines == 0) {
        throw ExportError(fmt::format("no {} records in the {} split", to_string(dataset.kind), to_string(split)));
    }
    return out;
}

std::size_t export_finetune_jsonl(const FinetuneDataset& dataset, Split split, const std::filesystem::path& path) {
    const auto body = finetune_jsonl(dataset, split);
    try {
        io::write_file_atomic(path, body);
    } catch (const std::exception& e) {
        throw ExportError(std::string("export failed: ") + e.what());
    }
    return static_cast<std::size_t>(std::count(body.begin(), body.end(), '\n'));
}

std::optional<Hyperparameters> reference_hyperparameters(std::string_view model_name) {
    struct Row {
        std::string_view name;
        Hyperparameters hp;
    };
    static constexpr std::array<Row, 8> kTable{{
        {"GPT-2 Small - Simple", {0.0005, 32}},
        {"GPT-2 Medium - Simple", {0.00005, 64}},
        {"GPT-2 Large - Simple", {0.00005, 64}},
        {"GPT-2 XL - Simple", {0.00005, 64}},
        {"GPT-2 Small - Complex", {0.0005, 32}},
        {"GPT-2 Medium - Complex", {0.00005, 64}},
        {"GPT-2 Large - Complex", {0.00005, 64}},
        {"GPT-2 XL - Complex", {0.00005, 64}},
    }};
    for (const auto& row : kTable) {
        if (row.name == model_name) return row.hp;
    }
    return std::nullopt;
}

TrainingManifest build_training_manifest(const std::string& dataset_path, const std::string& model_name) {
    TrainingManifest m;
    m.dataset_path = dataset_path;
    m.model_name = model_name;
    m.chosen = reference_hyperparameters(model_name);
    return m;
}

json to_json(const TrainingManifest& m) {
    json j{
        {"dataset_path", m.dataset_path},
        {"model_name", m.model_name},
        {"epochs", m.epochs},
        {"early_stopping", m.early_stopping},
        {"optimizer", {{"name", m.optimizer}, {"weight_decay", m.weight_decay}}},
        {"search", {{"learning_rate", m.learning_rate_grid}, {"batch_size", m.batch_size_grid}}},
        {"inference", client::to_json(m.inference)},
    };
    j["chosen"] = m.chosen ? json{{"learning_rate", m.chosen->learning_rate}, {"batch_size", m.chosen->batch_size}}
                           : json(nullptr);
    return j;
}

json to_json(const FinetuneDataset& d) {
    json records = json::array();
    for (const auto& r : d.records) records.push_back(to_json(r));
    json gaps = json::array();
    for (const auto& g : d.gaps) gaps.push_back({{"pair_id", g.pair_id}, {"error", g.error}});
    const auto c = d.counts();
    return {
        {"kind", std::string(to_string(d.kind))},
        {"records", std::move(records)},
        {"gaps", std::move(gaps)},
        {"counts", {{"train", c.train}, {"validation", c.validation}, {"holdout", c.holdout}}},
    };
}

FinetuneDataset finetune_dataset_from_json(const json& j) {
    try {
        FinetuneDataset d;
        d.kind = parse_kind(j.at("kind").get<std::string>());
        for (const auto& r : j.at("records")) d.records.push_back(reflection_record_from_json(r));
        for (const auto& g : j.value("gaps", json::array())) {
            d.gaps.push_back({g.at("pair_id").get<std::string>(), g.value("error", std::string{})});
        }
        return d;
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad dataset: ") + e.what());
    }
}

}  // namespace reflect::distill
