#include "reflect/judge.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <map>

#include <fmt/format.h>

#include "reflect/concurrency.hpp"
#include "reflect/errors.hpp"
#include "reflect/text.hpp"

namespace reflect::judge {

using nlohmann::json;

std::string normalize_verdict(std::string_view raw) {
    const auto lowered = text::to_lower(text::trim(raw));
    std::string_view token(lowered);
    const auto end = token.find_first_of(" \t\r\n\f\v");
    if (end != std::string_view::npos) token = token.substr(0, end);
    auto punct = [](char c) {
        const auto uc = static_cast<unsigned char>(c);
        return uc < 0x80 && std::ispunct(uc);
    };
    while (!token.empty() && punct(token.back())) token.remove_suffix(1);
    while (!token.empty() && punct(token.front())) token.remove_prefix(1);
    return std::string(token);
}

AdherenceVerdict parse_adherence(std::string_view raw) {
    const auto t = normalize_verdict(raw);
    Adherence v = Adherence::Unparseable;
    if (t == "true") {
        v = Adherence::Adherent;
    } else if (t == "false") {
        v = Adherence::NotAdherent;
    }
    return {v, std::string(raw)};
}

TypeVerdict parse_type(std::string_view raw) {
    const auto t = normalize_verdict(raw);
    ReflectionType v = ReflectionType::Unparseable;
    if (t == "simple") {
        v = ReflectionType::Simple;
    } else if (t == "complex") {
        v = ReflectionType::Complex;
    }
    return {v, std::string(raw)};
}

std::string_view to_string(Adherence a) {
    switch (a) {
        case Adherence::Adherent: return "adherent";
        case Adherence::NotAdherent: return "not_adherent";
        case Adherence::Unparseable: return "unparseable";
    }
    return "?";
}

std::string_view to_string(ReflectionType t) {
    switch (t) {
        case ReflectionType::Simple: return "simple";
        case ReflectionType::Complex: return "complex";
        case ReflectionType::Unparseable: return "unparseable";
    }
    return "?";
}

EvaluationReport summarize(std::span<const EvaluationRecord> records, const std::string& model,
                           ReflectionKind kind) {
    EvaluationReport rep;
    rep.model = model;
    rep.kind = kind;
    rep.n_total = records.size();
    for (const auto& r : records) {
        switch (r.adherence.value) {
            case Adherence::Adherent: ++rep.n_adherent; break;
            case Adherence::NotAdherent: ++rep.n_not_adherent; break;
            case Adherence::Unparseable: ++rep.n_stage1_unparseable; break;
        }
        if (r.adherence.value != Adherence::Adherent) continue;
        const auto t = r.rtype ? r.rtype->value : ReflectionType::Unparseable;
        switch (t) {
            case ReflectionType::Simple: ++rep.n_simple; break;
            case ReflectionType::Complex: ++rep.n_complex; break;
            case ReflectionType::Unparseable: ++rep.n_stage2_unparseable; break;
        }
    }
    rep.n_stage2 = rep.n_adherent;
    if (rep.n_total > 0) rep.adherence_rate = static_cast<double>(rep.n_adherent) / static_cast<double>(rep.n_total);
    rep.type_rates_defined = rep.n_stage2 > 0;
    if (rep.type_rates_defined) {
        const auto d = static_cast<double>(rep.n_stage2);
        rep.simple_rate = static_cast<double>(rep.n_simple) / d;
        rep.complex_rate = static_cast<double>(rep.n_complex) / d;
    }
    return rep;
}

namespace {

constexpr std::string_view kReaskSalt = "reask-1";

template <typename Verdict, typename Parser>
Verdict ask(const prompts::ChatPrompt& prompt, const client::ModelEndpoint& judge, client::ModelClient& client,
            const client::GenerationConfig& decoding, Parser parse, std::optional<std::string>& error) {
    try {
        auto v = parse(client.complete_chat(judge, prompt, decoding).text);
        if (v.value != decltype(v.value)::Unparseable) return v;
        return parse(client.complete_chat(judge, prompt, decoding, {std::string(kReaskSalt)}).text);
    } catch (const TransportError& e) {
        error = e.what();
    } catch (const EndpointError& e) {
        error = e.what();
    }
    return Verdict{};
}

}  // namespace

EvaluationResult evaluate_model(std::span<const ReflectionRecord> reflections, const client::ModelEndpoint& judge,
                                client::ModelClient& client, const EvaluationOptions& options) {
    if (reflections.empty()) throw ValidationError("no reflections to evaluate");
    options.decoding.validate();
    const auto kind = reflections.front().kind;
    for (const auto& r : reflections) {
        if (r.kind != kind) throw ValidationError("reflections for one model must share a kind");
    }

    EvaluationResult result;
    result.records.resize(reflections.size());
    parallel_for(reflections.size(), options.workers, [&](std::size_t i) {
        const auto& in = reflections[i];
        auto& out = result.records[i];
        out.pair_id = in.pair_id;
        out.model = options.model;
        out.kind_requested = in.kind;
        out.question = in.question;
        out.answer = in.answer;
        out.reflection = in.reflection;

        const auto p1 = prompts::render_judge_prompt(prompts::PromptKind::MiAdherence, in);
        out.adherence = ask<AdherenceVerdict>(p1, judge, client, options.decoding, parse_adherence, out.error);
        if (out.adherence.value != Adherence::Adherent) return;

        const auto p2 = prompts::render_judge_prompt(prompts::PromptKind::ReflectionTypeCls, in);
        out.rtype = ask<TypeVerdict>(p2, judge, client, options.decoding, parse_type, out.error);
    });

    result.report = summarize(result.records, options.model, kind);
    return result;
}

std::optional<double> parse_model_size(std::string_view s) {
    s = text::trim(s);
    if (s.empty()) return std::nullopt;
    double scale = 1.0;
    switch (std::toupper(static_cast<unsigned char>(s.back()))) {
        case 'K': scale = 1e3; break;
        case 'M': scale = 1e6; break;
        case 'B': scale = 1e9; break;
        case 'T': scale = 1e12; break;
        default: break;
    }
    if (scale != 1.0) s.remove_suffix(1);
    double v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || v < 0) return std::nullopt;
    return v * scale;
}

ResultsTable compare_reports(std::span<const EvaluationReport> judge_reports,
                             std::span<const EvaluationReport> human_reports) {
    std::map<std::string, std::size_t> name_uses;
    for (const auto& r : judge_reports) ++name_uses[r.model];

    ResultsTable table;
    std::map<std::string, std::size_t> seen;
    for (const auto& r : judge_reports) {
        ResultsRow row;
        row.kind = r.kind;
        row.model_size = r.model_size;
        row.judge = &r;
        row.display_name = r.model;
        if (name_uses[r.model] > 1) {
            const auto n = ++seen[r.model];
            row.display_name += r.run_id.empty() ? fmt::format(" #{}", n) : fmt::format(" ({})", r.run_id);
            if (!r.run_id.empty()) {
                for (const auto& other : table.rows) {
                    if (other.display_name == row.display_name) {
                        row.display_name += fmt::format(" #{}", n);
                        break;
                    }
                }
            }
        }
        for (const auto& h : human_reports) {
            if (h.model == r.model && (h.run_id.empty() || r.run_id.empty() || h.run_id == r.run_id)) {
                row.human = &h;
                break;
            }
        }
        table.rows.push_back(std::move(row));
    }
    std::stable_sort(table.rows.begin(), table.rows.end(), [](const ResultsRow& a, const ResultsRow& b) {
        if (a.kind != b.kind) return a.kind == ReflectionKind::Simple;
        if (a.model_size.has_value() != b.model_size.has_value()) return a.model_size.has_value();
        if (a.model_size && *a.model_size != *b.model_size) return *a.model_size < *b.model_size;
        return false;
    });
    return table;
}

namespace {

std::string rate(const EvaluationReport* r, double EvaluationReport::*field, bool stage2) {
    if (r == nullptr) return "";
    if (stage2 && !r->type_rates_defined) return "n/a";
    return fmt::format("{:.2f}", r->*field);
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string size_label(const std::optional<double>& size) {
    if (!size) return "";
    if (*size >= 1e9) return fmt::format("{:g}B", *size / 1e9);
    if (*size >= 1e6) return fmt::format("{:g}M", *size / 1e6);
    return fmt::format("{:g}", *size);
}

}  // namespace

std::string ResultsTable::to_csv() const {
    std::string out =
        "model,task,size,n_judge,adherence_judge,adherence_hr,simple_judge,simple_hr,complex_judge,complex_hr,"
        "n_stage2_judge,n_hr,n_stage2_hr\n";
    for (const auto& row : rows) {
        out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{}\n", csv_escape(row.display_name),
                           to_string(row.kind), size_label(row.model_size), row.judge ? row.judge->n_total : 0,
                           rate(row.judge, &EvaluationReport::adherence_rate, false),
                           rate(row.human, &EvaluationReport::adherence_rate, false),
                           rate(row.judge, &EvaluationReport::simple_rate, true),
                           rate(row.human, &EvaluationReport::simple_rate, true),
                           rate(row.judge, &EvaluationReport::complex_rate, true),
                           rate(row.human, &EvaluationReport::complex_rate, true),
                           row.judge ? row.judge->n_stage2 : 0,
                           row.human ? std::to_string(row.human->n_total) : std::string{},
                           row.human ? std::to_string(row.human->n_stage2) : std::string{});
    }
    return out;
}

std::string ResultsTable::to_text() const {
    std::vector<std::array<std::string, 8>> cells;
    cells.push_back({"Model - Task", "Size", "MI-A judge", "MI-A HR", "Simple judge", "Simple HR", "Complex judge",
                     "Complex HR"});
    for (const auto& row : rows) {
        cells.push_back({fmt::format("{} - {}", row.display_name, row.kind == ReflectionKind::Simple ? "Simple" : "Complex"),
                         size_label(row.model_size), rate(row.judge, &EvaluationReport::adherence_rate, false),
                         rate(row.human, &EvaluationReport::adherence_rate, false),
                         rate(row.judge, &EvaluationReport::simple_rate, true),
                         rate(row.human, &EvaluationReport::simple_rate, true),
                         rate(row.judge, &EvaluationReport::complex_rate, true),
                         rate(row.human, &EvaluationReport::complex_rate, true)});
    }
    std::array<std::size_t, 8> width{};
    for (const auto& r : cells) {
        for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
    }
    std::string out;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        for (std::size_t c = 0; c < cells[i].size(); ++c) {
            out += c == 0 ? fmt::format("{:<{}}", cells[i][c], width[c]) : fmt::format("  {:>{}}", cells[i][c], width[c]);
        }
        out += '\n';
        if (i == 0) out += std::string(out.size() - 1, '-') + '\n';
    }
    return out;
}

json to_json(const EvaluationRecord& r) {
    json j{
        {"pair_id", r.pair_id},
        {"model", r.model},
        {"kind_requested", std::string(to_string(r.kind_requested))},
        {"question", r.question},
        {"answer", r.answer},
        {"reflection", r.reflection},
        {"adherence", {{"value", std::string(to_string(r.adherence.value))}, {"raw", r.adherence.raw}}},
    };
    j["rtype"] = r.rtype ? json{{"value", std::string(to_string(r.rtype->value))}, {"raw", r.rtype->raw}}
                         : json(nullptr);
    j["error"] = r.error ? json(*r.error) : json(nullptr);
    return j;
}

namespace {
Adherence adherence_from(const std::string& s) {
    if (s == "adherent") return Adherence::Adherent;
    if (s == "not_adherent") return Adherence::NotAdherent;
    if (s == "unparseable") return Adherence::Unparseable;
    throw ParseError("unknown adherence value '" + s + "'");
}
ReflectionType type_from(const std::string& s) {
    if (s == "simple") return ReflectionType::Simple;
    if (s == "complex") return ReflectionType::Complex;
    if (s == "unparseable") return ReflectionType::Unparseable;
    throw ParseError("unknown reflection type value '" + s + "'");
}
}  // namespace

EvaluationRecord evaluation_record_from_json(const json& j) {
    try {
        EvaluationRecord r;
        r.pair_id = j.at("pair_id").get<std::string>();
        r.model = j.at("model").get<std::string>();
        r.kind_requested = parse_kind(j.at("kind_requested").get<std::string>());
        r.question = j.value("question", std::string{});
        r.answer = j.value("answer", std::string{});
        r.reflection = j.at("reflection").get<std::string>();
        r.adherence = {adherence_from(j.at("adherence").at("value").get<std::string>()),
                       j.at("adherence").value("raw", std::string{})};
        if (j.contains("rtype") && !j["rtype"].is_null()) {
            r.rtype = TypeVerdict{type_from(j["rtype"].at("value").get<std::string>()),
                                  j["rtype"].value("raw", std::string{})};
        }
        if (j.contains("error") && !j["error"].is_null()) r.error = j["error"].get<std::string>();
        if (r.rtype.has_value() != (r.adherence.value == Adherence::Adherent)) {
            throw DataIntegrityError("record '" + r.pair_id + "' has a type verdict inconsistent with its gate");
        }
        return r;
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad evaluation record: ") + e.what());
    }
}

json to_json(const EvaluationReport& r) {
    json j{
        {"model", r.model},
        {"kind", std::string(to_string(r.kind))},
        {"rater", r.rater},
        {"run_id", r.run_id},
        {"n_total", r.n_total},
        {"n_adherent", r.n_adherent},
        {"n_not_adherent", r.n_not_adherent},
        {"n_stage1_unparseable", r.n_stage1_unparseable},
        {"n_stage2", r.n_stage2},
        {"n_simple", r.n_simple},
        {"n_complex", r.n_complex},
        {"n_stage2_unparseable", r.n_stage2_unparseable},
        {"adherence_rate", r.adherence_rate},
        {"simple_rate", r.simple_rate},
        {"complex_rate", r.complex_rate},
        {"type_rates_defined", r.type_rates_defined},
    };
    j["model_size"] = r.model_size ? json(*r.model_size) : json(nullptr);
    return j;
}

EvaluationReport evaluation_report_from_json(const json& j) {
    try {
        EvaluationReport r;
        r.model = j.at("model").get<std::string>();
        r.kind = parse_kind(j.at("kind").get<std::string>());
        r.rater = j.value("rater", std::string("judge"));
        r.run_id = j.value("run_id", std::string{});
        if (j.contains("model_size") && !j["model_size"].is_null()) r.model_size = j["model_size"].get<double>();
        r.n_total = j.at("n_total").get<std::size_t>();
        r.n_adherent = j.at("n_adherent").get<std::size_t>();
        r.n_not_adherent = j.at("n_not_adherent").get<std::size_t>();
        r.n_stage1_unparseable = j.at("n_stage1_unparseable").get<std::size_t>();
        r.n_stage2 = j.at("n_stage2").get<std::size_t>();
        r.n_simple = j.at("n_simple").get<std::size_t>();
        r.n_complex = j.at("n_complex").get<std::size_t>();
        r.n_stage2_unparseable = j.at("n_stage2_unparseable").get<std::size_t>();
        r.adherence_rate = j.at("adherence_rate").get<double>();
        r.simple_rate = j.at("simple_rate").get<double>();
        r.complex_rate = j.at("complex_rate").get<double>();
        r.type_rates_defined = j.at("type_rates_defined").get<bool>();
        return r;
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad evaluation report: ") + e.what());
    }
}

}  // namespace reflect::judge
