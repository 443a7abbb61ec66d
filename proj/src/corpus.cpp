#include "reflect/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include <fmt/format.h>

#include "reflect/errors.hpp"
#include "reflect/shuffle.hpp"
#include "reflect/text.hpp"

namespace reflect::corpus {

std::size_t SplitCounts::of(Split s) const {
    switch (s) {
        case Split::Train: return train;
        case Split::Validation: return validation;
        case Split::Holdout: return holdout;
    }
    return 0;
}

std::string_view to_string(Speaker s) { return s == Speaker::Bot ? "BOT" : "CLIENT"; }

std::string_view to_string(Tag t) {
    switch (t) {
        case Tag::Question: return "QUESTION";
        case Tag::Answer: return "ANSWER";
        case Tag::Reflection: return "REFLECTION";
        case Tag::Other: return "OTHER";
    }
    return "?";
}

std::vector<Utterance> parse_transcripts(std::string_view raw) {
    if (!text::is_valid_utf8(raw)) throw ParseError("transcript is not valid UTF-8");
    if (raw.size() >= 3 && raw.substr(0, 3) == "\xEF\xBB\xBF") raw.remove_prefix(3);

    std::vector<Utterance> out;
    const auto normalized = text::normalize_newlines(raw);
    std::size_t line_no = 0;
    for (auto line : text::split_lines(normalized)) {
        ++line_no;
        if (text::trim(line).empty()) continue;

        const auto p1 = line.find('|');
        const auto p2 = p1 == std::string_view::npos ? p1 : line.find('|', p1 + 1);
        if (p2 == std::string_view::npos) throw ParseError("expected SPEAKER|TAG|text", line_no);

        const auto speaker = text::trim(line.substr(0, p1));
        const auto tag = text::trim(line.substr(p1 + 1, p2 - p1 - 1));
        const auto body = text::trim(line.substr(p2 + 1));

        Utterance u{};
        if (speaker == "BOT") {
            u.speaker = Speaker::Bot;
        } else if (speaker == "CLIENT") {
            u.speaker = Speaker::Client;
        } else {
            throw ParseError(fmt::format("unknown speaker '{}'", speaker), line_no);
        }

        if (tag == "QUESTION") {
            u.tag = Tag::Question;
        } else if (tag == "ANSWER") {
            u.tag = Tag::Answer;
        } else if (tag == "REFLECTION") {
            u.tag = Tag::Reflection;
        } else if (tag == "OTHER") {
            u.tag = Tag::Other;
        } else if (!tag.empty()) {
            throw ParseError(fmt::format("unknown tag '{}'", tag), line_no);
        }

        if (body.empty()) throw ParseError("empty utterance text", line_no);
        u.text = std::string(body);
        out.push_back(std::move(u));
    }
    return out;
}

std::vector<QAPair> extract_qa_pairs(std::span<const Utterance> utterances, std::string_view id_prefix) {
    std::vector<QAPair> pairs;
    const Utterance* open_question = nullptr;
    for (const auto& u : utterances) {
        if (u.tag == Tag::Question) {
            open_question = &u;
        } else if (u.tag == Tag::Answer && open_question != nullptr) {
            QAPair p;
            p.id = fmt::format("{}-{:05}", id_prefix, pairs.size() + 1);
            p.question = open_question->text;
            p.answer = u.text;
            p.stratum = normalize_stratum(p.question);
            pairs.push_back(std::move(p));
            open_question = nullptr;
        }
    }
    return pairs;
}

std::string normalize_stratum(std::string_view question) {
    std::string stripped;
    stripped.reserve(question.size());
    for (char c : question) {
        const auto uc = static_cast<unsigned char>(c);
        if (uc < 0x80 && std::ispunct(uc)) continue;
        stripped.push_back(c);
    }
    return text::collapse_whitespace(text::to_lower(stripped));
}

std::vector<std::size_t> largest_remainder(std::size_t total, std::span<const double> weights) {
    const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
    std::vector<std::size_t> counts(weights.size(), 0);
    if (weights.empty() || sum <= 0.0) return counts;

    std::vector<double> remainders(weights.size());
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double exact = static_cast<double>(total) * weights[i] / sum;
        const double floor = std::floor(exact);
        counts[i] = static_cast<std::size_t>(floor);
        remainders[i] = exact - floor;
        assigned += counts[i];
    }
    std::vector<std::size_t> order(weights.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return remainders[a] > remainders[b]; });
    // floor() can only undershoot, so `assigned <= total`; each index receives at most one extra.
    for (std::size_t k = 0; assigned < total; ++k, ++assigned) ++counts[order[k % order.size()]];
    return counts;
}

SplitResult split_dataset(std::span<const QAPair> pairs, const SplitFractions& fractions, std::uint64_t seed) {
    const std::array<double, 3> weights{fractions.train, fractions.validation, fractions.holdout};
    for (double w : weights) {
        if (!std::isfinite(w) || w < 0.0 || w > 1.0) throw ConfigError("split fractions must lie in [0, 1]");
    }
    if (std::abs(weights[0] + weights[1] + weights[2] - 1.0) > 1e-9) {
        throw ConfigError("split fractions must sum to 1");
    }
    if (pairs.empty()) throw ValidationError("cannot split an empty corpus");

    const auto counts = largest_remainder(pairs.size(), weights);

    std::vector<std::size_t> order(pairs.size());
    std::iota(order.begin(), order.end(), 0);
    StableRng rng(seed);
    rng.shuffle(std::span<std::size_t>(order));

    SplitResult result;
    result.pairs.assign(pairs.begin(), pairs.end());
    for (std::size_t k = 0; k < order.size(); ++k) {
        Split s = Split::Holdout;
        if (k < counts[0]) {
            s = Split::Train;
        } else if (k < counts[0] + counts[1]) {
            s = Split::Validation;
        }
        result.pairs[order[k]].split = s;
    }
    result.manifest.seed = seed;
    result.manifest.fractions = fractions;
    result.manifest.counts = {counts[0], counts[1], counts[2]};
    return result;
}

nlohmann::json to_json(const QAPair& p) {
    nlohmann::json j;
    j["id"] = p.id;
    j["question"] = p.question;
    j["answer"] = p.answer;
    j["stratum"] = p.stratum;
    j["split"] = p.split ? nlohmann::json(std::string(to_string(*p.split))) : nlohmann::json(nullptr);
    return j;
}

QAPair qa_pair_from_json(const nlohmann::json& j) {
    try {
        QAPair p;
        p.id = j.at("id").get<std::string>();
        p.question = j.at("question").get<std::string>();
        p.answer = j.at("answer").get<std::string>();
        p.stratum = j.contains("stratum") ? j.at("stratum").get<std::string>() : normalize_stratum(p.question);
        if (j.contains("split") && !j.at("split").is_null()) p.split = parse_split(j.at("split").get<std::string>());
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad QA pair record: ") + e.what());
    }
}

nlohmann::json to_json(const SplitManifest& m) {
    return {
        {"seed", m.seed},
        {"counts", {{"train", m.counts.train}, {"validation", m.counts.validation}, {"holdout", m.counts.holdout}}},
        {"fractions",
         {{"train", m.fractions.train}, {"validation", m.fractions.validation}, {"holdout", m.fractions.holdout}}},
    };
}

void check_unique_ids(std::span<const QAPair> pairs) {
    std::unordered_set<std::string> seen;
    for (const auto& p : pairs) {
        if (!seen.insert(p.id).second) throw DataIntegrityError("duplicate QA pair id '" + p.id + "'");
    }
}

}  // namespace reflect::corpus
