#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "reflect/types.hpp"

namespace reflect::corpus {

enum class Speaker { Bot, Client };
enum class Tag { Question, Answer, Reflection, Other };

// One transcript line. `text` is trimmed and never contains a newline.
struct Utterance {
    Speaker speaker;
    std::optional<Tag> tag;
    std::string text;

    bool operator==(const Utterance&) const = default;
};

struct QAPair {
    std::string id;
    std::string question;
    std::string answer;
    std::string stratum;
    std::optional<Split> split;

    bool operator==(const QAPair&) const = default;
};

struct SplitCounts {
    std::size_t train = 0;
    std::size_t validation = 0;
    std::size_t holdout = 0;

    std::size_t total() const { return train + validation + holdout; }
    std::size_t of(Split s) const;
    bool operator==(const SplitCounts&) const = default;
};

struct SplitFractions {
    double train = 0;
    double validation = 0;
    double holdout = 0;

    // Fractions that reproduce the 2394/599/1201 partition of a 4194-pair corpus.
    static SplitFractions reference() { return {0.5708, 0.1428, 0.2864}; }
};

struct SplitManifest {
    std::uint64_t seed = 0;
    SplitCounts counts;
    SplitFractions fractions;
};

struct SplitResult {
    SplitManifest manifest;
    std::vector<QAPair> pairs;  // input order, split assigned
};

// Parses `SPEAKER|TAG|text` lines. Blank lines are skipped; an empty TAG field means untagged.
// Throws ParseError carrying the line number for anything else that does not conform.
std::vector<Utterance> parse_transcripts(std::string_view raw);

// Pairs each QUESTION with the next ANSWER, skipping REFLECTION/OTHER lines in between.
// A QUESTION superseded by another QUESTION before any ANSWER yields nothing.
// Ids are `<id_prefix>-<nnnnn>` numbered from 1 in extraction order.
std::vector<QAPair> extract_qa_pairs(std::span<const Utterance> utterances, std::string_view id_prefix = "qa");

// Lowercase, drop ASCII punctuation, collapse whitespace.
std::string normalize_stratum(std::string_view question);

// Largest-remainder apportionment of `total` over `weights` (which need not be normalized).
// Ties in the remainder go to the lower index.
std::vector<std::size_t> largest_remainder(std::size_t total, std::span<const double> weights);

// Seeded partition into train/validation/holdout. Throws ConfigError for bad fractions
// and ValidationError for an empty corpus.
SplitResult split_dataset(std::span<const QAPair> pairs, const SplitFractions& fractions, std::uint64_t seed);

std::string_view to_string(Speaker s);
std::string_view to_string(Tag t);

nlohmann::json to_json(const QAPair& p);
QAPair qa_pair_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SplitManifest& m);

// Throws DataIntegrityError on a repeated id.
void check_unique_ids(std::span<const QAPair> pairs);

}  // namespace reflect::corpus
