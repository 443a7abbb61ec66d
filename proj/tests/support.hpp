#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <regex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unistd.h>
#include <vector>

#include <fmt/format.h>

#include "reflect/corpus.hpp"
#include "reflect/judge.hpp"
#include "reflect/reflection_record.hpp"

#ifndef REFLECT_TEST_DATA
#define REFLECT_TEST_DATA "tests/data"
#endif

namespace testsupport {

namespace fs = std::filesystem;

inline fs::path data_dir() { return fs::path(REFLECT_TEST_DATA); }

inline std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read fixture " + p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

class TempDir {
  public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = fs::temp_directory_path() / fmt::format("reflect-test-{}-{}", ::getpid(), counter++);
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const fs::path& path() const { return path_; }

  private:
    fs::path path_;
};

// Prompt text as typeset: drop the table cell label, join \newline breaks, turn ``x" into "x".
inline std::string prompt_from_latex(std::string tex) {
    if (auto amp = tex.find(" & "); amp != std::string::npos) tex = tex.substr(amp + 3);
    tex = std::regex_replace(tex, std::regex(R"(\\newline[ \t]*\n[ \t]*)"), "\n");
    tex = std::regex_replace(tex, std::regex(R"(\\\\\s*$)"), "");
    tex = std::regex_replace(tex, std::regex("``"), "\"");
    while (!tex.empty() && std::isspace(static_cast<unsigned char>(tex.back()))) tex.pop_back();
    return tex;
}

// A dataset table cell: one line per row, \#\#\# as ###, row breaks dropped.
inline std::string entry_from_latex(const std::string& tex) {
    std::string out;
    std::istringstream in(tex);
    std::string line;
    while (std::getline(in, line)) {
        line = std::regex_replace(line, std::regex(R"(\\#)"), "#");
        line = std::regex_replace(line, std::regex(R"(\s*\\\\\s*$)"), "");
        line = std::regex_replace(line, std::regex(R"(^\s+)"), "");
        out += line + "\n";
    }
    return out;
}

inline std::string question_for(std::size_t stratum) {
    static const std::vector<std::string> stems{
        "What do you like least about smoking?",
        "How do you feel when you smoke?",
        "What would change if you quit?",
        "When do you usually reach for a cigarette?",
        "Who in your life notices your smoking?",
        "What has worked for you before?",
        "What worries you about quitting?",
    };
    if (stratum < stems.size()) return stems[stratum];
    return fmt::format("Tell me about moment number {} with smoking.", stratum);
}

// `n` QA pairs across `strata` distinct questions; answers are unique.
inline std::vector<reflect::corpus::QAPair> synthetic_pairs(std::size_t n, std::size_t strata, std::string prefix = "qa") {
    std::vector<reflect::corpus::QAPair> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        reflect::corpus::QAPair p;
        p.id = fmt::format("{}-{:05}", prefix, i + 1);
        p.question = question_for(i % strata);
        p.answer = fmt::format("Answer {} from the client about their habit.", i);
        p.stratum = reflect::corpus::normalize_stratum(p.question);
        out.push_back(std::move(p));
    }
    return out;
}

// Transcript text in the BOT|TAG|text format with some chatter between pairs.
inline std::string synthetic_transcript(std::size_t pairs, std::size_t strata, std::size_t offset = 0) {
    std::string out;
    for (std::size_t i = 0; i < pairs; ++i) {
        const auto k = i + offset;
        if (k % 5 == 0) out += "BOT|OTHER|Hello again, thanks for checking in.\n";
        out += "BOT|QUESTION|" + question_for(k % strata) + "\n";
        if (k % 7 == 3) out += "CLIENT||hmm\n";
        out += fmt::format("CLIENT|ANSWER|Answer {} from the client about their habit.\n", k);
        if (k % 4 == 1) out += "BOT|REFLECTION|You are thinking it over.\n";
        if (k % 11 == 0) out += "\n";
    }
    return out;
}

inline std::vector<reflect::ReflectionRecord> reflections_for(const std::vector<reflect::corpus::QAPair>& pairs,
                                                              reflect::ReflectionKind kind) {
    std::vector<reflect::ReflectionRecord> out;
    for (const auto& p : pairs) {
        reflect::ReflectionRecord r;
        r.pair_id = p.id;
        r.kind = kind;
        r.question = p.question;
        r.answer = p.answer;
        r.reflection = "You feel strongly about item " + p.id + ".";
        r.source = "teacher";
        r.split = reflect::Split::Holdout;
        out.push_back(std::move(r));
    }
    return out;
}

// Judge records with scripted outcomes: `adherent(i)`, and `complex(i)` for adherent ones.
template <typename A, typename C>
std::vector<reflect::judge::EvaluationRecord> judged_records(const std::vector<reflect::corpus::QAPair>& pairs,
                                                             const std::string& model, reflect::ReflectionKind kind,
                                                             A adherent, C complex) {
    using namespace reflect::judge;
    std::vector<EvaluationRecord> out;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        EvaluationRecord r;
        r.pair_id = pairs[i].id;
        r.model = model;
        r.kind_requested = kind;
        r.question = pairs[i].question;
        r.answer = pairs[i].answer;
        r.reflection = "reflection for " + pairs[i].id;
        const bool a = adherent(i);
        r.adherence = {a ? Adherence::Adherent : Adherence::NotAdherent, a ? "True" : "False"};
        if (a) {
            const bool c = complex(i);
            r.rtype = TypeVerdict{c ? ReflectionType::Complex : ReflectionType::Simple, c ? "complex" : "simple"};
        }
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace testsupport
