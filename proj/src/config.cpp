#include "reflect/config.hpp"

#include <algorithm>
#include <set>

#include "reflect/digest.hpp"
#include "reflect/errors.hpp"
#include "reflect/io.hpp"
#include "reflect/judge.hpp"

namespace reflect::config {

namespace fs = std::filesystem;
using nlohmann::json;

const EndpointConfig& RunConfig::endpoint(const std::string& name) const {
    for (const auto& e : endpoints) {
        if (e.endpoint.name == name) return e;
    }
    throw ConfigError("unknown endpoint '" + name + "'");
}

const CandidateConfig& RunConfig::candidate(const std::string& name) const {
    for (const auto& c : candidates) {
        if (c.name == name) return c;
    }
    throw ConfigError("unknown candidate model '" + name + "'");
}

namespace {

const json& require(const json& j, const char* key, const std::string& where) {
    if (!j.is_object() || !j.contains(key)) throw ConfigError(where + ": missing required key '" + key + "'");
    return j.at(key);
}

template <typename T>
T get(const json& j, const char* key, const std::string& where) {
    try {
        return require(j, key, where).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

fs::path resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

RoleConfig parse_role(const json& j, const char* name, const client::GenerationConfig& defaults) {
    const auto& r = require(j, name, "config");
    RoleConfig role;
    role.endpoint = get<std::string>(r, "endpoint", name);
    role.decoding = client::generation_config_from_json(r.value("decoding", json::object()), defaults);
    return role;
}

}  // namespace

RunConfig parse_run_config(const json& j, const fs::path& base_dir) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    RunConfig cfg;
    cfg.output_dir = resolve(base_dir, j.value("output_dir", std::string("runs")));

    // corpus
    const auto& corpus = require(j, "corpus", "config");
    for (const auto& t : get<std::vector<std::string>>(corpus, "transcripts", "corpus")) {
        const auto p = resolve(base_dir, t);
        if (fs::is_directory(p)) {
            std::vector<fs::path> files;
            for (const auto& entry : fs::directory_iterator(p)) {
                if (entry.is_regular_file()) files.push_back(entry.path());
            }
            std::sort(files.begin(), files.end());
            cfg.transcripts.insert(cfg.transcripts.end(), files.begin(), files.end());
        } else if (fs::is_regular_file(p)) {
            cfg.transcripts.push_back(p);
        } else {
            throw ConfigError("corpus.transcripts: '" + p.string() + "' does not exist");
        }
    }
    if (cfg.transcripts.empty()) throw ConfigError("corpus.transcripts: no transcript files");
    const auto& split = require(corpus, "split", "corpus");
    cfg.split_seed = get<std::uint64_t>(split, "seed", "corpus.split");
    if (split.contains("fractions")) {
        const auto& f = split["fractions"];
        cfg.split_fractions = {get<double>(f, "train", "corpus.split.fractions"),
                               get<double>(f, "validation", "corpus.split.fractions"),
                               get<double>(f, "holdout", "corpus.split.fractions")};
    } else {
        cfg.split_fractions = corpus::SplitFractions::reference();
    }

    // endpoints
    std::set<std::string> names;
    for (const auto& e : require(j, "endpoints", "config")) {
        EndpointConfig ec;
        ec.endpoint.name = get<std::string>(e, "name", "endpoints[]");
        const auto where = "endpoints[" + ec.endpoint.name + "]";
        if (ec.endpoint.name.empty()) throw ConfigError("endpoints[]: name must not be empty");
        if (!names.insert(ec.endpoint.name).second) throw ConfigError(where + ": duplicate endpoint name");
        ec.endpoint.base_url = get<std::string>(e, "base_url", where);
        ec.endpoint.model_id = e.value("model_id", ec.endpoint.name);
        ec.endpoint.api_key_env = e.value("api_key_env", std::string{});
        ec.endpoint.max_in_flight = e.value("max_in_flight", std::size_t{4});
        if (ec.endpoint.max_in_flight == 0) throw ConfigError(where + ": max_in_flight must be positive");
        if (ec.is_mock()) {
            if (e.contains("mock")) {
                ec.mock_script = e["mock"];
            } else if (e.contains("mock_script")) {
                const auto p = resolve(base_dir, get<std::string>(e, "mock_script", where));
                if (!fs::is_regular_file(p)) throw ConfigError(where + ": mock_script '" + p.string() + "' does not exist");
                try {
                    ec.mock_script = json::parse(io::read_file(p));
                } catch (const json::exception& ex) {
                    throw ConfigError(where + ": mock_script is not JSON: " + ex.what());
                }
            } else {
                throw ConfigError(where + ": mock:// endpoints need 'mock' or 'mock_script'");
            }
        } else if (!ec.endpoint.base_url.starts_with("http://") && !ec.endpoint.base_url.starts_with("https://")) {
            throw ConfigError(where + ": base_url must be http(s):// or mock://");
        }
        cfg.endpoints.push_back(std::move(ec));
    }

    cfg.teacher = parse_role(j, "teacher", client::GenerationConfig::teacher());
    cfg.judge = parse_role(j, "judge", client::GenerationConfig::judge());
    cfg.endpoint(cfg.teacher.endpoint);
    cfg.endpoint(cfg.judge.endpoint);

    std::set<std::string> candidate_names;
    for (const auto& c : j.value("candidates", json::array())) {
        CandidateConfig cc;
        cc.name = get<std::string>(c, "name", "candidates[]");
        const auto where = "candidates[" + cc.name + "]";
        if (!candidate_names.insert(cc.name).second) throw ConfigError(where + ": duplicate candidate name");
        try {
            cc.kind = parse_kind(get<std::string>(c, "kind", where));
        } catch (const ValidationError& e) {
            throw ConfigError(where + ": " + e.what());
        }
        cc.from_teacher = c.value("from_teacher", false);
        if (!cc.from_teacher) {
            cc.endpoint = get<std::string>(c, "endpoint", where);
            cfg.endpoint(cc.endpoint);
        }
        if (c.contains("size")) {
            cc.size = judge::parse_model_size(get<std::string>(c, "size", where));
            if (!cc.size) throw ConfigError(where + ": unreadable size");
        }
        cc.manifest_name = c.value("manifest_name", cc.name);
        cc.decoding = client::generation_config_from_json(c.value("decoding", json::object()),
                                                          client::GenerationConfig::student());
        cfg.candidates.push_back(std::move(cc));
    }

    const auto& review = require(j, "review", "config");
    cfg.review.seed = get<std::uint64_t>(review, "seed", "review");
    cfg.review.fraction = review.value("fraction", 0.0508);
    if (!(cfg.review.fraction > 0.0 && cfg.review.fraction <= 1.0)) throw ConfigError("review.fraction must lie in (0, 1]");
    cfg.review.annotators = get<std::vector<std::string>>(review, "annotators", "review");
    const std::set<std::string> ann(cfg.review.annotators.begin(), cfg.review.annotators.end());
    if (ann.size() < 3 || ann.size() != cfg.review.annotators.size()) {
        throw ConfigError("review.annotators: need at least three distinct ids");
    }

    if (j.contains("client")) {
        const auto& c = j["client"];
        cfg.client.retry.max_attempts = c.value("max_attempts", cfg.client.retry.max_attempts);
        cfg.client.retry.initial_backoff =
            std::chrono::milliseconds(c.value("initial_backoff_ms", cfg.client.retry.initial_backoff.count()));
        cfg.client.retry.max_backoff =
            std::chrono::milliseconds(c.value("max_backoff_ms", cfg.client.retry.max_backoff.count()));
        cfg.client.cache = c.value("cache", true);
        cfg.client.workers = c.value("workers", cfg.client.workers);
        cfg.client.max_failure_fraction = c.value("max_failure_fraction", cfg.client.max_failure_fraction);
        if (cfg.client.retry.max_attempts < 1) throw ConfigError("client.max_attempts must be >= 1");
        if (cfg.client.workers == 0) throw ConfigError("client.workers must be positive");
    }
    return cfg;
}

RunConfig load_run_config(const fs::path& path) {
    if (!fs::is_regular_file(path)) throw ConfigError("config file '" + path.string() + "' does not exist");
    json j;
    try {
        j = json::parse(io::read_file(path));
    } catch (const json::exception& e) {
        throw ConfigError("config file '" + path.string() + "' is not valid JSON: " + e.what());
    }
    auto cfg = parse_run_config(j, fs::absolute(path).parent_path());
    cfg.source = fs::absolute(path);
    return cfg;
}

std::string config_hash(const RunConfig& cfg) {
    if (cfg.source.empty()) return {};
    return sha256_hex(io::read_file(cfg.source));
}

}  // namespace reflect::config
