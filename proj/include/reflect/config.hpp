#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "reflect/corpus.hpp"
#include "reflect/model_client.hpp"

namespace reflect::config {

struct EndpointConfig {
    client::ModelEndpoint endpoint;
    // Scripted responses for `mock://` endpoints.
    std::optional<nlohmann::json> mock_script;

    bool is_mock() const { return endpoint.base_url.starts_with("mock://"); }
};

struct RoleConfig {
    std::string endpoint;
    client::GenerationConfig decoding;
};

struct CandidateConfig {
    std::string name;
    std::string endpoint;  // empty when reusing the teacher's holdout reflections
    ReflectionKind kind = ReflectionKind::Simple;
    std::optional<double> size;
    std::string manifest_name;  // e.g. "GPT-2 Small - Simple"; defaults to `name`
    bool from_teacher = false;
    client::GenerationConfig decoding = client::GenerationConfig::student();
};

struct ReviewConfig {
    double fraction = 0.0508;
    std::uint64_t seed = 0;
    std::vector<std::string> annotators;
};

struct ClientConfig {
    client::RetryPolicy retry;
    bool cache = true;
    std::size_t workers = 4;
    double max_failure_fraction = 0.01;
};

// Everything one reproducible run needs. Relative paths resolve against the config file.
struct RunConfig {
    std::filesystem::path source;  // the config file itself
    std::filesystem::path output_dir;
    std::vector<std::filesystem::path> transcripts;  // files, in order
    corpus::SplitFractions split_fractions;
    std::uint64_t split_seed = 0;
    std::vector<EndpointConfig> endpoints;
    RoleConfig teacher;
    RoleConfig judge;
    std::vector<CandidateConfig> candidates;
    ReviewConfig review;
    ClientConfig client;

    const EndpointConfig& endpoint(const std::string& name) const;
    const CandidateConfig& candidate(const std::string& name) const;
};

// Parses and validates. Throws ConfigError with a diagnostic naming the offending key.
RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

// Hash of the config file bytes.
std::string config_hash(const RunConfig& cfg);

}  // namespace reflect::config
