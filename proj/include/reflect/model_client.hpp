#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "reflect/concurrency.hpp"
#include "reflect/prompts.hpp"

namespace reflect::client {

using prompts::ChatPrompt;

struct ModelEndpoint {
    std::string name;
    std::string base_url;  // e.g. https://api.openai.com/v1, or mock://
    std::string model_id;
    std::string api_key_env;  // name of the environment variable holding the key; may be empty
    std::size_t max_in_flight = 4;
};

struct GenerationConfig {
    double temperature = 0.6;
    std::optional<int> top_k = 100;
    double top_p = 1.0;
    int max_tokens = 128;

    // Student inference decoding: temperature 0.6, top-k 100, top-p 1.0.
    static GenerationConfig student() { return {0.6, 100, 1.0, 128}; }
    // Teacher generation defaults.
    static GenerationConfig teacher() { return {0.7, std::nullopt, 1.0, 256}; }
    // Deterministic classification calls.
    static GenerationConfig judge() { return {0.0, std::nullopt, 1.0, 8}; }

    // Throws ConfigError on out-of-range values.
    void validate() const;

    bool operator==(const GenerationConfig&) const = default;
};

nlohmann::json to_json(const GenerationConfig& c);
// Missing keys fall back to `defaults`.
GenerationConfig generation_config_from_json(const nlohmann::json& j, const GenerationConfig& defaults);

struct CompletionResult {
    std::string text;
    std::string endpoint;
    bool cached = false;
    std::chrono::milliseconds latency{0};
    int attempt_count = 1;
    // Set when a cache entry existed but could not be read; the call then went to the backend.
    std::optional<std::string> cache_warning;
};

// Transport behind the client. Implementations throw TransportError for connection-level
// failures and EndpointError for protocol-level ones.
class ChatBackend {
  public:
    virtual ~ChatBackend() = default;
    virtual std::string complete(const ModelEndpoint& endpoint, const ChatPrompt& prompt,
                                 const GenerationConfig& config) = 0;
};

// OpenAI-compatible `POST <base_url>/chat/completions`.
class HttpBackend : public ChatBackend {
  public:
    explicit HttpBackend(std::chrono::seconds timeout = std::chrono::seconds(60)) : timeout_(timeout) {}
    std::string complete(const ModelEndpoint& endpoint, const ChatPrompt& prompt,
                         const GenerationConfig& config) override;

  private:
    std::chrono::seconds timeout_;
};

// Three-message mapping: instruction as system, question as assistant context, answer as user.
nlohmann::json build_request_body(const ModelEndpoint& endpoint, const ChatPrompt& prompt,
                                  const GenerationConfig& config);
// Extracts `choices[0].message.content`. Throws EndpointError on a malformed body.
std::string parse_response_body(const std::string& body, int status);

struct MockRule {
    // `sha256:<hex of canonical prompt bytes>` for an exact prompt, otherwise a glob over
    // "system_role\nsystem_message\nuser_message".
    std::string match;
    // May reference {{system_role}}, {{system_message}}, {{user_message}}.
    std::string response;
};

struct MockCall {
    std::string endpoint;
    ChatPrompt prompt;
};

// Deterministic scripted backend for offline runs and tests.
class MockBackend : public ChatBackend {
  public:
    using Responder = std::function<std::optional<std::string>(const ChatPrompt&)>;

    // Throws ConfigError if there are no rules and no default.
    MockBackend(std::vector<MockRule> rules, std::optional<std::string> default_response);
    // Per-item scripting: `responder` returning nullopt falls through to the default.
    MockBackend(Responder responder, std::optional<std::string> default_response);

    // `{"rules": [{"match": ..., "response": ...}], "default": ...}`
    static std::shared_ptr<MockBackend> from_json(const nlohmann::json& script);

    std::string complete(const ModelEndpoint& endpoint, const ChatPrompt& prompt,
                         const GenerationConfig& config) override;

    // The next `n` calls throw TransportError.
    void fail_next(std::size_t n);
    // While down every call throws TransportError.
    void set_down(bool down);
    // Next `n` calls throw EndpointError with `status`.
    void fail_next_with_status(std::size_t n, int status);

    std::vector<MockCall> calls() const;
    std::size_t call_count() const;

    static std::string prompt_text(const ChatPrompt& prompt);

  private:
    std::vector<MockRule> rules_;
    Responder responder_;
    std::optional<std::string> default_;
    mutable std::mutex mu_;
    std::vector<MockCall> calls_;
    std::size_t transport_failures_ = 0;
    std::size_t status_failures_ = 0;
    int failure_status_ = 500;
    bool down_ = false;
};

struct RetryPolicy {
    int max_attempts = 4;
    std::chrono::milliseconds initial_backoff{500};
    double multiplier = 2.0;
    std::chrono::milliseconds max_backoff{8000};

    std::chrono::milliseconds backoff_before(int attempt) const;  // attempt >= 2
};

struct CallOptions {
    // Distinguishes deliberate re-asks of an identical prompt in the cache key.
    std::string cache_salt;
};

class ModelClient {
  public:
    using Sleeper = std::function<void(std::chrono::milliseconds)>;

    struct Options {
        RetryPolicy retry;
        std::optional<std::filesystem::path> cache_dir;
        Sleeper sleeper;  // defaults to std::this_thread::sleep_for
    };

    ModelClient(std::shared_ptr<ChatBackend> default_backend, Options options);

    // Routes calls for `endpoint_name` to `backend` instead of the default.
    void route(const std::string& endpoint_name, std::shared_ptr<ChatBackend> backend);

    // Serves from cache when possible; otherwise calls the backend with exponential-backoff
    // retries. Throws TransportError when retries are exhausted and EndpointError for
    // non-retryable statuses.
    CompletionResult complete_chat(const ModelEndpoint& endpoint, const ChatPrompt& prompt,
                                   const GenerationConfig& config, const CallOptions& options = {});

    static std::string cache_key(const ModelEndpoint& endpoint, const ChatPrompt& prompt,
                                 const GenerationConfig& config, const std::string& salt = {});

    std::size_t backend_requests() const;
    std::size_t peak_in_flight(const std::string& endpoint_name) const;

  private:
    std::optional<CompletionResult> read_cache(const std::string& key, std::optional<std::string>& warning) const;
    void write_cache(const std::string& key, const CompletionResult& result) const;
    InFlightGate& gate_for(const ModelEndpoint& endpoint);
    ChatBackend& backend_for(const std::string& endpoint_name);

    std::shared_ptr<ChatBackend> default_backend_;
    Options options_;
    mutable std::mutex mu_;
    std::map<std::string, std::shared_ptr<ChatBackend>> routes_;
    std::map<std::string, std::unique_ptr<InFlightGate>> gates_;
    std::size_t requests_ = 0;
};

}  // namespace reflect::client
