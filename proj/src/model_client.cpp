#include "reflect/model_client.hpp"

#include <cmath>
#include <ctime>
#include <thread>

#include "reflect/digest.hpp"
#include "reflect/errors.hpp"
#include "reflect/io.hpp"
#include "reflect/text.hpp"

namespace reflect::client {

namespace fs = std::filesystem;
using nlohmann::json;

void GenerationConfig::validate() const {
    if (!std::isfinite(temperature) || temperature < 0.0) throw ConfigError("temperature must be >= 0");
    if (top_k && *top_k <= 0) throw ConfigError("top_k must be positive when set");
    if (!(top_p > 0.0 && top_p <= 1.0)) throw ConfigError("top_p must lie in (0, 1]");
    if (max_tokens <= 0) throw ConfigError("max_tokens must be positive");
}

json to_json(const GenerationConfig& c) {
    json j{{"temperature", c.temperature}, {"top_p", c.top_p}, {"max_tokens", c.max_tokens}};
    j["top_k"] = c.top_k ? json(*c.top_k) : json(nullptr);
    return j;
}

GenerationConfig generation_config_from_json(const json& j, const GenerationConfig& defaults) {
    GenerationConfig c = defaults;
    try {
        if (j.contains("temperature")) c.temperature = j.at("temperature").get<double>();
        if (j.contains("top_p")) c.top_p = j.at("top_p").get<double>();
        if (j.contains("max_tokens")) c.max_tokens = j.at("max_tokens").get<int>();
        if (j.contains("top_k")) {
            c.top_k = j.at("top_k").is_null() ? std::nullopt : std::optional<int>(j.at("top_k").get<int>());
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad decoding config: ") + e.what());
    }
    c.validate();
    return c;
}

// ---------------------------------------------------------------- wire format

json build_request_body(const ModelEndpoint& endpoint, const ChatPrompt& prompt, const GenerationConfig& config) {
    json body{
        {"model", endpoint.model_id},
        {"messages",
         json::array({
             {{"role", "system"}, {"content", prompt.system_role}},
             {{"role", "assistant"}, {"content", prompt.system_message}},
             {{"role", "user"}, {"content", prompt.user_message}},
         })},
        {"temperature", config.temperature},
        {"top_p", config.top_p},
        {"max_tokens", config.max_tokens},
        {"stream", false},
    };
    // top_k is not part of the OpenAI schema but is honoured by vLLM/TGI-style servers.
    if (config.top_k) body["top_k"] = *config.top_k;
    return body;
}

std::string parse_response_body(const std::string& body, int status) {
    json j;
    try {
        j = json::parse(body);
    } catch (const json::parse_error&) {
        throw EndpointError("response body is not JSON", status);
    }
    const auto* choices = j.contains("choices") ? &j["choices"] : nullptr;
    if (choices == nullptr || !choices->is_array() || choices->empty()) {
        throw EndpointError("response has no choices", status);
    }
    const auto& msg = (*choices)[0].value("message", json::object());
    if (!msg.contains("content") || !msg["content"].is_string()) {
        throw EndpointError("response choice has no message content", status);
    }
    return msg["content"].get<std::string>();
}

// ---------------------------------------------------------------- mock

MockBackend::MockBackend(std::vector<MockRule> rules, std::optional<std::string> default_response)
    : rules_(std::move(rules)), default_(std::move(default_response)) {
    if (rules_.empty() && !default_) throw ConfigError("mock script is empty");
}

MockBackend::MockBackend(Responder responder, std::optional<std::string> default_response)
    : responder_(std::move(responder)), default_(std::move(default_response)) {
    if (!responder_ && !default_) throw ConfigError("mock script is empty");
}

std::shared_ptr<MockBackend> MockBackend::from_json(const json& script) {
    try {
        std::vector<MockRule> rules;
        for (const auto& r : script.value("rules", json::array())) {
            rules.push_back({r.at("match").get<std::string>(), r.at("response").get<std::string>()});
        }
        std::optional<std::string> def;
        if (script.contains("default") && !script["default"].is_null()) def = script["default"].get<std::string>();
        return std::make_shared<MockBackend>(std::move(rules), std::move(def));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad mock script: ") + e.what());
    }
}

std::string MockBackend::prompt_text(const ChatPrompt& p) {
    return p.system_role + "\n" + p.system_message + "\n" + p.user_message;
}

namespace {
std::string expand(std::string tmpl, const ChatPrompt& p) {
    const std::pair<std::string_view, const std::string*> vars[] = {
        {"{{system_role}}", &p.system_role},
        {"{{system_message}}", &p.system_message},
        {"{{user_message}}", &p.user_message},
    };
    for (const auto& [name, value] : vars) {
        for (auto pos = tmpl.find(name); pos != std::string::npos; pos = tmpl.find(name, pos + value->size())) {
            tmpl.replace(pos, name.size(), *value);
        }
    }
    return tmpl;
}
}  // namespace

std::string MockBackend::complete(const ModelEndpoint& endpoint, const ChatPrompt& prompt, const GenerationConfig&) {
    {
        std::lock_guard lock(mu_);
        calls_.push_back({endpoint.name, prompt});
        if (down_) throw TransportError("mock endpoint '" + endpoint.name + "' is down");
        if (transport_failures_ > 0) {
            --transport_failures_;
            throw TransportError("mock transport failure");
        }
        if (status_failures_ > 0) {
            --status_failures_;
            throw EndpointError("mock endpoint failure", failure_status_);
        }
    }
    if (responder_) {
        if (auto r = responder_(prompt)) return *r;
    }
    if (!rules_.empty()) {
        const auto hash = "sha256:" + sha256_hex(prompts::canonical_bytes(prompt));
        for (const auto& rule : rules_) {
            if (rule.match == hash) return expand(rule.response, prompt);
        }
        const auto subject = prompt_text(prompt);
        for (const auto& rule : rules_) {
            if (rule.match.starts_with("sha256:")) continue;
            if (text::glob_match(rule.match, subject)) return expand(rule.response, prompt);
        }
    }
    if (default_) return expand(*default_, prompt);
    throw MockMissError("no mock rule matches prompt for endpoint '" + endpoint.name + "'");
}

void MockBackend::fail_next(std::size_t n) {
    std::lock_guard lock(mu_);
    transport_failures_ = n;
}

void MockBackend::set_down(bool down) {
    std::lock_guard lock(mu_);
    down_ = down;
}

void MockBackend::fail_next_with_status(std::size_t n, int status) {
    std::lock_guard lock(mu_);
    status_failures_ = n;
    failure_status_ = status;
}

std::vector<MockCall> MockBackend::calls() const {
    std::lock_guard lock(mu_);
    return calls_;
}

std::size_t MockBackend::call_count() const {
    std::lock_guard lock(mu_);
    return calls_.size();
}

// ---------------------------------------------------------------- client

std::chrono::milliseconds RetryPolicy::backoff_before(int attempt) const {
    const double scaled = static_cast<double>(initial_backoff.count()) * std::pow(multiplier, attempt - 2);
    const auto capped = std::min(scaled, static_cast<double>(max_backoff.count()));
    return std::chrono::milliseconds(static_cast<long long>(capped));
}

ModelClient::ModelClient(std::shared_ptr<ChatBackend> default_backend, Options options)
    : default_backend_(std::move(default_backend)), options_(std::move(options)) {
    if (!options_.sleeper) options_.sleeper = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    if (options_.retry.max_attempts < 1) throw ConfigError("retry max_attempts must be >= 1");
}

void ModelClient::route(const std::string& endpoint_name, std::shared_ptr<ChatBackend> backend) {
    std::lock_guard lock(mu_);
    routes_[endpoint_name] = std::move(backend);
}

ChatBackend& ModelClient::backend_for(const std::string& endpoint_name) {
    std::lock_guard lock(mu_);
    if (auto it = routes_.find(endpoint_name); it != routes_.end()) return *it->second;
    if (!default_backend_) throw ConfigError("no backend configured for endpoint '" + endpoint_name + "'");
    return *default_backend_;
}

InFlightGate& ModelClient::gate_for(const ModelEndpoint& endpoint) {
    std::lock_guard lock(mu_);
    auto& slot = gates_[endpoint.name];
    if (!slot) slot = std::make_unique<InFlightGate>(endpoint.max_in_flight);
    return *slot;
}

std::string ModelClient::cache_key(const ModelEndpoint& endpoint, const ChatPrompt& prompt,
                                   const GenerationConfig& config, const std::string& salt) {
    json key{{"endpoint", endpoint.name}, {"prompt", prompts::canonical_bytes(prompt)}, {"config", to_json(config)}};
    if (!salt.empty()) key["salt"] = salt;
    return sha256_hex(key.dump());
}

std::optional<CompletionResult> ModelClient::read_cache(const std::string& key,
                                                        std::optional<std::string>& warning) const {
    if (!options_.cache_dir) return std::nullopt;
    const auto path = *options_.cache_dir / (key + ".json");
    std::error_code ec;
    if (!fs::exists(path, ec)) return std::nullopt;
    try {
        const auto j = json::parse(io::read_file(path));
        if (j.at("key").get<std::string>() != key) throw CacheError("key mismatch in " + path.string());
        CompletionResult r;
        r.text = j.at("text").get<std::string>();
        r.endpoint = j.at("endpoint").get<std::string>();
        r.attempt_count = j.at("attempt_count").get<int>();
        r.cached = true;
        return r;
    } catch (const std::exception& e) {
        warning = std::string("cache error: ") + e.what();
        return std::nullopt;
    }
}

void ModelClient::write_cache(const std::string& key, const CompletionResult& result) const {
    if (!options_.cache_dir) return;
    json j{{"key", key},
           {"endpoint", result.endpoint},
           {"text", result.text},
           {"attempt_count", result.attempt_count},
           {"created_unix", static_cast<long long>(std::time(nullptr))}};
    io::write_file_atomic(*options_.cache_dir / (key + ".json"), j.dump());
}

CompletionResult ModelClient::complete_chat(const ModelEndpoint& endpoint, const ChatPrompt& prompt,
                                            const GenerationConfig& config, const CallOptions& options) {
    const auto start = std::chrono::steady_clock::now();
    const auto key = cache_key(endpoint, prompt, config, options.cache_salt);

    std::optional<std::string> warning;
    if (auto hit = read_cache(key, warning)) {
        hit->latency = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
        return *hit;
    }

    auto& backend = backend_for(endpoint.name);
    auto& gate = gate_for(endpoint);
    std::string last_error;
    for (int attempt = 1; attempt <= options_.retry.max_attempts; ++attempt) {
        if (attempt > 1) options_.sleeper(options_.retry.backoff_before(attempt));
        try {
            std::string text;
            {
                GateHold hold(gate);
                {
                    std::lock_guard lock(mu_);
                    ++requests_;
                }
                text = backend.complete(endpoint, prompt, config);
            }
            CompletionResult r;
            r.text = std::move(text);
            r.endpoint = endpoint.name;
            r.attempt_count = attempt;
            r.cache_warning = warning;
            try {
                write_cache(key, r);
            } catch (const std::exception& e) {
                r.cache_warning = std::string("cache write failed: ") + e.what();
            }
            r.latency = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
            return r;
        } catch (const TransportError& e) {
            last_error = e.what();
        } catch (const EndpointError& e) {
            if (!e.retryable()) throw;
            last_error = e.what();
        }
    }
    throw TransportError("endpoint '" + endpoint.name + "' failed after " +
                         std::to_string(options_.retry.max_attempts) + " attempts: " + last_error);
}

std::size_t ModelClient::backend_requests() const {
    std::lock_guard lock(mu_);
    return requests_;
}

std::size_t ModelClient::peak_in_flight(const std::string& endpoint_name) const {
    std::lock_guard lock(mu_);
    auto it = gates_.find(endpoint_name);
    return it == gates_.end() ? 0 : it->second->peak();
}

}  // namespace reflect::client
