#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <cstdlib>

#include "reflect/errors.hpp"
#include "reflect/model_client.hpp"

namespace reflect::client {

namespace {

struct ParsedUrl {
    std::string origin;  // scheme://host[:port]
    std::string path;    // without trailing slash
};

ParsedUrl parse_base_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("base_url '" + url + "' has no scheme");
    const auto scheme = url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https") throw ConfigError("unsupported scheme in '" + url + "'");
    const auto path_start = url.find('/', scheme_end + 3);
    ParsedUrl out;
    out.origin = url.substr(0, path_start);
    out.path = path_start == std::string::npos ? "" : url.substr(path_start);
    while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
    return out;
}

}  // namespace

std::string HttpBackend::complete(const ModelEndpoint& endpoint, const ChatPrompt& prompt,
                                  const GenerationConfig& config) {
    const auto url = parse_base_url(endpoint.base_url);
    httplib::Client cli(url.origin);
    cli.set_connection_timeout(timeout_);
    cli.set_read_timeout(timeout_);
    cli.set_write_timeout(timeout_);

    httplib::Headers headers;
    if (!endpoint.api_key_env.empty()) {
        if (const char* key = std::getenv(endpoint.api_key_env.c_str()); key != nullptr && *key != '\0') {
            headers.emplace("Authorization", std::string("Bearer ") + key);
        }
    }
    const auto body = build_request_body(endpoint, prompt, config).dump();
    auto res = cli.Post(url.path + "/chat/completions", headers, body, "application/json");
    if (!res) {
        throw TransportError("request to '" + endpoint.name + "' failed: " + httplib::to_string(res.error()));
    }
    if (res->status < 200 || res->status >= 300) {
        throw EndpointError("endpoint '" + endpoint.name + "' returned HTTP " + std::to_string(res->status),
                            res->status);
    }
    return parse_response_body(res->body, res->status);
}

}  // namespace reflect::client
