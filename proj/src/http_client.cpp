#include "rega/distill.hpp"

#include <cstdlib>
#include <httplib.h>
#include <json.hpp>

namespace rega {

using nlohmann::json;

struct HttpGenerationClient::Impl {
    std::string base;       // scheme://host[:port]
    std::string path;       // request path
    std::string api_key;
    int timeout_seconds;
};

namespace {

// Splits an endpoint URL into base and path; an empty or "/" path falls back
// to the standard chat-completions route.
std::pair<std::string, std::string> split_endpoint(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw ValidationError("endpoint URL must include a scheme: '" + url + "'");
    }
    auto path_start = url.find('/', scheme_end + 3);
    std::string base = path_start == std::string::npos ? url : url.substr(0, path_start);
    std::string path = path_start == std::string::npos ? "" : url.substr(path_start);
    if (path.empty() || path == "/") path = "/v1/chat/completions";
    return {base, path};
}

} // namespace

HttpGenerationClient::HttpGenerationClient(std::string endpoint_url,
                                           std::string api_key_env,
                                           int timeout_seconds)
    : impl_(std::make_unique<Impl>()) {
    auto [base, path] = split_endpoint(endpoint_url);
    impl_->base = std::move(base);
    impl_->path = std::move(path);
    impl_->timeout_seconds = timeout_seconds;
    if (!api_key_env.empty()) {
        if (const char* key = std::getenv(api_key_env.c_str())) {
            impl_->api_key = key;
        }
    }
}

HttpGenerationClient::~HttpGenerationClient() = default;

std::string HttpGenerationClient::generate(const std::string& instruction,
                                           const GenerationParams& params) {
    // One bare user message per instruction, no system prompt.
    json body;
    body["model"] = params.model_name;
    body["messages"] = json::array({json{{"role", "user"}, {"content", instruction}}});
    body["temperature"] = params.temperature;
    body["top_p"] = params.top_p;
    body["max_tokens"] = params.max_new_tokens;

    httplib::Client cli(impl_->base);
    cli.set_connection_timeout(impl_->timeout_seconds, 0);
    cli.set_read_timeout(impl_->timeout_seconds, 0);
    httplib::Headers headers;
    if (!impl_->api_key.empty()) {
        headers.emplace("Authorization", "Bearer " + impl_->api_key);
    }

    auto res = cli.Post(impl_->path, headers, body.dump(), "application/json");
    if (!res) {
        throw EndpointUnreachable("cannot reach '" + impl_->base +
                                  "': " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
        throw GenerationError("HTTP " + std::to_string(res->status) + ": " +
                              res->body.substr(0, 200));
    }
    json reply;
    try {
        reply = json::parse(res->body);
    } catch (const json::exception& e) {
        throw GenerationError(std::string("unparseable completion reply: ") + e.what());
    }
    try {
        return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw GenerationError(std::string("completion reply missing content: ") + e.what());
    }
}

} // namespace rega
