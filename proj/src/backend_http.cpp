#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <cstdlib>
#include <regex>
#include <thread>

#include "ecomedit/backends.hpp"

namespace ecomedit {

namespace {

struct Endpoint {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

Endpoint split_endpoint(const std::string& url) {
    static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(url, m, re)) throw ConfigError("malformed endpoint url: " + url);
    return {m[1].str(), m[2].matched ? m[2].str() : std::string("/")};
}

nlohmann::json request_body(const GenRequest& req, bool with_image) {
    nlohmann::json msg;
    msg["role"] = "user";
    if (with_image && req.image_uri) {
        msg["content"] = nlohmann::json::array(
            {{{"type", "text"}, {"text", req.prompt}},
             {{"type", "image_url"}, {"image_url", {{"url", *req.image_uri}}}}});
    } else {
        msg["content"] = req.prompt;
    }
    nlohmann::json body;
    body["model"] = req.model_id;
    body["messages"] = nlohmann::json::array({msg});
    body["max_tokens"] = req.max_tokens;
    body["temperature"] = req.temperature;
    return body;
}

bool retryable(int status) { return status == 429 || status >= 500; }

}  // namespace

HttpBackend::HttpBackend(BackendConfig cfg) : Backend(std::move(cfg)) {
    if (!config().endpoint) throw ConfigError("http_api backend requires an endpoint");
    (void)split_endpoint(*config().endpoint);
}

GenResponse HttpBackend::complete(const GenRequest& req) {
    count_call();
    const auto& cfg = config();
    const Endpoint ep = split_endpoint(*cfg.endpoint);
    httplib::Client client(ep.origin);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg.timeout).count();
    client.set_connection_timeout(static_cast<time_t>(std::max<long long>(1, secs)));
    client.set_read_timeout(static_cast<time_t>(std::max<long long>(1, secs)));

    httplib::Headers headers;
    if (!cfg.credentials_env.empty()) {
        if (const char* key = std::getenv(cfg.credentials_env.c_str()); key && *key)
            headers.emplace("Authorization", std::string("Bearer ") + key);
    }
    const std::string body = request_body(req, cfg.supports_image).dump();

    const int max_attempts = cfg.max_retries + 1;
    std::string last_error;
    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
        auto res = client.Post(ep.path, headers, body, "application/json");
        if (res && res->status == 200) {
            try {
                auto j = nlohmann::json::parse(res->body);
                GenResponse out;
                out.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
                out.model_id = j.value("model", req.model_id);
                if (j.contains("usage")) {
                    out.usage.prompt = j["usage"].value("prompt_tokens", 0);
                    out.usage.completion = j["usage"].value("completion_tokens", 0);
                }
                return out;
            } catch (const nlohmann::json::exception& e) {
                throw BackendError(BackendErrorKind::bad_response,
                                   std::string("unparseable chat-completion response: ") + e.what(), attempt);
            }
        }
        if (res) {
            last_error = "HTTP " + std::to_string(res->status);
            if (!retryable(res->status))
                throw BackendError(BackendErrorKind::transport, last_error + " from " + ep.origin, attempt);
        } else {
            last_error = httplib::to_string(res.error());
        }
        if (attempt < max_attempts)
            std::this_thread::sleep_for(cfg.backoff_base * (1LL << (attempt - 1)));
    }
    throw BackendError(BackendErrorKind::transport,
                       "request failed after " + std::to_string(max_attempts) + " attempts: " + last_error,
                       max_attempts);
}

}  // namespace ecomedit
