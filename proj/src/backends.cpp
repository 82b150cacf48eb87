#include "ecomedit/backends.hpp"

#include <atomic>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <thread>

#include "ecomedit/text.hpp"

namespace ecomedit {

namespace {

std::string format_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

void validate(const BackendConfig& cfg) {
    if (cfg.model_id.empty()) throw ConfigError("backend model_id must be set");
    if (cfg.max_concurrency < 1) throw ConfigError("max_concurrency must be positive");
    if (cfg.max_retries < 0) throw ConfigError("max_retries must be non-negative");
    if (cfg.max_tokens < 1) throw ConfigError("max_tokens must be positive");
    if (cfg.temperature < 0) throw ConfigError("temperature must be non-negative");
    switch (cfg.kind) {
    case BackendKind::http_api:
        if (!cfg.endpoint || cfg.endpoint->empty())
            throw ConfigError("http_api backend '" + cfg.model_id + "' requires an endpoint");
        break;
    case BackendKind::replay:
        if (!cfg.transcript)
            throw ConfigError("replay backend '" + cfg.model_id + "' requires a transcript path");
        if (!std::filesystem::exists(*cfg.transcript))
            throw ConfigError("transcript not found: " + cfg.transcript->string());
        break;
    }
}

BackendConfig backend_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
    BackendConfig cfg;
    const std::string kind = j.value("kind", std::string("replay"));
    if (kind == "replay")
        cfg.kind = BackendKind::replay;
    else if (kind == "http_api")
        cfg.kind = BackendKind::http_api;
    else
        throw ConfigError("unknown backend kind: " + kind);
    cfg.model_id = j.value("model_id", std::string{});
    if (j.contains("endpoint") && j["endpoint"].is_string()) cfg.endpoint = j["endpoint"].get<std::string>();
    cfg.credentials_env = j.value("credentials_env", std::string{});
    if (j.contains("transcript") && j["transcript"].is_string()) {
        std::filesystem::path p = j["transcript"].get<std::string>();
        cfg.transcript = p.is_absolute() || base_dir.empty() ? p : base_dir / p;
    }
    cfg.max_concurrency = j.value("max_concurrency", cfg.max_concurrency);
    cfg.max_retries = j.value("max_retries", cfg.max_retries);
    cfg.backoff_base = std::chrono::milliseconds(j.value("backoff_base_ms", 200));
    cfg.timeout = std::chrono::milliseconds(j.value("timeout_ms", 60000));
    cfg.max_tokens = j.value("max_tokens", cfg.max_tokens);
    cfg.temperature = j.value("temperature", cfg.temperature);
    cfg.supports_image = j.value("supports_image", false);
    return cfg;
}

nlohmann::ordered_json to_json(const BackendConfig& cfg) {
    nlohmann::ordered_json j;
    j["kind"] = cfg.kind == BackendKind::replay ? "replay" : "http_api";
    j["model_id"] = cfg.model_id;
    if (cfg.endpoint) j["endpoint"] = *cfg.endpoint;
    j["credentials_env"] = cfg.credentials_env;
    if (cfg.transcript) j["transcript"] = cfg.transcript->string();
    j["max_concurrency"] = cfg.max_concurrency;
    j["max_retries"] = cfg.max_retries;
    j["backoff_base_ms"] = cfg.backoff_base.count();
    j["timeout_ms"] = cfg.timeout.count();
    j["max_tokens"] = cfg.max_tokens;
    j["temperature"] = cfg.temperature;
    j["supports_image"] = cfg.supports_image;
    return j;
}

std::string canonical_request_bytes(const GenRequest& req) {
    constexpr char sep = '\x1f';
    std::string s;
    s += req.model_id;
    s += sep;
    s += req.prompt;
    s += sep;
    s += std::to_string(req.max_tokens);
    s += sep;
    s += format_real(req.temperature);
    s += sep;
    if (req.image_uri) {
        s += '1';
        s += *req.image_uri;
    } else {
        s += '0';
    }
    return s;
}

std::string request_hash(const GenRequest& req) {
    return text::hex64(text::fnv1a64(canonical_request_bytes(req)));
}

GenRequest Backend::request(std::string prompt, std::optional<std::string> image_uri) const {
    GenRequest r;
    r.prompt = std::move(prompt);
    r.model_id = cfg_.model_id;
    r.max_tokens = cfg_.max_tokens;
    r.temperature = cfg_.temperature;
    r.image_uri = std::move(image_uri);
    return r;
}

nlohmann::ordered_json to_json(const TranscriptEntry& e) {
    nlohmann::ordered_json req;
    req["model_id"] = e.request.model_id;
    req["prompt"] = e.request.prompt;
    req["max_tokens"] = e.request.max_tokens;
    req["temperature"] = e.request.temperature;
    if (e.request.image_uri)
        req["image_uri"] = *e.request.image_uri;
    else
        req["image_uri"] = nullptr;
    nlohmann::ordered_json j;
    j["hash"] = e.hash;
    j["request"] = std::move(req);
    j["response"] = e.response;
    return j;
}

TranscriptEntry transcript_entry_from_json(const nlohmann::json& j) {
    TranscriptEntry e;
    e.hash = j.at("hash").get<std::string>();
    const auto& r = j.at("request");
    e.request.model_id = r.at("model_id").get<std::string>();
    e.request.prompt = r.at("prompt").get<std::string>();
    e.request.max_tokens = r.at("max_tokens").get<int>();
    e.request.temperature = r.at("temperature").get<double>();
    if (r.contains("image_uri") && r["image_uri"].is_string())
        e.request.image_uri = r["image_uri"].get<std::string>();
    e.response = j.at("response").get<std::string>();
    return e;
}

std::vector<TranscriptEntry> read_transcript(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open transcript: " + path.string());
    std::vector<TranscriptEntry> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        try {
            out.push_back(transcript_entry_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": bad transcript entry: " + e.what());
        }
    }
    return out;
}

void append_transcript(const std::filesystem::path& path, const TranscriptEntry& entry) {
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out) throw ConfigError("cannot append to transcript: " + path.string());
    out << to_json(entry).dump() << '\n';
}

ReplayBackend::ReplayBackend(BackendConfig cfg) : Backend(std::move(cfg)) {
    if (!config().transcript) throw ConfigError("replay backend requires a transcript path");
    for (auto& e : read_transcript(*config().transcript)) add(std::move(e));
}

ReplayBackend::ReplayBackend(BackendConfig cfg, std::vector<TranscriptEntry> entries)
    : Backend(std::move(cfg)) {
    for (auto& e : entries) add(std::move(e));
}

void ReplayBackend::add(TranscriptEntry e) {
    // The stored request is authoritative; a stale hash field is recomputed.
    table_.insert_or_assign(request_hash(e.request), std::move(e.response));
}

GenResponse ReplayBackend::complete(const GenRequest& req) {
    count_call();
    const auto h = request_hash(req);
    auto it = table_.find(h);
    if (it == table_.end())
        throw BackendError(BackendErrorKind::cache_miss,
                           "replay cache miss for request " + h + " (model " + req.model_id + ")", 1, h);
    GenResponse r;
    r.text = it->second;
    r.model_id = req.model_id;
    return r;
}

GenResponse FunctionBackend::complete(const GenRequest& req) {
    count_call();
    GenResponse r;
    r.text = fn_(req);
    r.model_id = req.model_id;
    return r;
}

RecordingBackend::RecordingBackend(std::unique_ptr<Backend> inner, std::filesystem::path transcript)
    : Backend(inner->config()), inner_(std::move(inner)), path_(std::move(transcript)) {
    if (std::filesystem::exists(path_))
        for (auto& e : read_transcript(path_)) table_.insert_or_assign(request_hash(e.request), e.response);
}

GenResponse RecordingBackend::complete(const GenRequest& req) {
    count_call();
    const auto h = request_hash(req);
    {
        std::lock_guard lock(mu_);
        if (auto it = table_.find(h); it != table_.end()) {
            GenResponse r;
            r.text = it->second;
            r.model_id = req.model_id;
            return r;
        }
    }
    GenResponse fresh = inner_->complete(req);
    std::lock_guard lock(mu_);
    if (table_.emplace(h, fresh.text).second) append_transcript(path_, {h, req, fresh.text});
    return fresh;
}

std::unique_ptr<Backend> make_backend(const BackendConfig& cfg) {
    switch (cfg.kind) {
    case BackendKind::replay:
        validate(cfg);
        return std::make_unique<ReplayBackend>(cfg);
    case BackendKind::http_api: {
        validate(cfg);
        auto http = std::make_unique<HttpBackend>(cfg);
        if (cfg.transcript) return std::make_unique<RecordingBackend>(std::move(http), *cfg.transcript);
        return http;
    }
    }
    throw ConfigError("unknown backend kind");
}

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    const std::size_t nthreads = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, workers)));
    if (nthreads == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    pool.reserve(nthreads);
    for (std::size_t t = 0; t < nthreads; ++t)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) fn(i);
        });
}

std::vector<BatchResult> batch_complete(std::span<const GenRequest> reqs, Backend& backend) {
    std::vector<std::optional<BatchResult>> slots(reqs.size());
    parallel_for(reqs.size(), backend.config().max_concurrency, [&](std::size_t i) {
        try {
            slots[i].emplace(std::in_place_type<GenResponse>, backend.complete(reqs[i]));
        } catch (const BackendError& e) {
            slots[i].emplace(std::in_place_type<BackendError>, e);
        } catch (const std::exception& e) {
            slots[i].emplace(std::in_place_type<BackendError>, BackendErrorKind::unavailable, e.what());
        }
    });
    std::vector<BatchResult> out;
    out.reserve(reqs.size());
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

double plausibility(const std::string& statement, Backend& scorer) {
    if (text::trim(statement).empty()) throw ParseError("plausibility statement must be nonempty");
    auto resp = scorer.complete(scorer.request(statement));
    const std::string t = text::trim(resp.text);
    double v = 0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc{} || ptr == t.data() || !(v >= 0.0 && v <= 1.0))
        throw BackendError(BackendErrorKind::bad_response,
                           "scorer returned a non-probability: '" + t + "'");
    return v;
}

}  // namespace ecomedit
