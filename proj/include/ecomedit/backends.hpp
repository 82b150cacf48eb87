#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "ecomedit/error.hpp"

namespace ecomedit {

struct GenRequest {
    std::string prompt;
    std::string model_id;
    int max_tokens = 256;
    double temperature = 0.0;
    std::optional<std::string> image_uri;
};

struct TokenUsage {
    int prompt = 0;
    int completion = 0;
};

struct GenResponse {
    std::string text;  // raw completion, untrimmed
    std::string model_id;
    TokenUsage usage;

    bool operator==(const GenResponse& o) const {
        return text == o.text && model_id == o.model_id && usage.prompt == o.usage.prompt &&
               usage.completion == o.usage.completion;
    }
};

enum class BackendKind { http_api, replay };

struct BackendConfig {
    BackendKind kind = BackendKind::replay;
    std::string model_id;
    std::optional<std::string> endpoint;   // http_api
    std::string credentials_env;           // name of the variable holding the key
    std::optional<std::filesystem::path> transcript;  // replay source, or record target for http_api
    int max_concurrency = 4;
    int max_retries = 3;
    std::chrono::milliseconds backoff_base{200};
    std::chrono::milliseconds timeout{60000};
    int max_tokens = 256;
    double temperature = 0.0;
    bool supports_image = false;
};

void validate(const BackendConfig& cfg);
BackendConfig backend_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::ordered_json to_json(const BackendConfig& cfg);

enum class BackendErrorKind { transport, cache_miss, bad_response, unavailable };

class BackendError : public Error {
public:
    BackendError(BackendErrorKind kind, std::string what, int attempts = 0, std::string hash = {})
        : Error(std::move(what)), kind_(kind), attempts_(attempts), hash_(std::move(hash)) {}
    BackendErrorKind kind() const noexcept { return kind_; }
    int attempts() const noexcept { return attempts_; }
    const std::string& hash() const noexcept { return hash_; }

private:
    BackendErrorKind kind_;
    int attempts_;
    std::string hash_;
};

// Content hash over (model_id, prompt, max_tokens, temperature, image_uri).
// See docs/formats.md for the exact canonical byte string.
std::string request_hash(const GenRequest& req);
std::string canonical_request_bytes(const GenRequest& req);

class Backend {
public:
    explicit Backend(BackendConfig cfg) : cfg_(std::move(cfg)) {}
    virtual ~Backend() = default;
    Backend(const Backend&) = delete;
    Backend& operator=(const Backend&) = delete;

    virtual GenResponse complete(const GenRequest& req) = 0;
    const BackendConfig& config() const noexcept { return cfg_; }

    // Request with this backend's model id and decoding defaults.
    GenRequest request(std::string prompt, std::optional<std::string> image_uri = std::nullopt) const;

    std::uint64_t calls() const noexcept { return calls_.load(); }

protected:
    void count_call() noexcept { ++calls_; }

private:
    BackendConfig cfg_;
    std::atomic<std::uint64_t> calls_{0};
};

struct TranscriptEntry {
    std::string hash;
    GenRequest request;
    std::string response;
};

nlohmann::ordered_json to_json(const TranscriptEntry& e);
TranscriptEntry transcript_entry_from_json(const nlohmann::json& j);

// Read-only after construction, so concurrent lookups need no locking.
class ReplayBackend : public Backend {
public:
    explicit ReplayBackend(BackendConfig cfg);
    ReplayBackend(BackendConfig cfg, std::vector<TranscriptEntry> entries);

    GenResponse complete(const GenRequest& req) override;
    std::size_t size() const noexcept { return table_.size(); }

private:
    void add(TranscriptEntry e);
    std::unordered_map<std::string, std::string> table_;
};

// Chat-completion style HTTP client. The API key is read from the environment
// variable named in the config on every call and never stored.
class HttpBackend : public Backend {
public:
    explicit HttpBackend(BackendConfig cfg);
    GenResponse complete(const GenRequest& req) override;
};

// Answers from a callable; used for scripted fixtures and tests.
class FunctionBackend : public Backend {
public:
    using Fn = std::function<std::string(const GenRequest&)>;
    FunctionBackend(BackendConfig cfg, Fn fn) : Backend(std::move(cfg)), fn_(std::move(fn)) {}
    GenResponse complete(const GenRequest& req) override;

private:
    Fn fn_;
};

// Serves hits from an existing transcript and forwards misses to an inner
// backend, appending the new entry. Appends are serialized.
class RecordingBackend : public Backend {
public:
    RecordingBackend(std::unique_ptr<Backend> inner, std::filesystem::path transcript);
    GenResponse complete(const GenRequest& req) override;

private:
    std::unique_ptr<Backend> inner_;
    std::filesystem::path path_;
    std::mutex mu_;
    std::unordered_map<std::string, std::string> table_;
};

std::vector<TranscriptEntry> read_transcript(const std::filesystem::path& path);
void append_transcript(const std::filesystem::path& path, const TranscriptEntry& entry);

// replay -> ReplayBackend; http_api -> HttpBackend, wrapped in a
// RecordingBackend when a transcript path is configured.
std::unique_ptr<Backend> make_backend(const BackendConfig& cfg);

inline GenResponse complete(const GenRequest& req, Backend& backend) { return backend.complete(req); }

using BatchResult = std::variant<GenResponse, BackendError>;

// Output index i answers input index i. At most config().max_concurrency
// requests are in flight; one failing item never aborts the rest.
std::vector<BatchResult> batch_complete(std::span<const GenRequest> reqs, Backend& backend);

// Runs fn(i) for i in [0, n) on up to `workers` threads.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

// Plausibility in [0,1], parsed from the scorer's completion.
double plausibility(const std::string& statement, Backend& scorer);

}  // namespace ecomedit
