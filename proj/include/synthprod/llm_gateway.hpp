#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <semaphore>
#include <string>

#include <json.hpp>

#include "synthprod/error.hpp"

namespace synthprod {

struct TokenUsage {
    std::int64_t input_tokens = 0;
    std::int64_t output_tokens = 0;

    TokenUsage& operator+=(const TokenUsage& o) {
        input_tokens += o.input_tokens;
        output_tokens += o.output_tokens;
        return *this;
    }
    bool operator==(const TokenUsage&) const = default;
};

nlohmann::json to_json(const TokenUsage& u);

struct ChatRequest {
    std::string system_text;
    std::string user_text;
    double temperature = 1.0;
    int max_output_tokens = 1024;
    std::string request_tag; // "value_provider", "generation", ...
};

// Throws Error(invalid) when the request breaks its invariants.
void validate_request(const ChatRequest& req);

struct ChatResponse {
    std::string text;
    TokenUsage usage;
    std::string provider_id;
    std::chrono::milliseconds latency{0};
};

// Raised by providers. status is the HTTP status when there was one, 0 for
// connection failures and timeouts.
class TransportError : public Error {
public:
    TransportError(int status, bool retryable, const std::string& what)
        : Error(ErrorKind::provider, what), status_(status), retryable_(retryable) {}
    int status() const noexcept { return status_; }
    bool retryable() const noexcept { return retryable_; }

private:
    int status_;
    bool retryable_;
};

// 429, 5xx and connection-level failures are retryable; other 4xx are not.
bool is_retryable_status(int status);

class LlmProvider {
public:
    virtual ~LlmProvider() = default;
    virtual std::string id() const = 0;
    // Must be safe to call concurrently.
    virtual ChatResponse send(const ChatRequest& req) = 0;
};

struct RetryPolicy {
    int max_retries = 3;
    std::chrono::milliseconds base_delay{500};
    double factor = 2.0;
    double jitter = 0.2;                       // +/- fraction of each delay
    std::chrono::milliseconds max_total_wait{10000};
};

class TokenLedger {
public:
    void add(const std::string& tag, const TokenUsage& usage);
    TokenUsage total() const;
    std::map<std::string, TokenUsage> by_tag() const;
    std::int64_t calls(const std::string& tag) const;
    nlohmann::json to_json() const;

private:
    mutable std::mutex mu_;
    std::map<std::string, TokenUsage> usage_;
    std::map<std::string, std::int64_t> calls_;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

struct GatewayOptions {
    RetryPolicy retry;
    int max_parallel = 4;
};

// Retrying, permit-bounded front for one provider. complete() may be
// called from any number of threads.
class LlmGateway {
public:
    explicit LlmGateway(std::shared_ptr<LlmProvider> provider, GatewayOptions options = {},
                        Sleeper sleeper = {});

    ChatResponse complete(const ChatRequest& req);

    const TokenLedger& ledger() const { return ledger_; }
    std::uint64_t retry_count() const { return retries_.load(); }
    std::chrono::milliseconds total_wait() const { return std::chrono::milliseconds(waited_ms_.load()); }
    const std::string provider_id() const { return provider_->id(); }

    // Delay before retry number `attempt` (0-based), jitter included.
    std::chrono::milliseconds backoff_delay(int attempt, std::uint64_t jitter_seed) const;

private:
    std::shared_ptr<LlmProvider> provider_;
    GatewayOptions options_;
    Sleeper sleeper_;
    TokenLedger ledger_;
    std::counting_semaphore<1024> permits_;
    std::atomic<std::uint64_t> retries_{0};
    std::atomic<std::int64_t> waited_ms_{0};
};

} // namespace synthprod
