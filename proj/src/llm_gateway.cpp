#include "synthprod/llm_gateway.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "synthprod/rng.hpp"
#include "synthprod/text.hpp"

namespace synthprod {

nlohmann::json to_json(const TokenUsage& u) {
    return {{"input_tokens", u.input_tokens}, {"output_tokens", u.output_tokens}};
}

void validate_request(const ChatRequest& req) {
    if (req.user_text.empty()) throw invalid_input("chat request has empty user text");
    if (!(req.temperature >= 0.0 && req.temperature <= 2.0))
        throw invalid_input("chat request temperature must be in [0, 2]");
    if (req.max_output_tokens <= 0) throw invalid_input("chat request max_output_tokens must be > 0");
}

bool is_retryable_status(int status) { return status == 0 || status == 408 || status == 429 || status >= 500; }

void TokenLedger::add(const std::string& tag, const TokenUsage& usage) {
    std::lock_guard lock(mu_);
    usage_[tag] += usage;
    ++calls_[tag];
}

TokenUsage TokenLedger::total() const {
    std::lock_guard lock(mu_);
    TokenUsage t;
    for (const auto& [_, u] : usage_) t += u;
    return t;
}

std::map<std::string, TokenUsage> TokenLedger::by_tag() const {
    std::lock_guard lock(mu_);
    return usage_;
}

std::int64_t TokenLedger::calls(const std::string& tag) const {
    std::lock_guard lock(mu_);
    auto it = calls_.find(tag);
    return it == calls_.end() ? 0 : it->second;
}

nlohmann::json TokenLedger::to_json() const {
    std::lock_guard lock(mu_);
    nlohmann::json j = nlohmann::json::object();
    TokenUsage total;
    for (const auto& [tag, u] : usage_) {
        j[tag] = synthprod::to_json(u);
        j[tag]["calls"] = calls_.at(tag);
        total += u;
    }
    j["total"] = synthprod::to_json(total);
    return j;
}

LlmGateway::LlmGateway(std::shared_ptr<LlmProvider> provider, GatewayOptions options, Sleeper sleeper)
    : provider_(std::move(provider)),
      options_(options),
      sleeper_(sleeper ? std::move(sleeper) : Sleeper([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); })),
      permits_(std::clamp(options.max_parallel, 1, 1024)) {
    if (!provider_) throw invalid_input("gateway requires a provider");
}

std::chrono::milliseconds LlmGateway::backoff_delay(int attempt, std::uint64_t jitter_seed) const {
    const auto& r = options_.retry;
    double nominal = static_cast<double>(r.base_delay.count()) * std::pow(r.factor, attempt);
    Rng rng(mix_seed(jitter_seed, static_cast<std::uint64_t>(attempt)));
    double scale = 1.0 + r.jitter * (2.0 * rng.uniform01() - 1.0);
    return std::chrono::milliseconds(static_cast<std::int64_t>(std::llround(nominal * scale)));
}

ChatResponse LlmGateway::complete(const ChatRequest& req) {
    validate_request(req);
    permits_.acquire();
    struct Release {
        std::counting_semaphore<1024>& s;
        ~Release() { s.release(); }
    } release{permits_};

    const auto jitter_seed = text::fnv1a64(req.user_text);
    std::int64_t waited = 0;
    for (int attempt = 0;; ++attempt) {
        auto start = std::chrono::steady_clock::now();
        try {
            ChatResponse resp = provider_->send(req);
            resp.latency = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
            if (resp.provider_id.empty()) resp.provider_id = provider_->id();
            if (resp.usage.input_tokens < 0 || resp.usage.output_tokens < 0)
                throw TransportError(0, false, "provider reported negative token usage");
            ledger_.add(req.request_tag, resp.usage);
            return resp;
        } catch (const TransportError& e) {
            if (!e.retryable() || attempt >= options_.retry.max_retries) throw;
            auto delay = backoff_delay(attempt, jitter_seed).count();
            delay = std::min<std::int64_t>(delay, options_.retry.max_total_wait.count() - waited);
            if (delay < 0) throw;
            retries_.fetch_add(1);
            waited += delay;
            waited_ms_.fetch_add(delay);
            sleeper_(std::chrono::milliseconds(delay));
        }
    }
}

} // namespace synthprod
