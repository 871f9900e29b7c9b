#pragma once

#include <chrono>
#include <string>
#include <vector>

#include "synthprod/llm_gateway.hpp"

namespace synthprod {

struct RemoteEndpoint {
    std::string url;     // e.g. https://api.example.com/v1/chat/completions
    std::string model;
    std::string api_key; // sent as a bearer token when non-empty
    std::chrono::seconds timeout{60};
};

// Splits "scheme://host[:port]/path" into ("scheme://host[:port]", "/path").
std::pair<std::string, std::string> split_url(const std::string& url);

// Chat-completion provider speaking the common JSON wire format:
// {"model", "messages": [system, user], "temperature", "max_tokens"} ->
// {"choices": [{"message": {"content"}}], "usage": {"prompt_tokens", "completion_tokens"}}.
class HttpChatProvider : public LlmProvider {
public:
    explicit HttpChatProvider(RemoteEndpoint endpoint);
    std::string id() const override { return "remote:" + endpoint_.model; }
    ChatResponse send(const ChatRequest& req) override;

private:
    RemoteEndpoint endpoint_;
};

// Embedding client for {"model", "input"} -> {"data": [{"embedding": [...]}]}.
class HttpEmbeddingClient {
public:
    explicit HttpEmbeddingClient(RemoteEndpoint endpoint);
    std::vector<double> embed(const std::string& text) const;

private:
    RemoteEndpoint endpoint_;
};

} // namespace synthprod
