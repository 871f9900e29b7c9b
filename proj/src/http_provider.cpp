#include "synthprod/http_provider.hpp"

#include <httplib.h>
#include <json.hpp>

namespace synthprod {

using nlohmann::json;

std::pair<std::string, std::string> split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw invalid_input("endpoint '" + url + "' lacks a scheme");
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

namespace {

json post_json(const RemoteEndpoint& ep, const json& body) {
    auto [base, path] = split_url(ep.url);
    httplib::Client cli(base);
    cli.set_connection_timeout(ep.timeout);
    cli.set_read_timeout(ep.timeout);
    cli.set_write_timeout(ep.timeout);
    httplib::Headers headers;
    if (!ep.api_key.empty()) headers.emplace("Authorization", "Bearer " + ep.api_key);

    auto res = cli.Post(path, headers, body.dump(), "application/json");
    if (!res) throw TransportError(0, true, "request to " + ep.url + " failed: " + httplib::to_string(res.error()));
    if (res->status < 200 || res->status >= 300) {
        throw TransportError(res->status, is_retryable_status(res->status),
                             "HTTP " + std::to_string(res->status) + " from " + ep.url);
    }
    try {
        return json::parse(res->body);
    } catch (const json::exception& e) {
        throw TransportError(res->status, false, std::string("malformed JSON from provider: ") + e.what());
    }
}

} // namespace

HttpChatProvider::HttpChatProvider(RemoteEndpoint endpoint) : endpoint_(std::move(endpoint)) {
    if (endpoint_.url.empty()) throw invalid_input("remote provider needs llm.endpoint");
}

ChatResponse HttpChatProvider::send(const ChatRequest& req) {
    json messages = json::array();
    if (!req.system_text.empty()) messages.push_back({{"role", "system"}, {"content", req.system_text}});
    messages.push_back({{"role", "user"}, {"content", req.user_text}});
    json body = {{"model", endpoint_.model},
                 {"messages", messages},
                 {"temperature", req.temperature},
                 {"max_tokens", req.max_output_tokens}};
    auto doc = post_json(endpoint_, body);

    ChatResponse resp;
    resp.provider_id = id();
    try {
        resp.text = doc.at("choices").at(0).at("message").at("content").get<std::string>();
        if (doc.contains("usage")) {
            const auto& u = doc["usage"];
            resp.usage.input_tokens = u.value("prompt_tokens", u.value("input_tokens", std::int64_t{0}));
            resp.usage.output_tokens = u.value("completion_tokens", u.value("output_tokens", std::int64_t{0}));
        }
    } catch (const json::exception& e) {
        throw TransportError(200, false, std::string("unexpected completion payload: ") + e.what());
    }
    return resp;
}

HttpEmbeddingClient::HttpEmbeddingClient(RemoteEndpoint endpoint) : endpoint_(std::move(endpoint)) {
    if (endpoint_.url.empty()) throw invalid_input("remote embedder needs similarity.endpoint");
}

std::vector<double> HttpEmbeddingClient::embed(const std::string& text) const {
    auto doc = post_json(endpoint_, {{"model", endpoint_.model}, {"input", text}});
    try {
        return doc.at("data").at(0).at("embedding").get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw TransportError(200, false, std::string("unexpected embedding payload: ") + e.what());
    }
}

} // namespace synthprod
