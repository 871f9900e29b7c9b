#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "synthprod/llm_gateway.hpp"

namespace synthprod {

// One pinned response. Matching is by request tag plus either an exact
// user-text hash or, failing that, a substring of the user text.
struct MockFixture {
    std::string tag;
    std::optional<std::uint64_t> user_hash;
    std::optional<std::string> user_contains;
    std::optional<std::string> text;
    std::optional<int> error_status; // respond with a transport error instead
    std::optional<TokenUsage> usage; // override the whitespace-token count
};

std::vector<MockFixture> load_mock_fixtures(const std::string& path);

// Per-attribute candidate values the mock value provider draws from,
// keyed by lowercased attribute key.
using MockVocabulary = std::map<std::string, std::vector<std::string>>;
MockVocabulary load_mock_vocabulary(const std::string& path);
std::string default_mock_vocabulary_path();

// Deterministic offline provider. Unpinned "generation" requests are answered
// by applying the requested modification to the product text in the prompt;
// unpinned "value_provider" requests draw from the vocabulary. Responses
// depend only on request content, never on call order.
class MockProvider : public LlmProvider {
public:
    MockProvider(std::vector<MockFixture> fixtures = {}, MockVocabulary vocabulary = {});

    std::string id() const override { return "mock"; }
    ChatResponse send(const ChatRequest& req) override;

    // Fictional replacement used for a real brand name.
    static std::string fictional_brand(const std::string& brand);

private:
    const MockFixture* match(const ChatRequest& req, std::uint64_t hash) const;
    std::string templated(const ChatRequest& req, std::uint64_t hash) const;
    std::string value_response(const std::string& user, std::uint64_t hash) const;
    std::string generation_response(const std::string& user) const;

    std::vector<MockFixture> fixtures_;
    MockVocabulary vocabulary_;
};

} // namespace synthprod
