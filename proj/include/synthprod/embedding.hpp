#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "synthprod/http_provider.hpp"

namespace synthprod {

struct EmbeddingVector {
    std::vector<double> values;
    std::string source_text;
};

// Cosine similarity clamped to [-1, 1]. Throws on dimension mismatch or a
// zero vector.
double cosine(const std::vector<double>& a, const std::vector<double>& b);
inline double cosine(const EmbeddingVector& a, const EmbeddingVector& b) { return cosine(a.values, b.values); }

class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::string id() const = 0;
    virtual std::vector<double> raw_embed(const std::string& text) const = 0;
};

// Checks the text and the resulting vector (finite, non-zero norm).
EmbeddingVector embed_text(const Embedder& embedder, const std::string& text);

// Offline fallback: L2-normalised frequency vector of hashed character
// trigrams of the lowercased, space-padded text.
class HashedTrigramEmbedder : public Embedder {
public:
    static constexpr std::size_t kDimension = 512;
    static constexpr std::uint64_t kSeed = 0x5eed5eed5eed5eedULL;

    std::string id() const override { return "trigram-512"; }
    std::vector<double> raw_embed(const std::string& text) const override;

    static std::size_t bucket(std::string_view trigram);
};

// Remote embedding endpoint with a per-process cache.
class RemoteEmbedder : public Embedder {
public:
    explicit RemoteEmbedder(RemoteEndpoint endpoint);
    std::string id() const override { return "remote-embedder"; }
    std::vector<double> raw_embed(const std::string& text) const override;

private:
    HttpEmbeddingClient client_;
    mutable std::mutex mu_;
    mutable std::map<std::string, std::vector<double>> cache_;
};

} // namespace synthprod
