#include "synthprod/embedding.hpp"

#include <algorithm>
#include <cmath>

#include "synthprod/error.hpp"
#include "synthprod/text.hpp"

namespace synthprod {

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw invalid_input("cosine of vectors with different dimensions");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) throw invalid_input("cosine of a zero vector");
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

EmbeddingVector embed_text(const Embedder& embedder, const std::string& text) {
    if (text::trim(text).empty()) throw invalid_input("cannot embed empty text");
    EmbeddingVector v{embedder.raw_embed(text), text};
    double norm = 0.0;
    for (double x : v.values) {
        if (!std::isfinite(x)) throw invalid_input("embedding of '" + text + "' has non-finite entries");
        norm += x * x;
    }
    if (norm == 0.0) throw invalid_input("embedding of '" + text + "' has zero norm");
    return v;
}

std::size_t HashedTrigramEmbedder::bucket(std::string_view trigram) {
    return static_cast<std::size_t>(text::fnv1a64(trigram, kSeed) % kDimension);
}

std::vector<double> HashedTrigramEmbedder::raw_embed(const std::string& input) const {
    std::string padded = " " + text::to_lower(text::collapse_whitespace(input)) + " ";
    std::vector<double> v(kDimension, 0.0);
    for (std::size_t i = 0; i + 3 <= padded.size(); ++i) v[bucket(std::string_view(padded).substr(i, 3))] += 1.0;
    double norm = 0.0;
    for (double x : v) norm += x * x;
    if (norm > 0.0) {
        norm = std::sqrt(norm);
        for (double& x : v) x /= norm;
    }
    return v;
}

RemoteEmbedder::RemoteEmbedder(RemoteEndpoint endpoint) : client_(std::move(endpoint)) {}

std::vector<double> RemoteEmbedder::raw_embed(const std::string& text) const {
    {
        std::lock_guard lock(mu_);
        auto it = cache_.find(text);
        if (it != cache_.end()) return it->second;
    }
    auto v = client_.embed(text);
    std::lock_guard lock(mu_);
    cache_.emplace(text, v);
    return v;
}

} // namespace synthprod
