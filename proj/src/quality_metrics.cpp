#include "synthprod/quality_metrics.hpp"

#include <cmath>
#include <map>
#include <set>
#include <unordered_map>

#include "synthprod/error.hpp"
#include "synthprod/text.hpp"

namespace synthprod {

std::vector<std::string> metric_tokens(const std::string& t) { return text::word_tokens(t); }

double type_token_ratio(const std::vector<std::string>& texts) {
    double sum = 0.0;
    std::size_t counted = 0;
    for (const auto& t : texts) {
        auto toks = metric_tokens(t);
        if (toks.empty()) continue;
        std::set<std::string> types(toks.begin(), toks.end());
        sum += static_cast<double>(types.size()) / static_cast<double>(toks.size());
        ++counted;
    }
    if (counted == 0) throw invalid_input("type-token ratio needs at least one non-empty text");
    return sum / static_cast<double>(counted);
}

double token_distribution_kl(const std::vector<std::string>& original_texts,
                             const std::vector<std::string>& synthetic_texts) {
    std::unordered_map<std::string, double> p_counts, q_counts;
    double p_total = 0.0, q_total = 0.0;
    for (const auto& t : original_texts)
        for (auto& tok : metric_tokens(t)) {
            p_counts[tok] += 1.0;
            p_total += 1.0;
        }
    for (const auto& t : synthetic_texts)
        for (auto& tok : metric_tokens(t)) {
            q_counts[tok] += 1.0;
            q_total += 1.0;
        }
    if (p_total == 0.0 || q_total == 0.0) throw invalid_input("KL divergence needs tokens on both sides");

    std::set<std::string> vocab;
    for (const auto& [w, _] : p_counts) vocab.insert(w);
    for (const auto& [w, _] : q_counts) vocab.insert(w);
    const double v = static_cast<double>(vocab.size());

    double kl = 0.0;
    for (const auto& w : vocab) {
        auto pi = p_counts.find(w), qi = q_counts.find(w);
        double p = ((pi == p_counts.end() ? 0.0 : pi->second) + 1.0) / (p_total + v);
        double q = ((qi == q_counts.end() ? 0.0 : qi->second) + 1.0) / (q_total + v);
        kl += p * std::log(p / q);
    }
    return std::max(kl, 0.0);
}

double field_cosine_similarity(const std::vector<std::string>& original_texts,
                               const std::vector<std::string>& synthetic_texts, const Embedder& embedder) {
    if (original_texts.size() != synthetic_texts.size())
        throw invalid_input("cosine similarity needs paired lists of equal length");
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < original_texts.size(); ++i) {
        if (text::trim(original_texts[i]).empty() || text::trim(synthetic_texts[i]).empty()) continue;
        sum += cosine(embed_text(embedder, original_texts[i]), embed_text(embedder, synthetic_texts[i]));
        ++n;
    }
    if (n == 0) throw invalid_input("cosine similarity needs at least one non-empty pair");
    return sum / static_cast<double>(n);
}

std::vector<FieldMetrics> compute_field_metrics(const Catalog& originals, const std::vector<SyntheticProduct>& synthetic,
                                                const Embedder& embedder) {
    std::vector<FieldMetrics> out;
    for (const auto& f : canonical_fields()) {
        std::vector<std::string> orig, synth;
        for (const auto& s : synthetic) {
            const Product* base = originals.find(s.base_id);
            if (!base) throw invalid_input("synthetic product " + s.id + " has no base product " + s.base_id);
            auto it = s.text_fields.find(f);
            orig.push_back(base->field_text(f));
            synth.push_back(it == s.text_fields.end() ? std::string{} : it->second);
        }
        FieldMetrics m;
        m.field = f;
        m.pairs = orig.size();
        try {
            m.ttr_original = type_token_ratio(orig);
            m.ttr_synthetic = type_token_ratio(synth);
            m.kl_divergence = token_distribution_kl(orig, synth);
            m.cosine_similarity = field_cosine_similarity(orig, synth, embedder);
        } catch (const Error&) {
            m.ttr_original = m.ttr_synthetic = m.kl_divergence = m.cosine_similarity = std::nan("");
        }
        out.push_back(m);
    }
    return out;
}

CostEstimate estimate_cost(const CostModel& m, long long n_products) {
    if (n_products < 0) throw invalid_input("n_products must be >= 0");
    CostEstimate c;
    c.per_product = (m.vp_input_tokens + m.gen_input_tokens) * m.price_per_m_input / 1e6 +
                    (m.vp_output_tokens + m.gen_output_tokens) * m.price_per_m_output / 1e6;
    c.total = static_cast<double>(n_products) * c.per_product;
    return c;
}

} // namespace synthprod
