#pragma once

#include <string>
#include <vector>

#include "synthprod/catalog.hpp"
#include "synthprod/embedding.hpp"
#include "synthprod/generator.hpp"

namespace synthprod {

// Lowercase alphanumeric runs (the metrics tokenizer).
std::vector<std::string> metric_tokens(const std::string& text);

// Mean over non-empty texts of unique/total tokens.
double type_token_ratio(const std::vector<std::string>& texts);

// KL(P_original || P_synthetic) over unigram distributions with add-one
// smoothing on the union vocabulary, natural log.
double token_distribution_kl(const std::vector<std::string>& original_texts,
                             const std::vector<std::string>& synthetic_texts);

// Mean pairwise cosine of embedded (original[i], synthetic[i]). Pairs where
// either side is empty are skipped.
double field_cosine_similarity(const std::vector<std::string>& original_texts,
                               const std::vector<std::string>& synthetic_texts, const Embedder& embedder);

struct FieldMetrics {
    std::string field;
    std::size_t pairs = 0;
    double ttr_original = 0.0;
    double ttr_synthetic = 0.0;
    double cosine_similarity = 0.0;
    double kl_divergence = 0.0;
};

// Per canonical field, pairing each synthetic product with its base product.
std::vector<FieldMetrics> compute_field_metrics(const Catalog& originals, const std::vector<SyntheticProduct>& synthetic,
                                                const Embedder& embedder);

struct CostModel {
    double price_per_m_input = 0.80;
    double price_per_m_output = 4.00;
    double vp_input_tokens = 402;
    double vp_output_tokens = 10;
    double gen_input_tokens = 1540; // midpoint of 1,480-1,600
    double gen_output_tokens = 141;
};

struct CostEstimate {
    double per_product = 0.0;
    double total = 0.0;
};

CostEstimate estimate_cost(const CostModel& model, long long n_products);

} // namespace synthprod
