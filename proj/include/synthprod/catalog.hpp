#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace synthprod {

namespace field {
inline constexpr const char* title = "title";
inline constexpr const char* description = "description";
inline constexpr const char* features = "features";
inline constexpr const char* brand = "brand";
inline constexpr const char* price = "price";
} // namespace field

// The three fields that generation rewrites, in prompt order.
const std::vector<std::string>& canonical_fields();

struct Evidence {
    std::string field;
    std::size_t begin = 0; // byte offsets into text_fields[field]
    std::size_t end = 0;
    std::string surface;

    bool operator==(const Evidence&) const = default;
};

struct AttributeRecord {
    std::string key;
    std::string value;
    std::vector<Evidence> evidences; // empty for absent attributes

    bool operator==(const AttributeRecord&) const = default;
};

struct Product {
    std::string id;
    std::string category;
    // Always holds title/description/features (possibly empty); brand and
    // price only when the source record had such paragraphs.
    std::map<std::string, std::string> text_fields;
    std::vector<AttributeRecord> attributes;
    std::size_t paragraph_count = 0;

    const std::string& field_text(const std::string& name) const;
    const AttributeRecord* find_attribute(const std::string& key) const;

    bool operator==(const Product&) const = default;
};

class Catalog {
public:
    Catalog() = default;
    explicit Catalog(std::vector<Product> products);

    const std::vector<Product>& products() const { return products_; }
    std::size_t size() const { return products_.size(); }
    bool empty() const { return products_.empty(); }
    const Product* find(const std::string& id) const;

private:
    std::vector<Product> products_;
    std::unordered_map<std::string, std::size_t> index_;
};

struct SkipDiagnostic {
    std::size_t line = 0; // 1-based
    std::string reason;
};

struct IngestResult {
    Catalog catalog;
    std::vector<SkipDiagnostic> skipped;
};

// Reads line-delimited product records and consolidates paragraphs into
// fields. Throws Error(io) when the stream is unreadable; bad lines are
// skipped and reported.
IngestResult ingest_catalog(std::istream& in, std::optional<std::size_t> max_products = std::nullopt);
IngestResult ingest_catalog_file(const std::string& path,
                                 std::optional<std::size_t> max_products = std::nullopt);
Catalog load_catalog(const std::string& path);

// Consolidated products in the same line schema ingest_catalog reads.
nlohmann::json product_to_record(const Product& p);
void write_catalog(std::ostream& out, const Catalog& catalog);
void write_catalog_file(const std::string& path, const Catalog& catalog);

// Product-only JSON used inside other documents (synthetic records,
// annotation tasks).
nlohmann::json product_snapshot(const Product& p);

struct SampledPair {
    Product product;
    AttributeRecord attribute;
};

std::vector<SampledPair> sample_generation_tasks(const Catalog& catalog, int top_k_categories,
                                                 int n_products, std::uint64_t seed);

// Categories ordered by product count desc, then name asc.
std::vector<std::pair<std::string, std::size_t>> ranked_categories(const Catalog& catalog);

struct MeanStd {
    double mean = 0.0;
    double std = 0.0; // population standard deviation
};

struct CatalogStats {
    std::size_t product_count = 0;
    std::map<std::string, std::size_t> category_histogram;
    std::map<std::string, std::size_t> attribute_histogram;
    MeanStd attrs_per_product;
    MeanStd evidence_spans_per_attr;
    MeanStd paragraphs_per_product;
    std::map<std::string, double> evidence_source_distribution;
};

CatalogStats compute_catalog_stats(const Catalog& catalog);
std::map<std::string, double> compute_evidence_distribution(const Catalog& catalog);

MeanStd mean_std(const std::vector<double>& xs);

} // namespace synthprod
