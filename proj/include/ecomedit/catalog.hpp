#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace ecomedit {

enum class Category {
    ClothingShoesJewelry,
    Electronics,
    HomeKitchen,
    IndustrialScientific,
    SportsOutdoors,
};

inline constexpr std::array<Category, 5> kAllCategories = {
    Category::ClothingShoesJewelry, Category::Electronics, Category::HomeKitchen,
    Category::IndustrialScientific, Category::SportsOutdoors};

std::string_view category_id(Category c);
// Human-readable row label, e.g. "Clothing Shoes and Jewelry".
std::string_view category_label(Category c);
std::optional<Category> parse_category(std::string_view id);

struct ProductRecord {
    std::string product_id;
    std::string title;
    Category category = Category::Electronics;
    std::string description;
    std::map<std::string, std::string> details;
    std::optional<std::string> image_uri;

    bool operator==(const ProductRecord&) const = default;
};

struct Violation {
    std::string field;
    std::string rule;
};

std::vector<Violation> validate_record(const ProductRecord& record);

// A raw JSON object may carry a category string outside the enum, so full
// validation runs on the JSON before it becomes a ProductRecord.
std::vector<Violation> validate_record_json(const nlohmann::json& obj);

nlohmann::ordered_json to_json(const ProductRecord& r);
ProductRecord product_from_json(const nlohmann::json& obj);

struct LineIssue {
    std::size_t line = 0;  // 1-based
    std::string message;
};

struct CatalogLoad {
    std::vector<ProductRecord> records;
    std::vector<LineIssue> issues;
};

struct LoadOptions {
    // Treat malformed or invalid lines as fatal instead of collecting them.
    bool strict = false;
};

// Reads one JSON object per line. Blank lines are ignored. Throws
// DuplicateProductError on repeated ids; other per-line problems are collected
// into CatalogLoad::issues unless options.strict.
CatalogLoad load_catalog(const std::filesystem::path& path, LoadOptions options = {});
CatalogLoad parse_catalog(std::string_view contents, LoadOptions options = {});

void write_catalog(const std::vector<ProductRecord>& records, const std::filesystem::path& path);
std::string serialize_catalog(const std::vector<ProductRecord>& records);

// Stratified sample without replacement. Per-category quotas use the largest
// remainder method, so every category lands within one item of its
// proportional share. Output keeps the catalog's order.
std::vector<ProductRecord> sample_products(const std::vector<ProductRecord>& catalog,
                                           std::size_t n, std::uint64_t seed);

}  // namespace ecomedit
