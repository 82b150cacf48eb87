#include "ecomedit/catalog.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "ecomedit/error.hpp"
#include "ecomedit/text.hpp"

namespace ecomedit {

namespace {

struct CategoryInfo {
    Category category;
    std::string_view id;
    std::string_view label;
};

constexpr std::array<CategoryInfo, 5> kCategoryInfo = {{
    {Category::ClothingShoesJewelry, "ClothingShoesJewelry", "Clothing Shoes and Jewelry"},
    {Category::Electronics, "Electronics", "Electronics"},
    {Category::HomeKitchen, "HomeKitchen", "Home and Kitchen"},
    {Category::IndustrialScientific, "IndustrialScientific", "Industrial and Scientific"},
    {Category::SportsOutdoors, "SportsOutdoors", "Sports and Outdoors"},
}};

std::size_t category_index(Category c) { return static_cast<std::size_t>(c); }

}  // namespace

std::string_view category_id(Category c) { return kCategoryInfo[category_index(c)].id; }
std::string_view category_label(Category c) { return kCategoryInfo[category_index(c)].label; }

std::optional<Category> parse_category(std::string_view id) {
    for (const auto& info : kCategoryInfo)
        if (info.id == id) return info.category;
    return std::nullopt;
}

std::vector<Violation> validate_record(const ProductRecord& record) {
    std::vector<Violation> out;
    if (record.product_id.empty()) out.push_back({"product_id", "must be nonempty"});
    if (text::trim(record.title).empty()) out.push_back({"title", "must be nonempty"});
    if (static_cast<std::size_t>(record.category) >= kCategoryInfo.size())
        out.push_back({"category", "must be one of the five catalog categories"});
    for (const auto& [key, value] : record.details) {
        (void)value;
        if (key.empty()) {
            out.push_back({"details", "attribute names must be nonempty"});
            break;
        }
    }
    return out;
}

std::vector<Violation> validate_record_json(const nlohmann::json& obj) {
    std::vector<Violation> out;
    if (!obj.is_object()) return {{"record", "must be a JSON object"}};
    auto string_field = [&](const char* name, bool required) {
        auto it = obj.find(name);
        if (it == obj.end()) {
            if (required) out.push_back({name, "missing"});
        } else if (!it->is_string()) {
            out.push_back({name, "must be a string"});
        }
    };
    string_field("product_id", true);
    string_field("title", true);
    string_field("category", true);
    string_field("description", false);
    if (auto it = obj.find("image_uri"); it != obj.end() && !it->is_null() && !it->is_string())
        out.push_back({"image_uri", "must be a string or null"});
    if (auto it = obj.find("details"); it != obj.end()) {
        if (!it->is_object()) {
            out.push_back({"details", "must be an object"});
        } else {
            for (auto d = it->begin(); d != it->end(); ++d)
                if (!d.value().is_string()) {
                    out.push_back({"details", "values must be strings"});
                    break;
                }
        }
    }
    if (!out.empty()) return out;

    if (obj["product_id"].get<std::string>().empty())
        out.push_back({"product_id", "must be nonempty"});
    if (text::trim(obj["title"].get<std::string>()).empty())
        out.push_back({"title", "must be nonempty"});
    if (!parse_category(obj["category"].get<std::string>()))
        out.push_back({"category", "must be one of the five catalog categories"});
    if (auto it = obj.find("details"); it != obj.end())
        for (auto d = it->begin(); d != it->end(); ++d)
            if (d.key().empty()) {
                out.push_back({"details", "attribute names must be nonempty"});
                break;
            }
    return out;
}

nlohmann::ordered_json to_json(const ProductRecord& r) {
    nlohmann::ordered_json j;
    j["product_id"] = r.product_id;
    j["title"] = r.title;
    j["category"] = std::string(category_id(r.category));
    j["description"] = r.description;
    nlohmann::ordered_json details = nlohmann::ordered_json::object();
    for (const auto& [k, v] : r.details) details[k] = v;
    j["details"] = std::move(details);
    if (r.image_uri)
        j["image_uri"] = *r.image_uri;
    else
        j["image_uri"] = nullptr;
    return j;
}

ProductRecord product_from_json(const nlohmann::json& obj) {
    auto violations = validate_record_json(obj);
    if (!violations.empty())
        throw CatalogError("invalid product record: " + violations.front().field + " " +
                           violations.front().rule);
    ProductRecord r;
    r.product_id = obj["product_id"].get<std::string>();
    r.title = obj["title"].get<std::string>();
    r.category = *parse_category(obj["category"].get<std::string>());
    r.description = obj.value("description", std::string{});
    if (auto it = obj.find("details"); it != obj.end())
        for (auto d = it->begin(); d != it->end(); ++d)
            r.details.emplace(d.key(), d.value().get<std::string>());
    if (auto it = obj.find("image_uri"); it != obj.end() && it->is_string())
        r.image_uri = it->get<std::string>();
    return r;
}

CatalogLoad parse_catalog(std::string_view contents, LoadOptions options) {
    CatalogLoad out;
    std::set<std::string> seen;
    auto lines = text::split_lines(contents);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (text::trim(lines[i]).empty()) continue;
        auto report = [&](std::string msg) {
            if (options.strict)
                throw CatalogError("line " + std::to_string(i + 1) + ": " + msg);
            out.issues.push_back({i + 1, std::move(msg)});
        };
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(lines[i]);
        } catch (const nlohmann::json::parse_error& e) {
            report(std::string("malformed record: ") + e.what());
            continue;
        }
        auto violations = validate_record_json(obj);
        if (!violations.empty()) {
            std::string msg = "invalid record:";
            for (const auto& v : violations) msg += " " + v.field + " (" + v.rule + ")";
            report(msg);
            continue;
        }
        ProductRecord rec = product_from_json(obj);
        if (!seen.insert(rec.product_id).second) throw DuplicateProductError(rec.product_id);
        out.records.push_back(std::move(rec));
    }
    return out;
}

CatalogLoad load_catalog(const std::filesystem::path& path, LoadOptions options) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CatalogError("cannot open catalog: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_catalog(ss.str(), options);
}

std::string serialize_catalog(const std::vector<ProductRecord>& records) {
    std::string out;
    for (const auto& r : records) {
        out += to_json(r).dump();
        out += '\n';
    }
    return out;
}

void write_catalog(const std::vector<ProductRecord>& records, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw CatalogError("cannot write catalog: " + path.string());
    out << serialize_catalog(records);
}

std::vector<ProductRecord> sample_products(const std::vector<ProductRecord>& catalog,
                                           std::size_t n, std::uint64_t seed) {
    if (n > catalog.size())
        throw SampleSizeError("sample size " + std::to_string(n) + " exceeds catalog size " +
                              std::to_string(catalog.size()));
    if (n == 0) return {};

    std::array<std::vector<std::size_t>, 5> buckets;
    for (std::size_t i = 0; i < catalog.size(); ++i)
        buckets[category_index(catalog[i].category)].push_back(i);

    const double total = static_cast<double>(catalog.size());
    std::array<std::size_t, 5> quota{};
    std::array<double, 5> remainder{};
    std::size_t assigned = 0;
    for (std::size_t c = 0; c < 5; ++c) {
        double exact = static_cast<double>(n) * static_cast<double>(buckets[c].size()) / total;
        quota[c] = static_cast<std::size_t>(exact);
        remainder[c] = exact - static_cast<double>(quota[c]);
        assigned += quota[c];
    }
    std::array<std::size_t, 5> order{0, 1, 2, 3, 4};
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    for (std::size_t k = 0; assigned < n; ++k) {
        std::size_t c = order[k % 5];
        if (quota[c] < buckets[c].size()) {
            ++quota[c];
            ++assigned;
        }
    }

    std::mt19937_64 rng(seed);
    std::vector<std::size_t> chosen;
    chosen.reserve(n);
    for (std::size_t c = 0; c < 5; ++c) {
        auto& idx = buckets[c];
        // Partial Fisher-Yates with an explicit modulus so the draw sequence
        // does not depend on the standard library's distribution code.
        for (std::size_t i = 0; i < quota[c]; ++i) {
            std::size_t j = i + static_cast<std::size_t>(rng() % (idx.size() - i));
            std::swap(idx[i], idx[j]);
            chosen.push_back(idx[i]);
        }
    }
    std::sort(chosen.begin(), chosen.end());
    std::vector<ProductRecord> out;
    out.reserve(n);
    for (auto i : chosen) out.push_back(catalog[i]);
    return out;
}

}  // namespace ecomedit
