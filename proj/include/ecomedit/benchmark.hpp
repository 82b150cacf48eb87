#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ecomedit/backends.hpp"
#include "ecomedit/catalog.hpp"
#include "ecomedit/pipeline.hpp"

namespace ecomedit {

inline constexpr int kBenchmarkSchemaVersion = 1;

struct LocalityProbe {
    std::string prompt;                // "The {attribute} of {product} is"
    std::string reference_completion;  // empty until the pre-edit model fills it

    bool operator==(const LocalityProbe&) const = default;
};

struct PortabilityProbe {
    std::string prompt;
    std::string replaced_subject;
    std::string target;

    bool operator==(const PortabilityProbe&) const = default;
};

struct EditSample {
    std::string sample_id;
    ClaimKind kind = ClaimKind::feature;
    Category category = Category::Electronics;
    std::string subject;
    std::string edit_prompt;
    std::string target_new;
    std::string ground_truth;
    std::string source_model;
    std::vector<LocalityProbe> locality;
    std::vector<PortabilityProbe> portability;

    bool operator==(const EditSample&) const = default;
};

std::string make_edit_prompt(const std::string& subject, ClaimKind kind);

// Text bound to the distracting-neighbor {description} slot: the product
// description when present, otherwise its details as "key: value" pairs.
std::string neighbor_description(const ProductRecord& product);

// Parses "The <attribute> of <product> is <value>" and returns the cloze
// "The <attribute> of <product> is", or nullopt when the sentence does not
// follow the template.
std::optional<std::string> locality_cloze(const std::string& sentence, const std::string& title);

// nullopt when the product has neither description nor details, or the judge
// answer does not follow the template. Backend errors propagate.
std::optional<LocalityProbe> build_locality_probe(const ProductRecord& product, Backend& judge,
                                                  std::vector<std::string>* log = nullptr);

std::optional<PortabilityProbe> build_portability_probe(const std::string& subject, const std::string& edit_prompt,
                                                        const std::string& target_new, Backend& judge,
                                                        std::vector<std::string>* log = nullptr);

struct AssembleResult {
    std::vector<EditSample> samples;
    std::vector<ManifestEntry> manifest;
};

// One sample per candidate plus one per kept concept; probes are attached
// when they can be built and satisfy the locality/portability invariants.
AssembleResult assemble_samples(const std::vector<EditCandidate>& candidates, Backend& judge, int concurrency = 1);

nlohmann::ordered_json to_json(const EditSample& s);
EditSample sample_from_json(const nlohmann::json& j);

void write_benchmark(const std::vector<EditSample>& samples, const std::filesystem::path& path);
std::string serialize_benchmark(const std::vector<EditSample>& samples);

struct BenchmarkLoad {
    std::vector<EditSample> samples;
    std::vector<LineIssue> issues;
};

// Corrupt lines are collected; a schema version other than the current one
// throws FormatVersionError.
BenchmarkLoad read_benchmark(const std::filesystem::path& path);
BenchmarkLoad parse_benchmark(std::string_view contents);

struct StatsRow {
    Category category;
    long long feature = 0;
    long long intention = 0;
    long long total() const { return feature + intention; }
};

struct StatsTable {
    std::array<StatsRow, 5> rows{};
    long long feature = 0;
    long long intention = 0;
    long long total() const { return feature + intention; }
};

StatsTable compute_stats(const std::vector<EditSample>& samples);
std::string render_stats(const StatsTable& t);
nlohmann::ordered_json stats_to_json(const StatsTable& t);

}  // namespace ecomedit
