#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ecomedit/backends.hpp"
#include "ecomedit/catalog.hpp"

namespace ecomedit {

enum class ClaimKind { feature, intention };

std::string_view claim_kind_name(ClaimKind k);
ClaimKind parse_claim_kind(std::string_view s);

inline constexpr std::size_t kMaxFeatureClaims = 3;
inline constexpr std::size_t kMaxConcepts = 5;

struct Claim {
    std::string claim_id;
    std::string product_id;
    ClaimKind kind = ClaimKind::feature;
    std::string text;
    std::string source_model;
    // Intention claims only: text starts with the required answer prefix.
    bool prefix_compliant = true;

    bool operator==(const Claim&) const = default;
};

struct Verdict {
    std::string claim_id;
    bool is_correct = false;
    std::optional<std::string> explanation;
    std::optional<std::string> suggested_correction;
    std::string judge_model;

    bool operator==(const Verdict&) const = default;
};

struct Concept {
    std::string text;
    double plausibility = 0.0;
    bool kept = false;

    bool operator==(const Concept&) const = default;
};

struct ConceptSet {
    std::string claim_id;
    std::vector<Concept> concepts;

    bool operator==(const ConceptSet&) const = default;
};

struct Correction {
    std::string claim_id;
    std::string corrected_text;
    std::string corrector_model;
    bool used_image = false;

    bool operator==(const Correction&) const = default;
};

struct EditCandidate {
    ProductRecord product;
    Claim claim;
    Verdict verdict;
    ConceptSet concepts;
    Correction correction;

    bool operator==(const EditCandidate&) const = default;
};

struct GeneratedFeatures {
    std::vector<Claim> claims;
    std::vector<std::string> warnings;
};

// Parses a student completion into at most three feature claims.
GeneratedFeatures parse_feature_completion(const std::string& completion, const ProductRecord& product,
                                           const std::string& source_model);
GeneratedFeatures generate_features(const ProductRecord& product, Backend& student);

// Throws ParseError on an empty completion.
Claim parse_intention_completion(const std::string& completion, const ProductRecord& product,
                                 const std::string& source_model);
Claim generate_intention(const ProductRecord& product, Backend& student);

// Throws VerdictParseError when the completion opens with neither yes nor no.
Verdict parse_verdict(const std::string& completion, const std::string& claim_id, const std::string& judge_model);

std::string judge_prompt(const Claim& claim, const ProductRecord& product);

// attempt > 0 appends a one-line reminder to answer yes or no first, so a
// re-judge is a distinct request from the first try.
Verdict judge_claim(const Claim& claim, const ProductRecord& product, Backend& judge, int attempt = 0);

// Declarative statement handed to the plausibility scorer.
std::string association_statement(const std::string& concept_text, const Claim& claim);

ConceptSet conceptualize(const ProductRecord& product, const Claim& claim, Backend& judge, Backend& scorer,
                         double threshold);

// Throws DegenerateCorrectionError when the completion is empty or repeats the claim.
Correction propose_correction(const ProductRecord& product, const Claim& claim, Backend& corrector);

struct PipelineConfig {
    double plausibility_threshold = 0.5;
    std::uint64_t seed = 0;
    int concurrency = 1;
    int max_rejudge = 1;
    std::optional<std::filesystem::path> checkpoint;  // JSONL stage log
};

PipelineConfig pipeline_config_from_json(const nlohmann::json& j);

struct ManifestEntry {
    std::string item;
    std::string stage;
    std::string message;
    bool fatal = false;
};

nlohmann::ordered_json to_json(const ManifestEntry& e);

// Append-only JSONL log of completed (item, stage) payloads.
class CheckpointStore {
public:
    CheckpointStore() = default;
    explicit CheckpointStore(std::filesystem::path path);

    std::optional<nlohmann::json> get(const std::string& item, const std::string& stage) const;
    void put(const std::string& item, const std::string& stage, const nlohmann::json& payload);

private:
    std::optional<std::filesystem::path> path_;
    mutable std::mutex mu_;
    std::map<std::pair<std::string, std::string>, nlohmann::json> records_;
};

struct PipelineRun {
    std::vector<EditCandidate> candidates;
    std::vector<Claim> claims;
    std::vector<Verdict> verdicts;
    std::vector<ManifestEntry> manifest;

    bool has_fatal() const;
};

struct PipelineBackends {
    std::vector<Backend*> students;
    Backend* judge = nullptr;
    Backend* scorer = nullptr;
    Backend* corrector = nullptr;
};

PipelineRun run_stage_pipeline(const std::vector<ProductRecord>& products, const PipelineBackends& backends,
                               const PipelineConfig& cfg);

nlohmann::ordered_json to_json(const Claim& c);
nlohmann::ordered_json to_json(const Verdict& v);
nlohmann::ordered_json to_json(const ConceptSet& c);
nlohmann::ordered_json to_json(const Correction& c);
nlohmann::ordered_json to_json(const EditCandidate& c);
Claim claim_from_json(const nlohmann::json& j);
Verdict verdict_from_json(const nlohmann::json& j);
ConceptSet concept_set_from_json(const nlohmann::json& j);
Correction correction_from_json(const nlohmann::json& j);
EditCandidate candidate_from_json(const nlohmann::json& j);

}  // namespace ecomedit
