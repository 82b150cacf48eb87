#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ecomedit/benchmark.hpp"
#include "ecomedit/editor.hpp"
#include "ecomedit/model.hpp"

namespace ecomedit {

inline constexpr int kDefaultLocalityHorizon = 20;

// Fraction of target positions where the teacher-forced greedy top-1 token
// equals the target token. Throws MetricError when the target is empty.
double target_token_accuracy(const LanguageModel& model, const std::string& prompt, const std::string& target);
double target_token_accuracy(const LanguageModel& model, const TeacherForced& tf);

// Greedy decode of n tokens (stops early at the position limit).
Tokens greedy_continuation(const LanguageModel& model, const Tokens& prompt, int n);

// Top-1 agreement of the current model with a recorded continuation, teacher
// forced on prompt + continuation.
double continuation_agreement(const LanguageModel& model, const Tokens& prompt, const Tokens& continuation);

struct EditOutcome {
    std::string sample_id;
    EditMethod method = EditMethod::ROME;
    std::string model_id;
    ClaimKind kind = ClaimKind::feature;
    double rel = 0.0;
    std::optional<double> loc;
    std::optional<double> por;
    // Set when the edit or its evaluation failed; the metric fields are then
    // meaningless and the outcome is excluded from aggregation.
    std::optional<std::string> error;

    bool operator==(const EditOutcome&) const = default;
};

nlohmann::ordered_json to_json(const EditOutcome& o);
EditOutcome outcome_from_json(const nlohmann::json& j);

struct OutcomeLoad {
    std::vector<EditOutcome> outcomes;
    std::vector<LineIssue> issues;
};
OutcomeLoad read_outcomes(const std::filesystem::path& path);
OutcomeLoad parse_outcomes(std::string_view contents);
// Appends are serialized process-wide.
void append_outcome(const std::filesystem::path& path, const EditOutcome& o);

struct EvalConfig {
    int locality_horizon = kDefaultLocalityHorizon;
};

// The model must be in its pre-edit state. Weights are restored on every
// path; a delta that cannot be applied yields an outcome carrying `error`.
EditOutcome evaluate_sample(LanguageModel& model, WeightDelta& delta, const EditSample& sample,
                            const std::string& model_id, const EvalConfig& cfg = {});

struct ExperimentConfig {
    std::string model_id;
    EditConfig edit;
    EvalConfig eval;
    std::map<int, CovStats> covariances;  // by layer; needed by ROME and MEMIT
    std::optional<std::filesystem::path> outcomes;  // resume from and append to
};

// Layers whose covariance statistics `method` needs under `cfg`.
std::vector<int> covariance_layers(EditMethod method, const EditConfig& cfg, const LanguageModel& model);

WeightDelta compute_delta(LanguageModel& model, EditMethod method, const EditRequest& request,
                          const ExperimentConfig& cfg);

// Sequential edit, evaluate, revert. Samples already present in the outcome
// file for (method, model_id) are returned from it without re-editing.
std::vector<EditOutcome> run_experiment(LanguageModel& model, EditMethod method, std::span<const EditSample> samples,
                                        const ExperimentConfig& cfg);

enum class Metric { REL, LOC, POR };
inline constexpr std::array<Metric, 3> kAllMetrics{Metric::REL, Metric::LOC, Metric::POR};
std::string_view metric_name(Metric m);

struct MeanCell {
    double sum = 0.0;
    long long n = 0;
    void add(double v) { sum += v, ++n; }
    std::optional<double> mean() const { return n ? std::optional<double>(sum / static_cast<double>(n)) : std::nullopt; }
};

struct MetricRow {
    std::map<std::string, MeanCell> per_model;
    MeanCell total, feature, intention;
};

struct AggregateReport {
    std::vector<std::string> models;  // sorted
    std::vector<EditMethod> methods;  // FT, LoRA, MEMIT, ROME order
    // Distinct sample ids per model, over all methods.
    std::map<std::string, long long> counts;
    long long total_count = 0, feature_count = 0, intention_count = 0;
    std::map<EditMethod, std::array<MetricRow, 3>> rows;
    long long errors = 0;

    // Mean x 100.
    std::optional<double> value(EditMethod method, Metric metric, const std::string& model) const;
    std::optional<double> total(EditMethod method, Metric metric) const;
    std::optional<double> feature(EditMethod method, Metric metric) const;
    std::optional<double> intention(EditMethod method, Metric metric) const;
};

AggregateReport aggregate(std::span<const EditOutcome> outcomes);
std::string render_report(const AggregateReport& r);
nlohmann::ordered_json report_to_json(const AggregateReport& r);

// Generic multiple-choice evaluator: an item is answered by the option with
// the lowest mean target NLL after the question.
struct MultipleChoiceItem {
    std::string question;
    std::vector<std::string> options;
    std::size_t answer = 0;
};
double multiple_choice_accuracy(const LanguageModel& model, std::span<const MultipleChoiceItem> items);

}  // namespace ecomedit
