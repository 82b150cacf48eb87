#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ecomedit/model.hpp"

namespace ecomedit {

enum class EditMethod { FT, LoRA, ROME, MEMIT };

std::string_view method_name(EditMethod m);  // "FT", "LoRA", "ROME", "MEMIT"
std::string_view method_cli_name(EditMethod m);  // "ft", "lora", "rome", "memit"
std::optional<EditMethod> parse_method(std::string_view s);  // accepts either spelling

struct CovStats {
    int layer = 0;
    Matrix second_moment;  // E[k k^T], mlp_dim x mlp_dim
    std::size_t n_samples = 0;
    double damping = 0.0;  // lambda added to the diagonal before inversion
};

// C = (1/m) sum k k^T over raw vectors (rows of `keys`).
Matrix second_moment(const Matrix& keys);

// Default damping: scale * trace(C) / dim.
double default_damping(const Matrix& second_moment, double scale = 1e-2);

struct CovarianceResult {
    CovStats stats;
    std::vector<std::string> warnings;
};

// Captures MLP inputs at `layer` over whole corpus texts until at least n
// vectors are collected; uses everything (and warns) if the corpus runs out.
CovarianceResult estimate_covariance(const LanguageModel& model, int layer, std::span<const std::string> corpus,
                                     std::size_t n, double damping_scale = 1e-2);

struct EditRequest {
    std::string subject;
    std::string prompt;
    std::string target;
};

void validate(const EditRequest& r);

// Random word-salad context prefixes drawn from the tokenizer vocabulary.
std::vector<std::string> context_prefixes(const LanguageModel& model, int n, std::uint64_t seed);

// Mean MLP input at the subject's last token over the bare prompt and each
// prefixed variant.
Vector compute_subject_key(const LanguageModel& model, int layer, const std::string& prompt,
                           const std::string& subject, std::span<const std::string> prefixes);
Vector compute_subject_key(const LanguageModel& model, int layer, const std::string& prompt,
                           const std::string& subject, int n_prefixes, std::uint64_t seed);

// prompt tokens followed by continuation tokens; a space is inserted between
// them unless one side already has whitespace at the seam.
struct TeacherForced {
    Tokens tokens;
    std::size_t target_start = 0;
};
TeacherForced teacher_forced(const Tokenizer& tok, const std::string& prompt, const std::string& target);

struct OptimizerConfig {
    int steps = 25;
    // Adam learning rate in units of the RMS of the original MLP output.
    double step_size = 0.5;
    // ||v - v0|| <= clamp_factor * ||v0||.
    double clamp_factor = 4.0;
};

struct ValueOptimization {
    Vector value;
    Vector original;
    double initial_loss = 0.0;
    double final_loss = 0.0;
    std::vector<double> accepted_losses;  // non-increasing
    std::size_t position = 0;
};

// Loss and gradient of the target NLL w.r.t. an injected MLP output.
std::pair<double, Vector> value_loss_gradient(const LanguageModel& model, int layer, const TeacherForced& tf,
                                              std::size_t position, const Vector& value);

// Adam on the injected MLP output within the clamp ball. An iterate is
// accepted only if it lowers the best loss so far; the best one is returned.
ValueOptimization optimize_value(const LanguageModel& model, int layer, const std::string& prompt,
                                 const std::string& subject, const std::string& target, const OptimizerConfig& opt);

struct DeltaEntry {
    int layer = 0;
    Matrix original;
    Matrix replacement;
};

enum class DeltaState { pending, applied, reverted };

struct WeightDelta {
    EditMethod method = EditMethod::ROME;
    std::vector<DeltaEntry> entries;
    nlohmann::json metadata;
    DeltaState state = DeltaState::pending;

    bool is_zero() const;
};

struct LoraConfig {
    int rank = 4;
    double scale = 1.0;
};

struct TrainConfig {
    int steps = 25;
    double learning_rate = 1e-2;
};

struct EditConfig {
    int layer = -1;                // ROME/FT/LoRA; -1 -> floor(L/2)
    std::vector<int> layers;       // MEMIT; empty -> middle third
    int n_prefixes = 3;
    std::uint64_t prefix_seed = 0;
    OptimizerConfig optimizer;
    TrainConfig train;             // FT and LoRA
    LoraConfig lora;
    std::uint64_t seed = 0;        // LoRA initialisation
};

EditConfig resolve(EditConfig cfg, const LanguageModel& model);
EditConfig edit_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const EditConfig& cfg);

// W + (v - W k) u^T with u = (C + lambda I)^{-1} k / (k^T (C + lambda I)^{-1} k).
Matrix rank_one_update(const Matrix& w, const Matrix& second_moment, double damping, const Vector& key,
                       const Vector& value);

struct RomeEdit {
    WeightDelta delta;
    Vector key;
    Vector value;
    ValueOptimization optimization;
};

RomeEdit rome_edit(const LanguageModel& model, const EditRequest& request, const CovStats& cov, const EditConfig& cfg);
WeightDelta rome_update(const LanguageModel& model, const EditRequest& request, const CovStats& cov,
                        const EditConfig& cfg);

// The model is edited layer by layer while computing the delta and is left in
// its original state on return.
WeightDelta memit_update(LanguageModel& model, std::span<const EditRequest> requests, std::span<const CovStats> covs,
                         const EditConfig& cfg);

// dloss/dW for the down projection of `layer`.
std::pair<double, Matrix> weight_loss_gradient(const LanguageModel& model, int layer, const TeacherForced& tf);

WeightDelta ft_update(LanguageModel& model, const EditRequest& request, const EditConfig& cfg);
WeightDelta lora_update(LanguageModel& model, const EditRequest& request, const EditConfig& cfg);

double target_nll(const LanguageModel& model, const std::string& prompt, const std::string& target);

void apply_delta(LanguageModel& model, WeightDelta& delta);
void revert_delta(LanguageModel& model, WeightDelta& delta);

// Applies on construction and always reverts on destruction.
class ScopedDelta {
public:
    ScopedDelta(LanguageModel& model, WeightDelta& delta);
    ~ScopedDelta();
    ScopedDelta(const ScopedDelta&) = delete;
    ScopedDelta& operator=(const ScopedDelta&) = delete;

private:
    LanguageModel& model_;
    WeightDelta& delta_;
};

// Singular values of a matrix, descending.
Vector singular_values(const Matrix& m);
int numerical_rank(const Matrix& m, double threshold = 1e-8);

}  // namespace ecomedit
