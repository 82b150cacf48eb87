#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ecomedit/backends.hpp"
#include "ecomedit/benchmark.hpp"
#include "ecomedit/editor.hpp"
#include "ecomedit/eval.hpp"
#include "ecomedit/model.hpp"
#include "ecomedit/pipeline.hpp"

namespace ecomedit {

// Exit statuses of the command-line entry points.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

struct RunPaths {
    std::filesystem::path catalog;
    std::filesystem::path benchmark;
    std::filesystem::path stats;
    std::filesystem::path manifest;
    std::filesystem::path checkpoints;  // directory
    std::filesystem::path outcomes;     // directory, one file per method
    std::filesystem::path model;
    std::filesystem::path report;
};

struct ModelSpec {
    std::string id = "toy";
    ToyConfig toy;
    std::size_t vocab_words = 512;
};

struct CovarianceSpec {
    std::size_t samples = 2000;
    double damping_scale = 1e-2;
    std::size_t synthetic_sentences = 200;
    std::uint64_t seed = 0;
};

struct RunConfig {
    std::filesystem::path base_dir;  // relative paths resolve against this
    RunPaths paths;
    std::vector<BackendConfig> students;
    std::optional<BackendConfig> judge, scorer, corrector;
    PipelineConfig pipeline;
    std::optional<std::size_t> sample_size;  // all products when absent
    std::map<EditMethod, EditConfig> edit;
    EvalConfig metrics;
    ModelSpec model;
    CovarianceSpec covariance;

    EditConfig edit_config(EditMethod m) const;
};

// `overrides` are "dotted.key=value" strings applied to the JSON document
// before it is interpreted; values parse as JSON and fall back to strings.
RunConfig run_config_from_json(nlohmann::json j, const std::filesystem::path& base_dir,
                               const std::vector<std::string>& overrides = {});
RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});
void apply_override(nlohmann::json& j, const std::string& assignment);

// Texts used to grow the tokenizer of a fresh toy model.
std::vector<std::string> tokenizer_corpus(const std::vector<ProductRecord>& catalog,
                                          const std::vector<EditSample>& samples);

// Locality prompts of the benchmark plus seeded word-salad sentences.
std::vector<std::string> covariance_corpus(const LanguageModel& model, const std::vector<EditSample>& samples,
                                           const CovarianceSpec& spec);

int cmd_build(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_stats(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_init_model(const RunConfig& cfg, const std::optional<std::filesystem::path>& model_path, std::ostream& out,
                   std::ostream& err);
int cmd_edit_eval(const RunConfig& cfg, EditMethod method, const std::optional<std::filesystem::path>& model_path,
                  const std::optional<std::filesystem::path>& outcome_path, std::ostream& out, std::ostream& err);
// With no files given, every *.jsonl under paths.outcomes is read.
int cmd_report(const RunConfig& cfg, const std::vector<std::filesystem::path>& outcome_files,
               const std::optional<std::filesystem::path>& report_path, std::ostream& out, std::ostream& err);

}  // namespace ecomedit
