// Command-line driver: build-benchmark, stats, init-model, edit-eval, report.
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ecomedit/app.hpp"
#include "ecomedit/editor.hpp"
#include "ecomedit/error.hpp"

namespace {

std::optional<std::filesystem::path> opt_path(const std::string& s) {
    if (s.empty()) return std::nullopt;
    return std::filesystem::path(s);
}

}  // namespace

int main(int argc, char** argv) {
    using namespace ecomedit;

    CLI::App app{"Benchmark construction and knowledge-editing evaluation for product knowledge"};
    app.require_subcommand(1);
    std::string config_path = "ecomedit.json";
    std::vector<std::string> overrides;
    app.add_option("-c,--config", config_path, "Run config (JSON)");
    app.add_option("--set", overrides, "Override a config value, e.g. --set pipeline.seed=3")->type_name("KEY=VALUE");

    auto* build = app.add_subcommand("build-benchmark", "Run the stage pipeline and write the benchmark and stats");
    auto* stats = app.add_subcommand("stats", "Recompute the stats table from an existing benchmark");

    auto* init = app.add_subcommand("init-model", "Create the seeded toy model over the benchmark vocabulary");
    std::string init_out;
    init->add_option("--out", init_out, "Model checkpoint path (default: paths.model)");

    auto* edit = app.add_subcommand("edit-eval", "Edit and evaluate every benchmark sample with one method");
    std::string method_name_arg, model_arg, edit_out;
    edit->add_option("-m,--method", method_name_arg, "Editing method: ft, lora, rome, memit")->required();
    edit->add_option("--model", model_arg, "Model checkpoint (default: paths.model)");
    edit->add_option("--out", edit_out, "Outcome file (default: <outcomes>/<method>.jsonl)");

    auto* report = app.add_subcommand("report", "Aggregate outcome files into the results table");
    std::vector<std::string> outcome_files;
    std::string report_out;
    report->add_option("--outcomes", outcome_files, "Outcome files (default: every .jsonl in paths.outcomes)");
    report->add_option("--out", report_out, "Report path (default: paths.report)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitUsage;
    }

    std::optional<EditMethod> method;
    if (edit->parsed()) {
        method = parse_method(method_name_arg);
        if (!method) {
            std::cerr << "unknown method '" << method_name_arg << "'; expected one of: ft, lora, rome, memit\n";
            return kExitUsage;
        }
    }

    try {
        const RunConfig cfg = load_run_config(config_path, overrides);
        if (build->parsed()) return cmd_build(cfg, std::cout, std::cerr);
        if (stats->parsed()) return cmd_stats(cfg, std::cout, std::cerr);
        if (init->parsed()) return cmd_init_model(cfg, opt_path(init_out), std::cout, std::cerr);
        if (edit->parsed()) return cmd_edit_eval(cfg, *method, opt_path(model_arg), opt_path(edit_out), std::cout, std::cerr);
        if (report->parsed()) {
            std::vector<std::filesystem::path> files(outcome_files.begin(), outcome_files.end());
            return cmd_report(cfg, files, opt_path(report_out), std::cout, std::cerr);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitUsage;
}
