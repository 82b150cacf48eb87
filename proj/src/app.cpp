#include "ecomedit/app.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "ecomedit/catalog.hpp"
#include "ecomedit/error.hpp"
#include "ecomedit/text.hpp"

namespace ecomedit {

namespace {

std::filesystem::path resolve_path(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

void write_text(const std::filesystem::path& path, const std::string& contents) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << contents;
}

std::filesystem::path with_suffix(std::filesystem::path p, const std::string& ext) {
    p.replace_extension(ext);
    return p;
}

}  // namespace

void apply_override(nlohmann::json& j, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like key.path=value: " + assignment);
    const std::string key = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    nlohmann::json value;
    try {
        value = nlohmann::json::parse(raw);
    } catch (const nlohmann::json::exception&) {
        value = raw;
    }
    nlohmann::json* node = &j;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw ConfigError("empty key segment in override: " + assignment);
        if (!node->is_object()) *node = nlohmann::json::object();
        node = &(*node)[part];
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    *node = std::move(value);
}

EditConfig RunConfig::edit_config(EditMethod m) const {
    auto it = edit.find(m);
    return it == edit.end() ? EditConfig{} : it->second;
}

RunConfig run_config_from_json(nlohmann::json j, const std::filesystem::path& base_dir,
                               const std::vector<std::string>& overrides) {
    for (const auto& o : overrides) apply_override(j, o);
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    RunConfig cfg;
    cfg.base_dir = base_dir;

    const auto paths = j.value("paths", nlohmann::json::object());
    auto path_or = [&](const char* key, const std::string& fallback) {
        return resolve_path(base_dir, paths.value(key, fallback));
    };
    cfg.paths.catalog = path_or("catalog", "catalog.jsonl");
    cfg.paths.benchmark = path_or("benchmark", "out/benchmark.jsonl");
    cfg.paths.stats = path_or("stats", "out/stats.txt");
    cfg.paths.manifest = path_or("manifest", "out/manifest.jsonl");
    cfg.paths.checkpoints = path_or("checkpoints", "out/checkpoints");
    cfg.paths.outcomes = path_or("outcomes", "out/outcomes");
    cfg.paths.model = path_or("model", "out/toy_model.bin");
    cfg.paths.report = path_or("report", "out/report.txt");

    const auto backends = j.value("backends", nlohmann::json::object());
    if (backends.contains("students")) {
        for (const auto& s : backends["students"]) cfg.students.push_back(backend_config_from_json(s, base_dir));
    }
    if (backends.contains("judge")) cfg.judge = backend_config_from_json(backends["judge"], base_dir);
    if (backends.contains("scorer")) cfg.scorer = backend_config_from_json(backends["scorer"], base_dir);
    if (backends.contains("corrector")) cfg.corrector = backend_config_from_json(backends["corrector"], base_dir);

    if (j.contains("pipeline")) {
        const auto& p = j["pipeline"];
        cfg.pipeline = pipeline_config_from_json(p);
        if (p.contains("sample_size") && !p["sample_size"].is_null()) cfg.sample_size = p["sample_size"].get<std::size_t>();
    }
    cfg.pipeline.checkpoint = cfg.paths.checkpoints / "pipeline.jsonl";

    if (j.contains("edit")) {
        const auto& e = j["edit"];
        const nlohmann::json shared = e.value("default", nlohmann::json::object());
        for (auto m : {EditMethod::FT, EditMethod::LoRA, EditMethod::ROME, EditMethod::MEMIT}) {
            nlohmann::json merged = shared;
            const std::string name(method_cli_name(m));
            if (e.contains(name)) merged.merge_patch(e[name]);
            cfg.edit[m] = edit_config_from_json(merged);
        }
        for (const auto& [key, _] : e.items())
            if (key != "default" && !parse_method(key)) throw ConfigError("unknown edit method in config: " + key);
    }
    if (j.contains("metrics")) {
        cfg.metrics.locality_horizon = j["metrics"].value("locality_horizon", cfg.metrics.locality_horizon);
        if (cfg.metrics.locality_horizon < 1) throw ConfigError("locality_horizon must be positive");
    }
    if (j.contains("model")) {
        const auto& m = j["model"];
        cfg.model.id = m.value("id", cfg.model.id);
        cfg.model.vocab_words = m.value("vocab_words", cfg.model.vocab_words);
        auto& t = cfg.model.toy;
        t.hidden_dim = m.value("hidden_dim", t.hidden_dim);
        t.num_layers = m.value("num_layers", t.num_layers);
        t.num_heads = m.value("num_heads", t.num_heads);
        t.mlp_dim = m.value("mlp_dim", t.mlp_dim);
        t.max_positions = m.value("max_positions", t.max_positions);
        t.seed = m.value("seed", t.seed);
    }
    if (j.contains("covariance")) {
        const auto& c = j["covariance"];
        cfg.covariance.samples = c.value("samples", cfg.covariance.samples);
        cfg.covariance.damping_scale = c.value("damping_scale", cfg.covariance.damping_scale);
        cfg.covariance.synthetic_sentences = c.value("synthetic_sentences", cfg.covariance.synthetic_sentences);
        cfg.covariance.seed = c.value("seed", cfg.covariance.seed);
    }
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config: " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return run_config_from_json(std::move(j), std::filesystem::absolute(path).parent_path(), overrides);
}

std::vector<std::string> tokenizer_corpus(const std::vector<ProductRecord>& catalog,
                                          const std::vector<EditSample>& samples) {
    std::vector<std::string> out;
    for (const auto& p : catalog) {
        out.push_back(p.title);
        if (!p.description.empty()) out.push_back(p.description);
        for (const auto& [k, v] : p.details) out.push_back(k + " " + v);
    }
    for (const auto& s : samples) {
        out.push_back(s.edit_prompt + " " + s.target_new);
        out.push_back(s.ground_truth);
        for (const auto& l : s.locality) out.push_back(l.prompt);
        for (const auto& p : s.portability) out.push_back(p.prompt + " " + p.target);
    }
    return out;
}

std::vector<std::string> covariance_corpus(const LanguageModel& model, const std::vector<EditSample>& samples,
                                           const CovarianceSpec& spec) {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto& s : samples)
        for (const auto& l : s.locality)
            if (seen.insert(l.prompt).second) out.push_back(l.prompt);
    const auto& words = model.tokenizer().words();
    if (!words.empty()) {
        std::mt19937_64 rng(spec.seed ^ 0xc0feULL);
        for (std::size_t i = 0; i < spec.synthetic_sentences; ++i) {
            const std::size_t len = 6 + rng() % 10;
            std::string sentence;
            for (std::size_t k = 0; k < len; ++k) {
                std::string w = text::trim(words[rng() % words.size()]);
                if (w.empty()) continue;
                if (!sentence.empty()) sentence += ' ';
                sentence += w;
            }
            out.push_back(sentence + ".");
        }
    }
    if (out.empty()) throw Error("covariance corpus is empty");
    return out;
}

// ---------------------------------------------------------------------------
// build-benchmark

namespace {

std::string candidates_fingerprint(const std::vector<EditCandidate>& candidates) {
    std::string bytes;
    for (const auto& c : candidates) bytes += to_json(c).dump() + '\n';
    return text::hex64(text::fnv1a64(bytes));
}

}  // namespace

int cmd_build(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    // Resolve every backend before any work starts.
    if (cfg.students.empty()) throw ConfigError("at least one student backend is required");
    if (!cfg.judge || !cfg.scorer || !cfg.corrector)
        throw ConfigError("judge, scorer and corrector backends must all be configured");
    for (const auto& s : cfg.students) validate(s);
    validate(*cfg.judge);
    validate(*cfg.scorer);
    validate(*cfg.corrector);
    std::vector<std::unique_ptr<Backend>> students;
    for (const auto& s : cfg.students) students.push_back(make_backend(s));
    auto judge = make_backend(*cfg.judge);
    auto scorer = make_backend(*cfg.scorer);
    auto corrector = make_backend(*cfg.corrector);

    auto catalog = load_catalog(cfg.paths.catalog);
    std::vector<ManifestEntry> manifest;
    for (const auto& issue : catalog.issues)
        manifest.push_back({"catalog:" + std::to_string(issue.line), "catalog", issue.message, false});
    const std::size_t n = cfg.sample_size.value_or(catalog.records.size());
    auto products = sample_products(catalog.records, n, cfg.pipeline.seed);

    PipelineBackends b;
    for (auto& s : students) b.students.push_back(s.get());
    b.judge = judge.get();
    b.scorer = scorer.get();
    b.corrector = corrector.get();
    PipelineRun run = run_stage_pipeline(products, b, cfg.pipeline);
    manifest.insert(manifest.end(), run.manifest.begin(), run.manifest.end());

    // Probe construction is checkpointed against the exact candidate list.
    CheckpointStore store(*cfg.pipeline.checkpoint);
    const std::string item = "assemble|" + candidates_fingerprint(run.candidates);
    std::vector<EditSample> samples;
    if (auto cached = store.get(item, "probes")) {
        for (const auto& s : cached->at("samples")) samples.push_back(sample_from_json(s));
        for (const auto& m : cached->at("manifest"))
            manifest.push_back({m.at("item"), m.at("stage"), m.at("message"), m.at("fatal")});
    } else {
        AssembleResult assembled = assemble_samples(run.candidates, *judge, cfg.pipeline.concurrency);
        samples = std::move(assembled.samples);
        const bool fatal = std::any_of(assembled.manifest.begin(), assembled.manifest.end(),
                                       [](const ManifestEntry& e) { return e.fatal; });
        if (!fatal) {
            nlohmann::json payload{{"samples", nlohmann::json::array()}, {"manifest", nlohmann::json::array()}};
            for (const auto& s : samples) payload["samples"].push_back(nlohmann::json::parse(to_json(s).dump()));
            for (const auto& m : assembled.manifest) payload["manifest"].push_back(nlohmann::json::parse(to_json(m).dump()));
            store.put(item, "probes", payload);
        }
        manifest.insert(manifest.end(), assembled.manifest.begin(), assembled.manifest.end());
    }

    write_benchmark(samples, cfg.paths.benchmark);
    const auto stats = compute_stats(samples);
    write_text(cfg.paths.stats, render_stats(stats));
    write_text(with_suffix(cfg.paths.stats, ".json"), stats_to_json(stats).dump(2) + "\n");
    std::string manifest_text;
    for (const auto& m : manifest) manifest_text += to_json(m).dump() + "\n";
    write_text(cfg.paths.manifest, manifest_text);

    std::size_t fatal = 0;
    const ManifestEntry* first = nullptr;
    for (const auto& m : manifest)
        if (m.fatal) {
            if (!first) first = &m;
            ++fatal;
        }
    out << "products: " << products.size() << ", claims: " << run.claims.size() << ", rejected: " << run.candidates.size()
        << ", samples: " << samples.size() << "\n";
    out << "benchmark: " << cfg.paths.benchmark.string() << "\n";
    if (fatal) {
        err << fatal << " item(s) failed; first failure: [" << first->item << " / " << first->stage << "] " << first->message
            << "\nsee " << cfg.paths.manifest.string() << "\n";
        return kExitFailure;
    }
    return kExitOk;
}

int cmd_stats(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    auto load = read_benchmark(cfg.paths.benchmark);
    for (const auto& issue : load.issues) err << "benchmark line " << issue.line << ": " << issue.message << "\n";
    const auto stats = compute_stats(load.samples);
    const std::string table = render_stats(stats);
    write_text(cfg.paths.stats, table);
    write_text(with_suffix(cfg.paths.stats, ".json"), stats_to_json(stats).dump(2) + "\n");
    out << table;
    return load.issues.empty() ? kExitOk : kExitFailure;
}

// ---------------------------------------------------------------------------
// models and editing

int cmd_init_model(const RunConfig& cfg, const std::optional<std::filesystem::path>& model_path, std::ostream& out,
                   std::ostream& err) {
    auto catalog = load_catalog(cfg.paths.catalog);
    std::vector<EditSample> samples;
    if (std::filesystem::exists(cfg.paths.benchmark)) samples = read_benchmark(cfg.paths.benchmark).samples;
    else err << "no benchmark at " << cfg.paths.benchmark.string() << "; vocabulary from the catalog only\n";
    auto corpus = tokenizer_corpus(catalog.records, samples);
    ToyTransformer model(Tokenizer::build(corpus, cfg.model.vocab_words), cfg.model.toy);
    const auto path = model_path.value_or(cfg.paths.model);
    model.save(path);
    out << "model " << cfg.model.id << ": vocab " << model.vocab_size() << ", d=" << model.hidden_dim()
        << ", L=" << model.num_layers() << ", checksum " << text::hex64(weights_checksum(model)) << "\n";
    out << "wrote " << path.string() << "\n";
    return kExitOk;
}

int cmd_edit_eval(const RunConfig& cfg, EditMethod method, const std::optional<std::filesystem::path>& model_path,
                  const std::optional<std::filesystem::path>& outcome_path, std::ostream& out, std::ostream& err) {
    auto load = read_benchmark(cfg.paths.benchmark);
    for (const auto& issue : load.issues) err << "benchmark line " << issue.line << ": " << issue.message << "\n";
    const auto outcomes =
        outcome_path.value_or(cfg.paths.outcomes / (std::string(method_cli_name(method)) + ".jsonl"));

    // Skip loading the model when every sample already has an outcome.
    std::set<std::string> done;
    if (std::filesystem::exists(outcomes))
        for (const auto& o : read_outcomes(outcomes).outcomes)
            if (o.method == method && o.model_id == cfg.model.id) done.insert(o.sample_id);
    const bool complete = std::all_of(load.samples.begin(), load.samples.end(),
                                      [&](const EditSample& s) { return done.count(s.sample_id) > 0; });
    if (complete) {
        out << "all " << load.samples.size() << " samples already evaluated in " << outcomes.string() << "\n";
        return kExitOk;
    }

    auto model = ToyTransformer::load(model_path.value_or(cfg.paths.model));
    ExperimentConfig ex;
    ex.model_id = cfg.model.id;
    ex.edit = cfg.edit_config(method);
    ex.eval = cfg.metrics;
    ex.outcomes = outcomes;
    const auto layers = covariance_layers(method, ex.edit, model);
    if (!layers.empty()) {
        const auto corpus = covariance_corpus(model, load.samples, cfg.covariance);
        for (int l : layers) {
            auto c = estimate_covariance(model, l, corpus, cfg.covariance.samples, cfg.covariance.damping_scale);
            for (const auto& w : c.warnings) err << "warning: " << w << "\n";
            ex.covariances.emplace(l, std::move(c.stats));
        }
    }
    const auto before = weights_checksum(model);
    const auto results = run_experiment(model, method, load.samples, ex);
    const auto after = weights_checksum(model);
    const auto errors = std::count_if(results.begin(), results.end(), [](const EditOutcome& o) { return o.error.has_value(); });
    out << method_name(method) << " on " << cfg.model.id << ": " << results.size() << " outcomes (" << errors
        << " with errors) -> " << outcomes.string() << "\n";
    if (before != after) {
        err << "model weights changed during the run\n";
        return kExitFailure;
    }
    return kExitOk;
}

int cmd_report(const RunConfig& cfg, const std::vector<std::filesystem::path>& outcome_files,
               const std::optional<std::filesystem::path>& report_path, std::ostream& out, std::ostream& err) {
    std::vector<std::filesystem::path> files = outcome_files;
    if (files.empty() && std::filesystem::is_directory(cfg.paths.outcomes)) {
        for (const auto& e : std::filesystem::directory_iterator(cfg.paths.outcomes))
            if (e.is_regular_file() && e.path().extension() == ".jsonl") files.push_back(e.path());
        std::sort(files.begin(), files.end());
    }
    if (files.empty()) {
        err << "no outcome files found (looked in " << cfg.paths.outcomes.string() << ")\n";
        return kExitFailure;
    }
    std::vector<EditOutcome> all;
    for (const auto& f : files) {
        auto load = read_outcomes(f);
        for (const auto& issue : load.issues) err << f.string() << ":" << issue.line << ": " << issue.message << "\n";
        all.insert(all.end(), load.outcomes.begin(), load.outcomes.end());
    }
    if (all.empty()) {
        err << "outcome files contain no outcomes\n";
        return kExitFailure;
    }
    const auto report = aggregate(all);
    const std::string text = render_report(report);
    const auto path = report_path.value_or(cfg.paths.report);
    write_text(path, text);
    write_text(with_suffix(path, ".json"), report_to_json(report).dump(2) + "\n");
    out << text;
    return kExitOk;
}

}  // namespace ecomedit
