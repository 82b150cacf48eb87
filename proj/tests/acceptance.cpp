// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit status when
// any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "ecomedit/app.hpp"
#include "ecomedit/catalog.hpp"
#include "ecomedit/error.hpp"
#include "ecomedit/prompts.hpp"
#include "ecomedit/text.hpp"
#include "test_util.hpp"

using namespace ecomedit;
namespace fs = std::filesystem;

namespace {

struct Result {
    bool pass = false;
    std::string detail;
};

Result check(bool ok, std::string detail) { return {ok, std::move(detail)}; }

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

// Shared state: fixture config with outputs in a scratch directory, the built
// benchmark and the seeded default toy model.
struct World {
    testutil::TempDir dir;
    RunConfig cfg;
    std::vector<EditSample> samples;
    std::unique_ptr<ToyTransformer> model;
    std::map<int, CovStats> covs;

    World() {
        const auto d = dir.path().string();
        cfg = load_run_config(testutil::fixture_dir() / "ecomedit.json",
                              {"paths.benchmark=\"" + d + "/benchmark.jsonl\"", "paths.stats=\"" + d + "/stats.txt\"",
                               "paths.manifest=\"" + d + "/manifest.jsonl\"", "paths.checkpoints=\"" + d + "/ckpt\"",
                               "paths.outcomes=\"" + d + "/outcomes\"", "paths.model=\"" + d + "/model.bin\"",
                               "paths.report=\"" + d + "/report.txt\""});
    }

    void ensure_benchmark() {
        if (!samples.empty()) return;
        std::ostringstream out, err;
        if (!fs::exists(cfg.paths.benchmark) && cmd_build(cfg, out, err) != kExitOk)
            throw Error("benchmark build failed: " + err.str());
        samples = read_benchmark(cfg.paths.benchmark).samples;
    }

    ToyTransformer& toy() {
        if (model) return *model;
        ensure_benchmark();
        std::ostringstream out, err;
        cmd_init_model(cfg, std::nullopt, out, err);
        model = std::make_unique<ToyTransformer>(ToyTransformer::load(cfg.paths.model));
        const auto corpus = covariance_corpus(*model, samples, cfg.covariance);
        for (int l = 0; l < model->num_layers(); ++l)
            covs[l] = estimate_covariance(*model, l, corpus, cfg.covariance.samples, cfg.covariance.damping_scale).stats;
        return *model;
    }

    // Edit prompts of the benchmark paired with random vocabulary words that
    // continue the prompt as exactly one token.
    std::vector<EditRequest> single_token_requests(std::size_t n, std::uint64_t seed) {
        auto& m = toy();
        const auto& words = m.tokenizer().words();
        std::mt19937_64 rng(seed);
        std::vector<EditRequest> out;
        while (out.size() < n) {
            const auto& s = samples[rng() % samples.size()];
            const std::string t = text::trim(words[rng() % words.size()]);
            if (t.empty()) continue;
            const auto tf = teacher_forced(m.tokenizer(), s.edit_prompt, t);
            if (tf.tokens.size() - tf.target_start != 1) continue;
            out.push_back({s.subject, s.edit_prompt, t});
        }
        return out;
    }
};

World& world() {
    static World w;
    return w;
}

TokenId top1_after(const LanguageModel& m, const std::string& prompt) {
    const Matrix lg = m.logits(m.tokenizer().encode(prompt));
    Eigen::Index best;
    lg.row(lg.rows() - 1).maxCoeff(&best);
    return static_cast<TokenId>(best);
}

// ---------------------------------------------------------------------------

Result prompt_fidelity() {
    struct Golden {
        TemplateId id;
        Bindings b;
        std::string text;
    };
    const std::vector<Golden> goldens = {
        {TemplateId::student_intention, {{"name", "N"}},
         "A customer buys a product: N. What is the intention of buying it?\nPlease be concise and ONLY answer in ONE "
         "sentence. Start with 'The intention of buying this is to'."},
        {TemplateId::student_feature, {{"name", "N"}},
         "Consider this product: N.\nWhat are the features of it?\nPlease ONLY give AT MOST 3 features and start each "
         "feature with a new line."},
        {TemplateId::judge_intention, {{"name", "N"}, {"detail_key", "K"}, {"detail_value", "V"}},
         "A customer buys a product: N. Consider this product: N.\nDo you think the product's K is V?\nPlease first "
         "answer yes or no. If it is yes, just return 'yes'. If it is no, please provide a brief explanation and "
         "corrected product detail.\nAnswer:"},
        {TemplateId::judge_feature, {{"name", "N"}, {"feature", "F"}},
         "Consider this product: N.\nDo you think it has this feature: F?\nPlease first answer yes or no. If it is "
         "yes, just return 'yes'. If it is no, please provide a brief explanation and corrected features.\nAnswer:"},
        {TemplateId::correct_intention, {{"name", "N"}, {"feature_or_intention", "X"}},
         "Consider this product:\nN\nCurrently, somebody has identified a wrong intention for buying this item: "
         "X\nPlease suggest a better, modified, and correct intention."},
        {TemplateId::correct_feature, {{"name", "N"}, {"feature_or_intention", "X"}},
         "Consider this product:\nN\nCurrently, somebody has identified a wrong feature: X\nPlease suggest a better, "
         "modified, concise, and most importantly, a correct feature."},
        {TemplateId::conceptualize, {{"product", "P"}, {"feature_or_intention", "X"}},
         "Please replace this product with another term: P.\nYou should not change the meaning of it. You can use a "
         "synonym or a general term.\nIt should be the same as the original product, which all of them should not "
         "have this feature/intention: X.\nPlease return at most 5 conceptualized products/product categories. They "
         "should be reasonable, and each of them should be separated by a new line."},
        {TemplateId::subject_replace, {{"product", "P"}},
         "Please replace this subject with another term: P.\nYou should not change the meaning of it. You can use a "
         "synonym or a general term. Please only return the new subject."},
        {TemplateId::distracting_neighbor, {{"product", "P"}, {"description", "D"}},
         "Consider this product: P.\nHere is a description of the product: D.\nPlease construct a sentence using the "
         "description based on the following template: The [ATTRIBUTE] of [PRODUCT] is xxx.\nPlease make sure the "
         "attribute is easily inferable from the product name."},
    };
    int ok = 0;
    std::string bad;
    for (const auto& g : goldens) {
        if (render_prompt(g.id, g.b) == g.text) ++ok;
        else bad += " " + std::string(template_name(g.id));
    }
    return check(ok == static_cast<int>(goldens.size()),
                 std::to_string(ok) + "/" + std::to_string(goldens.size()) + " templates byte-identical" + bad);
}

Result pipeline_determinism() {
    auto& w = world();
    std::ostringstream out, err;
    if (cmd_build(w.cfg, out, err) != kExitOk) return check(false, "first build failed: " + err.str());
    const auto first = testutil::slurp(w.cfg.paths.benchmark);
    fs::remove_all(w.cfg.paths.checkpoints);
    if (cmd_build(w.cfg, out, err) != kExitOk) return check(false, "second build failed: " + err.str());
    const auto second = testutil::slurp(w.cfg.paths.benchmark);
    if (cmd_build(w.cfg, out, err) != kExitOk) return check(false, "checkpointed build failed: " + err.str());
    const auto third = testutil::slurp(w.cfg.paths.benchmark);
    const bool same = first == second && second == third &&
                      first == testutil::slurp(testutil::fixture_dir() / "golden" / "benchmark.jsonl");

    // Re-run the stages from the transcripts and tie every sample to a verdict.
    auto cat = load_catalog(w.cfg.paths.catalog);
    auto products = sample_products(cat.records, w.cfg.sample_size.value_or(cat.records.size()), w.cfg.pipeline.seed);
    std::vector<std::unique_ptr<Backend>> students;
    PipelineBackends b;
    for (const auto& s : w.cfg.students) {
        students.push_back(make_backend(s));
        b.students.push_back(students.back().get());
    }
    auto judge = make_backend(*w.cfg.judge), scorer = make_backend(*w.cfg.scorer),
         corrector = make_backend(*w.cfg.corrector);
    b.judge = judge.get();
    b.scorer = scorer.get();
    b.corrector = corrector.get();
    PipelineConfig pc = w.cfg.pipeline;
    pc.checkpoint.reset();
    const auto run = run_stage_pipeline(products, b, pc);

    std::map<std::string, int> per_claim;
    for (const auto& s : read_benchmark(w.cfg.paths.benchmark).samples)
        ++per_claim[s.sample_id.substr(0, s.sample_id.find('#'))];
    int yes = 0, no = 0, violations = 0;
    std::set<std::string> judged;
    for (const auto& v : run.verdicts) {
        judged.insert(v.claim_id);
        const int n = per_claim.count(v.claim_id) ? per_claim[v.claim_id] : 0;
        if (v.is_correct) ++yes, violations += n != 0;
        else ++no, violations += n < 1;
    }
    for (const auto& [id, n] : per_claim) violations += judged.count(id) == 0;
    return check(same && violations == 0 && yes > 0 && no > 0,
                 std::string(same ? "3 builds byte-identical to golden" : "builds differ") + "; " +
                     std::to_string(yes) + " yes -> 0 samples, " + std::to_string(no) + " no -> >=1, " +
                     std::to_string(violations) + " violations");
}

Result stats_correctness() {
    // Hand-built: category i gets i+1 feature and 2*i intention samples.
    std::vector<EditSample> v;
    long long hand_f[5], hand_i[5];
    for (std::size_t c = 0; c < 5; ++c) {
        hand_f[c] = static_cast<long long>(c) + 1;
        hand_i[c] = 2 * static_cast<long long>(c);
        for (long long k = 0; k < hand_f[c] + hand_i[c]; ++k) {
            EditSample s;
            s.sample_id = std::to_string(c) + "/" + std::to_string(k);
            s.category = kAllCategories[c];
            s.kind = k < hand_f[c] ? ClaimKind::feature : ClaimKind::intention;
            v.push_back(s);
        }
    }
    std::shuffle(v.begin(), v.end(), std::mt19937_64(3));
    const auto t = compute_stats(v);
    bool ok = t.feature == 15 && t.intention == 20 && t.total() == 35 && t.total() == t.feature + t.intention;
    for (std::size_t c = 0; c < 5; ++c) {
        ok = ok && t.rows[c].category == kAllCategories[c] && t.rows[c].feature == hand_f[c] &&
             t.rows[c].intention == hand_i[c] && t.rows[c].total() == t.rows[c].feature + t.rows[c].intention;
    }
    ok = ok && compute_stats({}).total() == 0;

    StatsTable big;
    const long long f[] = {2397, 2888, 2131, 2895, 3895};
    const long long in[] = {718, 612, 685, 1164, 1540};
    for (std::size_t i = 0; i < 5; ++i) {
        big.rows[i] = {kAllCategories[i], f[i], in[i]};
        big.feature += f[i];
        big.intention += in[i];
    }
    const std::string expected =
        "Product Category                Feature  Intention |      Total\n"
        "---------------------------------------------------------------\n"
        "Clothing Shoes and Jewelry        2,397        718 |      3,115\n"
        "Electronics                       2,888        612 |      3,500\n"
        "Home and Kitchen                  2,131        685 |      2,816\n"
        "Industrial and Scientific         2,895      1,164 |      4,059\n"
        "Sports and Outdoors               3,895      1,540 |      5,435\n"
        "---------------------------------------------------------------\n"
        "Total                            14,206      4,719 |     18,925\n";
    const bool shape = render_stats(big) == expected;
    return check(ok && shape, std::string(ok ? "hand counts match" : "hand counts differ") + "; " +
                                  (shape ? "table shape golden matches" : "table shape differs"));
}

Result rome_exactness() {
    auto& w = world();
    auto& m = w.toy();
    const auto cfg = resolve(w.cfg.edit_config(EditMethod::ROME), m);
    const auto reqs = w.single_token_requests(50, 404);
    double worst = 0.0;
    int rank_ok = 0;
    for (const auto& r : reqs) {
        auto e = rome_edit(m, r, w.covs.at(cfg.layer), cfg);
        const auto& d = e.delta.entries.at(0);
        worst = std::max(worst, (d.replacement * e.key - e.value).norm() / e.value.norm());
        rank_ok += numerical_rank(d.replacement - d.original, 1e-8) == 1;
    }
    return check(worst <= 1e-4 && rank_ok == 50,
                 fmt("max relative residual %.2e over 50 edits; ", worst) + std::to_string(rank_ok) + "/50 rank one");
}

Result gradient_correctness() {
    auto& w = world();
    auto& m = w.toy();
    std::mt19937_64 rng(55);
    const auto reqs = w.single_token_requests(5, 505);
    const std::vector<std::string> targets = {"fast delivery", "waterproof", "to stay warm", "stainless steel", "red"};
    double worst_value = 0.0, worst_weight = 0.0;
    auto rel = [](double a, double n) { return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-6}); };
    for (std::size_t f = 0; f < 5; ++f) {
        const int layer = static_cast<int>(f % static_cast<std::size_t>(m.num_layers()));
        const auto tf = teacher_forced(m.tokenizer(), reqs[f].prompt, targets[f]);
        const auto pos = m.tokenizer().subject_last_token(reqs[f].prompt, reqs[f].subject);
        const Vector v0 = m.trace(tf.tokens, layer).mlp_out.row(static_cast<Eigen::Index>(pos)).transpose();
        const Vector g = value_loss_gradient(m, layer, tf, pos, v0).second;
        for (int k = 0; k < 10; ++k) {
            const auto i = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(v0.size()));
            const double h = 1e-5;
            Vector p = v0, q = v0;
            p[i] += h;
            q[i] -= h;
            const double num = (value_loss_gradient(m, layer, tf, pos, p).first -
                                value_loss_gradient(m, layer, tf, pos, q).first) / (2 * h);
            worst_value = std::max(worst_value, rel(g[i], num));
        }
        const Matrix w0 = m.down_proj(layer);
        const Matrix gw = weight_loss_gradient(m, layer, tf).second;
        for (int k = 0; k < 10; ++k) {
            const auto i = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(w0.size()));
            const double h = 1e-5;
            Matrix p = w0, q = w0;
            p.data()[i] += h;
            q.data()[i] -= h;
            m.set_down_proj(layer, p);
            const double lp = weight_loss_gradient(m, layer, tf).first;
            m.set_down_proj(layer, q);
            const double lq = weight_loss_gradient(m, layer, tf).first;
            m.set_down_proj(layer, w0);
            worst_weight = std::max(worst_weight, rel(gw.data()[i], (lp - lq) / (2 * h)));
        }
    }
    return check(worst_value <= 1e-3 && worst_weight <= 1e-3,
                 fmt("max relative error: value %.2e, weight %.2e (10 coords x 5 fixtures each)", worst_value,
                     worst_weight));
}

Result edit_effectiveness() {
    auto& w = world();
    auto& m = w.toy();
    const auto rc = resolve(w.cfg.edit_config(EditMethod::ROME), m);
    const auto mc = resolve(w.cfg.edit_config(EditMethod::MEMIT), m);
    std::vector<CovStats> mcovs;
    for (int l : mc.layers) mcovs.push_back(w.covs.at(l));
    const auto reqs = w.single_token_requests(100, 606);
    int rome = 0, memit = 0;
    for (const auto& r : reqs) {
        auto d = rome_update(m, r, w.covs.at(rc.layer), rc);
        {
            ScopedDelta s(m, d);
            rome += target_token_accuracy(m, r.prompt, r.target) == 1.0;
        }
        auto md = memit_update(m, std::span<const EditRequest>(&r, 1), mcovs, mc);
        ScopedDelta s(m, md);
        memit += target_token_accuracy(m, r.prompt, r.target) == 1.0;
    }
    int loc_exact = 0, with_loc = 0;
    for (const auto& s : w.samples) {
        WeightDelta zero;
        auto o = evaluate_sample(m, zero, s, w.cfg.model.id, w.cfg.metrics);
        if (!o.loc) continue;
        ++with_loc;
        loc_exact += *o.loc == 1.0;
    }
    return check(rome >= 90 && memit >= 90 && with_loc > 0 && loc_exact == with_loc,
                 "REL=1: ROME " + std::to_string(rome) + "/100, MEMIT " + std::to_string(memit) +
                     "/100; zero-delta LOC=1 on " + std::to_string(loc_exact) + "/" + std::to_string(with_loc) +
                     " samples with locality probes");
}

std::map<EditMethod, std::vector<EditOutcome>> g_outcomes;

Result revert_guarantee() {
    auto& w = world();
    auto& m = w.toy();
    std::string detail;
    bool ok = true;
    for (auto method : {EditMethod::FT, EditMethod::LoRA, EditMethod::ROME, EditMethod::MEMIT}) {
        ExperimentConfig ex;
        ex.model_id = w.cfg.model.id;
        ex.edit = w.cfg.edit_config(method);
        ex.eval = w.cfg.metrics;
        for (int l : covariance_layers(method, ex.edit, m)) ex.covariances.emplace(l, w.covs.at(l));
        ex.outcomes = w.cfg.paths.outcomes / (std::string(method_cli_name(method)) + ".jsonl");
        const auto before = weights_checksum(m);
        auto out = run_experiment(m, method, w.samples, ex);
        const auto after = weights_checksum(m);
        ok = ok && before == after && out.size() == w.samples.size();
        detail += std::string(method_name(method)) + (before == after ? " equal " : " CHANGED ");
        g_outcomes[method] = std::move(out);
    }
    return check(ok, "checksums before/after over " + std::to_string(w.samples.size()) + " samples: " + detail);
}

Result metric_oracle() {
    auto& w = world();
    auto& m = w.toy();
    auto brute = [&](const std::string& prompt, const std::string& target) {
        const auto tf = teacher_forced(m.tokenizer(), prompt, target);
        int hits = 0;
        for (std::size_t i = tf.target_start; i < tf.tokens.size(); ++i) {
            const Tokens prefix(tf.tokens.begin(), tf.tokens.begin() + static_cast<std::ptrdiff_t>(i));
            const Matrix lg = m.logits(prefix);
            Eigen::Index best;
            lg.row(lg.rows() - 1).maxCoeff(&best);
            hits += best == tf.tokens[i];
        }
        return static_cast<double>(hits) / static_cast<double>(tf.tokens.size() - tf.target_start);
    };
    int total = 0, equal = 0;
    auto probe = [&](const std::string& p, const std::string& t) {
        ++total;
        equal += target_token_accuracy(m, p, t) == brute(p, t);
    };
    const auto rc = resolve(w.cfg.edit_config(EditMethod::ROME), m);
    for (std::size_t i = 0; i < w.samples.size(); ++i) {
        const auto& s = w.samples[i];
        probe(s.edit_prompt, s.target_new);
        probe(s.edit_prompt, s.ground_truth);
        for (const auto& p : s.portability) probe(p.prompt, p.target);
        if (i % 8 == 0) {  // also under an applied edit
            auto d = rome_update(m, {s.subject, s.edit_prompt, s.target_new}, w.covs.at(rc.layer), rc);
            ScopedDelta sd(m, d);
            probe(s.edit_prompt, s.target_new);
            for (const auto& p : s.portability) probe(p.prompt, p.target);
        }
    }
    return check(equal == total, std::to_string(equal) + "/" + std::to_string(total) + " exactly equal");
}

Result memit_rome_consistency() {
    auto& w = world();
    auto& m = w.toy();
    const auto rc = resolve(w.cfg.edit_config(EditMethod::ROME), m);
    EditConfig single = w.cfg.edit_config(EditMethod::MEMIT);
    single.layers = {rc.layer};
    const auto mc = resolve(single, m);
    const auto reqs = w.single_token_requests(50, 909);
    int agree = 0;
    for (const auto& r : reqs) {
        auto rd = rome_update(m, r, w.covs.at(rc.layer), rc);
        TokenId a, b;
        {
            ScopedDelta s(m, rd);
            a = top1_after(m, r.prompt);
        }
        auto md = memit_update(m, std::span<const EditRequest>(&r, 1), std::span<const CovStats>(&w.covs.at(rc.layer), 1), mc);
        {
            ScopedDelta s(m, md);
            b = top1_after(m, r.prompt);
        }
        agree += a == b;
    }
    return check(agree >= 48, std::to_string(agree) + "/50 post-edit top-1 agree (need 48)");
}

Result end_to_end_report() {
    auto& w = world();
    if (g_outcomes.empty()) revert_guarantee();
    std::ostringstream out, err;
    if (cmd_report(w.cfg, {}, std::nullopt, out, err) != kExitOk) return check(false, "report failed: " + err.str());
    const auto j = nlohmann::json::parse(testutil::slurp(fs::path(w.cfg.paths.report).replace_extension(".json")));

    // Independent recomputation straight from the outcome lines.
    std::map<std::string, std::pair<double, int>> cells;  // "METHOD|METRIC|scope" -> sum, n
    for (const auto& e : fs::directory_iterator(w.cfg.paths.outcomes)) {
        std::istringstream in(testutil::slurp(e.path()));
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto o = nlohmann::json::parse(line);
            if (o.contains("error") && !o["error"].is_null()) continue;
            const std::string method = o["method"] == "ft"      ? "FT"
                                       : o["method"] == "lora"  ? "LoRA"
                                       : o["method"] == "rome"  ? "ROME"
                                                                : "MEMIT";
            for (const char* metric : {"rel", "loc", "por"}) {
                if (!o.contains(metric) || o[metric].is_null()) continue;
                std::string up = metric;
                for (auto& c : up) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
                const double v = o[metric].get<double>();
                for (const std::string scope : {o["model_id"].get<std::string>(), std::string("total"),
                                                o["kind"].get<std::string>()}) {
                    auto& cell = cells[method + "|" + up + "|" + scope];
                    cell.first += v;
                    cell.second += 1;
                }
            }
        }
    }
    double worst = 0.0;
    int compared = 0, missing = 0;
    for (const auto& row : j["rows"]) {
        const std::string key = row["method"].get<std::string>() + "|" + row["metric"].get<std::string>() + "|";
        auto cmp = [&](const std::string& scope, const nlohmann::json& v) {
            auto it = cells.find(key + scope);
            if (it == cells.end()) {
                missing += !v.is_null();
                return;
            }
            if (v.is_null()) {
                ++missing;
                return;
            }
            ++compared;
            worst = std::max(worst, std::abs(v.get<double>() - 100.0 * it->second.first / it->second.second));
        };
        for (const auto& [model, v] : row["models"].items()) cmp(model, v);
        cmp("total", row["total"]);
        cmp("feature", row["feature"]);
        cmp("intention", row["intention"]);
    }

    // Rendered text: header, count row and a REL/LOC/POR block per method, with
    // each rendered cell equal to the recomputation rounded to two places.
    const std::string text = out.str();
    const auto lines = text::split_lines(text);
    bool shape = lines.size() == 4 + 4 * 4 && lines[0].find("Methods") == 0 &&
                 lines[0].find("Total/Avg.") != std::string::npos && lines[0].find("| ") != std::string::npos &&
                 lines[2].rfind("#", 0) == 0;
    int text_cells = 0;
    const std::vector<std::string> order = {"FT", "LoRA", "MEMIT", "ROME"};
    for (std::size_t mi = 0; shape && mi < order.size(); ++mi) {
        for (std::size_t k = 0; k < 3; ++k) {
            const std::string& line = lines[4 + mi * 4 + k];
            std::istringstream ls(line);
            std::vector<std::string> tok;
            for (std::string t; ls >> t;)
                if (t != "|") tok.push_back(t);
            const char* metric = k == 0 ? "REL" : k == 1 ? "LOC" : "POR";
            if (k == 0) {
                shape = shape && !tok.empty() && tok[0] == order[mi];
                if (!tok.empty()) tok.erase(tok.begin());
            }
            shape = shape && !tok.empty() && tok[0] == metric;
            if (tok.size() != 5) {  // metric, one model, total, feature, intention
                shape = false;
                break;
            }
            const std::vector<std::string> scopes = {w.cfg.model.id, "total", "feature", "intention"};
            for (std::size_t c = 0; c < scopes.size(); ++c) {
                auto it = cells.find(order[mi] + "|" + metric + "|" + scopes[c]);
                const std::string want = it == cells.end() ? "-" : fmt("%.2f", 100.0 * it->second.first / it->second.second);
                shape = shape && tok[c + 1] == want;
                ++text_cells;
            }
        }
    }
    return check(compared > 0 && missing == 0 && worst <= 0.01 && shape,
                 fmt("%.0f aggregates compared, max deviation %.2e; ", compared, worst) +
                     std::to_string(text_cells) + " rendered cells " + (shape ? "match" : "MISMATCH") +
                     (missing ? "; missing cells" : ""));
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Result()>>> criteria = {
        {"prompt fidelity", prompt_fidelity},
        {"pipeline determinism and filtering", pipeline_determinism},
        {"stats correctness", stats_correctness},
        {"ROME algebraic exactness", rome_exactness},
        {"gradient correctness", gradient_correctness},
        {"edit effectiveness at toy scale", edit_effectiveness},
        {"revert guarantee", revert_guarantee},
        {"metric oracle equivalence", metric_oracle},
        {"MEMIT/ROME consistency", memit_rome_consistency},
        {"end-to-end report", end_to_end_report},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        Result r;
        try {
            r = criteria[i].second();
        } catch (const std::exception& e) {
            r = check(false, std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%s criterion %zu (%s): %s [%.1fs]\n", r.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                    r.detail.c_str(), secs);
        std::fflush(stdout);
        failed += !r.pass;
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed ? 1 : 0;
}
