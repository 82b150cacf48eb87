#include "ecomedit/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>

#include "ecomedit/error.hpp"
#include "ecomedit/text.hpp"

namespace ecomedit {

namespace {

TokenId argmax_row(const Matrix& logits, Eigen::Index row) {
    Eigen::Index best = 0;
    logits.row(row).maxCoeff(&best);
    return static_cast<TokenId>(best);
}

}  // namespace

double target_token_accuracy(const LanguageModel& model, const TeacherForced& tf) {
    const std::size_t n = tf.tokens.size() - tf.target_start;
    if (n == 0 || tf.target_start == 0) throw MetricError("target tokenizes to zero tokens");
    const Matrix lg = model.logits(tf.tokens);
    std::size_t hits = 0;
    for (std::size_t i = tf.target_start; i < tf.tokens.size(); ++i)
        if (argmax_row(lg, static_cast<Eigen::Index>(i - 1)) == tf.tokens[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(n);
}

double target_token_accuracy(const LanguageModel& model, const std::string& prompt, const std::string& target) {
    return target_token_accuracy(model, teacher_forced(model.tokenizer(), prompt, target));
}

Tokens greedy_continuation(const LanguageModel& model, const Tokens& prompt, int n) {
    if (prompt.empty()) throw MetricError("greedy decoding needs a nonempty prompt");
    Tokens seq = prompt;
    Tokens out;
    for (int i = 0; i < n && static_cast<int>(seq.size()) < model.max_positions(); ++i) {
        const Matrix lg = model.logits(seq);
        const TokenId next = argmax_row(lg, lg.rows() - 1);
        seq.push_back(next);
        out.push_back(next);
    }
    return out;
}

double continuation_agreement(const LanguageModel& model, const Tokens& prompt, const Tokens& continuation) {
    if (continuation.empty()) throw MetricError("empty reference continuation");
    TeacherForced tf;
    tf.tokens = prompt;
    tf.target_start = prompt.size();
    tf.tokens.insert(tf.tokens.end(), continuation.begin(), continuation.end());
    return target_token_accuracy(model, tf);
}

// ---------------------------------------------------------------------------
// outcome records

nlohmann::ordered_json to_json(const EditOutcome& o) {
    nlohmann::ordered_json j;
    j["sample_id"] = o.sample_id;
    j["method"] = std::string(method_cli_name(o.method));
    j["model_id"] = o.model_id;
    j["kind"] = std::string(claim_kind_name(o.kind));
    if (o.error) {
        j["error"] = *o.error;
        return j;
    }
    j["rel"] = o.rel;
    j["loc"] = o.loc ? nlohmann::ordered_json(*o.loc) : nlohmann::ordered_json(nullptr);
    j["por"] = o.por ? nlohmann::ordered_json(*o.por) : nlohmann::ordered_json(nullptr);
    return j;
}

EditOutcome outcome_from_json(const nlohmann::json& j) {
    EditOutcome o;
    o.sample_id = j.at("sample_id").get<std::string>();
    auto m = parse_method(j.at("method").get<std::string>());
    if (!m) throw ParseError("unknown edit method '" + j.at("method").get<std::string>() + "'");
    o.method = *m;
    o.model_id = j.at("model_id").get<std::string>();
    o.kind = parse_claim_kind(j.at("kind").get<std::string>());
    if (j.contains("error")) {
        o.error = j.at("error").get<std::string>();
        return o;
    }
    auto unit = [](const nlohmann::json& v, const char* name) {
        const double x = v.get<double>();
        if (!(x >= 0.0 && x <= 1.0)) throw ParseError(std::string(name) + " outside [0, 1]");
        return x;
    };
    o.rel = unit(j.at("rel"), "rel");
    if (j.contains("loc") && !j["loc"].is_null()) o.loc = unit(j["loc"], "loc");
    if (j.contains("por") && !j["por"].is_null()) o.por = unit(j["por"], "por");
    return o;
}

OutcomeLoad parse_outcomes(std::string_view contents) {
    OutcomeLoad out;
    auto lines = text::split_lines(contents);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (text::trim(lines[i]).empty()) continue;
        try {
            out.outcomes.push_back(outcome_from_json(nlohmann::json::parse(lines[i])));
        } catch (const std::exception& e) {
            out.issues.push_back({i + 1, e.what()});
        }
    }
    return out;
}

OutcomeLoad read_outcomes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open outcome file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_outcomes(ss.str());
}

void append_outcome(const std::filesystem::path& path, const EditOutcome& o) {
    static std::mutex mu;
    std::lock_guard lock(mu);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out) throw Error("cannot append to outcome file: " + path.string());
    out << to_json(o).dump() << '\n';
    out.flush();
}

// ---------------------------------------------------------------------------
// evaluation

EditOutcome evaluate_sample(LanguageModel& model, WeightDelta& delta, const EditSample& sample,
                            const std::string& model_id, const EvalConfig& cfg) {
    EditOutcome o;
    o.sample_id = sample.sample_id;
    o.method = delta.method;
    o.model_id = model_id;
    o.kind = sample.kind;
    const auto& tok = model.tokenizer();
    try {
        std::vector<std::pair<Tokens, Tokens>> references;
        for (const auto& probe : sample.locality) {
            Tokens prompt = tok.encode(probe.prompt);
            Tokens cont = greedy_continuation(model, prompt, cfg.locality_horizon);
            if (!cont.empty()) references.emplace_back(std::move(prompt), std::move(cont));
        }

        ScopedDelta scope(model, delta);
        o.rel = target_token_accuracy(model, sample.edit_prompt, sample.target_new);
        if (!references.empty()) {
            double sum = 0.0;
            for (const auto& [prompt, cont] : references) sum += continuation_agreement(model, prompt, cont);
            o.loc = sum / static_cast<double>(references.size());
        }
        if (!sample.portability.empty()) {
            double sum = 0.0;
            for (const auto& probe : sample.portability) sum += target_token_accuracy(model, probe.prompt, probe.target);
            o.por = sum / static_cast<double>(sample.portability.size());
        }
    } catch (const std::exception& e) {
        o.rel = 0.0;
        o.loc.reset();
        o.por.reset();
        o.error = e.what();
    }
    return o;
}

std::vector<int> covariance_layers(EditMethod method, const EditConfig& in_cfg, const LanguageModel& model) {
    const EditConfig cfg = resolve(in_cfg, model);
    switch (method) {
    case EditMethod::ROME: return {cfg.layer};
    case EditMethod::MEMIT: return cfg.layers;
    default: return {};
    }
}

WeightDelta compute_delta(LanguageModel& model, EditMethod method, const EditRequest& request,
                          const ExperimentConfig& cfg) {
    auto cov_at = [&](int layer) -> const CovStats& {
        auto it = cfg.covariances.find(layer);
        if (it == cfg.covariances.end())
            throw ConfigError("no covariance statistics for layer " + std::to_string(layer));
        return it->second;
    };
    switch (method) {
    case EditMethod::FT: return ft_update(model, request, cfg.edit);
    case EditMethod::LoRA: return lora_update(model, request, cfg.edit);
    case EditMethod::ROME: {
        const EditConfig resolved = resolve(cfg.edit, model);
        return rome_update(model, request, cov_at(resolved.layer), resolved);
    }
    case EditMethod::MEMIT: {
        const EditConfig resolved = resolve(cfg.edit, model);
        std::vector<CovStats> covs;
        for (int l : resolved.layers) covs.push_back(cov_at(l));
        return memit_update(model, std::span<const EditRequest>(&request, 1), covs, resolved);
    }
    }
    throw ConfigError("unknown edit method");
}

std::vector<EditOutcome> run_experiment(LanguageModel& model, EditMethod method, std::span<const EditSample> samples,
                                        const ExperimentConfig& cfg) {
    std::map<std::string, EditOutcome> done;
    if (cfg.outcomes && std::filesystem::exists(*cfg.outcomes)) {
        for (auto& o : read_outcomes(*cfg.outcomes).outcomes)
            if (o.method == method && o.model_id == cfg.model_id) done.insert_or_assign(o.sample_id, std::move(o));
    }
    std::vector<EditOutcome> out;
    out.reserve(samples.size());
    for (const auto& sample : samples) {
        if (auto it = done.find(sample.sample_id); it != done.end()) {
            out.push_back(it->second);
            continue;
        }
        EditOutcome o;
        try {
            WeightDelta delta = compute_delta(model, method, {sample.subject, sample.edit_prompt, sample.target_new}, cfg);
            o = evaluate_sample(model, delta, sample, cfg.model_id, cfg.eval);
        } catch (const std::exception& e) {
            o.sample_id = sample.sample_id;
            o.method = method;
            o.model_id = cfg.model_id;
            o.kind = sample.kind;
            o.error = e.what();
        }
        if (cfg.outcomes) append_outcome(*cfg.outcomes, o);
        done.insert_or_assign(o.sample_id, o);
        out.push_back(std::move(o));
    }
    return out;
}

// ---------------------------------------------------------------------------
// aggregation

std::string_view metric_name(Metric m) {
    switch (m) {
    case Metric::REL: return "REL";
    case Metric::LOC: return "LOC";
    case Metric::POR: return "POR";
    }
    return "?";
}

namespace {

constexpr std::array<EditMethod, 4> kReportOrder{EditMethod::FT, EditMethod::LoRA, EditMethod::MEMIT, EditMethod::ROME};

std::optional<double> scaled(const MeanCell& c) {
    auto m = c.mean();
    if (m) *m *= 100.0;
    return m;
}

const MetricRow* find_row(const AggregateReport& r, EditMethod method, Metric metric) {
    auto it = r.rows.find(method);
    return it == r.rows.end() ? nullptr : &it->second[static_cast<std::size_t>(metric)];
}

}  // namespace

std::optional<double> AggregateReport::value(EditMethod method, Metric metric, const std::string& model) const {
    const auto* row = find_row(*this, method, metric);
    if (!row) return std::nullopt;
    auto it = row->per_model.find(model);
    return it == row->per_model.end() ? std::nullopt : scaled(it->second);
}

std::optional<double> AggregateReport::total(EditMethod method, Metric metric) const {
    const auto* row = find_row(*this, method, metric);
    return row ? scaled(row->total) : std::nullopt;
}

std::optional<double> AggregateReport::feature(EditMethod method, Metric metric) const {
    const auto* row = find_row(*this, method, metric);
    return row ? scaled(row->feature) : std::nullopt;
}

std::optional<double> AggregateReport::intention(EditMethod method, Metric metric) const {
    const auto* row = find_row(*this, method, metric);
    return row ? scaled(row->intention) : std::nullopt;
}

AggregateReport aggregate(std::span<const EditOutcome> outcomes) {
    AggregateReport r;
    std::set<std::string> models;
    std::set<EditMethod> methods;
    std::map<std::string, std::map<std::string, ClaimKind>> samples;  // model -> sample id -> kind
    for (const auto& o : outcomes) {
        models.insert(o.model_id);
        methods.insert(o.method);
        samples[o.model_id].emplace(o.sample_id, o.kind);
        if (o.error) {
            ++r.errors;
            continue;
        }
        auto& rows = r.rows[o.method];
        auto add = [&](Metric m, std::optional<double> v) {
            if (!v) return;
            auto& row = rows[static_cast<std::size_t>(m)];
            row.per_model[o.model_id].add(*v);
            row.total.add(*v);
            (o.kind == ClaimKind::feature ? row.feature : row.intention).add(*v);
        };
        add(Metric::REL, o.rel);
        add(Metric::LOC, o.loc);
        add(Metric::POR, o.por);
    }
    r.models.assign(models.begin(), models.end());
    for (auto m : kReportOrder)
        if (methods.count(m)) {
            r.methods.push_back(m);
            r.rows[m];
        }
    for (const auto& [model, ids] : samples) {
        r.counts[model] = static_cast<long long>(ids.size());
        r.total_count += static_cast<long long>(ids.size());
        for (const auto& [id, kind] : ids) ++(kind == ClaimKind::feature ? r.feature_count : r.intention_count);
    }
    return r;
}

std::string render_report(const AggregateReport& r) {
    auto fmt = [](std::optional<double> v) {
        if (!v) return std::string("-");
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", *v);
        return std::string(buf);
    };
    std::vector<std::string> header{"Methods", ""};
    for (const auto& m : r.models) header.push_back(m);
    header.push_back("Total/Avg.");
    header.push_back("Feature");
    header.push_back("Intention");

    std::vector<std::vector<std::string>> body;
    {
        std::vector<std::string> row{"#", ""};
        for (const auto& m : r.models) row.push_back(text::group_thousands(r.counts.at(m)));
        row.push_back(text::group_thousands(r.total_count));
        row.push_back(text::group_thousands(r.feature_count));
        row.push_back(text::group_thousands(r.intention_count));
        body.push_back(std::move(row));
    }
    for (auto method : r.methods) {
        for (auto metric : kAllMetrics) {
            std::vector<std::string> row{metric == Metric::REL ? std::string(method_name(method)) : "",
                                         std::string(metric_name(metric))};
            for (const auto& m : r.models) row.push_back(fmt(r.value(method, metric, m)));
            row.push_back(fmt(r.total(method, metric)));
            row.push_back(fmt(r.feature(method, metric)));
            row.push_back(fmt(r.intention(method, metric)));
            body.push_back(std::move(row));
        }
    }

    std::vector<std::size_t> width(header.size());
    for (std::size_t c = 0; c < header.size(); ++c) {
        width[c] = header[c].size();
        for (const auto& row : body) width[c] = std::max(width[c], row[c].size());
    }
    const std::size_t bar = header.size() - 2;  // rule before the Feature/Intention split
    auto emit = [&](std::ostringstream& os, const std::vector<std::string>& row) {
        std::string line;
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c == bar) line += " |";
            line += c == 0 ? "" : "  ";
            const std::string& cell = row[c];
            const std::string pad(width[c] - cell.size(), ' ');
            line += c < 2 ? cell + pad : pad + cell;
        }
        while (!line.empty() && line.back() == ' ') line.pop_back();
        os << line << '\n';
    };
    std::ostringstream os;
    emit(os, header);
    std::size_t rule_len = 0;
    for (auto w : width) rule_len += w + 2;
    const std::string rule(rule_len, '-');
    os << rule << '\n';
    emit(os, body[0]);
    for (std::size_t i = 1; i < body.size(); ++i) {
        if ((i - 1) % 3 == 0) os << rule << '\n';
        emit(os, body[i]);
    }
    return os.str();
}

nlohmann::ordered_json report_to_json(const AggregateReport& r) {
    auto num = [](std::optional<double> v) { return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr); };
    nlohmann::ordered_json j;
    j["models"] = r.models;
    nlohmann::ordered_json counts;
    for (const auto& m : r.models) counts[m] = r.counts.at(m);
    counts["total"] = r.total_count;
    counts["feature"] = r.feature_count;
    counts["intention"] = r.intention_count;
    j["counts"] = counts;
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (auto method : r.methods) {
        for (auto metric : kAllMetrics) {
            nlohmann::ordered_json row;
            row["method"] = std::string(method_name(method));
            row["metric"] = std::string(metric_name(metric));
            nlohmann::ordered_json per;
            for (const auto& m : r.models) per[m] = num(r.value(method, metric, m));
            row["models"] = per;
            row["total"] = num(r.total(method, metric));
            row["feature"] = num(r.feature(method, metric));
            row["intention"] = num(r.intention(method, metric));
            rows.push_back(row);
        }
    }
    j["rows"] = rows;
    j["errors"] = r.errors;
    return j;
}

double multiple_choice_accuracy(const LanguageModel& model, std::span<const MultipleChoiceItem> items) {
    if (items.empty()) throw MetricError("no multiple-choice items");
    std::size_t hits = 0;
    for (const auto& item : items) {
        if (item.options.empty() || item.answer >= item.options.size())
            throw MetricError("multiple-choice item without a valid answer index");
        std::size_t best = 0;
        double best_loss = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < item.options.size(); ++i) {
            const double loss = target_nll(model, item.question, item.options[i]);
            if (loss < best_loss) best_loss = loss, best = i;
        }
        if (best == item.answer) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(items.size());
}

}  // namespace ecomedit
