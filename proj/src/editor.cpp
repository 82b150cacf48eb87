#include "ecomedit/editor.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "ecomedit/error.hpp"
#include "ecomedit/text.hpp"

namespace ecomedit {

std::string_view method_name(EditMethod m) {
    switch (m) {
    case EditMethod::FT: return "FT";
    case EditMethod::LoRA: return "LoRA";
    case EditMethod::ROME: return "ROME";
    case EditMethod::MEMIT: return "MEMIT";
    }
    return "?";
}

std::string_view method_cli_name(EditMethod m) {
    switch (m) {
    case EditMethod::FT: return "ft";
    case EditMethod::LoRA: return "lora";
    case EditMethod::ROME: return "rome";
    case EditMethod::MEMIT: return "memit";
    }
    return "?";
}

std::optional<EditMethod> parse_method(std::string_view s) {
    const std::string l = text::to_lower(s);
    if (l == "ft") return EditMethod::FT;
    if (l == "lora") return EditMethod::LoRA;
    if (l == "rome") return EditMethod::ROME;
    if (l == "memit") return EditMethod::MEMIT;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// statistics

Matrix second_moment(const Matrix& keys) {
    if (keys.rows() == 0) throw Error("second moment of zero vectors");
    Matrix c = keys.transpose() * keys / static_cast<double>(keys.rows());
    // Exact symmetry regardless of GEMM rounding.
    return (c + c.transpose()) * 0.5;
}

double default_damping(const Matrix& c, double scale) { return scale * c.trace() / static_cast<double>(c.rows()); }

CovarianceResult estimate_covariance(const LanguageModel& model, int layer, std::span<const std::string> corpus,
                                     std::size_t n, double damping_scale) {
    if (corpus.empty()) throw Error("covariance corpus must be nonempty");
    std::vector<Matrix> blocks;
    std::size_t m = 0;
    for (const auto& doc : corpus) {
        if (m >= n) break;
        Tokens toks = model.tokenizer().encode(doc);
        if (toks.empty()) continue;
        if (static_cast<int>(toks.size()) > model.max_positions()) toks.resize(static_cast<std::size_t>(model.max_positions()));
        auto tr = model.trace(toks, layer);
        m += static_cast<std::size_t>(tr.keys.rows());
        blocks.push_back(std::move(tr.keys));
    }
    if (m == 0) throw Error("covariance corpus produced no activations");
    Matrix all(static_cast<Eigen::Index>(m), model.mlp_dim());
    Eigen::Index row = 0;
    for (const auto& b : blocks) {
        all.middleRows(row, b.rows()) = b;
        row += b.rows();
    }
    CovarianceResult out;
    out.stats.layer = layer;
    out.stats.second_moment = second_moment(all);
    out.stats.n_samples = m;
    out.stats.damping = default_damping(out.stats.second_moment, damping_scale);
    if (m < n)
        out.warnings.push_back("requested " + std::to_string(n) + " activations at layer " + std::to_string(layer) +
                               " but the corpus yielded only " + std::to_string(m));
    return out;
}

// ---------------------------------------------------------------------------
// keys and values

void validate(const EditRequest& r) {
    if (r.subject.empty()) throw Error("edit subject must be nonempty");
    if (r.target.empty()) throw Error("edit target must be nonempty");
    if (r.prompt.find(r.subject) == std::string::npos)
        throw AlignmentError("edit prompt does not contain the subject '" + r.subject + "'");
}

std::vector<std::string> context_prefixes(const LanguageModel& model, int n, std::uint64_t seed) {
    std::vector<std::string> pool;
    for (const auto& w : model.tokenizer().words()) {
        std::string t = text::trim(w);
        if (t.size() >= 2 && std::all_of(t.begin(), t.end(), [](unsigned char c) { return std::isalpha(c); }))
            pool.push_back(std::move(t));
    }
    if (pool.empty()) pool = {"the", "item", "product"};
    std::mt19937_64 rng(seed ^ 0x5eedULL);
    std::vector<std::string> out;
    for (int i = 0; i < n; ++i) {
        const int len = 2 + static_cast<int>(rng() % 4);
        std::string p;
        for (int k = 0; k < len; ++k) {
            if (k) p += ' ';
            p += pool[rng() % pool.size()];
        }
        if (!p.empty()) p[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(p[0])));
        out.push_back(p + ". ");
    }
    return out;
}

Vector compute_subject_key(const LanguageModel& model, int layer, const std::string& prompt,
                           const std::string& subject, std::span<const std::string> prefixes) {
    const auto& tok = model.tokenizer();
    auto key_for = [&](const std::string& prefix) -> Vector {
        const std::string textv = prefix + prompt;
        const auto where = textv.find(subject, prefix.size());
        if (where == std::string::npos) throw AlignmentError("subject '" + subject + "' not found in prompt");
        // Align within the text from the subject occurrence that follows the prefix.
        const auto spans = tok.spans(textv);
        const std::size_t last_byte = where + subject.size() - 1;
        std::size_t pos = spans.size();
        for (std::size_t i = 0; i < spans.size(); ++i)
            if (spans[i].first <= last_byte && last_byte < spans[i].second) pos = i;
        if (pos == spans.size()) throw AlignmentError("subject '" + subject + "' could not be aligned to tokens");
        auto tr = model.trace(tok.encode(textv), layer);
        return tr.keys.row(static_cast<Eigen::Index>(pos)).transpose();
    };
    Vector sum = key_for("");
    for (const auto& p : prefixes) sum += key_for(p);
    return sum / static_cast<double>(prefixes.size() + 1);
}

Vector compute_subject_key(const LanguageModel& model, int layer, const std::string& prompt,
                           const std::string& subject, int n_prefixes, std::uint64_t seed) {
    auto prefixes = context_prefixes(model, n_prefixes, seed);
    return compute_subject_key(model, layer, prompt, subject, prefixes);
}

TeacherForced teacher_forced(const Tokenizer& tok, const std::string& prompt, const std::string& target) {
    if (prompt.empty()) throw MetricError("prompt must be nonempty");
    TeacherForced tf;
    tf.tokens = tok.encode(prompt);
    tf.target_start = tf.tokens.size();
    const bool seam_space = std::isspace(static_cast<unsigned char>(prompt.back())) ||
                            (!target.empty() && std::isspace(static_cast<unsigned char>(target.front())));
    Tokens cont = tok.encode(seam_space ? target : " " + target);
    if (text::trim(target).empty() || cont.empty()) throw MetricError("target tokenizes to zero tokens");
    tf.tokens.insert(tf.tokens.end(), cont.begin(), cont.end());
    return tf;
}

std::pair<double, Vector> value_loss_gradient(const LanguageModel& model, int layer, const TeacherForced& tf,
                                              std::size_t position, const Vector& value) {
    Injection inj{layer, position, value};
    auto lg = model.loss_gradient(tf.tokens, tf.target_start, layer, &inj);
    return {lg.loss, lg.d_mlp_out.row(static_cast<Eigen::Index>(position)).transpose()};
}

ValueOptimization optimize_value(const LanguageModel& model, int layer, const std::string& prompt,
                                 const std::string& subject, const std::string& target, const OptimizerConfig& opt) {
    const auto tf = teacher_forced(model.tokenizer(), prompt, target);
    ValueOptimization out;
    out.position = model.tokenizer().subject_last_token(prompt, subject);
    auto tr = model.trace(tf.tokens, layer);
    out.original = tr.mlp_out.row(static_cast<Eigen::Index>(out.position)).transpose();
    out.value = out.original;

    auto [loss, grad] = value_loss_gradient(model, layer, tf, out.position, out.value);
    if (!std::isfinite(loss)) throw OptimizationError("non-finite initial loss", 0);
    out.initial_loss = out.final_loss = loss;
    out.accepted_losses.push_back(loss);

    // Adam on the offset from the original activation, projected onto the
    // clamp ball. Only improvements are accepted; the best iterate is kept.
    const double base = std::max(out.original.norm(), 1e-12);
    const double radius = opt.clamp_factor * base;
    const double lr = opt.step_size * base / std::sqrt(static_cast<double>(out.original.size()));
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-12;
    Vector delta = Vector::Zero(out.original.size());
    Vector m1 = delta, m2 = delta;
    for (int step = 1; step <= opt.steps; ++step) {
        if (!grad.allFinite()) throw OptimizationError("non-finite gradient at step " + std::to_string(step), step);
        m1 = b1 * m1 + (1 - b1) * grad;
        m2 = b2 * m2 + (1 - b2) * grad.cwiseAbs2();
        const double c1 = 1 - std::pow(b1, step), c2 = 1 - std::pow(b2, step);
        delta -= lr * ((m1 / c1).array() / ((m2 / c2).array().sqrt() + eps)).matrix();
        if (delta.norm() > radius) delta *= radius / delta.norm();
        Vector candidate = out.original + delta;
        auto [cand_loss, cand_grad] = value_loss_gradient(model, layer, tf, out.position, candidate);
        if (!std::isfinite(cand_loss))
            throw OptimizationError("non-finite loss at step " + std::to_string(step), step);
        if (cand_loss < loss) {
            out.value = candidate;
            loss = cand_loss;
            out.accepted_losses.push_back(loss);
        }
        grad = std::move(cand_grad);
    }
    out.final_loss = loss;
    return out;
}

// ---------------------------------------------------------------------------
// configuration

EditConfig resolve(EditConfig cfg, const LanguageModel& model) {
    const int L = model.num_layers();
    if (cfg.layer < 0) cfg.layer = L / 2;
    if (cfg.layers.empty()) {
        const int lo = L / 3;
        const int hi = std::max(lo, (2 * L + 2) / 3 - 1);
        for (int l = lo; l <= hi; ++l) cfg.layers.push_back(l);
    }
    std::sort(cfg.layers.begin(), cfg.layers.end());
    cfg.layers.erase(std::unique(cfg.layers.begin(), cfg.layers.end()), cfg.layers.end());
    if (cfg.layer >= L) throw ConfigError("edit layer " + std::to_string(cfg.layer) + " out of range");
    for (int l : cfg.layers)
        if (l < 0 || l >= L) throw ConfigError("MEMIT layer " + std::to_string(l) + " out of range");
    return cfg;
}

EditConfig edit_config_from_json(const nlohmann::json& j) {
    EditConfig cfg;
    cfg.layer = j.value("layer", cfg.layer);
    if (j.contains("layers")) cfg.layers = j["layers"].get<std::vector<int>>();
    cfg.n_prefixes = j.value("n_prefixes", cfg.n_prefixes);
    cfg.prefix_seed = j.value("prefix_seed", cfg.prefix_seed);
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("optimizer")) {
        const auto& o = j["optimizer"];
        cfg.optimizer.steps = o.value("steps", cfg.optimizer.steps);
        cfg.optimizer.step_size = o.value("step_size", cfg.optimizer.step_size);
        cfg.optimizer.clamp_factor = o.value("clamp_factor", cfg.optimizer.clamp_factor);
    }
    if (j.contains("train")) {
        cfg.train.steps = j["train"].value("steps", cfg.train.steps);
        cfg.train.learning_rate = j["train"].value("learning_rate", cfg.train.learning_rate);
    }
    if (j.contains("lora")) {
        cfg.lora.rank = j["lora"].value("rank", cfg.lora.rank);
        cfg.lora.scale = j["lora"].value("scale", cfg.lora.scale);
    }
    return cfg;
}

nlohmann::json to_json(const EditConfig& cfg) {
    return {{"layer", cfg.layer},
            {"layers", cfg.layers},
            {"n_prefixes", cfg.n_prefixes},
            {"prefix_seed", cfg.prefix_seed},
            {"seed", cfg.seed},
            {"optimizer",
             {{"steps", cfg.optimizer.steps}, {"step_size", cfg.optimizer.step_size}, {"clamp_factor", cfg.optimizer.clamp_factor}}},
            {"train", {{"steps", cfg.train.steps}, {"learning_rate", cfg.train.learning_rate}}},
            {"lora", {{"rank", cfg.lora.rank}, {"scale", cfg.lora.scale}}}};
}

// ---------------------------------------------------------------------------
// ROME

namespace {

Eigen::LDLT<Matrix> factor_damped(const Matrix& c, double damping) {
    Matrix a = c;
    a.diagonal().array() += damping;
    Eigen::LDLT<Matrix> ldlt(a);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || !(ldlt.rcond() > 1e-14))
        throw ConditioningError("covariance + damping is numerically singular; increase the damping");
    return ldlt;
}

// Restores every touched down projection when it goes out of scope.
class WeightGuard {
public:
    explicit WeightGuard(LanguageModel& model) : model_(model) {}
    ~WeightGuard() {
        for (const auto& [layer, w] : saved_) model_.set_down_proj(layer, w);
    }
    const Matrix& original(int layer) {
        auto it = saved_.find(layer);
        if (it == saved_.end()) it = saved_.emplace(layer, model_.down_proj(layer)).first;
        return it->second;
    }

private:
    LanguageModel& model_;
    std::map<int, Matrix> saved_;
};

}  // namespace

Matrix rank_one_update(const Matrix& w, const Matrix& c, double damping, const Vector& key, const Vector& value) {
    auto ldlt = factor_damped(c, damping);
    Vector x = ldlt.solve(key);
    const double denom = key.dot(x);
    if (!(denom > 0.0) || !std::isfinite(denom))
        throw ConditioningError("degenerate subject key; increase the damping");
    Vector u = x / denom;
    Vector residual = value - w * key;
    return w + residual * u.transpose();
}

RomeEdit rome_edit(const LanguageModel& model, const EditRequest& request, const CovStats& cov, const EditConfig& in_cfg) {
    validate(request);
    const EditConfig cfg = resolve(in_cfg, model);
    if (cov.layer != cfg.layer)
        throw ConfigError("covariance statistics are for layer " + std::to_string(cov.layer) + ", edit targets layer " +
                          std::to_string(cfg.layer));
    RomeEdit out;
    out.key = compute_subject_key(model, cfg.layer, request.prompt, request.subject, cfg.n_prefixes, cfg.prefix_seed);
    out.optimization = optimize_value(model, cfg.layer, request.prompt, request.subject, request.target, cfg.optimizer);
    out.value = out.optimization.value;
    const Matrix& w = model.down_proj(cfg.layer);
    out.delta.method = EditMethod::ROME;
    out.delta.entries.push_back({cfg.layer, w, rank_one_update(w, cov.second_moment, cov.damping, out.key, out.value)});
    out.delta.metadata = {{"config", to_json(cfg)},
                          {"damping", cov.damping},
                          {"cov_samples", cov.n_samples},
                          {"initial_loss", out.optimization.initial_loss},
                          {"final_loss", out.optimization.final_loss}};
    return out;
}

WeightDelta rome_update(const LanguageModel& model, const EditRequest& request, const CovStats& cov, const EditConfig& cfg) {
    return rome_edit(model, request, cov, cfg).delta;
}

// ---------------------------------------------------------------------------
// MEMIT

WeightDelta memit_update(LanguageModel& model, std::span<const EditRequest> requests, std::span<const CovStats> covs,
                         const EditConfig& in_cfg) {
    const EditConfig cfg = resolve(in_cfg, model);
    WeightDelta delta;
    delta.method = EditMethod::MEMIT;
    delta.metadata = {{"config", to_json(cfg)}, {"requests", requests.size()}};
    if (requests.empty()) return delta;
    if (covs.size() != cfg.layers.size())
        throw ConfigError("MEMIT needs one covariance per edited layer (" + std::to_string(cfg.layers.size()) + ")");
    for (std::size_t i = 0; i < covs.size(); ++i)
        if (covs[i].layer != cfg.layers[i])
            throw ConfigError("covariance " + std::to_string(i) + " is for layer " + std::to_string(covs[i].layer) +
                              ", expected " + std::to_string(cfg.layers[i]));
    for (const auto& r : requests) validate(r);

    const int last = cfg.layers.back();
    const auto N = static_cast<Eigen::Index>(requests.size());
    const auto& tok = model.tokenizer();

    // Residual-stream targets at the last edited layer.
    std::vector<Tokens> prompt_tokens;
    std::vector<std::size_t> positions;
    Matrix targets(model.hidden_dim(), N);
    nlohmann::json losses = nlohmann::json::array();
    for (Eigen::Index i = 0; i < N; ++i) {
        const auto& r = requests[static_cast<std::size_t>(i)];
        auto opt = optimize_value(model, last, r.prompt, r.subject, r.target, cfg.optimizer);
        prompt_tokens.push_back(tok.encode(r.prompt));
        positions.push_back(opt.position);
        auto tr = model.trace(prompt_tokens.back(), last);
        const auto p = static_cast<Eigen::Index>(opt.position);
        targets.col(i) = tr.residual.row(p).transpose() + (opt.value - tr.mlp_out.row(p).transpose());
        losses.push_back({{"initial", opt.initial_loss}, {"final", opt.final_loss}});
    }

    WeightGuard guard(model);
    for (std::size_t li = 0; li < cfg.layers.size(); ++li) {
        const int layer = cfg.layers[li];
        const auto& cov = covs[li];
        Matrix keys(model.mlp_dim(), N);
        Matrix residuals(model.hidden_dim(), N);
        for (Eigen::Index i = 0; i < N; ++i) {
            const auto& r = requests[static_cast<std::size_t>(i)];
            keys.col(i) = compute_subject_key(model, layer, r.prompt, r.subject, cfg.n_prefixes, cfg.prefix_seed);
            auto tr = model.trace(prompt_tokens[static_cast<std::size_t>(i)], last);
            residuals.col(i) = targets.col(i) - tr.residual.row(static_cast<Eigen::Index>(positions[static_cast<std::size_t>(i)])).transpose();
        }
        residuals /= static_cast<double>(cfg.layers.size() - li);
        Matrix a = cov.second_moment + keys * keys.transpose();
        auto ldlt = factor_damped(a, cov.damping);
        Matrix solved = ldlt.solve(keys);  // (C + lambda I + K K^T)^{-1} K
        const Matrix& original = guard.original(layer);
        Matrix updated = model.down_proj(layer) + residuals * solved.transpose();
        model.set_down_proj(layer, updated);
        delta.entries.push_back({layer, original, std::move(updated)});
    }
    delta.metadata["value_losses"] = std::move(losses);
    return delta;
}

// ---------------------------------------------------------------------------
// FT and LoRA

std::pair<double, Matrix> weight_loss_gradient(const LanguageModel& model, int layer, const TeacherForced& tf) {
    auto lg = model.loss_gradient(tf.tokens, tf.target_start, layer);
    return {lg.loss, lg.d_mlp_out.transpose() * lg.keys};
}

namespace {

struct Adam {
    Matrix m, v;
    int t = 0;
    double lr;
    explicit Adam(const Matrix& shape, double lr_) : m(Matrix::Zero(shape.rows(), shape.cols())), v(m), lr(lr_) {}
    Matrix step(const Matrix& g) {
        constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
        ++t;
        m = b1 * m + (1 - b1) * g;
        v = b2 * v + (1 - b2) * g.cwiseAbs2();
        const double c1 = 1 - std::pow(b1, t), c2 = 1 - std::pow(b2, t);
        return -lr * ((m / c1).array() / ((v / c2).array().sqrt() + eps)).matrix();
    }
};

}  // namespace

WeightDelta ft_update(LanguageModel& model, const EditRequest& request, const EditConfig& in_cfg) {
    validate(request);
    const EditConfig cfg = resolve(in_cfg, model);
    const auto tf = teacher_forced(model.tokenizer(), request.prompt, request.target);
    WeightGuard guard(model);
    const Matrix& original = guard.original(cfg.layer);
    Matrix w = original;
    Adam adam(w, cfg.train.learning_rate);
    double first = 0, last = 0;
    for (int step = 0; step < cfg.train.steps; ++step) {
        model.set_down_proj(cfg.layer, w);
        auto [loss, g] = weight_loss_gradient(model, cfg.layer, tf);
        if (!std::isfinite(loss) || !g.allFinite()) throw OptimizationError("non-finite FT loss at step " + std::to_string(step), step);
        if (step == 0) first = loss;
        last = loss;
        w += adam.step(g);
    }
    WeightDelta delta;
    delta.method = EditMethod::FT;
    delta.entries.push_back({cfg.layer, original, std::move(w)});
    delta.metadata = {{"config", to_json(cfg)}, {"first_loss", first}, {"last_loss", last}};
    return delta;
}

WeightDelta lora_update(LanguageModel& model, const EditRequest& request, const EditConfig& in_cfg) {
    validate(request);
    const EditConfig cfg = resolve(in_cfg, model);
    if (cfg.lora.rank < 1) throw ConfigError("LoRA rank must be positive");
    const auto tf = teacher_forced(model.tokenizer(), request.prompt, request.target);
    WeightGuard guard(model);
    const Matrix& original = guard.original(cfg.layer);
    const auto r = static_cast<Eigen::Index>(cfg.lora.rank);
    const double s = cfg.lora.scale;
    Matrix a = Matrix::Zero(original.rows(), r);
    Matrix b(r, original.cols());
    {
        std::mt19937_64 rng(cfg.seed ^ 0x10aaULL);
        std::normal_distribution<double> nd(0.0, 1.0 / std::sqrt(static_cast<double>(original.cols())));
        for (Eigen::Index i = 0; i < b.rows(); ++i)
            for (Eigen::Index j = 0; j < b.cols(); ++j) b(i, j) = nd(rng);
    }
    Adam adam_a(a, cfg.train.learning_rate), adam_b(b, cfg.train.learning_rate);
    double first = 0, last = 0;
    for (int step = 0; step < cfg.train.steps; ++step) {
        model.set_down_proj(cfg.layer, original + s * a * b);
        auto [loss, g] = weight_loss_gradient(model, cfg.layer, tf);
        if (!std::isfinite(loss) || !g.allFinite()) throw OptimizationError("non-finite LoRA loss at step " + std::to_string(step), step);
        if (step == 0) first = loss;
        last = loss;
        Matrix ga = s * g * b.transpose();
        Matrix gb = s * a.transpose() * g;
        a += adam_a.step(ga);
        b += adam_b.step(gb);
    }
    WeightDelta delta;
    delta.method = EditMethod::LoRA;
    Matrix replacement = cfg.train.steps > 0 ? Matrix(original + s * a * b) : original;
    delta.entries.push_back({cfg.layer, original, std::move(replacement)});
    delta.metadata = {{"config", to_json(cfg)}, {"first_loss", first}, {"last_loss", last}};
    return delta;
}

double target_nll(const LanguageModel& model, const std::string& prompt, const std::string& target) {
    const auto tf = teacher_forced(model.tokenizer(), prompt, target);
    Matrix lg = model.logits(tf.tokens);
    double loss = 0.0;
    for (std::size_t i = tf.target_start; i < tf.tokens.size(); ++i) {
        const auto row = static_cast<Eigen::Index>(i - 1);
        const double mx = lg.row(row).maxCoeff();
        const double lse = mx + std::log((lg.row(row).array() - mx).exp().sum());
        loss += lse - lg(row, tf.tokens[i]);
    }
    return loss / static_cast<double>(tf.tokens.size() - tf.target_start);
}

// ---------------------------------------------------------------------------
// deltas

bool WeightDelta::is_zero() const {
    return std::all_of(entries.begin(), entries.end(),
                       [](const DeltaEntry& e) { return (e.original.array() == e.replacement.array()).all(); });
}

void apply_delta(LanguageModel& model, WeightDelta& delta) {
    if (delta.state == DeltaState::applied) throw DeltaStateError("delta is already applied");
    for (const auto& e : delta.entries) {
        const auto& cur = model.down_proj(e.layer);
        if (cur.rows() != e.original.rows() || cur.cols() != e.original.cols() || !(cur.array() == e.original.array()).all())
            throw DeltaStateError("layer " + std::to_string(e.layer) + " is not in the delta's pre-edit state");
    }
    for (const auto& e : delta.entries) model.set_down_proj(e.layer, e.replacement);
    delta.state = DeltaState::applied;
}

void revert_delta(LanguageModel& model, WeightDelta& delta) {
    if (delta.state != DeltaState::applied) throw DeltaStateError("revert requested for a delta that is not applied");
    for (auto it = delta.entries.rbegin(); it != delta.entries.rend(); ++it) model.set_down_proj(it->layer, it->original);
    delta.state = DeltaState::reverted;
}

ScopedDelta::ScopedDelta(LanguageModel& model, WeightDelta& delta) : model_(model), delta_(delta) {
    apply_delta(model_, delta_);
}

ScopedDelta::~ScopedDelta() {
    if (delta_.state == DeltaState::applied) revert_delta(model_, delta_);
}

Vector singular_values(const Matrix& m) {
    Eigen::JacobiSVD<Matrix> svd(m);
    return svd.singularValues();
}

int numerical_rank(const Matrix& m, double threshold) {
    const Vector s = singular_values(m);
    return static_cast<int>((s.array() > threshold).count());
}

}  // namespace ecomedit
