#include <doctest.h>

#include <random>

#include "ecomedit/editor.hpp"
#include "ecomedit/error.hpp"
#include "small_model.hpp"

using namespace ecomedit;

namespace {

const std::vector<std::string>& kCorpus = testutil::small_corpus();

ToyTransformer model(int layers = 4) { return testutil::small_model(layers); }

CovStats cov(const LanguageModel& m, int layer) { return estimate_covariance(m, layer, kCorpus, 10000).stats; }

EditRequest request() { return {"pan", "One feature of pan is", "oven"}; }

EditConfig quick() {
    EditConfig c;
    c.n_prefixes = 0;
    c.optimizer.steps = 15;
    c.train.steps = 10;
    return c;
}

}  // namespace

TEST_CASE("method names") {
    for (auto m : {EditMethod::FT, EditMethod::LoRA, EditMethod::ROME, EditMethod::MEMIT}) {
        CHECK(parse_method(method_name(m)) == m);
        CHECK(parse_method(method_cli_name(m)) == m);
    }
    CHECK(method_cli_name(EditMethod::LoRA) == "lora");
    CHECK_FALSE(parse_method("gpt5").has_value());
}

TEST_CASE("second moment and damping") {
    Matrix k(3, 2);
    k << 1, 0, 0, 2, 1, 1;
    Matrix expected(2, 2);
    expected << 2.0 / 3, 1.0 / 3, 1.0 / 3, 5.0 / 3;
    CHECK((second_moment(k) - expected).norm() < 1e-12);
    CHECK(default_damping(expected, 0.5) == doctest::Approx(0.5 * (7.0 / 3) / 2));
}

TEST_CASE("covariance estimation counts vectors and warns when the corpus runs out") {
    auto m = model();
    auto a = estimate_covariance(m, 1, kCorpus, 20);
    CHECK(a.stats.n_samples >= 20);
    CHECK(a.warnings.empty());
    CHECK(a.stats.layer == 1);
    CHECK(a.stats.second_moment.rows() == m.mlp_dim());
    CHECK((a.stats.second_moment - a.stats.second_moment.transpose()).norm() == 0.0);
    auto b = estimate_covariance(m, 1, kCorpus, 100000);
    CHECK(b.warnings.size() == 1);
    CHECK(b.stats.n_samples < 100000);
    CHECK(b.stats.damping > 0.0);
}

TEST_CASE("edit request validation") {
    auto m = model();
    CHECK_NOTHROW(validate(request()));
    CHECK_THROWS_AS(validate({"kettle", "One feature of pan is", "x"}), AlignmentError);
    CHECK_THROWS_AS(validate({"", "p", "x"}), Error);
    CHECK_THROWS_AS(validate({"pan", "One feature of pan is", ""}), Error);
}

TEST_CASE("teacher forcing inserts one seam space") {
    auto m = model();
    const auto& tok = m.tokenizer();
    auto a = teacher_forced(tok, "The pan is", "nonstick");
    CHECK(tok.decode(a.tokens) == "The pan is nonstick");
    CHECK(a.target_start == tok.encode("The pan is").size());
    CHECK(tok.decode(teacher_forced(tok, "The pan is ", "nonstick").tokens) == "The pan is nonstick");
    CHECK(tok.decode(teacher_forced(tok, "The pan is", " nonstick").tokens) == "The pan is nonstick");
    CHECK_THROWS_AS(teacher_forced(tok, "The pan is", "  "), MetricError);
    CHECK_THROWS_AS(teacher_forced(tok, "", "x"), MetricError);
}

TEST_CASE("context prefixes are seeded word salad") {
    auto m = model();
    auto a = context_prefixes(m, 4, 7);
    CHECK(a.size() == 4);
    CHECK(a == context_prefixes(m, 4, 7));
    CHECK(a != context_prefixes(m, 4, 8));
    for (const auto& p : a) {
        CHECK(p.size() > 2);
        CHECK(p.substr(p.size() - 2) == ". ");
    }
    CHECK(context_prefixes(m, 0, 1).empty());
}

TEST_CASE("subject key is the mean key at the subject's last token") {
    auto m = model();
    const auto r = request();
    const auto tokens = m.tokenizer().encode(r.prompt);
    const auto pos = m.tokenizer().subject_last_token(r.prompt, r.subject);
    const Vector bare = m.trace(tokens, 2).keys.row(static_cast<Eigen::Index>(pos)).transpose();
    CHECK((compute_subject_key(m, 2, r.prompt, r.subject, 0, 0) - bare).norm() < 1e-12);

    const std::vector<std::string> prefixes = {"Tent rain. ", "Bass sound. "};
    Vector sum = bare;
    for (const auto& p : prefixes) {
        const std::string full = p + r.prompt;
        const auto t = m.tokenizer().encode(full);
        // The subject occurrence after the prefix, located by byte offset.
        const auto spans = m.tokenizer().spans(full);
        const std::size_t end = p.size() + r.prompt.find(r.subject) + r.subject.size();
        std::size_t k = 0;
        while (spans[k].second < end) ++k;
        sum += m.trace(t, 2).keys.row(static_cast<Eigen::Index>(k)).transpose();
    }
    const Vector mean = sum / 3.0;
    CHECK((compute_subject_key(m, 2, r.prompt, r.subject, prefixes) - mean).norm() < 1e-10);
}

TEST_CASE("value optimisation: monotone accepted losses inside the clamp ball") {
    auto m = model();
    OptimizerConfig opt;
    opt.steps = 30;
    opt.clamp_factor = 2.0;
    auto r = request();
    auto v = optimize_value(m, 2, r.prompt, r.subject, r.target, opt);
    REQUIRE(!v.accepted_losses.empty());
    for (std::size_t i = 1; i < v.accepted_losses.size(); ++i) CHECK(v.accepted_losses[i] < v.accepted_losses[i - 1]);
    CHECK(v.final_loss == v.accepted_losses.back());
    CHECK(v.final_loss < v.initial_loss);
    CHECK((v.value - v.original).norm() <= 2.0 * v.original.norm() * (1 + 1e-12));
    const auto tf = teacher_forced(m.tokenizer(), r.prompt, r.target);
    CHECK(value_loss_gradient(m, 2, tf, v.position, v.value).first == doctest::Approx(v.final_loss).epsilon(1e-12));

    opt.steps = 0;
    auto z = optimize_value(m, 2, r.prompt, r.subject, r.target, opt);
    CHECK(z.value == z.original);
    CHECK(z.accepted_losses.size() == 1);
}

TEST_CASE("rank-one update hits the value and leaves C^-1 k orthogonal directions untouched") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> nd;
    const int d = 5, m = 8;
    Matrix w(d, m), keys(40, m);
    for (int i = 0; i < w.size(); ++i) w.data()[i] = nd(rng);
    for (int i = 0; i < keys.size(); ++i) keys.data()[i] = nd(rng);
    const Matrix c = second_moment(keys);
    Vector k(m), v(d);
    for (int i = 0; i < m; ++i) k[i] = nd(rng);
    for (int i = 0; i < d; ++i) v[i] = nd(rng);
    const double lambda = 0.1;
    const Matrix w2 = rank_one_update(w, c, lambda, k, v);
    CHECK((w2 * k - v).norm() / v.norm() < 1e-12);
    CHECK(numerical_rank(w2 - w) == 1);
    const Matrix a = c + lambda * Matrix::Identity(m, m);
    const Vector u = a.ldlt().solve(k);
    Vector x(m);
    for (int i = 0; i < m; ++i) x[i] = nd(rng);
    x -= (x.dot(u) / u.dot(u)) * u;  // x orthogonal to C^-1 k
    CHECK(((w2 - w) * x).norm() < 1e-10);
}

TEST_CASE("singular covariance without damping is reported") {
    Matrix w = Matrix::Ones(2, 3);
    Vector k = Vector::Ones(3), v = Vector::Ones(2);
    CHECK_THROWS_AS(rank_one_update(w, Matrix::Zero(3, 3), 0.0, k, v), ConditioningError);
}

TEST_CASE("ROME edits one layer exactly") {
    auto m = model();
    const auto cfg = resolve(quick(), m);
    auto covs = cov(m, cfg.layer);
    auto e = rome_edit(m, request(), covs, cfg);
    REQUIRE(e.delta.entries.size() == 1);
    const auto& d = e.delta.entries[0];
    CHECK(d.layer == 2);
    CHECK((d.replacement * e.key - e.value).norm() / e.value.norm() < 1e-8);
    CHECK(numerical_rank(d.replacement - d.original) == 1);
    CHECK(e.delta.state == DeltaState::pending);
    CHECK((d.original - m.down_proj(2)).norm() == 0.0);
    CHECK_THROWS_AS(rome_edit(m, request(), cov(m, 1), cfg), ConfigError);
}

TEST_CASE("MEMIT leaves the model untouched and spreads one edit over its layers") {
    auto m = model();
    const auto before = weights_checksum(m);
    auto cfg = resolve(quick(), m);
    std::vector<CovStats> covs;
    for (int l : cfg.layers) covs.push_back(cov(m, l));
    const auto r = request();
    auto d = memit_update(m, std::span<const EditRequest>(&r, 1), covs, cfg);
    CHECK(weights_checksum(m) == before);
    REQUIRE(d.entries.size() == cfg.layers.size());
    for (std::size_t i = 0; i < d.entries.size(); ++i) {
        CHECK(d.entries[i].layer == cfg.layers[i]);
        CHECK(numerical_rank(d.entries[i].replacement - d.entries[i].original) == 1);
    }
    const double before_nll = target_nll(m, r.prompt, r.target);
    {
        ScopedDelta s(m, d);
        CHECK(target_nll(m, r.prompt, r.target) < before_nll);
    }
    CHECK(weights_checksum(m) == before);

    auto none = memit_update(m, std::span<const EditRequest>(), covs, cfg);
    CHECK(none.is_zero());
    CHECK_THROWS_AS(memit_update(m, std::span<const EditRequest>(&r, 1), std::span<const CovStats>(covs.data(), 1), cfg),
                    ConfigError);
}

TEST_CASE("MEMIT with two requests") {
    auto m = model();
    auto cfg = resolve(quick(), m);
    std::vector<CovStats> covs;
    for (int l : cfg.layers) covs.push_back(cov(m, l));
    const std::vector<EditRequest> rs = {request(), {"tent", "One feature of tent is", "bass"}};
    auto d = memit_update(m, rs, covs, cfg);
    for (const auto& e : d.entries) CHECK(numerical_rank(e.replacement - e.original) <= 2);
    ScopedDelta s(m, d);
    CHECK(target_nll(m, rs[1].prompt, rs[1].target) < target_nll(m, rs[1].prompt, "bass bass bass"));
}

TEST_CASE("fine-tuning touches one layer and lowers the target loss") {
    auto m = model();
    const auto before = weights_checksum(m);
    auto cfg = resolve(quick(), m);
    const auto r = request();
    const double nll0 = target_nll(m, r.prompt, r.target);
    auto d = ft_update(m, r, cfg);
    CHECK(weights_checksum(m) == before);
    REQUIRE(d.entries.size() == 1);
    CHECK(d.entries[0].layer == cfg.layer);
    ScopedDelta s(m, d);
    CHECK(target_nll(m, r.prompt, r.target) < nll0);
}

TEST_CASE("LoRA deltas have at most the adapter rank") {
    auto m = model();
    auto cfg = resolve(quick(), m);
    cfg.lora.rank = 2;
    const auto r = request();
    const double nll0 = target_nll(m, r.prompt, r.target);
    auto d = lora_update(m, r, cfg);
    REQUIRE(d.entries.size() == 1);
    CHECK(numerical_rank(d.entries[0].replacement - d.entries[0].original) <= 2);
    {
        ScopedDelta s(m, d);
        CHECK(target_nll(m, r.prompt, r.target) < nll0);
    }
    auto again = lora_update(m, r, cfg);
    CHECK((again.entries[0].replacement - d.entries[0].replacement).norm() == 0.0);
    cfg.lora.rank = 0;
    CHECK_THROWS_AS(lora_update(m, r, cfg), ConfigError);
}

TEST_CASE("weight gradient for fine-tuning matches finite differences") {
    auto m = model();
    const auto r = request();
    const auto tf = teacher_forced(m.tokenizer(), r.prompt, r.target);
    auto [loss, g] = weight_loss_gradient(m, 1, tf);
    const Matrix w = m.down_proj(1);
    std::mt19937_64 rng(2);
    for (int k = 0; k < 8; ++k) {
        const auto i = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(w.size()));
        const double h = 1e-5;
        Matrix p = w, q = w;
        p.data()[i] += h;
        q.data()[i] -= h;
        m.set_down_proj(1, p);
        const double lp = weight_loss_gradient(m, 1, tf).first;
        m.set_down_proj(1, q);
        const double lq = weight_loss_gradient(m, 1, tf).first;
        m.set_down_proj(1, w);
        const double num = (lp - lq) / (2 * h);
        CHECK(std::abs(num - g.data()[i]) <= 1e-5 * std::max({std::abs(num), std::abs(g.data()[i]), 1e-6}));
    }
    CHECK(loss == doctest::Approx(target_nll(m, r.prompt, r.target)));
}

TEST_CASE("delta state machine") {
    auto m = model();
    const auto before = weights_checksum(m);
    auto cfg = resolve(quick(), m);
    auto d = rome_update(m, request(), cov(m, cfg.layer), cfg);
    CHECK_THROWS_AS(revert_delta(m, d), DeltaStateError);
    apply_delta(m, d);
    CHECK(d.state == DeltaState::applied);
    CHECK(weights_checksum(m) != before);
    CHECK_THROWS_AS(apply_delta(m, d), DeltaStateError);
    revert_delta(m, d);
    CHECK(d.state == DeltaState::reverted);
    CHECK(weights_checksum(m) == before);
    apply_delta(m, d);  // a reverted delta may be re-applied
    revert_delta(m, d);

    auto stale = rome_update(m, request(), cov(m, cfg.layer), cfg);
    Matrix w = m.down_proj(cfg.layer);
    w(0, 0) += 1.0;
    m.set_down_proj(cfg.layer, w);
    CHECK_THROWS_AS(apply_delta(m, stale), DeltaStateError);
}

TEST_CASE("scoped delta restores weights when evaluation throws") {
    auto m = model();
    const auto before = weights_checksum(m);
    auto cfg = resolve(quick(), m);
    auto d = rome_update(m, request(), cov(m, cfg.layer), cfg);
    try {
        ScopedDelta s(m, d);
        throw std::runtime_error("evaluation failed");
    } catch (const std::runtime_error&) {
    }
    CHECK(weights_checksum(m) == before);
    CHECK(d.state == DeltaState::reverted);
}

TEST_CASE("layer resolution") {
    auto m4 = model(4);
    auto c = resolve({}, m4);
    CHECK(c.layer == 2);
    CHECK(c.layers == std::vector<int>{1, 2});
    auto m6 = model(6);
    CHECK(resolve({}, m6).layers == std::vector<int>{2, 3});
    EditConfig bad;
    bad.layer = 4;
    CHECK_THROWS_AS(resolve(bad, m4), ConfigError);
    EditConfig dup;
    dup.layers = {2, 1, 2};
    CHECK(resolve(dup, m4).layers == std::vector<int>{1, 2});
}

TEST_CASE("edit config JSON round-trips") {
    EditConfig c;
    c.layer = 1;
    c.layers = {0, 1};
    c.n_prefixes = 2;
    c.optimizer.steps = 7;
    c.optimizer.clamp_factor = 3.0;
    c.train.learning_rate = 0.5;
    c.lora.rank = 3;
    c.seed = 9;
    auto back = edit_config_from_json(to_json(c));
    CHECK(back.layer == 1);
    CHECK(back.layers == c.layers);
    CHECK(back.n_prefixes == 2);
    CHECK(back.optimizer.steps == 7);
    CHECK(back.optimizer.clamp_factor == 3.0);
    CHECK(back.train.learning_rate == 0.5);
    CHECK(back.lora.rank == 3);
    CHECK(back.seed == 9);
    CHECK(edit_config_from_json(nlohmann::json::object()).optimizer.steps == 25);
}

TEST_CASE("singular values and numerical rank") {
    Matrix a = Matrix::Zero(3, 3);
    a(0, 0) = 3;
    a(1, 1) = 1e-9;
    a(2, 2) = 2;
    auto s = singular_values(a);
    CHECK(s[0] == doctest::Approx(3));
    CHECK(s[1] == doctest::Approx(2));
    CHECK(numerical_rank(a) == 2);
    CHECK(numerical_rank(Matrix::Zero(2, 2)) == 0);
}
