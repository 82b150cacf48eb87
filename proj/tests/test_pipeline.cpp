#include <doctest.h>

#include "ecomedit/error.hpp"
#include "ecomedit/pipeline.hpp"
#include "ecomedit/prompts.hpp"
#include "test_util.hpp"

using namespace ecomedit;

namespace {

ProductRecord pan() {
    ProductRecord p;
    p.product_id = "H1";
    p.title = "Vev Vigano Eco Ceramic Nonstick Frying Pan";
    p.category = Category::HomeKitchen;
    p.description = "Eco ceramic nonstick frying pan.";
    return p;
}

BackendConfig cfg(std::string model) {
    BackendConfig c;
    c.model_id = std::move(model);
    return c;
}

bool has(const std::string& s, std::string_view needle) { return s.find(needle) != std::string::npos; }

}  // namespace

TEST_CASE("feature completions: numbering, bullets and surplus lines") {
    auto g = parse_feature_completion("1. Nonstick coating\n2) Even heating\n\n- Oven safe\n* Extra line", pan(), "s");
    REQUIRE(g.claims.size() == 3);
    CHECK(g.claims[0].text == "Nonstick coating");
    CHECK(g.claims[1].text == "Even heating");
    CHECK(g.claims[2].text == "Oven safe");
    CHECK(g.claims[0].claim_id == "H1/s/f0");
    REQUIRE(g.warnings.size() == 1);
    CHECK(has(g.warnings[0], "surplus"));
}

TEST_CASE("pure numbering noise yields no claims and a warning") {
    auto g = parse_feature_completion("[ 1 ]  [ 3 ]  [ 5 ]  [ 7 ]  [ 9 ]  [ 11 ]", pan(), "s");
    CHECK(g.claims.empty());
    CHECK(g.warnings.size() == 1);
    CHECK(parse_feature_completion("", pan(), "s").claims.empty());
}

TEST_CASE("intention completions keep text and flag a missing prefix") {
    auto c = parse_intention_completion("  The intention of buying this is to   cook eggs.\n", pan(), "s");
    CHECK(c.text == "The intention of buying this is to cook eggs.");
    CHECK(c.prefix_compliant);
    CHECK(c.kind == ClaimKind::intention);
    auto d = parse_intention_completion("People cook eggs with it.", pan(), "s");
    CHECK_FALSE(d.prefix_compliant);
    CHECK_THROWS_AS(parse_intention_completion(" \n", pan(), "s"), ParseError);
}

TEST_CASE("verdicts") {
    auto yes = parse_verdict("Yes", "c", "j");
    CHECK(yes.is_correct);
    CHECK_FALSE(yes.explanation.has_value());
    CHECK(parse_verdict("**yes**, it does.", "c", "j").is_correct);
    auto no = parse_verdict("No. The pan is aluminum. Corrected feature: Ceramic coating", "c", "j");
    CHECK_FALSE(no.is_correct);
    CHECK(no.explanation == "The pan is aluminum.");
    CHECK(no.suggested_correction == "Ceramic coating");
    auto bare = parse_verdict("no, that is wrong", "c", "j");
    CHECK(bare.explanation == "that is wrong");
    CHECK_FALSE(bare.suggested_correction.has_value());
    CHECK_THROWS_AS(parse_verdict("Maybe.", "c", "j"), VerdictParseError);
    CHECK_THROWS_AS(parse_verdict("Nothing to add", "c", "j"), VerdictParseError);
    CHECK_THROWS_AS(parse_verdict("yesterday it was", "c", "j"), VerdictParseError);
}

TEST_CASE("judge prompts bind claim text into the right template") {
    Claim f{"c", "H1", ClaimKind::feature, "Oven safe", "s", true};
    CHECK(judge_prompt(f, pan()) == render_prompt(TemplateId::judge_feature, {{"name", pan().title}, {"feature", "Oven safe"}}));
    Claim i{"c", "H1", ClaimKind::intention, "The intention of buying this is to cook.", "s", true};
    CHECK(has(judge_prompt(i, pan()), "Do you think the product's intention of buying is The intention of buying this is to cook.?"));
}

TEST_CASE("re-judge sends a distinct request") {
    std::vector<std::string> prompts;
    FunctionBackend judge(cfg("j"), [&](const GenRequest& r) {
        prompts.push_back(r.prompt);
        return std::string("yes");
    });
    Claim f{"c", "H1", ClaimKind::feature, "Oven safe", "s", true};
    judge_claim(f, pan(), judge, 0);
    judge_claim(f, pan(), judge, 1);
    REQUIRE(prompts.size() == 2);
    CHECK(prompts[0] != prompts[1]);
    CHECK(prompts[1].rfind(prompts[0], 0) == 0);
}

TEST_CASE("association statements") {
    Claim f{"c", "H1", ClaimKind::feature, "Adjustable Height.", "s", true};
    CHECK(association_statement("White Wood Chairs", f) == "A White Wood Chairs has the feature: Adjustable Height.");
    Claim i{"c", "H1", ClaimKind::intention, "The intention of buying this is to seat adults.", "s", true};
    CHECK(association_statement("Kids Chairs", i) == "People buy a Kids Chairs in order to seat adults.");
}

TEST_CASE("conceptualize keeps at most five concepts and thresholds inclusively") {
    FunctionBackend judge(cfg("j"), [](const GenRequest&) {
        return std::string("1. Alpha\n2. Beta\n\n3. Gamma\n4. Delta\n5. Epsilon\n6. Zeta\n");
    });
    FunctionBackend scorer(cfg("sc"), [](const GenRequest& r) {
        if (has(r.prompt, "Alpha")) return std::string("0.5");
        if (has(r.prompt, "Beta")) return std::string("0.49");
        return std::string("0.9");
    });
    Claim f{"c", "H1", ClaimKind::feature, "Oven safe", "s", true};
    auto set = conceptualize(pan(), f, judge, scorer, 0.5);
    REQUIRE(set.concepts.size() == 5);
    CHECK(set.concepts[0].kept);
    CHECK_FALSE(set.concepts[1].kept);
    CHECK(set.concepts[4].text == "Epsilon");
}

TEST_CASE("degenerate corrections are rejected") {
    Claim f{"c", "H1", ClaimKind::feature, "Stainless steel body", "s", true};
    FunctionBackend echo(cfg("cor"), [](const GenRequest&) { return std::string("  stainless   STEEL body "); });
    CHECK_THROWS_AS(propose_correction(pan(), f, echo), DegenerateCorrectionError);
    FunctionBackend empty(cfg("cor"), [](const GenRequest&) { return std::string("\n"); });
    CHECK_THROWS_AS(propose_correction(pan(), f, empty), DegenerateCorrectionError);
    FunctionBackend good(cfg("cor"), [](const GenRequest&) { return std::string("Ceramic nonstick coating\n"); });
    auto c = propose_correction(pan(), f, good);
    CHECK(c.corrected_text == "Ceramic nonstick coating");
    CHECK_FALSE(c.used_image);
}

TEST_CASE("image is attached only when the corrector supports it") {
    ProductRecord p = pan();
    p.image_uri = "img/h1.jpg";
    Claim f{"c", "H1", ClaimKind::feature, "Steel", "s", true};
    std::optional<std::string> seen;
    auto fn = [&](const GenRequest& r) {
        seen = r.image_uri;
        return std::string("Ceramic");
    };
    FunctionBackend text_only(cfg("cor"), fn);
    CHECK_FALSE(propose_correction(p, f, text_only).used_image);
    CHECK_FALSE(seen.has_value());
    BackendConfig vc = cfg("cor");
    vc.supports_image = true;
    FunctionBackend vision(vc, fn);
    CHECK(propose_correction(p, f, vision).used_image);
    CHECK(seen == "img/h1.jpg");
}

namespace {

struct Scripted {
    int student_calls = 0, judge_calls = 0, scorer_calls = 0, corrector_calls = 0;
    std::unique_ptr<FunctionBackend> student, judge, scorer, corrector;
    Scripted() {
        student = std::make_unique<FunctionBackend>(cfg("stu"), [this](const GenRequest& r) {
            ++student_calls;
            if (has(r.prompt, "intention")) return std::string("The intention of buying this is to bake bread.");
            return std::string("- Nonstick coating\n- Stainless steel body\n");
        });
        judge = std::make_unique<FunctionBackend>(cfg("jud"), [this](const GenRequest& r) {
            ++judge_calls;
            if (has(r.prompt, "another term")) return std::string("Ceramic Pan\nEco Skillet");
            if (has(r.prompt, "Stainless")) return std::string("No. Corrected feature: Ceramic coating");
            if (has(r.prompt, "bake bread")) {
                if (has(r.prompt, "Please start your answer")) return std::string("no, it is a frying pan");
                return std::string("Hmm.");
            }
            return std::string("yes");
        });
        scorer = std::make_unique<FunctionBackend>(cfg("sco"), [this](const GenRequest& r) {
            ++scorer_calls;
            return std::string(has(r.prompt, "Ceramic Pan") ? "0.8" : "0.2");
        });
        corrector = std::make_unique<FunctionBackend>(cfg("cor"), [this](const GenRequest&) {
            ++corrector_calls;
            return std::string("Fry eggs with little oil");
        });
    }
    PipelineBackends backends() { return {{student.get()}, judge.get(), scorer.get(), corrector.get()}; }
};

}  // namespace

TEST_CASE("stage pipeline: only rejected claims become candidates") {
    Scripted s;
    PipelineConfig pc;
    auto run = run_stage_pipeline({pan()}, s.backends(), pc);
    CHECK(run.claims.size() == 3);
    CHECK(run.verdicts.size() == 3);
    REQUIRE(run.candidates.size() == 2);
    for (const auto& c : run.candidates) CHECK_FALSE(c.verdict.is_correct);
    CHECK(run.candidates[0].claim.text == "Stainless steel body");
    CHECK(run.candidates[0].concepts.concepts.size() == 2);
    CHECK(run.candidates[0].concepts.concepts[0].kept);
    CHECK_FALSE(run.candidates[0].concepts.concepts[1].kept);
    CHECK(run.candidates[1].claim.kind == ClaimKind::intention);
    CHECK_FALSE(run.has_fatal());
}

TEST_CASE("stage pipeline: checkpoints make a rerun call no backend") {
    testutil::TempDir dir;
    PipelineConfig pc;
    pc.checkpoint = dir / "ck.jsonl";
    Scripted first;
    auto a = run_stage_pipeline({pan()}, first.backends(), pc);
    Scripted second;
    auto b = run_stage_pipeline({pan()}, second.backends(), pc);
    CHECK(second.student_calls + second.judge_calls + second.scorer_calls + second.corrector_calls == 0);
    CHECK(a.candidates == b.candidates);
    CHECK(a.verdicts == b.verdicts);
}

TEST_CASE("stage pipeline: a torn checkpoint line only reruns that stage") {
    testutil::TempDir dir;
    PipelineConfig pc;
    pc.checkpoint = dir / "ck.jsonl";
    Scripted first;
    auto a = run_stage_pipeline({pan()}, first.backends(), pc);
    auto contents = testutil::slurp(*pc.checkpoint);
    contents.resize(contents.size() - 20);  // damage the final (enrich) record
    testutil::spit(*pc.checkpoint, contents);
    Scripted second;
    auto b = run_stage_pipeline({pan()}, second.backends(), pc);
    CHECK(second.student_calls == 0);
    CHECK(second.corrector_calls > 0);
    CHECK(a.candidates == b.candidates);
}

TEST_CASE("stage pipeline: backend failure is fatal for the item only") {
    Scripted s;
    ProductRecord other = pan();
    other.product_id = "H2";
    other.title = "Broken Kettle";
    FunctionBackend flaky(cfg("stu"), [&](const GenRequest& r) -> std::string {
        if (has(r.prompt, "Broken Kettle")) throw BackendError(BackendErrorKind::cache_miss, "miss");
        return s.student->complete(r).text;
    });
    PipelineBackends b = s.backends();
    b.students = {&flaky};
    auto run = run_stage_pipeline({pan(), other}, b, {});
    CHECK(run.has_fatal());
    CHECK(run.candidates.size() == 2);
    int fatal = 0;
    for (const auto& m : run.manifest)
        if (m.fatal) {
            ++fatal;
            CHECK(m.item == "H2|stu");
        }
    CHECK(fatal == 1);
}

TEST_CASE("stage pipeline: unparseable verdicts are retried then dropped") {
    Scripted s;
    FunctionBackend stubborn(cfg("jud"), [&](const GenRequest& r) -> std::string {
        if (has(r.prompt, "bake bread")) return "Hmm.";
        return s.judge->complete(r).text;
    });
    PipelineBackends b = s.backends();
    b.judge = &stubborn;
    PipelineConfig pc;
    pc.max_rejudge = 1;
    auto run = run_stage_pipeline({pan()}, b, pc);
    CHECK(run.verdicts.size() == 2);
    CHECK(run.candidates.size() == 1);
    bool dropped = false;
    for (const auto& m : run.manifest) dropped = dropped || (m.stage == "judge" && !m.fatal);
    CHECK(dropped);
}

TEST_CASE("stage pipeline: concurrency does not change the result") {
    std::vector<ProductRecord> products;
    for (int i = 0; i < 12; ++i) {
        ProductRecord p = pan();
        p.product_id = "H" + std::to_string(i);
        p.title = "Pan model " + std::to_string(i);
        products.push_back(p);
    }
    Scripted a, b;
    PipelineConfig serial, parallel;
    parallel.concurrency = 4;
    auto r1 = run_stage_pipeline(products, a.backends(), serial);
    auto r2 = run_stage_pipeline(products, b.backends(), parallel);
    CHECK(r1.candidates == r2.candidates);
    CHECK(r1.claims == r2.claims);
}

TEST_CASE("record JSON round-trips") {
    Scripted s;
    auto run = run_stage_pipeline({pan()}, s.backends(), {});
    for (const auto& c : run.candidates) CHECK(candidate_from_json(nlohmann::json::parse(to_json(c).dump())) == c);
}

TEST_CASE("pipeline config parsing") {
    auto pc = pipeline_config_from_json(nlohmann::json{{"plausibility_threshold", 0.7}, {"concurrency", 3}});
    CHECK(pc.plausibility_threshold == 0.7);
    CHECK(pc.concurrency == 3);
    CHECK(pc.max_rejudge == 1);
    CHECK_THROWS_AS(pipeline_config_from_json(nlohmann::json{{"plausibility_threshold", 1.5}}), ConfigError);
}
