#include "ecomedit/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include "ecomedit/prompts.hpp"
#include "ecomedit/text.hpp"

namespace ecomedit {

namespace {

constexpr std::string_view kRejudgeReminder = "Please start your answer with yes or no.";

// Opening keyword of a verdict, compared case-insensitively on a word boundary.
bool opens_with_word(std::string_view s, std::string_view word) {
    if (!text::starts_with_ci(s, word)) return false;
    return s.size() == word.size() || !std::isalpha(static_cast<unsigned char>(s[word.size()]));
}

std::string strip_leading_noise(std::string_view s) {
    std::size_t i = 0;
    while (i < s.size() && (std::isspace(static_cast<unsigned char>(s[i])) || s[i] == '\'' || s[i] == '"' ||
                            s[i] == '*' || s[i] == '`'))
        ++i;
    return std::string(s.substr(i));
}

std::string without_trailing_period(std::string s) {
    s = text::trim(s);
    while (!s.empty() && s.back() == '.') s.pop_back();
    return s;
}

bool same_text(std::string_view a, std::string_view b) {
    return text::to_lower(text::collapse_whitespace(a)) == text::to_lower(text::collapse_whitespace(b));
}

}  // namespace

std::string_view claim_kind_name(ClaimKind k) { return k == ClaimKind::feature ? "feature" : "intention"; }

ClaimKind parse_claim_kind(std::string_view s) {
    if (s == "feature") return ClaimKind::feature;
    if (s == "intention") return ClaimKind::intention;
    throw ParseError("unknown claim kind: " + std::string(s));
}

GeneratedFeatures parse_feature_completion(const std::string& completion, const ProductRecord& product,
                                           const std::string& source_model) {
    GeneratedFeatures out;
    std::vector<std::string> items;
    for (const auto& line : text::split_lines(completion)) {
        std::string item = text::trim(text::strip_list_marker(line));
        if (item.empty() || !text::has_word(item)) continue;
        items.push_back(std::move(item));
    }
    if (items.empty()) {
        out.warnings.push_back("no parseable feature in completion for " + product.product_id);
        return out;
    }
    if (items.size() > kMaxFeatureClaims) {
        out.warnings.push_back("discarded " + std::to_string(items.size() - kMaxFeatureClaims) +
                               " surplus feature line(s) for " + product.product_id);
        items.resize(kMaxFeatureClaims);
    }
    for (std::size_t i = 0; i < items.size(); ++i) {
        Claim c;
        c.claim_id = product.product_id + "/" + source_model + "/f" + std::to_string(i);
        c.product_id = product.product_id;
        c.kind = ClaimKind::feature;
        c.text = std::move(items[i]);
        c.source_model = source_model;
        out.claims.push_back(std::move(c));
    }
    return out;
}

GeneratedFeatures generate_features(const ProductRecord& product, Backend& student) {
    auto prompt = render_prompt(TemplateId::student_feature, {{"name", product.title}});
    auto resp = student.complete(student.request(std::move(prompt)));
    return parse_feature_completion(resp.text, product, student.config().model_id);
}

Claim parse_intention_completion(const std::string& completion, const ProductRecord& product,
                                 const std::string& source_model) {
    std::string normalized = text::collapse_whitespace(completion);
    if (normalized.empty())
        throw ParseError("empty intention completion for " + product.product_id + " from " + source_model);
    Claim c;
    c.claim_id = product.product_id + "/" + source_model + "/i";
    c.product_id = product.product_id;
    c.kind = ClaimKind::intention;
    c.prefix_compliant = normalized.rfind(kIntentionPrefix, 0) == 0;
    c.text = std::move(normalized);
    c.source_model = source_model;
    return c;
}

Claim generate_intention(const ProductRecord& product, Backend& student) {
    auto prompt = render_prompt(TemplateId::student_intention, {{"name", product.title}});
    auto resp = student.complete(student.request(std::move(prompt)));
    return parse_intention_completion(resp.text, product, student.config().model_id);
}

Verdict parse_verdict(const std::string& completion, const std::string& claim_id, const std::string& judge_model) {
    const std::string body = strip_leading_noise(text::trim(completion));
    Verdict v;
    v.claim_id = claim_id;
    v.judge_model = judge_model;
    if (opens_with_word(body, "yes")) {
        v.is_correct = true;
        return v;
    }
    if (!opens_with_word(body, "no"))
        throw VerdictParseError("verdict for " + claim_id + " opens with neither yes nor no: '" +
                                text::trim(completion).substr(0, 60) + "'");

    std::string_view rest(body);
    rest.remove_prefix(2);
    while (!rest.empty() && (std::isspace(static_cast<unsigned char>(rest.front())) ||
                             std::string_view(".,:;!-'\"*").find(rest.front()) != std::string_view::npos))
        rest.remove_prefix(1);

    static constexpr std::string_view kMarkers[] = {
        "corrected product detail:", "corrected features:", "corrected feature:", "corrected intention:",
        "corrected:", "correction:",
    };
    const std::string lower = text::to_lower(rest);
    std::size_t best = std::string::npos, best_len = 0;
    for (auto m : kMarkers) {
        auto pos = lower.find(m);
        if (pos != std::string::npos && (pos < best || (pos == best && m.size() > best_len))) {
            best = pos;
            best_len = m.size();
        }
    }
    if (best == std::string::npos) {
        v.explanation = text::trim(rest);
    } else {
        v.explanation = text::trim(rest.substr(0, best));
        auto suggestion = text::trim(rest.substr(best + best_len));
        if (!suggestion.empty()) v.suggested_correction = std::move(suggestion);
    }
    return v;
}

std::string judge_prompt(const Claim& claim, const ProductRecord& product) {
    if (claim.kind == ClaimKind::feature)
        return render_prompt(TemplateId::judge_feature, {{"name", product.title}, {"feature", claim.text}});
    return render_prompt(TemplateId::judge_intention,
                         {{"name", product.title}, {"detail_key", "intention of buying"}, {"detail_value", claim.text}});
}

Verdict judge_claim(const Claim& claim, const ProductRecord& product, Backend& judge, int attempt) {
    std::string prompt = judge_prompt(claim, product);
    if (attempt > 0) {
        prompt += '\n';
        prompt += kRejudgeReminder;
    }
    auto resp = judge.complete(judge.request(std::move(prompt)));
    return parse_verdict(resp.text, claim.claim_id, judge.config().model_id);
}

std::string association_statement(const std::string& concept_text, const Claim& claim) {
    if (claim.kind == ClaimKind::feature)
        return "A " + concept_text + " has the feature: " + without_trailing_period(claim.text) + ".";
    std::string intention = claim.text;
    constexpr std::string_view lead = "The intention of buying this is ";
    if (text::starts_with_ci(intention, lead)) intention = intention.substr(lead.size());
    return "People buy a " + concept_text + " in order " + without_trailing_period(intention) + ".";
}

ConceptSet conceptualize(const ProductRecord& product, const Claim& claim, Backend& judge, Backend& scorer,
                         double threshold) {
    auto prompt = render_prompt(TemplateId::conceptualize,
                                {{"product", product.title}, {"feature_or_intention", claim.text}});
    auto resp = judge.complete(judge.request(std::move(prompt)));
    ConceptSet out;
    out.claim_id = claim.claim_id;
    for (const auto& line : text::split_lines(resp.text)) {
        if (out.concepts.size() == kMaxConcepts) break;
        std::string item = text::trim(text::strip_list_marker(line));
        if (item.empty() || !text::has_word(item)) continue;
        Concept c;
        c.text = std::move(item);
        c.plausibility = plausibility(association_statement(c.text, claim), scorer);
        c.kept = c.plausibility >= threshold;
        out.concepts.push_back(std::move(c));
    }
    return out;
}

Correction propose_correction(const ProductRecord& product, const Claim& claim, Backend& corrector) {
    const TemplateId tid = claim.kind == ClaimKind::feature ? TemplateId::correct_feature : TemplateId::correct_intention;
    auto prompt = render_prompt(tid, {{"name", product.title}, {"feature_or_intention", claim.text}});
    const bool with_image = product.image_uri.has_value() && corrector.config().supports_image;
    auto resp = corrector.complete(corrector.request(std::move(prompt), with_image ? product.image_uri : std::nullopt));
    Correction c;
    c.claim_id = claim.claim_id;
    c.corrected_text = text::trim(resp.text);
    c.corrector_model = corrector.config().model_id;
    c.used_image = with_image;
    if (c.corrected_text.empty())
        throw DegenerateCorrectionError("empty correction for " + claim.claim_id);
    if (same_text(c.corrected_text, claim.text))
        throw DegenerateCorrectionError("correction for " + claim.claim_id + " repeats the original claim");
    return c;
}

PipelineConfig pipeline_config_from_json(const nlohmann::json& j) {
    PipelineConfig cfg;
    cfg.plausibility_threshold = j.value("plausibility_threshold", cfg.plausibility_threshold);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.concurrency = j.value("concurrency", cfg.concurrency);
    cfg.max_rejudge = j.value("max_rejudge", cfg.max_rejudge);
    if (cfg.plausibility_threshold < 0 || cfg.plausibility_threshold > 1)
        throw ConfigError("plausibility_threshold must lie in [0,1]");
    return cfg;
}

nlohmann::ordered_json to_json(const ManifestEntry& e) {
    return {{"item", e.item}, {"stage", e.stage}, {"message", e.message}, {"fatal", e.fatal}};
}

// ---------------------------------------------------------------------------
// serialization

namespace {
template <class J>
std::optional<std::string> opt_string(const J& j, const char* key) {
    if (j.contains(key) && j[key].is_string()) return j[key].template get<std::string>();
    return std::nullopt;
}
}  // namespace

nlohmann::ordered_json to_json(const Claim& c) {
    return {{"claim_id", c.claim_id},   {"product_id", c.product_id},     {"kind", claim_kind_name(c.kind)},
            {"text", c.text},           {"source_model", c.source_model}, {"prefix_compliant", c.prefix_compliant}};
}

nlohmann::ordered_json to_json(const Verdict& v) {
    nlohmann::ordered_json j{{"claim_id", v.claim_id}, {"is_correct", v.is_correct}};
    j["explanation"] = v.explanation ? nlohmann::ordered_json(*v.explanation) : nlohmann::ordered_json();
    j["suggested_correction"] =
        v.suggested_correction ? nlohmann::ordered_json(*v.suggested_correction) : nlohmann::ordered_json();
    j["judge_model"] = v.judge_model;
    return j;
}

nlohmann::ordered_json to_json(const ConceptSet& c) {
    nlohmann::ordered_json list = nlohmann::ordered_json::array();
    for (const auto& k : c.concepts)
        list.push_back({{"text", k.text}, {"plausibility", k.plausibility}, {"kept", k.kept}});
    return {{"claim_id", c.claim_id}, {"concepts", std::move(list)}};
}

nlohmann::ordered_json to_json(const Correction& c) {
    return {{"claim_id", c.claim_id},
            {"corrected_text", c.corrected_text},
            {"corrector_model", c.corrector_model},
            {"used_image", c.used_image}};
}

nlohmann::ordered_json to_json(const EditCandidate& c) {
    return {{"product", to_json(c.product)},
            {"claim", to_json(c.claim)},
            {"verdict", to_json(c.verdict)},
            {"concepts", to_json(c.concepts)},
            {"correction", to_json(c.correction)}};
}

Claim claim_from_json(const nlohmann::json& j) {
    Claim c;
    c.claim_id = j.at("claim_id").get<std::string>();
    c.product_id = j.at("product_id").get<std::string>();
    c.kind = parse_claim_kind(j.at("kind").get<std::string>());
    c.text = j.at("text").get<std::string>();
    c.source_model = j.at("source_model").get<std::string>();
    c.prefix_compliant = j.value("prefix_compliant", true);
    return c;
}

Verdict verdict_from_json(const nlohmann::json& j) {
    Verdict v;
    v.claim_id = j.at("claim_id").get<std::string>();
    v.is_correct = j.at("is_correct").get<bool>();
    v.explanation = opt_string(j, "explanation");
    v.suggested_correction = opt_string(j, "suggested_correction");
    v.judge_model = j.at("judge_model").get<std::string>();
    return v;
}

ConceptSet concept_set_from_json(const nlohmann::json& j) {
    ConceptSet c;
    c.claim_id = j.at("claim_id").get<std::string>();
    for (const auto& k : j.at("concepts"))
        c.concepts.push_back({k.at("text").get<std::string>(), k.at("plausibility").get<double>(),
                              k.at("kept").get<bool>()});
    return c;
}

Correction correction_from_json(const nlohmann::json& j) {
    return {j.at("claim_id").get<std::string>(), j.at("corrected_text").get<std::string>(),
            j.at("corrector_model").get<std::string>(), j.at("used_image").get<bool>()};
}

EditCandidate candidate_from_json(const nlohmann::json& j) {
    return {product_from_json(j.at("product")), claim_from_json(j.at("claim")), verdict_from_json(j.at("verdict")),
            concept_set_from_json(j.at("concepts")), correction_from_json(j.at("correction"))};
}

// ---------------------------------------------------------------------------
// checkpoint store

CheckpointStore::CheckpointStore(std::filesystem::path path) : path_(std::move(path)) {
    if (!std::filesystem::exists(*path_)) return;
    std::ifstream in(*path_, std::ios::binary);
    std::string line;
    while (std::getline(in, line)) {
        if (text::trim(line).empty()) continue;
        try {
            auto j = nlohmann::json::parse(line);
            records_.insert_or_assign({j.at("item").get<std::string>(), j.at("stage").get<std::string>()},
                                      j.at("payload"));
        } catch (const nlohmann::json::exception&) {
            // A torn final line from an interrupted run; the stage reruns.
        }
    }
}

std::optional<nlohmann::json> CheckpointStore::get(const std::string& item, const std::string& stage) const {
    std::lock_guard lock(mu_);
    auto it = records_.find({item, stage});
    if (it == records_.end()) return std::nullopt;
    return std::optional<nlohmann::json>(std::in_place, it->second);
}

void CheckpointStore::put(const std::string& item, const std::string& stage, const nlohmann::json& payload) {
    std::lock_guard lock(mu_);
    records_.insert_or_assign({item, stage}, payload);
    if (!path_) return;
    if (path_->has_parent_path()) std::filesystem::create_directories(path_->parent_path());
    std::ofstream out(*path_, std::ios::binary | std::ios::app);
    nlohmann::json rec{{"item", item}, {"stage", stage}, {"payload", payload}};
    out << rec.dump() << '\n';
}

// ---------------------------------------------------------------------------
// orchestration

bool PipelineRun::has_fatal() const {
    return std::any_of(manifest.begin(), manifest.end(), [](const ManifestEntry& e) { return e.fatal; });
}

namespace {

// Stage payloads are stored as plain json; the record serializers keep field order.
nlohmann::json plain(const nlohmann::ordered_json& j) { return nlohmann::json::parse(j.dump()); }

struct ItemResult {
    std::vector<Claim> claims;
    std::vector<Verdict> verdicts;
    std::vector<EditCandidate> candidates;
    std::vector<ManifestEntry> manifest;
};

nlohmann::json claims_payload(const std::vector<Claim>& claims, const std::vector<std::string>& warnings) {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& c : claims) list.push_back(plain(to_json(c)));
    return {{"claims", list}, {"warnings", warnings}};
}

ItemResult run_item(const ProductRecord& product, Backend& student, const PipelineBackends& b,
                    const PipelineConfig& cfg, CheckpointStore& store) {
    ItemResult r;
    const std::string item = product.product_id + "|" + student.config().model_id;
    auto note = [&](std::string stage, std::string msg, bool fatal) {
        r.manifest.push_back({item, std::move(stage), std::move(msg), fatal});
    };

    // Stage 1: student generation.
    nlohmann::json gen;
    if (auto cached = store.get(item, "generate")) {
        gen = *cached;
    } else {
        std::vector<Claim> claims;
        std::vector<std::string> warnings;
        try {
            auto features = generate_features(product, student);
            claims = std::move(features.claims);
            warnings = std::move(features.warnings);
            try {
                claims.push_back(generate_intention(product, student));
            } catch (const ParseError& e) {
                warnings.push_back(e.what());
            }
        } catch (const BackendError& e) {
            note("generate", e.what(), true);
            return r;
        }
        gen = claims_payload(claims, warnings);
        store.put(item, "generate", gen);
    }
    for (const auto& c : gen.at("claims")) r.claims.push_back(claim_from_json(c));
    for (const auto& w : gen.at("warnings")) note("generate", w.get<std::string>(), false);
    for (const auto& c : r.claims)
        if (c.kind == ClaimKind::intention && !c.prefix_compliant)
            note("generate", "intention claim " + c.claim_id + " lacks the required prefix", false);

    // Stage 2: judging, with one re-judge on an unparseable verdict.
    nlohmann::json judged;
    if (auto cached = store.get(item, "judge")) {
        judged = *cached;
    } else {
        nlohmann::json verdicts = nlohmann::json::array();
        nlohmann::json dropped = nlohmann::json::array();
        try {
            for (const auto& c : r.claims) {
                std::optional<Verdict> v;
                std::string last_error;
                for (int attempt = 0; attempt <= cfg.max_rejudge && !v; ++attempt) {
                    try {
                        v = judge_claim(c, product, *b.judge, attempt);
                    } catch (const VerdictParseError& e) {
                        last_error = e.what();
                    }
                }
                if (v)
                    verdicts.push_back(plain(to_json(*v)));
                else
                    dropped.push_back(last_error);
            }
        } catch (const BackendError& e) {
            note("judge", e.what(), true);
            return r;
        }
        judged = {{"verdicts", verdicts}, {"dropped", dropped}};
        store.put(item, "judge", judged);
    }
    for (const auto& v : judged.at("verdicts")) r.verdicts.push_back(verdict_from_json(v));
    for (const auto& d : judged.at("dropped")) note("judge", d.get<std::string>(), false);

    // Stage 3: conceptualize, score and correct every rejected claim.
    nlohmann::json enriched;
    if (auto cached = store.get(item, "enrich")) {
        enriched = *cached;
    } else {
        nlohmann::json candidates = nlohmann::json::array();
        nlohmann::json dropped = nlohmann::json::array();
        try {
            for (const auto& v : r.verdicts) {
                if (v.is_correct) continue;
                auto claim_it = std::find_if(r.claims.begin(), r.claims.end(),
                                             [&](const Claim& c) { return c.claim_id == v.claim_id; });
                if (claim_it == r.claims.end()) continue;
                EditCandidate cand;
                cand.product = product;
                cand.claim = *claim_it;
                cand.verdict = v;
                cand.concepts = conceptualize(product, cand.claim, *b.judge, *b.scorer, cfg.plausibility_threshold);
                try {
                    cand.correction = propose_correction(product, cand.claim, *b.corrector);
                } catch (const DegenerateCorrectionError& e) {
                    dropped.push_back(e.what());
                    continue;
                }
                candidates.push_back(plain(to_json(cand)));
            }
        } catch (const BackendError& e) {
            note("enrich", e.what(), true);
            return r;
        }
        enriched = {{"candidates", candidates}, {"dropped", dropped}};
        store.put(item, "enrich", enriched);
    }
    for (const auto& c : enriched.at("candidates")) r.candidates.push_back(candidate_from_json(c));
    for (const auto& d : enriched.at("dropped")) note("enrich", d.get<std::string>(), false);
    return r;
}

}  // namespace

PipelineRun run_stage_pipeline(const std::vector<ProductRecord>& products, const PipelineBackends& backends,
                               const PipelineConfig& cfg) {
    if (!backends.judge || !backends.scorer || !backends.corrector)
        throw ConfigError("pipeline requires judge, scorer and corrector backends");
    for (auto* s : backends.students)
        if (!s) throw ConfigError("null student backend");

    CheckpointStore store = cfg.checkpoint ? CheckpointStore(*cfg.checkpoint) : CheckpointStore();

    const std::size_t n_students = backends.students.size();
    std::vector<ItemResult> results(products.size() * n_students);
    parallel_for(results.size(), cfg.concurrency, [&](std::size_t i) {
        const auto& product = products[i / n_students];
        Backend& student = *backends.students[i % n_students];
        try {
            results[i] = run_item(product, student, backends, cfg, store);
        } catch (const std::exception& e) {
            results[i].manifest.push_back({product.product_id + "|" + student.config().model_id, "item", e.what(), true});
        }
    });

    PipelineRun run;
    for (auto& r : results) {
        std::move(r.claims.begin(), r.claims.end(), std::back_inserter(run.claims));
        std::move(r.verdicts.begin(), r.verdicts.end(), std::back_inserter(run.verdicts));
        std::move(r.candidates.begin(), r.candidates.end(), std::back_inserter(run.candidates));
        std::move(r.manifest.begin(), r.manifest.end(), std::back_inserter(run.manifest));
    }
    return run;
}

}  // namespace ecomedit
