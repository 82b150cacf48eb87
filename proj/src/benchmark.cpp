#include "ecomedit/benchmark.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "ecomedit/prompts.hpp"
#include "ecomedit/text.hpp"

namespace ecomedit {

std::string make_edit_prompt(const std::string& subject, ClaimKind kind) {
    if (kind == ClaimKind::feature) return "One feature of " + subject + " is";
    return "The intention of buying " + subject + " is to";
}

std::string neighbor_description(const ProductRecord& product) {
    if (!text::trim(product.description).empty()) return text::trim(product.description);
    std::string out;
    for (const auto& [k, v] : product.details) {
        if (!out.empty()) out += "; ";
        out += k + ": " + v;
    }
    return out;
}

std::optional<std::string> locality_cloze(const std::string& sentence, const std::string& title) {
    const std::string s = text::trim(text::split_lines(text::trim(sentence)).front());
    if (s.rfind("The ", 0) != 0) return std::nullopt;
    // Prefer an exact match on the product title so titles containing " of "
    // or " is " still split correctly.
    const std::string anchor = " of " + title + " is ";
    std::size_t of_pos, is_pos;
    if (auto p = s.find(anchor); p != std::string::npos && p > 4) {
        of_pos = p;
        is_pos = p + 4 + title.size();
    } else {
        of_pos = s.find(" of ", 4);
        if (of_pos == std::string::npos) return std::nullopt;
        is_pos = s.find(" is ", of_pos + 4);
        if (is_pos == std::string::npos) return std::nullopt;
    }
    const std::string attribute = text::trim(s.substr(4, of_pos - 4));
    const std::string product = text::trim(s.substr(of_pos + 4, is_pos - of_pos - 4));
    std::string value = text::trim(s.substr(is_pos + 4));
    while (!value.empty() && value.back() == '.') value.pop_back();
    if (attribute.empty() || product.empty() || value.empty()) return std::nullopt;
    return "The " + attribute + " of " + product + " is";
}

std::optional<LocalityProbe> build_locality_probe(const ProductRecord& product, Backend& judge,
                                                  std::vector<std::string>* log) {
    const std::string description = neighbor_description(product);
    if (description.empty()) return std::nullopt;
    auto prompt = render_prompt(TemplateId::distracting_neighbor, {{"product", product.title}, {"description", description}});
    auto resp = judge.complete(judge.request(std::move(prompt)));
    if (text::trim(resp.text).empty()) {
        if (log) log->push_back("empty distracting-neighbor answer for " + product.product_id);
        return std::nullopt;
    }
    auto cloze = locality_cloze(resp.text, product.title);
    if (!cloze) {
        if (log) log->push_back("distracting-neighbor answer for " + product.product_id + " does not follow the template");
        return std::nullopt;
    }
    return LocalityProbe{*cloze, {}};
}

std::optional<PortabilityProbe> build_portability_probe(const std::string& subject, const std::string& edit_prompt,
                                                        const std::string& target_new, Backend& judge,
                                                        std::vector<std::string>* log) {
    auto prompt = render_prompt(TemplateId::subject_replace, {{"product", subject}});
    auto resp = judge.complete(judge.request(std::move(prompt)));
    std::string replacement;
    for (const auto& line : text::split_lines(resp.text)) {
        replacement = text::trim(line);
        if (!replacement.empty()) break;
    }
    if (replacement.empty() || replacement == subject) {
        if (log) log->push_back("no usable subject replacement for '" + subject + "'");
        return std::nullopt;
    }
    auto pos = edit_prompt.find(subject);
    if (pos == std::string::npos) return std::nullopt;
    std::string probe_prompt = edit_prompt;
    probe_prompt.replace(pos, subject.size(), replacement);
    return PortabilityProbe{std::move(probe_prompt), std::move(replacement), target_new};
}

AssembleResult assemble_samples(const std::vector<EditCandidate>& candidates, Backend& judge, int concurrency) {
    struct Slot {
        std::vector<EditSample> samples;
        std::vector<ManifestEntry> manifest;
    };
    std::vector<Slot> slots(candidates.size());

    parallel_for(candidates.size(), concurrency, [&](std::size_t ci) {
        const auto& cand = candidates[ci];
        auto& slot = slots[ci];
        std::vector<std::string> log;
        auto note = [&](const std::string& msg, bool fatal) {
            slot.manifest.push_back({cand.claim.claim_id, "probes", msg, fatal});
        };

        std::vector<std::pair<std::string, std::string>> subjects;  // (sample_id, subject)
        subjects.emplace_back(cand.claim.claim_id, cand.product.title);
        std::size_t k = 0;
        for (const auto& c : cand.concepts.concepts) {
            if (c.kept) subjects.emplace_back(cand.claim.claim_id + "#c" + std::to_string(k), c.text);
            ++k;
        }

        std::optional<LocalityProbe> locality;
        try {
            locality = build_locality_probe(cand.product, judge, &log);
        } catch (const BackendError& e) {
            note(e.what(), true);
        }

        for (const auto& [id, subject] : subjects) {
            EditSample s;
            s.sample_id = id;
            s.kind = cand.claim.kind;
            s.category = cand.product.category;
            s.subject = subject;
            s.edit_prompt = make_edit_prompt(subject, s.kind);
            s.target_new = cand.correction.corrected_text;
            s.ground_truth = cand.claim.text;
            s.source_model = cand.claim.source_model;
            if (locality && !text::contains(locality->prompt, s.target_new) &&
                !text::contains(locality->prompt, s.ground_truth))
                s.locality.push_back(*locality);
            try {
                if (auto p = build_portability_probe(subject, s.edit_prompt, s.target_new, judge, &log))
                    s.portability.push_back(std::move(*p));
            } catch (const BackendError& e) {
                note(e.what(), true);
            }
            slot.samples.push_back(std::move(s));
        }
        for (auto& l : log) note(l, false);
    });

    AssembleResult out;
    for (auto& s : slots) {
        std::move(s.samples.begin(), s.samples.end(), std::back_inserter(out.samples));
        std::move(s.manifest.begin(), s.manifest.end(), std::back_inserter(out.manifest));
    }
    return out;
}

nlohmann::ordered_json to_json(const EditSample& s) {
    nlohmann::ordered_json loc = nlohmann::ordered_json::array();
    for (const auto& p : s.locality) loc.push_back({{"prompt", p.prompt}, {"reference_completion", p.reference_completion}});
    nlohmann::ordered_json por = nlohmann::ordered_json::array();
    for (const auto& p : s.portability)
        por.push_back({{"prompt", p.prompt}, {"replaced_subject", p.replaced_subject}, {"target", p.target}});
    nlohmann::ordered_json j;
    j["schema_version"] = kBenchmarkSchemaVersion;
    j["sample_id"] = s.sample_id;
    j["kind"] = claim_kind_name(s.kind);
    j["category"] = category_id(s.category);
    j["subject"] = s.subject;
    j["edit_prompt"] = s.edit_prompt;
    j["target_new"] = s.target_new;
    j["ground_truth"] = s.ground_truth;
    j["source_model"] = s.source_model;
    j["locality"] = std::move(loc);
    j["portability"] = std::move(por);
    return j;
}

EditSample sample_from_json(const nlohmann::json& j) {
    const int version = j.at("schema_version").get<int>();
    if (version != kBenchmarkSchemaVersion)
        throw FormatVersionError("benchmark schema version " + std::to_string(version) + " is not supported (expected " +
                                 std::to_string(kBenchmarkSchemaVersion) + ")");
    EditSample s;
    s.sample_id = j.at("sample_id").get<std::string>();
    s.kind = parse_claim_kind(j.at("kind").get<std::string>());
    auto cat = parse_category(j.at("category").get<std::string>());
    if (!cat) throw ParseError("unknown category in sample " + s.sample_id);
    s.category = *cat;
    s.subject = j.at("subject").get<std::string>();
    s.edit_prompt = j.at("edit_prompt").get<std::string>();
    s.target_new = j.at("target_new").get<std::string>();
    s.ground_truth = j.at("ground_truth").get<std::string>();
    s.source_model = j.at("source_model").get<std::string>();
    for (const auto& p : j.at("locality"))
        s.locality.push_back({p.at("prompt").get<std::string>(), p.at("reference_completion").get<std::string>()});
    for (const auto& p : j.at("portability"))
        s.portability.push_back({p.at("prompt").get<std::string>(), p.at("replaced_subject").get<std::string>(),
                                 p.at("target").get<std::string>()});
    return s;
}

std::string serialize_benchmark(const std::vector<EditSample>& samples) {
    std::string out;
    for (const auto& s : samples) {
        out += to_json(s).dump();
        out += '\n';
    }
    return out;
}

void write_benchmark(const std::vector<EditSample>& samples, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write benchmark: " + path.string());
    out << serialize_benchmark(samples);
}

BenchmarkLoad parse_benchmark(std::string_view contents) {
    BenchmarkLoad out;
    auto lines = text::split_lines(contents);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (text::trim(lines[i]).empty()) continue;
        try {
            out.samples.push_back(sample_from_json(nlohmann::json::parse(lines[i])));
        } catch (const FormatVersionError&) {
            throw;
        } catch (const std::exception& e) {
            out.issues.push_back({i + 1, e.what()});
        }
    }
    return out;
}

BenchmarkLoad read_benchmark(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open benchmark: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_benchmark(ss.str());
}

StatsTable compute_stats(const std::vector<EditSample>& samples) {
    StatsTable t;
    for (std::size_t i = 0; i < kAllCategories.size(); ++i) t.rows[i].category = kAllCategories[i];
    for (const auto& s : samples) {
        auto& row = t.rows[static_cast<std::size_t>(s.category)];
        if (s.kind == ClaimKind::feature) {
            ++row.feature;
            ++t.feature;
        } else {
            ++row.intention;
            ++t.intention;
        }
    }
    return t;
}

std::string render_stats(const StatsTable& t) {
    const int w0 = 28, w = 11;
    std::ostringstream os;
    auto line = [&](std::string_view label, long long f, long long i, long long tot) {
        os << std::left << std::setw(w0) << std::string(label) << std::right << std::setw(w) << text::group_thousands(f)
           << std::setw(w) << text::group_thousands(i) << " |" << std::setw(w) << text::group_thousands(tot) << '\n';
    };
    const std::string rule(w0 + 3 * w + 2, '-');
    os << std::left << std::setw(w0) << "Product Category" << std::right << std::setw(w) << "Feature" << std::setw(w)
       << "Intention" << " |" << std::setw(w) << "Total" << '\n';
    os << rule << '\n';
    for (const auto& r : t.rows) line(category_label(r.category), r.feature, r.intention, r.total());
    os << rule << '\n';
    line("Total", t.feature, t.intention, t.total());
    return os.str();
}

nlohmann::ordered_json stats_to_json(const StatsTable& t) {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& r : t.rows)
        rows.push_back({{"category", category_id(r.category)},
                        {"label", category_label(r.category)},
                        {"feature", r.feature},
                        {"intention", r.intention},
                        {"total", r.total()}});
    return {{"columns", {"Product Category", "Feature", "Intention", "Total"}},
            {"rows", rows},
            {"total", {{"feature", t.feature}, {"intention", t.intention}, {"total", t.total()}}}};
}

}  // namespace ecomedit
