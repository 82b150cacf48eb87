#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <memory>
#include <sstream>

#include "ecomedit/app.hpp"
#include "ecomedit/error.hpp"
#include "ecomedit/prompts.hpp"
#include "ecomedit/text.hpp"

namespace py = pybind11;
using namespace ecomedit;

namespace {

struct CommandResult {
    int status = 0;
    std::string out, err;
};

template <typename F>
CommandResult run_command(F&& f) {
    std::ostringstream out, err;
    CommandResult r;
    r.status = f(out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

TemplateId template_id(const std::string& name) {
    auto id = parse_template_name(name);
    if (!id) throw py::value_error("unknown template '" + name + "'");
    return *id;
}

EditMethod method_id(const std::string& name) {
    auto m = parse_method(name);
    if (!m) throw py::value_error("unknown method '" + name + "'; expected one of: ft, lora, rome, memit");
    return *m;
}

// A computed delta bound to the model it edits.
class Edit {
public:
    Edit(std::shared_ptr<ToyTransformer> model, WeightDelta delta) : model_(std::move(model)), delta_(std::move(delta)) {}
    void apply() { apply_delta(*model_, delta_); }
    void revert() { revert_delta(*model_, delta_); }
    bool applied() const { return delta_.state == DeltaState::applied; }
    std::string method() const { return std::string(method_name(delta_.method)); }
    std::vector<int> layers() const {
        std::vector<int> out;
        for (const auto& e : delta_.entries) out.push_back(e.layer);
        return out;
    }
    std::vector<int> ranks() const {
        std::vector<int> out;
        for (const auto& e : delta_.entries) out.push_back(numerical_rank(e.replacement - e.original));
        return out;
    }

private:
    std::shared_ptr<ToyTransformer> model_;
    WeightDelta delta_;
};

Edit make_edit(const std::shared_ptr<ToyTransformer>& model, const std::string& method, const std::string& subject,
               const std::string& prompt, const std::string& target, const std::vector<std::string>& covariance_corpus,
               int steps, int n_prefixes, std::size_t covariance_samples) {
    const EditMethod m = method_id(method);
    ExperimentConfig ex;
    ex.edit.n_prefixes = n_prefixes;
    ex.edit.optimizer.steps = steps;
    ex.edit.train.steps = steps;
    for (int l : covariance_layers(m, ex.edit, *model)) {
        if (covariance_corpus.empty()) throw py::value_error(method + " needs a covariance corpus");
        ex.covariances.emplace(l, estimate_covariance(*model, l, covariance_corpus, covariance_samples).stats);
    }
    return Edit(model, compute_delta(*model, m, {subject, prompt, target}, ex));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Benchmark construction, toy-model knowledge editing and evaluation";

    py::register_exception<Error>(m, "EcomeditError", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

    m.def("template_names", [] {
        std::vector<std::string> out;
        for (auto id : all_templates()) out.emplace_back(template_name(id));
        return out;
    });
    m.def("template_text", [](const std::string& name) { return std::string(template_text(template_id(name))); });
    m.def(
        "render_prompt",
        [](const std::string& name, const Bindings& bindings) { return render_prompt(template_id(name), bindings); },
        py::arg("template"), py::arg("bindings"));
    m.def("fnv1a64", [](const std::string& s) { return text::hex64(text::fnv1a64(s)); });
    m.def("edit_prompt", [](const std::string& subject, const std::string& kind) {
        return make_edit_prompt(subject, parse_claim_kind(kind));
    });

    m.def("read_benchmark", [](const std::filesystem::path& p) {
        std::vector<std::string> out;
        for (const auto& s : read_benchmark(p).samples) out.push_back(to_json(s).dump());
        return out;
    }, "Benchmark samples as JSON strings.");
    m.def("stats_table", [](const std::filesystem::path& p) { return render_stats(compute_stats(read_benchmark(p).samples)); });
    m.def("report", [](const std::vector<std::filesystem::path>& files) {
        std::vector<EditOutcome> all;
        for (const auto& f : files) {
            auto load = read_outcomes(f);
            all.insert(all.end(), load.outcomes.begin(), load.outcomes.end());
        }
        return render_report(aggregate(all));
    });

    py::class_<CommandResult>(m, "CommandResult")
        .def_readonly("status", &CommandResult::status)
        .def_readonly("out", &CommandResult::out)
        .def_readonly("err", &CommandResult::err);

    using Overrides = std::vector<std::string>;
    m.def("build_benchmark", [](const std::filesystem::path& config, const Overrides& o) {
        auto cfg = load_run_config(config, o);
        return run_command([&](std::ostream& out, std::ostream& err) { return cmd_build(cfg, out, err); });
    }, py::arg("config"), py::arg("overrides") = Overrides{});
    m.def("init_model", [](const std::filesystem::path& config, const Overrides& o) {
        auto cfg = load_run_config(config, o);
        return run_command([&](std::ostream& out, std::ostream& err) { return cmd_init_model(cfg, std::nullopt, out, err); });
    }, py::arg("config"), py::arg("overrides") = Overrides{});
    m.def("edit_eval", [](const std::filesystem::path& config, const std::string& method, const Overrides& o) {
        auto cfg = load_run_config(config, o);
        const auto mid = method_id(method);
        return run_command([&](std::ostream& out, std::ostream& err) {
            return cmd_edit_eval(cfg, mid, std::nullopt, std::nullopt, out, err);
        });
    }, py::arg("config"), py::arg("method"), py::arg("overrides") = Overrides{});
    m.def("write_report", [](const std::filesystem::path& config, const Overrides& o) {
        auto cfg = load_run_config(config, o);
        return run_command([&](std::ostream& out, std::ostream& err) { return cmd_report(cfg, {}, std::nullopt, out, err); });
    }, py::arg("config"), py::arg("overrides") = Overrides{});

    py::class_<Edit>(m, "Edit")
        .def("apply", &Edit::apply)
        .def("revert", &Edit::revert)
        .def_property_readonly("applied", &Edit::applied)
        .def_property_readonly("method", &Edit::method)
        .def_property_readonly("layers", &Edit::layers)
        .def_property_readonly("ranks", &Edit::ranks);

    py::class_<ToyTransformer, std::shared_ptr<ToyTransformer>>(m, "ToyModel")
        .def(py::init([](const std::vector<std::string>& corpus, std::size_t vocab_words, int hidden_dim, int num_layers,
                         int num_heads, int mlp_dim, int max_positions, std::uint64_t seed) {
                 ToyConfig c;
                 c.hidden_dim = hidden_dim;
                 c.num_layers = num_layers;
                 c.num_heads = num_heads;
                 c.mlp_dim = mlp_dim;
                 c.max_positions = max_positions;
                 c.seed = seed;
                 return std::make_shared<ToyTransformer>(Tokenizer::build(corpus, vocab_words), c);
             }),
             py::arg("corpus"), py::arg("vocab_words") = 512, py::arg("hidden_dim") = 64, py::arg("num_layers") = 4,
             py::arg("num_heads") = 4, py::arg("mlp_dim") = 256, py::arg("max_positions") = 256,
             py::arg("seed") = 1234)
        .def_static("load", [](const std::filesystem::path& p) { return std::make_shared<ToyTransformer>(ToyTransformer::load(p)); })
        .def("save", &ToyTransformer::save)
        .def_property_readonly("num_layers", &ToyTransformer::num_layers)
        .def_property_readonly("hidden_dim", &ToyTransformer::hidden_dim)
        .def_property_readonly("vocab_size", &ToyTransformer::vocab_size)
        .def("encode", [](const ToyTransformer& t, const std::string& s) { return t.tokenizer().encode(s); })
        .def("decode", [](const ToyTransformer& t, const Tokens& ids) { return t.tokenizer().decode(ids); })
        .def("checksum", [](const ToyTransformer& t) { return text::hex64(weights_checksum(t)); })
        .def("greedy", [](const ToyTransformer& t, const std::string& prompt, int n) {
            return t.tokenizer().decode(greedy_continuation(t, t.tokenizer().encode(prompt), n));
        })
        .def("target_token_accuracy",
             [](const ToyTransformer& t, const std::string& p, const std::string& target) {
                 return target_token_accuracy(t, p, target);
             })
        .def("target_nll",
             [](const ToyTransformer& t, const std::string& p, const std::string& target) { return target_nll(t, p, target); })
        .def(
            "edit",
            [](const std::shared_ptr<ToyTransformer>& self, const std::string& method, const std::string& subject,
               const std::string& prompt, const std::string& target, const std::vector<std::string>& corpus, int steps,
               int n_prefixes, std::size_t samples) {
                return make_edit(self, method, subject, prompt, target, corpus, steps, n_prefixes, samples);
            },
            py::arg("method"), py::arg("subject"), py::arg("prompt"), py::arg("target"),
            py::arg("covariance_corpus") = std::vector<std::string>{}, py::arg("steps") = 25,
            py::arg("n_prefixes") = 3, py::arg("covariance_samples") = 2000,
            "Computes a delta without applying it.");
}
