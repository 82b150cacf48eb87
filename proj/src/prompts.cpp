#include "ecomedit/prompts.hpp"

#include <array>

#include "ecomedit/error.hpp"

namespace ecomedit {

namespace {

struct TemplateDef {
    TemplateId id;
    std::string_view name;
    std::string_view text;
};

// Line breaks in the source tables map to '\n'; spaces around them are dropped.
constexpr std::array<TemplateDef, 9> kTemplates = {{
    {TemplateId::student_feature, "student_feature",
     "Consider this product: {name}.\n"
     "What are the features of it?\n"
     "Please ONLY give AT MOST 3 features and start each feature with a new line."},
    {TemplateId::student_intention, "student_intention",
     "A customer buys a product: {name}. What is the intention of buying it?\n"
     "Please be concise and ONLY answer in ONE sentence. Start with 'The intention of buying this is to'."},
    {TemplateId::judge_feature, "judge_feature",
     "Consider this product: {name}.\n"
     "Do you think it has this feature: {feature}?\n"
     "Please first answer yes or no. If it is yes, just return 'yes'. If it is no, please provide a brief "
     "explanation and corrected features.\n"
     "Answer:"},
    {TemplateId::judge_intention, "judge_intention",
     "A customer buys a product: {name}. Consider this product: {name}.\n"
     "Do you think the product's {detail_key} is {detail_value}?\n"
     "Please first answer yes or no. If it is yes, just return 'yes'. If it is no, please provide a brief "
     "explanation and corrected product detail.\n"
     "Answer:"},
    {TemplateId::correct_feature, "correct_feature",
     "Consider this product:\n"
     "{name}\n"
     "Currently, somebody has identified a wrong feature: {feature_or_intention}\n"
     "Please suggest a better, modified, concise, and most importantly, a correct feature."},
    {TemplateId::correct_intention, "correct_intention",
     "Consider this product:\n"
     "{name}\n"
     "Currently, somebody has identified a wrong intention for buying this item: {feature_or_intention}\n"
     "Please suggest a better, modified, and correct intention."},
    {TemplateId::conceptualize, "conceptualize",
     "Please replace this product with another term: {product}.\n"
     "You should not change the meaning of it. You can use a synonym or a general term.\n"
     "It should be the same as the original product, which all of them should not have this "
     "feature/intention: {feature_or_intention}.\n"
     "Please return at most 5 conceptualized products/product categories. They should be reasonable, and "
     "each of them should be separated by a new line."},
    {TemplateId::subject_replace, "subject_replace",
     "Please replace this subject with another term: {product}.\n"
     "You should not change the meaning of it. You can use a synonym or a general term. Please only return "
     "the new subject."},
    {TemplateId::distracting_neighbor, "distracting_neighbor",
     "Consider this product: {product}.\n"
     "Here is a description of the product: {description}.\n"
     "Please construct a sentence using the description based on the following template: The [ATTRIBUTE] "
     "of [PRODUCT] is xxx.\n"
     "Please make sure the attribute is easily inferable from the product name."},
}};

const TemplateDef& def(TemplateId id) { return kTemplates[static_cast<std::size_t>(id)]; }

bool is_ident(char c) { return (c >= 'a' && c <= 'z') || c == '_'; }

}  // namespace

std::string_view template_name(TemplateId id) { return def(id).name; }
std::string_view template_text(TemplateId id) { return def(id).text; }

std::optional<TemplateId> parse_template_name(std::string_view name) {
    for (const auto& t : kTemplates)
        if (t.name == name) return t.id;
    return std::nullopt;
}

const std::vector<TemplateId>& all_templates() {
    static const std::vector<TemplateId> ids = [] {
        std::vector<TemplateId> v;
        for (const auto& t : kTemplates) v.push_back(t.id);
        return v;
    }();
    return ids;
}

std::vector<std::string> template_placeholders(TemplateId id) {
    std::vector<std::string> out;
    auto text = template_text(id);
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] != '{') continue;
        auto close = text.find('}', i);
        if (close == std::string_view::npos) break;
        auto name = text.substr(i + 1, close - i - 1);
        bool ident = !name.empty();
        for (char c : name) ident = ident && is_ident(c);
        if (!ident) continue;
        std::string n(name);
        bool dup = false;
        for (const auto& o : out) dup = dup || o == n;
        if (!dup) out.push_back(std::move(n));
        i = close;
    }
    return out;
}

std::string render_prompt(TemplateId id, const Bindings& bindings) {
    const auto text = template_text(id);
    std::string out;
    out.reserve(text.size() + 64);
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '{') {
            auto close = text.find('}', i);
            if (close != std::string_view::npos) {
                std::string name(text.substr(i + 1, close - i - 1));
                auto it = bindings.find(name);
                if (it == bindings.end())
                    throw TemplateError("template '" + std::string(template_name(id)) +
                                        "' is missing binding {" + name + "}");
                out += it->second;
                i = close;
                continue;
            }
        }
        out.push_back(text[i]);
    }
    return out;
}

}  // namespace ecomedit
