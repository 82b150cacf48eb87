#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ecomedit {

enum class TemplateId {
    student_feature,
    student_intention,
    judge_feature,
    judge_intention,
    correct_feature,
    correct_intention,
    conceptualize,
    subject_replace,
    distracting_neighbor,
};

std::string_view template_name(TemplateId id);
std::optional<TemplateId> parse_template_name(std::string_view name);
const std::vector<TemplateId>& all_templates();

// Raw template with {placeholder} slots.
std::string_view template_text(TemplateId id);
std::vector<std::string> template_placeholders(TemplateId id);

using Bindings = std::map<std::string, std::string>;

// Single-pass substitution: braces inside bound values are copied verbatim.
// Throws TemplateError naming the first unbound placeholder.
std::string render_prompt(TemplateId id, const Bindings& bindings);

inline constexpr std::string_view kIntentionPrefix = "The intention of buying this is to";

}  // namespace ecomedit
