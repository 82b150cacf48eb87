#include "ecomedit/text.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>

namespace ecomedit::text {

namespace {
bool is_space(unsigned char c) { return std::isspace(c) != 0; }
}  // namespace

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && is_space(s[b])) ++b;
    while (e > b && is_space(s[e - 1])) --e;
    return std::string(s.substr(b, e - b));
}

std::string collapse_whitespace(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending = false;
    for (unsigned char c : s) {
        if (is_space(c)) {
            pending = !out.empty();
            continue;
        }
        if (pending) out.push_back(' ');
        pending = false;
        out.push_back(static_cast<char>(c));
    }
    return out;
}

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::vector<std::string> split_lines(std::string_view s) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start <= s.size()) {
        auto nl = s.find('\n', start);
        if (nl == std::string_view::npos) {
            lines.emplace_back(s.substr(start));
            break;
        }
        lines.emplace_back(s.substr(start, nl - start));
        start = nl + 1;
    }
    for (auto& l : lines)
        if (!l.empty() && l.back() == '\r') l.pop_back();
    return lines;
}

bool starts_with_ci(std::string_view s, std::string_view prefix) {
    if (s.size() < prefix.size()) return false;
    for (std::size_t i = 0; i < prefix.size(); ++i)
        if (std::tolower(static_cast<unsigned char>(s[i])) !=
            std::tolower(static_cast<unsigned char>(prefix[i])))
            return false;
    return true;
}

bool contains(std::string_view haystack, std::string_view needle) {
    return haystack.find(needle) != std::string_view::npos;
}

std::string strip_list_marker(std::string_view line) {
    std::string s = trim(line);
    std::string_view v = s;
    auto skip_ws = [&] {
        while (!v.empty() && is_space(static_cast<unsigned char>(v.front()))) v.remove_prefix(1);
    };
    if (v.rfind("\xE2\x80\xA2", 0) == 0) {  // bullet
        v.remove_prefix(3);
        skip_ws();
        return std::string(v);
    }
    if (!v.empty() && (v.front() == '-' || v.front() == '*' || v.front() == '+')) {
        v.remove_prefix(1);
        skip_ws();
        return std::string(v);
    }
    if (!v.empty() && v.front() == '[') {
        auto close = v.find(']');
        if (close != std::string_view::npos &&
            std::all_of(v.begin() + 1, v.begin() + static_cast<long>(close), [](unsigned char c) {
                return std::isdigit(c) || std::isspace(c);
            })) {
            auto rest = v.substr(close + 1);
            if (has_word(rest)) {
                v = rest;
                skip_ws();
            }
            return std::string(v);
        }
    }
    std::size_t i = 0;
    while (i < v.size() && std::isdigit(static_cast<unsigned char>(v[i]))) ++i;
    if (i > 0 && i < v.size() && (v[i] == '.' || v[i] == ')' || v[i] == ':')) {
        v.remove_prefix(i + 1);
        skip_ws();
    }
    return std::string(v);
}

bool has_word(std::string_view s) {
    int run = 0;
    for (unsigned char c : s) {
        if (std::isalpha(c)) {
            if (++run >= 2) return true;
        } else {
            run = 0;
        }
    }
    return false;
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string group_thousands(long long v) {
    std::string digits = std::to_string(v < 0 ? -v : v);
    std::string out;
    int n = 0;
    for (auto it = digits.rbegin(); it != digits.rend(); ++it) {
        if (n > 0 && n % 3 == 0) out.push_back(',');
        out.push_back(*it);
        ++n;
    }
    if (v < 0) out.push_back('-');
    return {out.rbegin(), out.rend()};
}

}  // namespace ecomedit::text
