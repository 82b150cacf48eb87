#include <algorithm>
#include <cctype>

#include "ecomedit/error.hpp"
#include "ecomedit/model.hpp"

namespace ecomedit {

namespace {
bool word_byte(unsigned char c) { return std::isalnum(c) || c >= 0x80; }
}  // namespace

Tokenizer::Tokenizer(std::vector<std::string> words) : words_(std::move(words)) {
    for (std::size_t i = 0; i < words_.size(); ++i)
        index_.emplace(words_[i], static_cast<TokenId>(256 + i));
}

std::vector<std::string_view> Tokenizer::chunk(std::string_view text) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < text.size()) {
        std::size_t j = i;
        if (text[j] == ' ' && j + 1 < text.size() && word_byte(static_cast<unsigned char>(text[j + 1]))) ++j;
        if (word_byte(static_cast<unsigned char>(text[j]))) {
            while (j < text.size() && word_byte(static_cast<unsigned char>(text[j]))) ++j;
        } else {
            ++j;
        }
        out.push_back(text.substr(i, j - i));
        i = j;
    }
    return out;
}

Tokenizer Tokenizer::build(std::span<const std::string> corpus, std::size_t max_words) {
    std::unordered_map<std::string, std::size_t> counts;
    for (const auto& doc : corpus)
        for (auto c : chunk(doc))
            if (c.size() >= 2) ++counts[std::string(c)];
    std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    if (ranked.size() > max_words) ranked.resize(max_words);
    std::vector<std::string> words;
    words.reserve(ranked.size());
    for (auto& [w, n] : ranked) words.push_back(std::move(w));
    std::sort(words.begin(), words.end());
    return Tokenizer(std::move(words));
}

Tokens Tokenizer::encode(std::string_view text) const {
    Tokens out;
    for (auto c : chunk(text)) {
        if (auto it = index_.find(std::string(c)); it != index_.end()) {
            out.push_back(it->second);
        } else {
            for (unsigned char b : c) out.push_back(static_cast<TokenId>(b));
        }
    }
    return out;
}

std::string Tokenizer::piece(TokenId id) const {
    if (id < 0 || id >= vocab_size()) throw Error("token id out of range: " + std::to_string(id));
    if (id < 256) return std::string(1, static_cast<char>(id));
    return words_[static_cast<std::size_t>(id - 256)];
}

std::string Tokenizer::decode(std::span<const TokenId> tokens) const {
    std::string out;
    for (auto t : tokens) out += piece(t);
    return out;
}

std::vector<std::pair<std::size_t, std::size_t>> Tokenizer::spans(std::string_view text) const {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    std::size_t offset = 0;
    for (auto c : chunk(text)) {
        if (index_.count(std::string(c))) {
            out.emplace_back(offset, offset + c.size());
        } else {
            for (std::size_t k = 0; k < c.size(); ++k) out.emplace_back(offset + k, offset + k + 1);
        }
        offset += c.size();
    }
    return out;
}

std::size_t Tokenizer::subject_last_token(std::string_view prompt, std::string_view subject) const {
    if (subject.empty()) throw AlignmentError("empty subject");
    auto pos = prompt.find(subject);
    if (pos == std::string_view::npos)
        throw AlignmentError("subject '" + std::string(subject) + "' does not occur in prompt '" + std::string(prompt) + "'");
    const std::size_t last_byte = pos + subject.size() - 1;
    auto sp = spans(prompt);
    for (std::size_t i = 0; i < sp.size(); ++i)
        if (sp[i].first <= last_byte && last_byte < sp[i].second) return i;
    throw AlignmentError("subject '" + std::string(subject) + "' could not be aligned to tokens");
}

}  // namespace ecomedit
