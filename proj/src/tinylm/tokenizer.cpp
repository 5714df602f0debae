#include "edbench/tokenizer.hpp"

#include <cctype>

#include "edbench/errors.hpp"

namespace edbench {

namespace {

constexpr const char* kBosText = "<bos>";
constexpr const char* kUnkText = "<unk>";

bool word_char(unsigned char c) {
    if (c >= 0x80) return true; // keep UTF-8 sequences inside one unit
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
           (c >= '0' && c <= '9') || c == '_' || c == '\'';
}

std::vector<std::string> split_word_punct(std::string_view text) {
    std::vector<std::string> units;
    size_t i = 0;
    const size_t n = text.size();
    while (i < n) {
        const size_t start = i;
        if (text[i] == ' ') {
            if (i + 1 >= n || text[i + 1] == ' ') {
                units.emplace_back(" ");
                ++i;
                continue;
            }
            ++i; // leading space joins the following unit
        }
        if (word_char(static_cast<unsigned char>(text[i]))) {
            while (i < n && word_char(static_cast<unsigned char>(text[i]))) ++i;
        } else {
            ++i; // single punctuation / control character
        }
        units.emplace_back(text.substr(start, i - start));
    }
    return units;
}

std::vector<std::string> split_whitespace(std::string_view text) {
    std::vector<std::string> units;
    size_t i = 0;
    const size_t n = text.size();
    while (i < n) {
        while (i < n && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        const size_t start = i;
        while (i < n && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (i > start) units.emplace_back(text.substr(start, i - start));
    }
    return units;
}

} // namespace

const char* scheme_name(TokenScheme s) {
    return s == TokenScheme::word_punct ? "word_punct" : "whitespace";
}

TokenScheme scheme_from_name(std::string_view name) {
    if (name == "word_punct") return TokenScheme::word_punct;
    if (name == "whitespace") return TokenScheme::whitespace;
    throw FormatError("unknown tokenizer scheme: " + std::string(name));
}

std::vector<std::string> split_units(std::string_view text, TokenScheme scheme) {
    return scheme == TokenScheme::word_punct ? split_word_punct(text)
                                             : split_whitespace(text);
}

Tokenizer Tokenizer::build(const std::vector<std::string>& corpus, TokenScheme scheme) {
    if (corpus.empty()) throw ValidationError("tokenizer corpus is empty");
    std::vector<std::string> vocab{kBosText, kUnkText};
    std::unordered_map<std::string, int> seen{{kBosText, kBos}, {kUnkText, kUnk}};
    for (const auto& text : corpus) {
        for (auto& unit : split_units(text, scheme)) {
            if (seen.emplace(unit, static_cast<int>(vocab.size())).second) {
                vocab.push_back(std::move(unit));
            }
        }
    }
    Tokenizer tok;
    tok.scheme_ = scheme;
    tok.vocab_ = std::move(vocab);
    tok.index_ = std::move(seen);
    return tok;
}

Tokenizer Tokenizer::from_vocab(std::vector<std::string> vocab, TokenScheme scheme) {
    if (vocab.size() < 2 || vocab[0] != kBosText || vocab[1] != kUnkText) {
        throw FormatError("tokenizer vocabulary must start with <bos>, <unk>");
    }
    Tokenizer tok;
    tok.scheme_ = scheme;
    tok.vocab_ = std::move(vocab);
    tok.rebuild_index();
    return tok;
}

void Tokenizer::rebuild_index() {
    index_.clear();
    for (size_t i = 0; i < vocab_.size(); ++i) {
        if (!index_.emplace(vocab_[i], static_cast<int>(i)).second) {
            throw FormatError("duplicate tokenizer vocabulary entry: " + vocab_[i]);
        }
    }
}

std::vector<int> Tokenizer::encode(std::string_view text) const {
    std::vector<int> ids{kBos};
    for (const auto& unit : split_units(text, scheme_)) {
        auto it = index_.find(unit);
        ids.push_back(it == index_.end() ? kUnk : it->second);
    }
    return ids;
}

std::string Tokenizer::decode(std::span<const int> ids) const {
    std::string out;
    bool first = true;
    for (int id : ids) {
        if (id < 0 || id >= vocab_size()) throw ValidationError("token id out of range");
        if (is_special(id)) continue;
        if (scheme_ == TokenScheme::whitespace && !first) out.push_back(' ');
        out += vocab_[static_cast<size_t>(id)];
        first = false;
    }
    return out;
}

int Tokenizer::first_token(std::string_view text) const {
    auto units = split_units(text, scheme_);
    if (units.empty()) throw ValidationError("text has no tokenizable units");
    return unit_id(units[0]) < 0 ? kUnk : unit_id(units[0]);
}

int Tokenizer::unit_id(std::string_view unit) const {
    auto it = index_.find(std::string(unit));
    return it == index_.end() ? -1 : it->second;
}

jsonio::ojson Tokenizer::to_json() const {
    jsonio::ojson j;
    j["scheme"] = scheme_name(scheme_);
    j["vocab"] = vocab_;
    return j;
}

Tokenizer Tokenizer::from_json(const jsonio::ojson& j) {
    if (!j.contains("scheme") || !j.contains("vocab")) {
        throw FormatError("tokenizer JSON missing scheme/vocab");
    }
    return from_vocab(j.at("vocab").get<std::vector<std::string>>(),
                      scheme_from_name(j.at("scheme").get<std::string>()));
}

} // namespace edbench
