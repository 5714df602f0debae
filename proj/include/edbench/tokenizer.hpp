#pragma once

#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "edbench/jsonio.hpp"

namespace edbench {

// Word-level tokenization schemes.
//
// - word_punct (default): units are words or single punctuation characters,
//   each optionally carrying one leading space. Decoding is plain
//   concatenation, so decode(encode(t)) == t for any text whose units are
//   all in the vocabulary, including accented words, hyphens and commas.
//   Bytes >= 0x80 are treated as word characters so UTF-8 stays intact.
// - whitespace: units are whitespace-separated words; decoding joins with
//   single spaces. Only round-trips canonically spaced text; kept for
//   simple corpora and tests.
enum class TokenScheme { word_punct, whitespace };

const char* scheme_name(TokenScheme s);
TokenScheme scheme_from_name(std::string_view name);

// Splits text into scheme units (no vocabulary involved).
std::vector<std::string> split_units(std::string_view text, TokenScheme scheme);

class Tokenizer {
public:
    static constexpr int kBos = 0;
    static constexpr int kUnk = 1;

    Tokenizer() = default;

    // Vocabulary = {BOS, UNK} + units of the corpus in first-occurrence
    // order. Deterministic given corpus order. Throws on empty corpus.
    static Tokenizer build(const std::vector<std::string>& corpus,
                           TokenScheme scheme = TokenScheme::word_punct);

    static Tokenizer from_vocab(std::vector<std::string> vocab, TokenScheme scheme);

    // Every encoded sequence starts with BOS; unknown units map to UNK.
    std::vector<int> encode(std::string_view text) const;

    // Concatenates (word_punct) or space-joins (whitespace) the units;
    // BOS and UNK decode to nothing. Exact inverse of encode on texts
    // whose units are all known.
    std::string decode(std::span<const int> ids) const;

    // Token id of text's first unit after BOS; kUnk if out of vocabulary.
    // Throws ValidationError if the text has no units at all.
    int first_token(std::string_view text) const;

    int unit_id(std::string_view unit) const; // -1 if absent
    bool is_special(int id) const { return id == kBos || id == kUnk; }

    int vocab_size() const { return static_cast<int>(vocab_.size()); }
    const std::vector<std::string>& vocab() const { return vocab_; }
    TokenScheme scheme() const { return scheme_; }

    jsonio::ojson to_json() const;
    static Tokenizer from_json(const jsonio::ojson& j);

    bool operator==(const Tokenizer& other) const = default;

private:
    void rebuild_index();

    TokenScheme scheme_ = TokenScheme::word_punct;
    std::vector<std::string> vocab_;
    std::unordered_map<std::string, int> index_;
};

} // namespace edbench
