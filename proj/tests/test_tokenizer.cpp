#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "edbench/errors.hpp"
#include "edbench/factworld.hpp"
#include "edbench/tokenizer.hpp"

using namespace edbench;

TEST_CASE("whitespace scheme enumerates the documented vocabulary") {
    const auto tok = Tokenizer::build({"a b", "b c"}, TokenScheme::whitespace);
    const std::vector<std::string> want = {"<bos>", "<unk>", "a", "b", "c"};
    CHECK(tok.vocab() == want);
    // deterministic given corpus order
    const auto again = Tokenizer::build({"a b", "b c"}, TokenScheme::whitespace);
    CHECK(again.vocab() == want);
    const auto flipped = Tokenizer::build({"b c", "a b"}, TokenScheme::whitespace);
    CHECK(flipped.vocab() == std::vector<std::string>{"<bos>", "<unk>", "b", "c", "a"});
}

TEST_CASE("empty corpus is rejected") {
    CHECK_THROWS_AS(Tokenizer::build({}), ValidationError);
}

TEST_CASE("word_punct round-trips punctuation, accents and double spaces") {
    const std::vector<std::string> corpus = {
        "The mother tongue of Danielle Darrieux is English.",
        "Fran\xc3\xa7ois Bayrou, a native",
        "Jacques Chaban-Delmas is a native speaker of",
        "Melchior de Vog\xc3\xbc\xc3\xa9, speaker of",
        "double  space and 'quoted' text!",
    };
    const auto tok = Tokenizer::build(corpus);
    for (const auto& text : corpus) {
        const auto ids = tok.encode(text);
        CHECK(ids[0] == Tokenizer::kBos);
        CHECK(tok.decode(ids) == text);
        // encode . decode is stable on the image of encode
        CHECK(tok.encode(tok.decode(ids)) == ids);
    }
}

TEST_CASE("whitespace scheme round-trips canonically spaced text") {
    const auto tok = Tokenizer::build({"a b", "b c"}, TokenScheme::whitespace);
    CHECK(tok.decode(tok.encode("a b c")) == "a b c");
    CHECK(tok.encode(tok.decode(tok.encode("c a"))) == tok.encode("c a"));
}

TEST_CASE("unknown units map to UNK and first_token follows the space convention") {
    const auto tok = Tokenizer::build({"The city of Paris is"});
    const auto ids = tok.encode("The city of Berlin is");
    CHECK(ids[4] == Tokenizer::kUnk);
    CHECK(tok.first_token(" Paris") == tok.unit_id(" Paris"));
    CHECK(tok.first_token(" Berlin") == Tokenizer::kUnk);
    CHECK_THROWS_AS(tok.first_token(""), ValidationError);
}

TEST_CASE("scheme round-trips through JSON") {
    const auto tok = Tokenizer::build({"x y. z!"});
    const auto restored = Tokenizer::from_json(tok.to_json());
    CHECK(restored == tok);
    CHECK(restored.scheme() == TokenScheme::word_punct);
}

TEST_CASE("generated world corpus covers every neighborhood prompt without UNK") {
    const auto world = gen_world(7, {4, 6, 5});
    const auto tok = Tokenizer::build(world.corpus);
    size_t prompts = 0;
    for (const auto& c : world.cases) {
        for (const auto& prompt : c.neighborhood_prompts) {
            for (int id : tok.encode(prompt)) CHECK(id != Tokenizer::kUnk);
            ++prompts;
        }
        // edit sentences and filled templates must encode cleanly too
        for (int id : tok.encode(edit_sentence(c.requested_rewrite))) {
            CHECK(id != Tokenizer::kUnk);
        }
    }
    CHECK(prompts > 0);
}
