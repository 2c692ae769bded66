#include <doctest.h>

#include <string>
#include <vector>

#include "flood/tokenizer.hpp"

using namespace flood;

TEST_CASE("empty text encodes to exactly the two special tokens") {
    Tokenizer tok = Tokenizer::build_from_texts({"alluvione fiume", "calcio derby"});
    auto enc = tok.encode("", 128);
    REQUIRE(enc.ids.size() == 2);
    CHECK(enc.ids[0] == Tokenizer::kCls);
    CHECK(enc.ids[1] == Tokenizer::kSep);
    CHECK(enc.attention_mask == std::vector<int>{1, 1});
}

TEST_CASE("ids and mask are always parallel") {
    Tokenizer tok = Tokenizer::build_from_texts({"a b c d e f g"});
    for (const char* text : {"", "a", "a b c", "z z z z z z z z z z"}) {
        auto enc = tok.encode(text, 6);
        CHECK(enc.ids.size() == enc.attention_mask.size());
    }
}

TEST_CASE("long input truncates from the right to max_len") {
    Tokenizer tok = Tokenizer::build_from_texts({"parola"});
    std::string huge;
    for (int i = 0; i < 10000; ++i) huge += "parola ";
    auto enc = tok.encode(huge, 16);
    CHECK(enc.ids.size() == 16);
    CHECK(enc.ids.front() == Tokenizer::kCls);
    CHECK(enc.ids.back() == Tokenizer::kSep);
}

TEST_CASE("unknown words map to [UNK], known words to stable ids") {
    Tokenizer tok = Tokenizer::build_from_texts({"fiume argine"});
    auto enc = tok.encode("fiume sconosciutissimo", 16);
    REQUIRE(enc.ids.size() == 4);
    CHECK(enc.ids[1] != Tokenizer::kUnk);
    CHECK(enc.ids[2] == Tokenizer::kUnk);
    // same input, same ids
    CHECK(tok.encode("fiume sconosciutissimo", 16).ids == enc.ids);
}

TEST_CASE("tokenizer is uncased including accented Italian letters") {
    Tokenizer tok = Tokenizer::build_from_texts({"città perché"});
    auto upper = tok.encode("CITTÀ PERCHÉ", 16);
    auto lower = tok.encode("città perché", 16);
    CHECK(upper.ids == lower.ids);
    CHECK(upper.ids[1] != Tokenizer::kUnk);
}

TEST_CASE("punctuation splits into separate tokens") {
    auto words = Tokenizer::word_split("piena, fiume!");
    CHECK(words == std::vector<std::string>{"piena", ",", "fiume", "!"});
}

TEST_CASE("vocab file round trip preserves the mapping") {
    Tokenizer tok = Tokenizer::build_from_texts({"uno due tre quattro"});
    Tokenizer back = Tokenizer::from_vocab_file(tok.to_vocab_file());
    CHECK(back.vocab_size() == tok.vocab_size());
    CHECK(back.encode("uno tre", 8).ids == tok.encode("uno tre", 8).ids);
}

TEST_CASE("vocab file must begin with the special tokens") {
    CHECK_THROWS_AS(Tokenizer::from_vocab_file("[PAD]\nword\n"), DataError);
}
