#include <algorithm>

#include <doctest.h>
#include <json.hpp>

#include "synthprod/json_extract.hpp"
#include "synthprod/rng.hpp"
#include "synthprod/text.hpp"

using namespace synthprod;

TEST_SUITE("text") {

TEST_CASE("whitespace helpers") {
    CHECK(text::collapse_whitespace("  a \t b\n\nc  ") == "a b c");
    CHECK(text::trim("\n x \t") == "x");
    CHECK(text::to_lower("MiXeD 12") == "mixed 12");
    CHECK(text::whitespace_token_count(" one two\tthree\n") == 3);
    CHECK(text::whitespace_token_count("") == 0);
}

TEST_CASE("split and join round trip") {
    auto parts = text::split("a|b||c", '|');
    REQUIRE(parts.size() == 4);
    CHECK(parts[2].empty());
    CHECK(text::join(parts, "|") == "a|b||c");
}

TEST_CASE("word-bounded case-insensitive search") {
    CHECK(text::contains_word_ci("Red Shoe", "red"));
    CHECK_FALSE(text::contains_word_ci("Tired shoe", "red"));
    CHECK_FALSE(text::contains_word_ci("redesigned", "red"));
    CHECK(text::contains_word_ci("color: red.", "RED"));
    std::string s = "Red shoe with red laces, not redesigned";
    CHECK(text::replace_word_ci(s, "red", "Blue") == 2);
    CHECK(s == "Blue shoe with Blue laces, not redesigned");
}

TEST_CASE("word tokens keep utf-8 words whole") {
    auto t = text::word_tokens("Caf\xc3\xa9 au-lait, 2x");
    REQUIRE(t.size() == 4);
    CHECK(t[0] == "caf\xc3\xa9");
    CHECK(t[3] == "2x");
}

TEST_CASE("fnv1a64 reference values") {
    // Published FNV-1a 64 test vectors.
    CHECK(text::fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(text::fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(text::fnv1a64("foobar") == 0x85944171f73967e8ULL);
    CHECK(text::hex64(0xabcULL) == "0000000000000abc");
}

TEST_CASE("rng is reproducible and bounded") {
    Rng a(42), b(42);
    for (int i = 0; i < 1000; ++i) {
        double u = a.uniform01();
        CHECK(u == b.uniform01());
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        auto k = a.uniform_index(7);
        CHECK(k == b.uniform_index(7));
        CHECK(k < 7);
    }
    CHECK(mix_seed(1, 2) != mix_seed(1, 3));
    CHECK(mix_seed(1, 2) == mix_seed(1, 2));
}

TEST_CASE("shuffle is a permutation") {
    std::vector<int> v{1, 2, 3, 4, 5, 6, 7, 8};
    Rng rng(3);
    rng.shuffle(v);
    std::vector<int> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == std::vector<int>{1, 2, 3, 4, 5, 6, 7, 8});
}

TEST_CASE("first json object tolerates prose and braces in strings") {
    auto j = first_json_object("Here you go: {\"a\": \"}{\", \"b\": 1} trailing");
    REQUIRE(j.has_value());
    CHECK(nlohmann::json::parse(*j)["a"] == "}{");
    CHECK_FALSE(first_json_object("no object here").has_value());
    CHECK_FALSE(first_json_object("{broken").has_value());
}

}
