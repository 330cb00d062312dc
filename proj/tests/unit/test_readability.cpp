#include "doctest.h"
#include "json.hpp"

#include "litctl/error.hpp"
#include "litctl/readability.hpp"

#include <fstream>
#include <random>

using namespace litctl;

TEST_CASE("count_syllables")
{
    CHECK(count_syllables("cat") == 1);
    CHECK(count_syllables("a") == 1);
    CHECK(count_syllables("misinformation") == 5);
    CHECK(count_syllables("table") == 2);
    CHECK(count_syllables("whole") == 1);
    CHECK(count_syllables("vaccines") == 2);
    CHECK(count_syllables("tested") == 2);
    CHECK(count_syllables("helped") == 1);
    CHECK(count_syllables("safely") == 2);
    CHECK(count_syllables("management") == 3);
    CHECK(count_syllables("yes") == 1);
    CHECK(count_syllables("the") == 1);
    CHECK(count_syllables("CDC") == 1);
    CHECK(count_syllables("Science") == 2); // exception table
    CHECK(count_syllables("well-known") == 2);
    CHECK(count_syllables("COVID-19") == 2);
    CHECK(count_syllables("don't") == 1);

    CHECK_THROWS_WITH_AS(count_syllables("2021"), "not a word", InvalidArgument);
    CHECK_THROWS_AS(count_syllables(""), InvalidArgument);
    CHECK_THROWS_AS(count_syllables("--"), InvalidArgument);
}

TEST_CASE("split_sentences")
{
    CHECK(split_sentences("Vaccines work. They are safe.").size() == 2);
    CHECK(split_sentences("").empty());
    CHECK(split_sentences("   ").empty());

    auto s = split_sentences("Dr. Smith agrees.");
    REQUIRE(s.size() == 1);
    CHECK(s[0] == "Dr. Smith agrees.");

    CHECK(split_sentences("Really? Yes! Fine.").size() == 3);
    CHECK(split_sentences("No terminal punctuation here").size() == 1);
    CHECK(split_sentences("\"Stay home,\" she said. Rest helps!").size() == 2);
    CHECK(split_sentences("Ends with ellipsis... then more").size() == 2);
    CHECK(split_sentences("Version 3.5 is out.").size() == 1);
    CHECK(split_sentences("... !!").empty());
}

TEST_CASE("tokenize_words drops numerals and strips punctuation")
{
    auto w = tokenize_words("We tested 2,000 people (in 2021).");
    CHECK(w == std::vector<std::string>{"We", "tested", "people", "in"});
    CHECK(tokenize_words("well-known, COVID-19!") == std::vector<std::string>{"well-known", "COVID-19"});
}

TEST_CASE("fkre_score")
{
    auto cat = fkre_score("The cat sat.");
    CHECK(cat.raw == doctest::Approx(119.19).epsilon(1e-12));
    CHECK(cat.clamped == 100.0);

    auto a = fkre_score("a.");
    CHECK(a.raw == doctest::Approx(121.22).epsilon(1e-12));

    CHECK_THROWS_WITH_AS(fkre_score(""), "unscoreable text", InvalidArgument);
    CHECK_THROWS_WITH_AS(fkre_score("12 34."), "unscoreable text", InvalidArgument);

    // unterminated text counts as one sentence
    CHECK(fkre_score("The cat sat").raw == cat.raw);
}

TEST_CASE("hand-counted fixtures")
{
    std::ifstream in(LITCTL_FIXTURES "/fkre_fixtures.jsonl");
    REQUIRE(in);
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        auto j = nlohmann::json::parse(line);
        const std::string text = j["text"];
        CAPTURE(text);
        auto st = text_stats(text);
        CHECK(st.words == j["words"].get<std::size_t>());
        CHECK(st.sentences == j["sentences"].get<std::size_t>());
        CHECK(st.syllables == j["syllables"].get<std::size_t>());
        CHECK(std::abs(fkre_score(text).raw - j["expected_raw"].get<double>()) < 1e-9);
        ++n;
    }
    CHECK(n == 10);
}

TEST_CASE("classify_band boundaries")
{
    CHECK(classify_band(85.0) == Band::easy);
    CHECK(classify_band(80.0) == Band::easy);
    CHECK(classify_band(79.5) == Band::medium);
    CHECK(classify_band(60.0) == Band::medium);
    CHECK(classify_band(59.99) == Band::hard);
    CHECK(classify_band(0.0) == Band::hard);
    CHECK(classify_band(FkreScore::from_raw(150.0)) == Band::easy);
    CHECK(classify_band(FkreScore::from_raw(-30.0)) == Band::hard);
}

TEST_CASE("target_distance")
{
    CHECK(target_distance(85.0, Level::low) == 0.0);
    CHECK(target_distance(75.0, Level::low) == 5.0);
    CHECK(target_distance(59.0, Level::medium) == 1.0);
    CHECK(target_distance(82.0, Level::medium) == 3.0);
    CHECK(target_distance(70.0, Level::high) == 11.0);
    CHECK(target_distance(FkreScore::from_raw(140.0), Level::low) == 0.0);

    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 100.0);
    for (int i = 0; i < 1000; ++i) {
        double x = u(rng), y = u(rng);
        for (Level l : kAllLevels) {
            auto [lo, hi] = band_range(l);
            double dx = target_distance(x, l);
            CHECK(dx >= 0.0);
            CHECK((dx == 0.0) == (x >= lo && x <= hi));
            CHECK(std::abs(dx - target_distance(y, l)) <= std::abs(x - y) + 1e-12);
        }
    }
}

TEST_CASE("level and band names round-trip")
{
    for (Level l : kAllLevels) {
        CHECK(parse_level(to_string(l)) == l);
        CHECK(level_for(band_for(l)) == l);
        CHECK(parse_band(to_string(band_for(l))) == band_for(l));
    }
    CHECK_THROWS_AS(parse_level("expert"), InvalidArgument);
}
