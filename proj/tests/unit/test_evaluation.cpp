#include "doctest.h"

#include "litctl/evaluation.hpp"

#include <atomic>

using namespace litctl;

namespace {

const RetryPolicy kFast{3, std::chrono::milliseconds(0), 2.0};

struct ScriptedClient : ChatClient {
    std::vector<std::string> replies;
    mutable std::atomic<std::size_t> calls{0};
    std::string complete(const ChatRequest&) const override
    {
        const auto i = calls++;
        return replies.at(std::min(i, replies.size() - 1));
    }
    std::string model_id() const override { return "scripted"; }
};

// Reads the "[level]" tag written into test counterspeech.
struct TagJudge : ChatClient {
    int match = 5, other = 3;
    bool indifferent = false;
    std::string complete(const ChatRequest& req) const override
    {
        const auto& p = req.messages.back().content;
        if (indifferent)
            return "4";
        for (auto level : kAllLevels)
            if (p.starts_with("Assume you are a user with " + to_string(level)))
                return std::to_string(p.find("[" + to_string(level) + "]") != std::string::npos ? match : other);
        return "Label: 1";
    }
    std::string model_id() const override { return "tag-judge"; }
};

Counterspeech cs_of(std::string text, Level level)
{
    Counterspeech cs;
    cs.text = std::move(text);
    cs.level = level;
    cs.fkre = fkre_score(cs.text);
    return cs;
}

EvalRecord record(Level level, double td, double pol, int rating, int factual)
{
    EvalRecord r;
    r.post_id = "p";
    r.level = level;
    r.target_distance = td;
    r.politeness = pol;
    r.rating = rating;
    r.preference = rating / 5.0;
    r.factual = factual;
    return r;
}

} // namespace

TEST_CASE("rating extraction takes the first integer in 1..5")
{
    CHECK(extract_rating("4") == 4);
    CHECK(extract_rating("Score: 5 because it is clear.") == 5);
    CHECK(extract_rating("10 out of 10; I'd give it 3") == 3);
    CHECK_FALSE(extract_rating("excellent"));
    CHECK_FALSE(extract_rating("0 or 6"));
}

TEST_CASE("judge_preference re-asks once")
{
    ScriptedClient c;
    c.replies = {"excellent", "4"};
    auto r = judge_preference(c, "cs", "misinfo", Level::medium, kFast);
    CHECK(r.rating == 4);
    CHECK(r.preference() == doctest::Approx(0.8));
    CHECK(r.judge_level == Level::medium);
    CHECK(c.calls == 2);

    ScriptedClient bad;
    bad.replies = {"excellent"};
    CHECK_THROWS_AS(judge_preference(bad, "cs", "m", Level::low, kFast), JudgeParseError);
    CHECK(bad.calls == 2);
}

TEST_CASE("preference prompts carry the persona and both texts")
{
    const auto p = preference_prompt("Garlic cures flu.", "It does not.", Level::high);
    CHECK(p.starts_with("Assume you are a user with high health literacy"));
    CHECK(p.find("Misinformation_Comment: \"Garlic cures flu.\"") != std::string::npos);
    CHECK(p.find("Counterspeech_Response: \"It does not.\"") != std::string::npos);
    CHECK(p.ends_with("Provide only the score (an integer from 1 to 5) as your final output."));
}

TEST_CASE("factual label parsing")
{
    auto f = extract_factual("Label: 1\nExplanations: consistent with CDC guidance");
    REQUIRE(f);
    CHECK(f->label == 1);
    CHECK(f->explanation == "consistent with CDC guidance");
    CHECK(extract_factual("label: 0 the claim about dosage is wrong")->label == 0);
    CHECK(extract_factual("LABEL : (1)")->label == 1);
    CHECK_FALSE(extract_factual("Looks right to me."));

    ScriptedClient c;
    c.replies = {"no idea"};
    CHECK_THROWS_AS(judge_factual(c, "text", kFast), JudgeParseError);
    CHECK(c.calls == 2);
}

TEST_CASE("politeness scorers")
{
    FixturePolitenessScorer fx;
    fx.add("Thank you for sharing", 0.9);
    CHECK(fx.score("Thank you for sharing") == 0.9);
    CHECK_THROWS_AS(fx.score(""), InvalidArgument);
    CHECK_THROWS_AS(fx.score("unknown"), ApiError);
    CHECK_THROWS_AS(fx.add("x", 1.5), InvalidArgument);

    LexiconPolitenessScorer lex;
    CHECK(lex.score("Thank you, I understand.") > lex.score("The data are clear."));
    CHECK(lex.score("That is stupid nonsense.") < 0.5);
    CHECK_THROWS_AS(lex.score("  "), InvalidArgument);

    ScriptedClient judge;
    judge.replies = {"5"};
    JudgePolitenessScorer js(judge, kFast);
    CHECK(js.score("hello") == 1.0);
}

TEST_CASE("aggregate uses population variance and unweighted level averages")
{
    std::vector<EvalRecord> recs{record(Level::low, 0, 0.8, 5, 1), record(Level::low, 5, 0.6, 3, 1),
                                 record(Level::medium, 2, 0.5, 4, 0), record(Level::high, 1, 1.0, 5, 1)};
    auto failed = record(Level::high, 99, 0.0, 1, 0);
    failed.errors.push_back("factual: judge down");
    recs.push_back(failed);
    auto rep = aggregate(recs);
    REQUIRE(rep.levels.size() == 3);
    CHECK(rep.levels[0].target_distance->mean == 2.5);
    CHECK(rep.levels[0].target_distance->variance == 6.25);
    CHECK(rep.levels[0].factual_accuracy == 1.0);
    CHECK(rep.levels[1].factual_accuracy == 0.0);
    CHECK(rep.levels[2].n == 2);
    CHECK(rep.levels[2].failed == 1);
    CHECK(rep.levels[2].target_distance->mean == 1.0);
    CHECK(rep.average.target_distance->mean == doctest::Approx((2.5 + 2 + 1) / 3.0));
    CHECK(rep.average.target_distance->variance == doctest::Approx(6.25 / 3.0));
    CHECK(*rep.average.factual_accuracy == doctest::Approx(2.0 / 3.0));
    CHECK(rep.record_hashes.size() == 5);
    CHECK(rep.record_hashes[0] == recs[0].hash());
    CHECK(report_csv(rep, "abc") == report_csv(aggregate(recs), "abc"));
    CHECK(report_csv(rep, "abc").find(",abc\n") != std::string::npos);
    CHECK_THROWS_WITH(aggregate({}), "no records");
}

TEST_CASE("evaluate_corpus runs all four metrics and records failures")
{
    TagJudge judge;
    LexiconPolitenessScorer pol;
    EvalClients clients{&judge, &judge, &pol, kFast, 2};
    std::vector<EvalItem> items{{"p1", "m", cs_of("[low] Shots are safe.", Level::low)},
                                {"p2", "m", cs_of("[medium] The facts are clear.", Level::medium)}};
    auto refused = cs_of("I can't help with that.", Level::high);
    refused.refusal = true;
    items.push_back({"p3", "m", refused});
    auto rep = evaluate_corpus(items, clients);
    REQUIRE(rep.records.size() == 3);
    CHECK(rep.records[0].rating == 5);
    CHECK(rep.records[0].factual == 1);
    CHECK(rep.records[0].target_distance == 0.0);
    CHECK(rep.records[1].target_distance > 0.0);
    CHECK(rep.records[2].failed());
    CHECK(rep.levels[2].failed == 1);
    CHECK_FALSE(rep.levels[2].preference);
    CHECK_FALSE(rep.average.preference);

    EvalClients none;
    auto r = evaluate_one(items[0], none);
    CHECK(r.errors.size() == 3);
    CHECK_THROWS_WITH(evaluate_corpus({}, clients), "no records");
}

TEST_CASE("cross_eval with constructed judges")
{
    std::map<Level, std::vector<EvalItem>> by_level;
    for (auto l : kAllLevels)
        for (int i = 0; i < 2; ++i)
            by_level[l].push_back({"p" + std::to_string(i), "m", cs_of("[" + to_string(l) + "] Text.", l)});
    TagJudge judge;
    auto m = cross_eval(by_level, judge, kFast, 3);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            CHECK(m.cell[i][j].mean == doctest::Approx(i == j ? 1.0 : 0.6));
            CHECK(m.cell[i][j].n == 2);
        }
    CHECK_FALSE(m.strictly_diagonally_dominant()); // 1.0 vs 0.6 + 0.6
    judge.other = 2;
    CHECK(cross_eval(by_level, judge, kFast).strictly_diagonally_dominant());

    judge.indifferent = true;
    auto flat = cross_eval(by_level, judge, kFast);
    for (const auto& row : flat.cell)
        for (const auto& c : row)
            CHECK(c.mean == doctest::Approx(0.8));

    auto missing = by_level;
    missing.erase(Level::medium);
    CHECK_THROWS_AS(cross_eval(missing, judge), InvalidArgument);
    CHECK(m.csv().starts_with("counterspeech_level,user_level,mean,variance,n\nlow,low,1.000000"));
}

TEST_CASE("simulated judge prefers text in the persona's band")
{
    SimulatedChatClient sim;
    const auto easy = "Shots are safe for most kids. They help your body fight germs.";
    CHECK(judge_preference(sim, easy, "m", Level::low, kFast).rating == 5);
    CHECK(judge_preference(sim, easy, "m", Level::medium, kFast).rating == 2);
    CHECK(judge_preference(sim, easy, "m", Level::high, kFast).rating == 1);
    CHECK(judge_factual(sim, easy, kFast).label == 1);
    JudgePolitenessScorer js(sim, kFast);
    CHECK(js.score("Thank you, that is helpful.") > js.score("That is stupid."));
}
