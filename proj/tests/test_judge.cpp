#include "doctest.h"

#include "ssr/cache.hpp"
#include "ssr/client.hpp"
#include "ssr/judge.hpp"
#include "support.hpp"

using namespace ssr;

TEST_CASE("judge prompt carries the full grading instructions") {
    std::string p = judge_prompt("What color is the sphere?", "red", "it looks red");
    CHECK(p.starts_with("You are an intelligent chatbot designed for evaluating the correctness"));
    CHECK(p.find("##INSTRUCTIONS:") != std::string::npos);
    CHECK(p.find("- Consider synonyms or paraphrases as valid matches.\n") != std::string::npos);
    CHECK(p.find("Question: What color is the sphere?\n") != std::string::npos);
    CHECK(p.find("Correct Answer: red\n") != std::string::npos);
    CHECK(p.find("Predicted Answer: it looks red\n") != std::string::npos);
    CHECK(p.find("between 0 and 5, with 5 indicating the highest meaningful match.") !=
          std::string::npos);
    // the double space in "is  a string" is part of the fixed wording
    CHECK(p.find("where value of 'pred' is  a string of 'yes' or 'no'") != std::string::npos);
    CHECK(p.find("DO NOT PROVIDE ANY OTHER OUTPUT TEXT OR EXPLANATION.") != std::string::npos);
    CHECK(p.ends_with("your response should look like this: {'pred': 'yes', 'score': 4.8}."));
}

TEST_CASE("judgement parsing accepts the common reply shapes") {
    auto ok = [](const std::string& text, bool pred, double score) {
        JudgeResult r;
        INFO("text: ", text);
        REQUIRE(try_parse_judgement(text, r));
        CHECK(r.pred == pred);
        CHECK(r.score == doctest::Approx(score));
        CHECK(r.raw == text);
    };
    ok("{'pred': 'yes', 'score': 4.8}", true, 4.8);
    ok("{\"pred\": \"no\", \"score\": 3}", false, 3.0);
    ok("{'score': 2, 'pred': 'yes'}", true, 2.0);  // key order is free
    ok("Sure! Here is my evaluation: {'pred': 'yes', 'score': 5}.", true, 5.0);
    ok("pred: yes, score: 4", true, 4.0);  // no braces at all
    ok("pred = no, score = 1", false, 1.0);
    ok("{pred: yes, score: 3.5}", true, 3.5);  // bare keys
    ok("{'pred': 'true', 'score': 4}", true, 4.0);
    ok("{'pred': 'FALSE', 'score': 0}", false, 0.0);
    ok("{'pred': 'yes', 'score': 7}", true, 5.0);    // clamped down
    ok("{'pred': 'yes', 'score': -2}", true, 0.0);   // clamped up
    ok("{'pred'='yes'; 'score'=4}", true, 4.0);
    ok("The verdict {'pred': 'no', 'score': 2} stands.", false, 2.0);
}

TEST_CASE("judgement parsing rejects replies with no usable verdict") {
    auto bad = [](const std::string& text) {
        JudgeResult r;
        INFO("text: ", text);
        CHECK_FALSE(try_parse_judgement(text, r));
    };
    bad("");
    bad("I cannot evaluate this.");
    bad("{'pred': 'maybe', 'score': 3}");
    bad("{'pred': 'yes'}");
    bad("{'score': 3}");
    bad("{'pred': 'yes', 'score': 'high'}");
    bad("predator: yes, scoreboard: 3");  // keys must stand alone
    bad("{}");
}

TEST_CASE("braced region wins over surrounding prose keys") {
    // the prose mentions score outside the braces; only the object counts
    JudgeResult r;
    REQUIRE(try_parse_judgement("score talk aside, here: {'pred': 'no', 'score': 2}", r));
    CHECK_FALSE(r.pred);
    CHECK(r.score == doctest::Approx(2.0));
}

TEST_CASE("mock judge grades by comparing the quoted answers") {
    MockJudgeClient mock;
    JudgeResult r = judge("What color is the sphere?", "red", "red", mock);
    CHECK(r.pred);
    CHECK(r.score == doctest::Approx(5.0));

    r = judge("What color is the sphere?", "red", "the answer is red", mock);
    CHECK(r.pred);
    CHECK(r.score == doctest::Approx(4.0));

    r = judge("What color is the sphere?", "red", "blue", mock);
    CHECK_FALSE(r.pred);
    CHECK(r.score == doctest::Approx(1.0));

    // trailing punctuation and case differences are normalized away
    r = judge("What color is the sphere?", "Red.", "red", mock);
    CHECK(r.pred);
    CHECK(r.score == doctest::Approx(5.0));
}

TEST_CASE("judge retries once and caches only the reply that parsed") {
    test::TmpDir tmp("judge_cache");
    ResponseCache cache(tmp.str());
    int n = 0;
    ScriptedClient flaky("flaky-judge", [&n](const ClientRequest&) {
        return ++n == 1 ? std::string("thinking...") : std::string("{'pred': 'yes', 'score': 3}");
    });

    JudgeResult r = judge("q", "a", "a", flaky, &cache);
    CHECK(r.pred);
    CHECK(r.score == doctest::Approx(3.0));
    CHECK(flaky.calls() == 2);

    // the retry's reply went into the cache, so a replay asks nothing
    r = judge("q", "a", "a", flaky, &cache);
    CHECK(r.pred);
    CHECK(r.score == doctest::Approx(3.0));
    CHECK(flaky.calls() == 2);
    CHECK(cache.hits() == 1);
}

TEST_CASE("persistently unparseable judge falls back to the no verdict") {
    test::TmpDir tmp("judge_cache_bad");
    ResponseCache cache(tmp.str());
    ScriptedClient mute("mute-judge", [](const ClientRequest&) { return "no comment"; });

    JudgeResult r = judge("q", "a", "b", mute, &cache);
    CHECK_FALSE(r.pred);
    CHECK(r.score == doctest::Approx(0.0));
    CHECK(r.raw == "no comment");
    CHECK(mute.calls() == 2);

    // nothing was cached, so the next attempt pays both calls again
    judge("q", "a", "b", mute, &cache);
    CHECK(mute.calls() == 4);
    CHECK(cache.hits() == 0);
}
