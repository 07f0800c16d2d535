#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "judgekit/refine.hpp"
#include "support/test_support.hpp"

namespace judgekit::refine {
namespace {

using testing::ScriptedBackend;

// judge script: the response text carries its own score as "score=<n>"
std::string scoring_reply(const client::CompletionRequest& request) {
    const std::string prompt = testing::last_user_content(request);
    const auto pos = prompt.find("score=");
    if (pos == std::string::npos) return "**Result:** ?";
    const char digit = prompt[pos + 6];
    return std::string("**Reasoning:** earns the points up to ") + digit +
           ".\n\n**Result:** " + digit;
}

std::string refiner_reply(const client::CompletionRequest& request) {
    const std::string prompt = testing::last_user_content(request);
    // echo a marker plus part of the original response so outputs stay distinct
    const auto pos = prompt.find("Response:\n```\n");
    std::string original;
    if (pos != std::string::npos) {
        const auto end = prompt.find("\n```", pos + 14);
        original = prompt.substr(pos + 14, end - pos - 14);
    }
    return "**Improved Response:** improved " + original;
}

RefinementInput make_input(const std::string& id, const std::vector<int>& scores) {
    RefinementInput input;
    input.id = id;
    input.instruction = "write about " + id;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        input.responses.push_back("response " + std::to_string(i) + " of " + id +
                                  " score=" + std::to_string(scores[i]));
    }
    return input;
}

TEST(ScoreLikert, ParsesScoreAndKeepsCritique) {
    ScriptedBackend judge([](const client::CompletionRequest&) {
        return std::string("**Reasoning:** relevant and thorough.\n\n**Result:** 5");
    });
    auto scored = score_likert(templates::Registry::builtin(), {&judge, "judge-model"},
                               "describe a fox", "a fox is a small canid");
    ASSERT_TRUE(scored.ok());
    EXPECT_EQ(scored.value().score, 5);
    EXPECT_EQ(scored.value().critique, "relevant and thorough.");

    // the rendered scoring prompt embeds instruction and response
    const auto prompt = testing::last_user_content(judge.requests().at(0));
    EXPECT_NE(prompt.find("describe a fox"), std::string::npos);
    EXPECT_NE(prompt.find("a fox is a small canid"), std::string::npos);
    EXPECT_NE(prompt.find("**Result:** <an integer between 1 and 5>"), std::string::npos);
}

TEST(ScoreLikert, OutOfRangeRejected) {
    ScriptedBackend judge(
        [](const client::CompletionRequest&) { return std::string("**Result:** 0"); });
    auto scored = score_likert(templates::Registry::builtin(), {&judge, "judge-model"}, "i", "r");
    ASSERT_FALSE(scored.ok());
    EXPECT_EQ(scored.error().code, ErrorCode::ScoreOutOfRange);
}

TEST(SelectExtremePair, ExamplesAndErrors) {
    auto scored = [](std::vector<int> scores) {
        std::vector<ScoredResponse> out;
        for (int s : scores) {
            ScoredResponse r;
            r.score = s;
            out.push_back(r);
        }
        return out;
    };

    auto basic = select_extreme_pair(scored({2, 5, 3}));
    ASSERT_TRUE(basic.ok());
    ASSERT_TRUE(basic.value().has_value());
    EXPECT_EQ(basic.value()->first, 1u);
    EXPECT_EQ(basic.value()->second, 0u);

    auto flat = select_extreme_pair(scored({4, 4, 4}));
    ASSERT_TRUE(flat.ok());
    EXPECT_FALSE(flat.value().has_value());  // no signal

    auto too_few = select_extreme_pair(scored({4}));
    ASSERT_FALSE(too_few.ok());
    EXPECT_EQ(too_few.error().code, ErrorCode::TooFewResponses);
}

// exhaustive check of the earliest-index tie-break against enumeration
TEST(SelectExtremePair, TieLayoutEnumeration) {
    std::vector<int> scores(4);
    for (int a = 1; a <= 3; ++a)
        for (int b = 1; b <= 3; ++b)
            for (int c = 1; c <= 3; ++c)
                for (int d = 1; d <= 3; ++d) {
                    scores = {a, b, c, d};
                    std::vector<ScoredResponse> input;
                    for (int s : scores) {
                        ScoredResponse r;
                        r.score = s;
                        input.push_back(r);
                    }
                    auto result = select_extreme_pair(input);
                    ASSERT_TRUE(result.ok());
                    const int max_score = *std::max_element(scores.begin(), scores.end());
                    const int min_score = *std::min_element(scores.begin(), scores.end());
                    if (max_score == min_score) {
                        EXPECT_FALSE(result.value().has_value());
                        continue;
                    }
                    ASSERT_TRUE(result.value().has_value());
                    // brute-force expectation: first index attaining each extreme
                    const auto expected_best = static_cast<std::size_t>(
                        std::find(scores.begin(), scores.end(), max_score) - scores.begin());
                    const auto expected_worst = static_cast<std::size_t>(
                        std::find(scores.begin(), scores.end(), min_score) - scores.begin());
                    EXPECT_EQ(result.value()->first, expected_best);
                    EXPECT_EQ(result.value()->second, expected_worst);
                }
}

TEST(RefineResponse, PromptCarriesCritiqueUnderFeedback) {
    ScriptedBackend refiner([](const client::CompletionRequest&) {
        return std::string("**Improved Response:** X");
    });
    auto improved = refine_response(templates::Registry::builtin(), {&refiner, "refiner-model"},
                                    "the instruction", "the response",
                                    "the response misses the second part");
    ASSERT_TRUE(improved.ok());
    EXPECT_EQ(improved.value(), "X");

    const auto prompt = testing::last_user_content(refiner.requests().at(0));
    const auto feedback_pos = prompt.find("Feedback:");
    ASSERT_NE(feedback_pos, std::string::npos);
    EXPECT_NE(prompt.find("the response misses the second part", feedback_pos),
              std::string::npos);
}

TEST(RefineResponse, EmptyCritiqueRejected) {
    ScriptedBackend refiner([](const client::CompletionRequest&) { return std::string(); });
    EXPECT_THROW((void)refine_response(templates::Registry::builtin(), {&refiner, "m"}, "i", "r", ""),
                 std::invalid_argument);
}

TEST(BuildDownstreamPairs, ScoreMode) {
    ScriptedBackend judge(scoring_reply);
    ScriptedBackend refiner(refiner_reply);
    std::vector<RefinementInput> inputs = {
        make_input("i1", {2, 5, 3}),
        make_input("i2", {1, 4}),
        make_input("i3", {3, 5, 2, 4}),
    };
    RefineConfig cfg;
    cfg.mode = PairMode::ScorePair;
    auto output = build_downstream_pairs(inputs, {&judge, "j"}, {&refiner, "r"}, cfg,
                                         templates::Registry::builtin());
    ASSERT_TRUE(output.ok());
    EXPECT_EQ(output.value().report.score_pairs, 3u);
    EXPECT_EQ(output.value().pairs.size(), 3u);
    for (const auto& pair : output.value().pairs) {
        EXPECT_EQ(pair.kind, PairKind::DownstreamScore);
        // strict score ordering: chosen text embeds a higher score than rejected
        const auto score_of = [](const std::string& text) {
            return text[text.find("score=") + 6] - '0';
        };
        EXPECT_GT(score_of(pair.chosen), score_of(pair.rejected));
    }
}

TEST(BuildDownstreamPairs, FlatScoresSkipped) {
    ScriptedBackend judge(scoring_reply);
    ScriptedBackend refiner(refiner_reply);
    std::vector<RefinementInput> inputs = {make_input("flat", {4, 4, 4}),
                                           make_input("ok", {2, 5})};
    RefineConfig cfg;
    cfg.mode = PairMode::ScorePair;
    auto output = build_downstream_pairs(inputs, {&judge, "j"}, {&refiner, "r"}, cfg,
                                         templates::Registry::builtin());
    ASSERT_TRUE(output.ok());
    EXPECT_EQ(output.value().report.score_pairs, 1u);
    EXPECT_EQ(output.value().report.skips.at("NoScoreSignal"), 1u);
}

TEST(BuildDownstreamPairs, RefineModeUsesWorstResponseCritique) {
    ScriptedBackend judge(scoring_reply);
    ScriptedBackend refiner(refiner_reply);
    std::vector<RefinementInput> inputs = {make_input("r1", {2, 5, 3})};
    RefineConfig cfg;
    cfg.mode = PairMode::RefinePair;
    auto output = build_downstream_pairs(inputs, {&judge, "j"}, {&refiner, "r"}, cfg,
                                         templates::Registry::builtin());
    ASSERT_TRUE(output.ok());
    ASSERT_EQ(output.value().pairs.size(), 1u);
    const auto& pair = output.value().pairs[0];
    EXPECT_EQ(pair.kind, PairKind::DownstreamRefine);
    EXPECT_EQ(pair.rejected, inputs[0].responses[0]);  // the score=2 response
    EXPECT_EQ(pair.chosen, "improved " + inputs[0].responses[0]);
    EXPECT_EQ(pair.prompt, inputs[0].instruction);
}

TEST(BuildDownstreamPairs, ThresholdModeRefinesEveryLowScorer) {
    ScriptedBackend judge(scoring_reply);
    ScriptedBackend refiner(refiner_reply);
    std::vector<RefinementInput> inputs = {make_input("t1", {2, 5, 1, 3})};
    RefineConfig cfg;
    cfg.mode = PairMode::RefinePair;
    cfg.refine_threshold = 2;  // refine the score-2 and score-1 responses
    auto output = build_downstream_pairs(inputs, {&judge, "j"}, {&refiner, "r"}, cfg,
                                         templates::Registry::builtin());
    ASSERT_TRUE(output.ok());
    EXPECT_EQ(output.value().report.refine_pairs, 2u);
}

TEST(BuildDownstreamPairs, MixedRunCountsAddUp) {
    ScriptedBackend judge(scoring_reply);
    ScriptedBackend refiner(refiner_reply);
    std::vector<RefinementInput> inputs = {
        make_input("m1", {2, 5, 3}),
        make_input("m2", {4, 4}),      // skipped: no signal
        make_input("m3", {1, 5}),
    };
    RefineConfig cfg;
    cfg.mode = PairMode::Both;
    auto output = build_downstream_pairs(inputs, {&judge, "j"}, {&refiner, "r"}, cfg,
                                         templates::Registry::builtin());
    ASSERT_TRUE(output.ok());
    const auto& report = output.value().report;
    EXPECT_EQ(report.score_pairs, 2u);
    EXPECT_EQ(report.refine_pairs, 2u);
    EXPECT_EQ(output.value().pairs.size(), report.score_pairs + report.refine_pairs);
}

TEST(BuildDownstreamPairs, UnparseableRefinementDropsPair) {
    ScriptedBackend judge(scoring_reply);
    ScriptedBackend broken_refiner(
        [](const client::CompletionRequest&) { return std::string("no marker here"); });
    std::vector<RefinementInput> inputs = {make_input("u1", {2, 5})};
    RefineConfig cfg;
    cfg.mode = PairMode::RefinePair;
    auto output = build_downstream_pairs(inputs, {&judge, "j"}, {&broken_refiner, "r"}, cfg,
                                         templates::Registry::builtin());
    ASSERT_TRUE(output.ok());
    EXPECT_TRUE(output.value().pairs.empty());
    EXPECT_EQ(output.value().report.skips.at("RefineUnparseable"), 1u);
}

// scoring each response is independent of processing order
TEST(BuildDownstreamPairs, OrderFreeScoring) {
    ScriptedBackend judge(scoring_reply);
    ScriptedBackend refiner(refiner_reply);
    std::vector<RefinementInput> inputs = {
        make_input("z1", {1, 3, 5}),
        make_input("z2", {2, 4}),
        make_input("z3", {5, 1}),
    };
    RefineConfig cfg;
    cfg.mode = PairMode::ScorePair;
    cfg.parallelism = 4;
    auto baseline = build_downstream_pairs(inputs, {&judge, "j"}, {&refiner, "r"}, cfg,
                                           templates::Registry::builtin());
    ASSERT_TRUE(baseline.ok());

    std::reverse(inputs.begin(), inputs.end());
    auto reversed = build_downstream_pairs(inputs, {&judge, "j"}, {&refiner, "r"}, cfg,
                                           templates::Registry::builtin());
    ASSERT_TRUE(reversed.ok());
    EXPECT_EQ(baseline.value().pairs, reversed.value().pairs);
    EXPECT_EQ(baseline.value().report.scores, reversed.value().report.scores);
}

}  // namespace
}  // namespace judgekit::refine
