// Copyright (C) 2026 The capvqa Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "capvqa/metrics.hpp"
#include "capvqa/normalize.hpp"
#include "support.hpp"

namespace {

using namespace capvqa;
using capvqa::testing::answers_from_counts;
using capvqa::testing::make_annotation;
namespace oracle = capvqa::testing::oracle;

TEST(NormalizeAnswer, Examples) {
    EXPECT_EQ(normalize_answer("  Pony Tail "), "pony tail");
    EXPECT_EQ(normalize_answer("red"), "red");
    EXPECT_EQ(normalize_answer("it's red."), "its red");
}

TEST(NormalizeAnswer, KeepsArticlesAndDigits) {
    EXPECT_EQ(normalize_answer("The 2 Dogs"), "the 2 dogs");
    EXPECT_EQ(normalize_answer("a\t\tb\n c"), "a b c");
    EXPECT_EQ(normalize_answer("T-Shirt!"), "tshirt");
    EXPECT_EQ(normalize_answer("   "), "");
    EXPECT_EQ(normalize_answer("caf\xc3\xa9"), "caf\xc3\xa9");
}

TEST(NormalizeAnswer, Idempotent) {
    std::mt19937_64 gen(3);
    const std::string chars = "aB c.D,e'f -G\t!?x9 ";
    std::uniform_int_distribution<std::size_t> pick(0, chars.size() - 1), len(0, 24);
    for (int trial = 0; trial < 1000; ++trial) {
        std::string s;
        for (auto n = len(gen); n > 0; --n) s.push_back(chars[pick(gen)]);
        const auto once = normalize_answer(s);
        EXPECT_EQ(normalize_answer(once), once) << '"' << s << '"';
        EXPECT_TRUE(once.empty() || (once.front() != ' ' && once.back() != ' '));
        EXPECT_EQ(once.find("  "), std::string::npos);
    }
}

TEST(VqaAccuracy, Examples) {
    const auto ann = make_annotation(1, answers_from_counts({{"a", 3}, {"b", 2}, {"c", 5}}));
    EXPECT_DOUBLE_EQ(vqa_accuracy("a", ann), 1.0);
    EXPECT_DOUBLE_EQ(vqa_accuracy("z", ann), 0.0);
    EXPECT_DOUBLE_EQ(vqa_accuracy("b", ann), 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(vqa_accuracy("c", ann), 1.0);
    EXPECT_DOUBLE_EQ(vqa_accuracy("", ann), 0.0);
}

TEST(VqaAccuracy, InvariantUnderNormalization) {
    const auto ann = make_annotation(1, answers_from_counts({{"pony tail", 2}, {"its red", 8}}));
    for (const char* raw : {"Pony Tail", "  pony   tail ", "It's red.", "ITS RED", "nope"})
        EXPECT_EQ(vqa_accuracy(raw, ann), vqa_accuracy(normalize_answer(raw), ann)) << raw;
}

TEST(VqaAccuracy, ScoreTakesOnlyFourValues) {
    std::mt19937_64 gen(5);
    const auto alpha = capvqa::testing::alphabet(6);
    std::uniform_int_distribution<std::size_t> pick(0, alpha.size() - 1);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<std::string> answers;
        for (int i = 0; i < 10; ++i) answers.push_back(alpha[pick(gen)]);
        const auto ann = make_annotation(1, answers);
        const double s = vqa_accuracy(alpha[pick(gen)], ann);
        EXPECT_TRUE(s == 0.0 || s == 1.0 / 3.0 || s == 2.0 / 3.0 || s == 1.0) << s;
    }
}

TEST(VqaAccuracy, OfficialSubsetsVariant) {
    // x = 3: leaving out one of the seven non-matches keeps 3 matches, leaving out a match keeps 2.
    const auto ann = make_annotation(1, answers_from_counts({{"a", 3}, {"b", 7}}));
    EXPECT_NEAR(vqa_accuracy("a", ann, MetricVariant::official_subsets), (7 * 1.0 + 3 * (2.0 / 3.0)) / 10.0, 1e-12);
    EXPECT_DOUBLE_EQ(vqa_accuracy("b", ann, MetricVariant::official_subsets), 1.0);
    EXPECT_DOUBLE_EQ(vqa_accuracy("z", ann, MetricVariant::official_subsets), 0.0);
}

TEST(EvaluatePredictions, BothPerfect) {
    const std::vector<AnnotationRecord> anns{make_annotation(1, answers_from_counts({{"a", 4}, {"b", 6}})),
                                             make_annotation(2, answers_from_counts({{"c", 10}}))};
    const auto r = evaluate_predictions({{1, "a"}, {2, "c"}}, anns);
    EXPECT_DOUBLE_EQ(r.mean_score, 1.0);
    EXPECT_EQ(r.n, 2u);
    EXPECT_TRUE(r.unanswered.empty());
}

TEST(EvaluatePredictions, MissingPredictionScoresZeroAndIsFlagged) {
    const std::vector<AnnotationRecord> anns{make_annotation(1, answers_from_counts({{"a", 10}})),
                                             make_annotation(2, answers_from_counts({{"c", 10}}))};
    const auto r = evaluate_predictions({{1, "a"}}, anns);
    EXPECT_DOUBLE_EQ(r.mean_score, 0.5);
    EXPECT_EQ(r.unanswered, std::vector<QuestionId>{2});
}

TEST(EvaluatePredictions, UnknownQuestionIsValidationError) {
    const std::vector<AnnotationRecord> anns{make_annotation(1, answers_from_counts({{"a", 10}}))};
    EXPECT_THROW(evaluate_predictions({{1, "a"}, {99, "b"}}, anns), ValidationError);
}

TEST(EvaluatePredictions, MatchesBruteForceOnRandomCorpus) {
    std::mt19937_64 gen(17);
    const auto alpha = capvqa::testing::alphabet(20);
    std::uniform_int_distribution<std::size_t> pick(0, alpha.size() - 1);
    std::bernoulli_distribution answered(0.9);
    std::vector<AnnotationRecord> anns;
    std::map<QuestionId, std::string> preds;
    for (QuestionId q = 0; q < 1000; ++q) {
        std::vector<std::string> answers;
        for (int i = 0; i < 10; ++i) answers.push_back(alpha[pick(gen) % 5]);
        anns.push_back(make_annotation(q, answers));
        if (answered(gen)) preds[q] = alpha[pick(gen) % 7];
    }
    const auto r = evaluate_predictions(preds, anns);
    std::map<QuestionId, double> expected;
    for (const auto& a : anns) {
        auto p = preds.find(a.question_id);
        expected[a.question_id] = p == preds.end() ? 0.0 : oracle::vqa_score(p->second, a.answers);
    }
    EXPECT_EQ(r.per_question, expected);
    EXPECT_EQ(r.mean_score, oracle::mean_in_key_order(expected));
}

TEST(EvaluatePredictions, MeanIsPermutationInvariant) {
    std::mt19937_64 gen(23);
    const auto alpha = capvqa::testing::alphabet(4);
    std::uniform_int_distribution<std::size_t> pick(0, alpha.size() - 1);
    std::vector<AnnotationRecord> anns;
    std::map<QuestionId, std::string> preds;
    for (QuestionId q = 0; q < 200; ++q) {
        std::vector<std::string> answers;
        for (int i = 0; i < 10; ++i) answers.push_back(alpha[pick(gen)]);
        anns.push_back(make_annotation(q, answers));
        preds[q] = alpha[pick(gen)];
    }
    const double base = evaluate_predictions(preds, anns).mean_score;
    for (int trial = 0; trial < 10; ++trial) {
        std::shuffle(anns.begin(), anns.end(), gen);
        EXPECT_EQ(evaluate_predictions(preds, anns).mean_score, base);
    }
}

TEST(AggregateRuns, SampleStd) {
    const std::vector<double> scores{32.1, 32.5, 32.9};
    const auto a = aggregate_scores(scores);
    EXPECT_NEAR(a.mean, 32.5, 1e-12);
    EXPECT_NEAR(a.std, 0.4, 1e-12);
    EXPECT_EQ(a.run_scores, scores);
}

TEST(AggregateRuns, SingleAndIdenticalRuns) {
    const std::vector<double> one{40.0};
    EXPECT_EQ(aggregate_scores(one).mean, 40.0);
    EXPECT_EQ(aggregate_scores(one).std, 0.0);
    const std::vector<double> same{0.1, 0.1, 0.1};
    EXPECT_EQ(aggregate_scores(same).std, 0.0);
    EXPECT_EQ(aggregate_scores(same).mean, 0.1);
    EXPECT_THROW(aggregate_scores(std::vector<double>{}), PreconditionError);
}

TEST(AggregateRuns, MeanWithinRange) {
    std::mt19937_64 gen(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<EvalReport> reports(1 + trial % 5);
        for (auto& r : reports) r.mean_score = u(gen);
        const auto a = aggregate_runs(reports);
        ASSERT_EQ(a.run_scores.size(), reports.size());
        const auto [lo, hi] = std::minmax_element(a.run_scores.begin(), a.run_scores.end());
        EXPECT_GE(a.mean, *lo);
        EXPECT_LE(a.mean, *hi);
        EXPECT_GE(a.std, 0.0);
    }
}

} // namespace
