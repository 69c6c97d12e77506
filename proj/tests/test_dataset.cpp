// Copyright (C) 2026 The capvqa Authors
// SPDX-License-Identifier: Apache-2.0

#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "capvqa/dataset.hpp"
#include "capvqa/modeling/adapters.hpp"
#include "support.hpp"

namespace {

using namespace capvqa;
using capvqa::testing::make_annotation;

std::vector<QuestionRecord> three_questions() {
    return {{1, 10, "what animal is this?"}, {2, 10, "what color is it?"}, {3, 20, "where is this?"}};
}

std::vector<AnnotationRecord> three_annotations() {
    std::vector<AnnotationRecord> out;
    for (QuestionId q = 1; q <= 3; ++q) out.push_back(make_annotation(q, std::vector<std::string>(10, "x"), q < 3 ? 10 : 20));
    return out;
}

std::map<ImageId, CaptionRecord> two_captions() {
    return {{10, {10, "a horse in a field", CaptionSource::generated, std::nullopt}},
            {20, {20, "a busy street", CaptionSource::generated, std::nullopt}}};
}

ExampleSet numbered_examples(std::size_t n) {
    std::vector<QuestionRecord> qs;
    std::vector<AnnotationRecord> as;
    for (std::size_t i = 0; i < n; ++i) {
        const auto q = static_cast<QuestionId>(i + 1);
        qs.push_back({q, q, "q" + std::to_string(i)});
        as.push_back(make_annotation(q, std::vector<std::string>(10, "x"), q));
    }
    return join_examples(qs, as, {}, InputMode::question_only);
}

std::set<QuestionId> ids_of(const ExampleSet& s) {
    std::set<QuestionId> out;
    for (const auto& e : s.examples) out.insert(e.question.question_id);
    return out;
}

// ---------------------------------------------------------------------------
// Loaders
// ---------------------------------------------------------------------------

TEST(LoadQuestions, ParsesRecords) {
    const auto qs = parse_questions(R"({"questions": [
        {"question_id": 5, "image_id": 9, "question": "What sport is this?"},
        {"question_id": 6, "image_id": 9, "question": "Who makes it?"}]})");
    ASSERT_EQ(qs.size(), 2u);
    EXPECT_EQ(qs[0].question_id, 5);
    EXPECT_EQ(qs[1].image_id, 9);
    EXPECT_EQ(qs[0].text, "What sport is this?");
}

TEST(LoadQuestions, EmptyCollection) { EXPECT_TRUE(parse_questions(R"({"questions": []})").empty()); }

TEST(LoadQuestions, DuplicateIdIsValidationError) {
    EXPECT_THROW(parse_questions(R"({"questions": [{"question_id": 1, "image_id": 1, "question": "a"},
                                                   {"question_id": 1, "image_id": 2, "question": "b"}]})"),
                 ValidationError);
}

TEST(LoadQuestions, MalformedRecordNamesIt) {
    try {
        parse_questions(R"({"questions": [{"question_id": 1, "image_id": 1, "question": "a"},
                                          {"question_id": 2, "question": "b"}]})");
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("question_id 2"), std::string::npos) << e.what();
    }
}

TEST(LoadQuestions, BrokenJsonReportsLine) {
    try {
        parse_questions("{\"questions\": [\n{\"question_id\": 1,,}\n]}");
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 2u);
    }
}

TEST(LoadQuestions, MissingFileIsError) {
    EXPECT_THROW(load_questions("/nonexistent/questions.json"), Error);
}

TEST(LoadAnnotations, KeepsTheMultiset) {
    const auto as = parse_annotations(R"({"annotations": [{"question_id": 1, "image_id": 2, "answers": [
        {"answer": "a"}, {"answer": "a"}, {"answer": "a"}, {"answer": "b"}, {"answer": "b"},
        {"answer": "b"}, {"answer": "b"}, {"answer": "c"}, {"answer": "c"}, {"answer": "d"}]}]})");
    ASSERT_EQ(as.size(), 1u);
    const std::multiset<std::string> got(as[0].answers.begin(), as[0].answers.end());
    EXPECT_EQ(got.size(), 10u);
    EXPECT_EQ(got.count("a"), 3u);
    EXPECT_EQ(got.count("b"), 4u);
    EXPECT_EQ(got.count("c"), 2u);
    EXPECT_EQ(got.count("d"), 1u);
}

TEST(LoadAnnotations, NormalizesAnswers) {
    const auto as = parse_annotations(R"({"annotations": [{"question_id": 1, "image_id": 2,
        "multiple_choice_answer": "Pony Tail",
        "answers": ["  Pony Tail ", "pony tail", "it's red.", "x", "x", "x", "x", "x", "x", "x"]}]})");
    EXPECT_EQ(as[0].answers[0], "pony tail");
    EXPECT_EQ(as[0].answers[2], "its red");
    EXPECT_EQ(as[0].consensus_answer, "pony tail");
}

TEST(LoadAnnotations, NineAnswersNamesTheQuestion) {
    try {
        parse_annotations(R"({"annotations": [{"question_id": 4417, "image_id": 2,
            "answers": ["a", "a", "a", "a", "a", "a", "a", "a", "a"]}]})");
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("4417"), std::string::npos);
    }
}

TEST(LoadCaptions, ParsesAndValidates) {
    const auto cs = parse_captions(R"({"captions": [
        {"image_id": 1, "caption": "a dog", "source": "generated"},
        {"image_id": 1, "caption": "a brown dog", "source": "gold", "gold_index": 3}]})");
    ASSERT_EQ(cs.size(), 2u);
    EXPECT_EQ(cs[1].gold_index, 3);
    EXPECT_THROW(parse_captions(R"({"captions": [{"image_id": 1, "caption": "a", "source": "gold"}]})"), Error);
    EXPECT_THROW(parse_captions(R"({"captions": [{"image_id": 1, "caption": "a", "source": "gold", "gold_index": 5}]})"),
                 Error);
    EXPECT_THROW(parse_captions(R"({"captions": [{"image_id": 1, "caption": "", "source": "generated"}]})"), Error);
    EXPECT_THROW(
        parse_captions(R"({"captions": [{"image_id": 1, "caption": "a", "source": "generated", "gold_index": 0}]})"),
        Error);
}

TEST(LoadCaptions, RoundTrip) {
    const std::vector<CaptionRecord> cs{{1, "a dog", CaptionSource::generated, std::nullopt},
                                        {1, "a brown dog", CaptionSource::gold, 0}};
    const auto back = parse_captions(captions_to_json(cs));
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0].text, "a dog");
    EXPECT_EQ(back[1].source, CaptionSource::gold);
    EXPECT_EQ(back[1].gold_index, 0);
}

TEST(LoadCaptions, CocoCaptionsKeepFirstFivePerImage) {
    const auto cs = parse_coco_captions(R"({"annotations": [
        {"image_id": 7, "id": 6, "caption": "six"}, {"image_id": 7, "id": 1, "caption": "one"},
        {"image_id": 7, "id": 2, "caption": "two"}, {"image_id": 7, "id": 3, "caption": "three"},
        {"image_id": 7, "id": 4, "caption": "four"}, {"image_id": 7, "id": 5, "caption": "five"}]})");
    const auto table = CaptionTable::from_records(cs);
    ASSERT_EQ(table.gold.at(7).size(), 5u);
    EXPECT_EQ(table.gold.at(7).front(), "one");
    EXPECT_EQ(table.gold.at(7).back(), "five");
}

// ---------------------------------------------------------------------------
// Joining
// ---------------------------------------------------------------------------

TEST(JoinExamples, CaptionModeAttachesImageCaption) {
    const auto qs = three_questions();
    const auto as = three_annotations();
    const auto set = join_examples(qs, as, two_captions(), InputMode::caption);
    ASSERT_EQ(set.size(), 3u);
    EXPECT_EQ(set.examples[0].caption->text, "a horse in a field");
    EXPECT_EQ(set.examples[1].caption->text, "a horse in a field");
    EXPECT_EQ(set.examples[2].caption->text, "a busy street");
}

TEST(JoinExamples, QuestionOnlyModeHasNoCaption) {
    const auto qs = three_questions();
    const auto as = three_annotations();
    const auto set = join_examples(qs, as, two_captions(), InputMode::question_only);
    ASSERT_EQ(set.size(), 3u);
    for (const auto& ex : set.examples) EXPECT_FALSE(ex.caption.has_value());
}

TEST(JoinExamples, MissingCaptionNamesImage) {
    const auto qs = three_questions();
    const auto as = three_annotations();
    auto caps = two_captions();
    caps.erase(20);
    try {
        join_examples(qs, as, caps, InputMode::caption);
        FAIL() << "expected JoinError";
    } catch (const JoinError& e) {
        EXPECT_NE(std::string(e.what()).find("20"), std::string::npos);
    }
}

TEST(JoinExamples, MissingAnnotationIsJoinError) {
    const auto qs = three_questions();
    auto as = three_annotations();
    as.pop_back();
    EXPECT_THROW(join_examples(qs, as, {}, InputMode::question_only), JoinError);
}

TEST(JoinExamples, QuestionOnlyInputNeverCarriesCaption) {
    const auto qs = three_questions();
    const auto as = three_annotations();
    const auto caps = two_captions();
    const auto set = join_examples(qs, as, caps, InputMode::question_only);
    for (auto style : {InputStyle::pair_encoding, InputStyle::prefixed_generative}) {
        for (const auto& ex : set.examples) {
            const auto in = make_model_input(ex, InputMode::question_only, style);
            EXPECT_NE(in.text.text.find(ex.question.text), std::string::npos);
            for (const auto& [image, c] : caps) EXPECT_EQ(in.text.text.find(c.text), std::string::npos);
        }
    }
}

// ---------------------------------------------------------------------------
// Decontamination
// ---------------------------------------------------------------------------

TEST(Decontaminate, Examples) {
    EXPECT_EQ(decontaminate({1, 2, 3}, {2}), (std::set<ImageId>{1, 3}));
    EXPECT_EQ(decontaminate({1, 2}, {}), (std::set<ImageId>{1, 2}));
    EXPECT_EQ(decontaminate({1, 2}, {1, 2, 3}), (std::set<ImageId>{}));
}

TEST(Decontaminate, PropertyOverRandomSets) {
    std::mt19937_64 gen(11);
    std::uniform_int_distribution<int> id(0, 40), len(0, 25);
    for (int trial = 0; trial < 500; ++trial) {
        std::set<ImageId> in, reserved;
        for (int i = len(gen); i > 0; --i) in.insert(id(gen));
        for (int i = len(gen); i > 0; --i) reserved.insert(id(gen));
        const auto out = decontaminate(in, reserved);
        std::set<ImageId> rebuilt = out;
        for (auto x : out) EXPECT_FALSE(reserved.count(x));
        for (auto x : in)
            if (reserved.count(x)) rebuilt.insert(x);
        EXPECT_EQ(rebuilt, in);
    }
}

TEST(ImageIdList, ParseAndFormat) {
    const auto ids = parse_image_ids("# header\n3\n\n1  # trailing\n 2\n");
    EXPECT_EQ(ids, (std::set<ImageId>{1, 2, 3}));
    EXPECT_EQ(format_image_ids(ids), "1\n2\n3\n");
    try {
        parse_image_ids("1\n2\nabc\n");
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
    }
}

TEST(SplitManifestTest, ReservedImagesFromManifest) {
    SplitManifest m;
    m.splits["test"] = {2, 3};
    const auto back = SplitManifest::parse(m.to_json());
    const auto qs = three_questions();
    EXPECT_EQ(reserved_images(back, "test", qs), (std::set<ImageId>{10, 20}));
    m.splits["test"].push_back(99);
    EXPECT_THROW(reserved_images(m, "test", qs), ValidationError);
    EXPECT_THROW(reserved_images(m, "val", qs), ValidationError);
}

// ---------------------------------------------------------------------------
// Gold caption selection
// ---------------------------------------------------------------------------

const std::vector<std::string> kFive{"c0", "c1", "c2", "c3", "c4"};

TEST(SelectGoldCaption, Deterministic) {
    const auto a = select_gold_caption(kFive, 42, 7);
    const auto b = select_gold_caption(kFive, 42, 7);
    EXPECT_EQ(a.text, b.text);
    EXPECT_EQ(a.gold_index, b.gold_index);
    EXPECT_EQ(a.source, CaptionSource::gold);
    EXPECT_EQ(a.image_id, 42);
}

TEST(SelectGoldCaption, IdenticalStrings) {
    const std::vector<std::string> same(5, "a cat on a mat");
    EXPECT_EQ(select_gold_caption(same, 1, 3).text, "a cat on a mat");
}

TEST(SelectGoldCaption, SeedsZeroToNinetyNineCoverAllFive) {
    for (ImageId image : {1, 2, 57, 123456}) {
        std::set<int> seen;
        for (std::uint64_t seed = 0; seed < 100; ++seed) seen.insert(*select_gold_caption(kFive, image, seed).gold_index);
        EXPECT_EQ(seen.size(), 5u) << "image " << image;
    }
}

TEST(SelectGoldCaption, PureFunctionOfImageAndSeed) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto first = select_gold_caption(kFive, 9, seed).gold_index;
        select_gold_caption(kFive, 10, seed + 1);
        EXPECT_EQ(select_gold_caption(kFive, 9, seed).gold_index, first);
    }
}

TEST(SelectGoldCaption, FewerThanFive) {
    const std::vector<std::string> three{"a", "b", "c"};
    EXPECT_THROW(select_gold_caption(three, 1, 0), ValidationError);
    std::ostringstream warn;
    const auto c = select_gold_caption(three, 1, 0, {true, &warn});
    EXPECT_LT(*c.gold_index, 3);
    EXPECT_NE(warn.str().find("only 3"), std::string::npos);
    EXPECT_THROW(select_gold_caption({}, 1, 0, {true, nullptr}), ValidationError);
}

// ---------------------------------------------------------------------------
// Validation split
// ---------------------------------------------------------------------------

TEST(SplitValidation, TenAtTwentyPercent) {
    const auto all = numbered_examples(10);
    const auto [train, val] = split_validation(all, 0.2, 0);
    EXPECT_EQ(train.size(), 8u);
    EXPECT_EQ(val.size(), 2u);
    EXPECT_EQ(train.split, SplitTag::train);
    EXPECT_EQ(val.split, SplitTag::val);
}

TEST(SplitValidation, SameSeedSameSplit) {
    const auto all = numbered_examples(50);
    const auto a = split_validation(all, 0.3, 5);
    const auto b = split_validation(all, 0.3, 5);
    EXPECT_EQ(ids_of(a.second), ids_of(b.second));
    EXPECT_NE(ids_of(a.second), ids_of(split_validation(all, 0.3, 6).second));
}

TEST(SplitValidation, FloorRounding) {
    // 0.2 * 9009 = 1801.8
    EXPECT_EQ(validation_size(9009, 0.2), 1801u);
    EXPECT_EQ(validation_size(10, 0.2), 2u);
    EXPECT_EQ(validation_size(3, 0.5), 1u);
    EXPECT_EQ(validation_size(100, 0.07), 7u);
}

TEST(SplitValidation, PartitionForAllSeeds) {
    const auto all = numbered_examples(37);
    const auto everything = ids_of(all);
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto [train, val] = split_validation(all, 0.25, seed);
        const auto t = ids_of(train), v = ids_of(val);
        std::set<QuestionId> both;
        std::set_intersection(t.begin(), t.end(), v.begin(), v.end(), std::inserter(both, both.end()));
        EXPECT_TRUE(both.empty());
        std::set<QuestionId> uni = t;
        uni.insert(v.begin(), v.end());
        EXPECT_EQ(uni, everything);
        EXPECT_EQ(v.size(), 9u);
    }
}

TEST(SplitValidation, RejectsBadInput) {
    const auto all = numbered_examples(5);
    EXPECT_THROW(split_validation(all, 0.0, 0), ConfigError);
    EXPECT_THROW(split_validation(all, 1.0, 0), ConfigError);
    EXPECT_THROW(split_validation(ExampleSet{}, 0.2, 0), PreconditionError);
}

} // namespace
