// Copyright (C) 2026 The capvqa Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "capvqa/dataset.hpp"
#include "capvqa/json_io.hpp"
#include "capvqa/modeling/regions.hpp"
#include "capvqa/rng.hpp"
#include "capvqa/types.hpp"

namespace capvqa {

/// Small seeded corpora with the same shape as the real data: ten crowd
/// answers per question, a generated caption and five gold captions per
/// image, and per-image region features.
struct SyntheticOptions {
    std::size_t n_questions = 50;
    std::size_t n_images = 25;
    std::size_t n_answers = 10;
    /// Votes for each question's correct answer, in [min_votes, 10].
    int min_votes = 3;
    std::size_t n_regions = 4;
    std::size_t region_dim = 8;
    std::uint64_t seed = 0;
    QuestionId first_question_id = 1000;
    ImageId first_image_id = 1;
};

struct SyntheticCorpus {
    std::vector<QuestionRecord> questions;
    std::vector<AnnotationRecord> annotations;
    std::vector<CaptionRecord> captions;
    RegionStore regions;
    /// Correct answer per question, parallel to `questions`.
    std::vector<std::string> truth;
};

namespace detail {

inline constexpr const char* kSynthAdjectives[] = {"red", "small", "wooden", "striped", "shiny", "old", "green",
                                                   "tall", "round", "fuzzy", "metal", "blue", "broken", "soft"};
inline constexpr const char* kSynthNouns[] = {"horse", "boat", "cake", "kite", "lamp", "train", "chair", "dog",
                                              "clock", "bench", "vase", "truck", "plate", "bird", "skis", "sofa"};
inline constexpr const char* kSynthAnswers[] = {"pony tail", "hay", "sailing", "birthday", "wind", "electricity",
                                                "coal", "oak", "bone", "time", "park", "flowers", "cargo",
                                                "ceramic", "nest", "snow", "leather", "chocolate", "kitchen", "farm"};

} // namespace detail

inline SyntheticCorpus make_synthetic_corpus(const SyntheticOptions& o) {
    if (o.n_images == 0 || o.n_questions == 0 || o.n_answers < 2 || o.min_votes < 1 || o.min_votes > 10)
        throw ConfigError("invalid synthetic corpus options");
    Rng rng(hash_keys({o.seed, 0x5e7dULL}));
    auto answer_name = [](std::size_t k) {
        constexpr std::size_t n = std::size(detail::kSynthAnswers);
        return k < n ? std::string(detail::kSynthAnswers[k]) : "answer " + std::to_string(k);
    };

    SyntheticCorpus c;
    std::vector<std::string> image_noun(o.n_images);
    for (std::size_t i = 0; i < o.n_images; ++i) {
        const ImageId image = o.first_image_id + static_cast<ImageId>(i);
        const std::string adj = detail::kSynthAdjectives[rng.index(std::size(detail::kSynthAdjectives))];
        image_noun[i] = detail::kSynthNouns[rng.index(std::size(detail::kSynthNouns))];
        c.captions.push_back({image, "a " + adj + " " + image_noun[i] + " in scene " + std::to_string(i),
                              CaptionSource::generated, std::nullopt});
        for (int g = 0; g < 5; ++g)
            c.captions.push_back({image,
                                  "photo " + std::to_string(g) + " of a " + adj + " " + image_noun[i] + " number " +
                                      std::to_string(i),
                                  CaptionSource::gold, g});
        RegionFeatureSet r;
        r.image_id = image;
        r.features = Eigen::MatrixXd::NullaryExpr(static_cast<Eigen::Index>(o.n_regions),
                                                  static_cast<Eigen::Index>(o.region_dim),
                                                  [&] { return rng.uniform(-1.0, 1.0); });
        c.regions.insert(std::move(r));
    }

    for (std::size_t q = 0; q < o.n_questions; ++q) {
        const QuestionId qid = o.first_question_id + static_cast<QuestionId>(q);
        const std::size_t img = q % o.n_images;
        const ImageId image = o.first_image_id + static_cast<ImageId>(img);
        const std::string adj = detail::kSynthAdjectives[rng.index(std::size(detail::kSynthAdjectives))];
        c.questions.push_back({qid, image,
                               "what goes with the " + adj + " " + image_noun[img] + " item " + std::to_string(q) + "?"});

        const std::size_t truth = rng.index(o.n_answers);
        c.truth.push_back(answer_name(truth));
        const int votes = o.min_votes + static_cast<int>(rng.index(static_cast<std::size_t>(11 - o.min_votes)));
        AnnotationRecord a{qid, image, {}, std::nullopt};
        for (int v = 0; v < votes; ++v) a.answers.push_back(answer_name(truth));
        while (a.answers.size() < kAnswersPerQuestion) {
            std::size_t k = rng.index(o.n_answers);
            if (k == truth) k = (k + 1) % o.n_answers;
            a.answers.push_back(answer_name(k));
        }
        Rng shuffle_rng(hash_keys({o.seed, static_cast<std::uint64_t>(qid)}));
        shuffle_rng.shuffle(a.answers.begin(), a.answers.end());
        c.annotations.push_back(std::move(a));
    }
    return c;
}

inline std::string questions_to_json(std::span<const QuestionRecord> qs) {
    Json arr = Json::array();
    for (const auto& q : qs) arr.push_back({{"question_id", q.question_id}, {"image_id", q.image_id}, {"question", q.text}});
    return Json{{"questions", arr}}.dump(1) + "\n";
}

inline std::string annotations_to_json(std::span<const AnnotationRecord> as) {
    Json arr = Json::array();
    for (const auto& a : as) {
        Json answers = Json::array();
        for (std::size_t i = 0; i < a.answers.size(); ++i)
            answers.push_back({{"answer", a.answers[i]}, {"answer_id", i + 1}});
        Json e{{"question_id", a.question_id}, {"image_id", a.image_id}, {"answers", answers}};
        if (a.consensus_answer) e["multiple_choice_answer"] = *a.consensus_answer;
        arr.push_back(std::move(e));
    }
    return Json{{"annotations", arr}}.dump(1) + "\n";
}

/// Writes questions.json, annotations.json, captions.json and regions/.
inline void write_synthetic_corpus(const SyntheticCorpus& c, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir / "regions");
    detail::write_file(dir / "questions.json", questions_to_json(c.questions));
    detail::write_file(dir / "annotations.json", annotations_to_json(c.annotations));
    detail::write_file(dir / "captions.json", captions_to_json(c.captions));
    std::set<ImageId> images;
    for (const auto& q : c.questions) images.insert(q.image_id);
    for (auto id : images) detail::write_file(region_file(dir / "regions", id), format_regions(c.regions.at(id)));
}

} // namespace capvqa
