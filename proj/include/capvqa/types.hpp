// Copyright (C) 2026 The capvqa Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace capvqa {

using QuestionId = std::int64_t;
using ImageId = std::int64_t;

/// Number of crowd answers attached to every question.
inline constexpr std::size_t kAnswersPerQuestion = 10;
/// Number of reference captions per image in the gold caption set.
inline constexpr std::size_t kGoldCaptionsPerImage = 5;

struct QuestionRecord {
    QuestionId question_id = 0;
    ImageId image_id = 0;
    std::string text;
};

/// One question's crowd answers, already normalized. Repetitions are
/// meaningful: the multiplicity of an answer is its vote count.
struct AnnotationRecord {
    QuestionId question_id = 0;
    ImageId image_id = 0;
    std::vector<std::string> answers;
    /// Single consensus answer when the source provides one
    /// ("multiple_choice_answer" in the public layout).
    std::optional<std::string> consensus_answer;
};

enum class CaptionSource { generated, gold };

struct CaptionRecord {
    ImageId image_id = 0;
    std::string text;
    CaptionSource source = CaptionSource::generated;
    std::optional<int> gold_index;
};

enum class SplitTag { train, val, test };

inline const char* to_string(SplitTag t) {
    switch (t) {
        case SplitTag::train: return "train";
        case SplitTag::val: return "val";
        case SplitTag::test: return "test";
    }
    return "?";
}

inline const char* to_string(CaptionSource s) { return s == CaptionSource::gold ? "gold" : "generated"; }

} // namespace capvqa
