// Copyright (C) 2026 The capvqa Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "capvqa/error.hpp"
#include "capvqa/normalize.hpp"
#include "capvqa/types.hpp"

namespace capvqa {

/// How a predicted answer is scored against its ten crowd answers.
enum class MetricVariant {
    /// min(x / 3, 1) where x counts matching crowd answers.
    literal,
    /// Mean of min(x_i / 3, 1) over the ten leave-one-annotator-out subsets,
    /// as in the official VQA evaluation script.
    official_subsets,
};

/// Occurrences of `normalized` among the annotation's (already normalized) answers.
inline int answer_count(std::string_view normalized, const AnnotationRecord& annotation) {
    return static_cast<int>(std::count(annotation.answers.begin(), annotation.answers.end(), normalized));
}

/// VQA accuracy of one answer. An empty (after normalization) answer scores 0.
inline double vqa_accuracy(std::string_view answer, const AnnotationRecord& annotation,
                           MetricVariant variant = MetricVariant::literal) {
    const std::string a = normalize_answer(answer);
    if (a.empty()) return 0.0;
    const int x = answer_count(a, annotation);
    if (variant == MetricVariant::literal) return std::min(x / 3.0, 1.0);

    // Leaving out annotator i removes one match exactly when answer i matches.
    const auto n = annotation.answers.size();
    if (n == 0) return 0.0;
    double total = 0.0;
    for (const auto& held_out : annotation.answers) {
        const int matches = x - (held_out == a ? 1 : 0);
        total += std::min(matches / 3.0, 1.0);
    }
    return total / static_cast<double>(n);
}

struct EvalReport {
    /// Score of every annotated question; unanswered questions score 0.
    std::map<QuestionId, double> per_question;
    double mean_score = 0.0;
    std::size_t n = 0;
    std::vector<QuestionId> unanswered;
};

/// Score predictions against every annotated question. Questions without a
/// prediction count as 0 and are listed in `unanswered`. The mean is reduced
/// in question-id order so it does not depend on input order.
inline EvalReport evaluate_predictions(const std::map<QuestionId, std::string>& predictions,
                                       std::span<const AnnotationRecord> annotations,
                                       MetricVariant variant = MetricVariant::literal) {
    std::unordered_map<QuestionId, const AnnotationRecord*> by_id;
    by_id.reserve(annotations.size());
    for (const auto& a : annotations) by_id.emplace(a.question_id, &a);

    std::vector<QuestionId> unknown;
    for (const auto& [qid, answer] : predictions)
        if (!by_id.count(qid)) unknown.push_back(qid);
    if (!unknown.empty()) {
        std::string ids;
        for (std::size_t i = 0; i < unknown.size() && i < 20; ++i) ids += (i ? ", " : "") + std::to_string(unknown[i]);
        throw ValidationError("predictions for unknown question_id: " + ids);
    }

    EvalReport report;
    for (const auto& a : annotations) {
        auto p = predictions.find(a.question_id);
        if (p == predictions.end()) {
            report.per_question[a.question_id] = 0.0;
            report.unanswered.push_back(a.question_id);
        } else {
            report.per_question[a.question_id] = vqa_accuracy(p->second, a, variant);
        }
    }
    std::sort(report.unanswered.begin(), report.unanswered.end());
    report.n = report.per_question.size();
    double sum = 0.0;
    for (const auto& [qid, s] : report.per_question) sum += s;
    report.mean_score = report.n ? sum / static_cast<double>(report.n) : 0.0;
    return report;
}

struct RunAggregate {
    std::vector<double> run_scores;
    double mean = 0.0;
    /// Sample standard deviation (n - 1); 0 for a single run.
    double std = 0.0;
};

inline RunAggregate aggregate_scores(std::span<const double> scores) {
    if (scores.empty()) throw PreconditionError("aggregate_runs needs at least one run");
    RunAggregate agg;
    agg.run_scores.assign(scores.begin(), scores.end());
    double sum = 0.0;
    for (double s : scores) sum += s;
    agg.mean = sum / static_cast<double>(scores.size());
    // Rounding can push the mean a hair outside [min, max] for identical runs.
    const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
    agg.mean = std::clamp(agg.mean, *lo, *hi);
    if (scores.size() > 1) {
        double ss = 0.0;
        for (double s : scores) ss += (s - agg.mean) * (s - agg.mean);
        agg.std = std::sqrt(ss / static_cast<double>(scores.size() - 1));
    }
    return agg;
}

inline RunAggregate aggregate_runs(std::span<const EvalReport> reports) {
    std::vector<double> scores;
    scores.reserve(reports.size());
    for (const auto& r : reports) scores.push_back(r.mean_score);
    return aggregate_scores(scores);
}

} // namespace capvqa
