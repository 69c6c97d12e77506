// Copyright (C) 2026 The capvqa Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "capvqa/error.hpp"
#include "capvqa/fusion.hpp"
#include "capvqa/json_io.hpp"
#include "capvqa/metrics.hpp"
#include "capvqa/modeling/head.hpp"
#include "capvqa/types.hpp"

namespace capvqa {

using Predictions = std::map<QuestionId, std::string>;

namespace detail {

/// Calls f(line_no, json) for every non-blank line of a JSON Lines document.
template <class F>
void for_each_jsonl(std::string_view text, std::string_view source, F&& f) {
    std::size_t pos = 0, line_no = 0;
    while (pos < text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        auto line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
        Json j;
        try {
            j = Json::parse(line);
        } catch (const Json::parse_error& e) {
            throw ParseError(std::string(source) + ": malformed JSON: " + e.what(), line_no);
        }
        try {
            f(line_no, j);
        } catch (const Json::exception& e) {
            throw ParseError(std::string(source) + ": " + e.what(), line_no);
        }
    }
}

} // namespace detail

// ---------------------------------------------------------------------------
// Prediction file (JSON Lines, ascending question_id):
//   {"question_id": 1, "answer": "pony tail"}
// ---------------------------------------------------------------------------

inline std::string format_predictions(const Predictions& predictions) {
    std::string out;
    for (const auto& [qid, answer] : predictions) out += Json{{"question_id", qid}, {"answer", answer}}.dump() + "\n";
    return out;
}

inline Predictions parse_predictions(std::string_view text, std::string_view source = "predictions") {
    Predictions out;
    detail::for_each_jsonl(text, source, [&](std::size_t line, const Json& j) {
        if (!j.is_object()) throw ParseError(std::string(source) + ": expected an object", line);
        auto qid = j.find("question_id");
        auto ans = j.find("answer");
        if (qid == j.end() || !qid->is_number_integer() || ans == j.end() || !ans->is_string())
            throw ParseError(std::string(source) + ": entries need integer 'question_id' and string 'answer'", line);
        if (!out.emplace(qid->get<QuestionId>(), ans->get<std::string>()).second)
            throw ParseError(std::string(source) + ": duplicate question_id " + std::to_string(qid->get<QuestionId>()),
                             line);
    });
    return out;
}

inline void write_predictions(const Predictions& predictions, const std::filesystem::path& path) {
    detail::write_file(path, format_predictions(predictions));
}

inline Predictions read_predictions(const std::filesystem::path& path) {
    return parse_predictions(detail::read_file(path), path.string());
}

// ---------------------------------------------------------------------------
// Distribution dump (JSON Lines). First line describes the class space:
//   {"n_label": 3, "vocab_fingerprint": "..."}
// then one line per question, ascending question_id:
//   {"question_id": 1, "probs": [0.2, 0.5, 0.3]}
// ---------------------------------------------------------------------------

using Distributions = std::map<QuestionId, PredictionDistribution>;

inline std::string format_distributions(const Distributions& dists, std::size_t n_label, const std::string& fingerprint) {
    std::string out = Json{{"n_label", n_label}, {"vocab_fingerprint", fingerprint}}.dump() + "\n";
    for (const auto& [qid, d] : dists) {
        if (d.size() != n_label) throw ValidationError("distribution for question " + std::to_string(qid) + " has the wrong size");
        out += Json{{"question_id", qid}, {"probs", d.probs}}.dump() + "\n";
    }
    return out;
}

struct DistributionFile {
    std::size_t n_label = 0;
    std::string vocab_fingerprint;
    Distributions distributions;
};

inline DistributionFile parse_distributions(std::string_view text, std::string_view source = "distributions") {
    DistributionFile file;
    bool header = true;
    detail::for_each_jsonl(text, source, [&](std::size_t line, const Json& j) {
        if (header) {
            header = false;
            file.n_label = j.at("n_label").get<std::size_t>();
            file.vocab_fingerprint = j.value("vocab_fingerprint", "");
            return;
        }
        PredictionDistribution d;
        const auto qid = j.at("question_id").get<QuestionId>();
        d.probs = j.at("probs").get<std::vector<double>>();
        d.vocab_fingerprint = file.vocab_fingerprint;
        if (d.size() != file.n_label)
            throw ParseError(std::string(source) + ": expected " + std::to_string(file.n_label) + " probabilities", line);
        if (!d.is_valid(1e-4))
            throw ParseError(std::string(source) + ": probabilities must be non-negative and sum to 1", line);
        if (!file.distributions.emplace(qid, std::move(d)).second)
            throw ParseError(std::string(source) + ": duplicate question_id " + std::to_string(qid), line);
    });
    if (header) throw ParseError(std::string(source) + ": missing header line", 1);
    return file;
}

inline DistributionFile read_distributions(const std::filesystem::path& path) {
    return parse_distributions(detail::read_file(path), path.string());
}

// ---------------------------------------------------------------------------
// Reports (JSON)
// ---------------------------------------------------------------------------

inline Json report_to_json(const EvalReport& r, MetricVariant variant = MetricVariant::literal) {
    Json per = Json::array();
    for (const auto& [qid, s] : r.per_question) per.push_back(Json{{"question_id", qid}, {"score", s}});
    return Json{{"metric", variant == MetricVariant::literal ? "literal" : "official_subsets"},
                {"mean_score", r.mean_score},
                {"n", r.n},
                {"unanswered", r.unanswered},
                {"per_question", per}};
}

inline EvalReport report_from_json(const Json& j) {
    EvalReport r;
    r.mean_score = j.at("mean_score").get<double>();
    r.n = j.at("n").get<std::size_t>();
    r.unanswered = j.at("unanswered").get<std::vector<QuestionId>>();
    for (const auto& e : j.at("per_question")) r.per_question[e.at("question_id").get<QuestionId>()] = e.at("score").get<double>();
    return r;
}

inline Json aggregate_to_json(const RunAggregate& a) {
    return Json{{"run_scores", a.run_scores}, {"mean", a.mean}, {"std", a.std}, {"std_kind", "sample"}};
}

/// Fused scores are raw products and do not sum to 1.
inline std::string format_fused(const std::map<QuestionId, FusedPrediction>& fused) {
    std::string out;
    for (const auto& [qid, f] : fused)
        out += Json{{"question_id", qid}, {"argmax", f.argmax}, {"scores", f.scores}, {"provenance", f.provenance}}.dump() + "\n";
    return out;
}

} // namespace capvqa
