// Copyright (C) 2026 The capvqa Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "capvqa/error.hpp"
#include "capvqa/json_io.hpp"
#include "capvqa/normalize.hpp"
#include "capvqa/rng.hpp"
#include "capvqa/types.hpp"

namespace capvqa {

/// Fixed answer class space. Class index = position in `answers()`.
class AnswerVocab {
public:
    AnswerVocab() = default;

    explicit AnswerVocab(std::vector<std::string> answers) : answers_(std::move(answers)) {
        index_.reserve(answers_.size());
        for (std::size_t i = 0; i < answers_.size(); ++i) {
            const auto& a = answers_[i];
            if (a.empty()) throw ValidationError("vocabulary entry " + std::to_string(i) + " is empty");
            if (normalize_answer(a) != a)
                throw ValidationError("vocabulary entry " + std::to_string(i) + " is not normalized: '" + a + "'");
            if (!index_.emplace(a, static_cast<int>(i)).second)
                throw ValidationError("duplicate vocabulary entry '" + a + "'");
        }
    }

    std::size_t size() const noexcept { return answers_.size(); }
    bool empty() const noexcept { return answers_.empty(); }

    const std::string& answer(std::size_t index) const { return answers_.at(index); }
    const std::vector<std::string>& answers() const noexcept { return answers_; }

    std::optional<int> index_of(const std::string& normalized) const {
        auto it = index_.find(normalized);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    bool contains(const std::string& normalized) const { return index_.count(normalized) != 0; }

    /// FNV-1a over the ordered entries; equal fingerprints mean the same class space.
    std::string fingerprint() const {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (const auto& a : answers_) {
            for (unsigned char c : a) h = (h ^ c) * 0x100000001b3ULL;
            h = (h ^ 0x0a) * 0x100000001b3ULL;
        }
        std::ostringstream ss;
        ss << std::hex;
        ss.width(16);
        ss.fill('0');
        ss << h;
        return ss.str();
    }

    /// One answer per line; line number (0-based) is the class index.
    std::string to_text() const {
        std::string out;
        for (const auto& a : answers_) out += a + "\n";
        return out;
    }

    static AnswerVocab parse(std::string_view text) {
        std::vector<std::string> answers;
        std::size_t pos = 0;
        while (pos < text.size()) {
            auto end = text.find('\n', pos);
            if (end == std::string_view::npos) end = text.size();
            std::string line(text.substr(pos, end - pos));
            if (!line.empty() && line.back() == '\r') line.pop_back();
            answers.push_back(std::move(line));
            pos = end + 1;
        }
        return AnswerVocab(std::move(answers));
    }

    static AnswerVocab load(const std::filesystem::path& path) { return parse(detail::read_file(path)); }

    friend bool operator==(const AnswerVocab& a, const AnswerVocab& b) { return a.answers_ == b.answers_; }

private:
    std::vector<std::string> answers_;
    std::unordered_map<std::string, int> index_;
};

/// What one unit of answer frequency is when building the vocabulary.
enum class VocabCountUnit {
    /// Every crowd answer occurrence counts once.
    annotations,
    /// Each question contributes one vote for its consensus answer (the
    /// source's multiple_choice_answer, else its most frequent answer with
    /// lexicographic tie-break).
    consensus,
};

/// Exactly one of the two cutoffs must be set.
struct VocabCutoff {
    std::optional<std::size_t> min_count;
    std::optional<std::size_t> max_size;
    VocabCountUnit unit = VocabCountUnit::annotations;
};

/// Distinct non-empty answers of one question with their vote counts, ordered
/// by answer string.
inline std::map<std::string, int> answer_counts(const AnnotationRecord& annotation) {
    std::map<std::string, int> counts;
    for (const auto& a : annotation.answers)
        if (!a.empty()) ++counts[a];
    return counts;
}

inline std::optional<std::string> consensus_answer(const AnnotationRecord& annotation) {
    if (annotation.consensus_answer && !annotation.consensus_answer->empty()) return annotation.consensus_answer;
    const auto counts = answer_counts(annotation);
    if (counts.empty()) return std::nullopt;
    // std::map iteration is lexicographic, so the first maximum wins ties.
    auto best = counts.begin();
    for (auto it = counts.begin(); it != counts.end(); ++it)
        if (it->second > best->second) best = it;
    return best->first;
}

/// Most frequent normalized answers, ordered by count (descending) then
/// answer string (ascending). Empty answers never enter the vocabulary.
inline AnswerVocab build_answer_vocab(std::span<const AnnotationRecord> annotations, const VocabCutoff& cutoff) {
    if (cutoff.min_count.has_value() == cutoff.max_size.has_value())
        throw ConfigError("vocabulary build needs exactly one of min_count or max_size");
    if (annotations.empty()) throw PreconditionError("vocabulary build needs at least one annotation");

    std::unordered_map<std::string, std::size_t> freq;
    for (const auto& ann : annotations) {
        if (cutoff.unit == VocabCountUnit::annotations) {
            for (const auto& a : ann.answers)
                if (!a.empty()) ++freq[a];
        } else if (auto c = consensus_answer(ann)) {
            ++freq[*c];
        }
    }

    std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& x, const auto& y) {
        return x.second != y.second ? x.second > y.second : x.first < y.first;
    });

    std::vector<std::string> answers;
    for (const auto& [answer, count] : ranked) {
        if (cutoff.max_size && answers.size() >= *cutoff.max_size) break;
        if (cutoff.min_count && count < *cutoff.min_count) break;
        answers.push_back(answer);
    }
    return AnswerVocab(std::move(answers));
}

// ---------------------------------------------------------------------------
// Soft labels
// ---------------------------------------------------------------------------

/// Sparse target distribution over vocabulary classes.
struct SoftLabel {
    QuestionId question_id = 0;
    /// (class index, probability), ascending by class index.
    std::vector<std::pair<int, double>> entries;
    /// Every annotated answer was out of vocabulary; `entries` is empty.
    bool all_oov = false;

    double total() const {
        double s = 0.0;
        for (const auto& [k, p] : entries) s += p;
        return s;
    }

    template <class Vector>
    void scatter_into(Vector& dense) const {
        for (const auto& [k, p] : entries) dense[k] = p;
    }

    std::vector<double> to_dense(std::size_t n_label) const {
        std::vector<double> dense(n_label, 0.0);
        scatter_into(dense);
        return dense;
    }
};

/// Unnormalized per-class weights min(count / 3, 1) for the in-vocabulary answers.
inline std::vector<std::pair<int, double>> soft_label_weights(const AnnotationRecord& annotation,
                                                              const AnswerVocab& vocab) {
    std::vector<std::pair<int, double>> weights;
    for (const auto& [answer, count] : answer_counts(annotation)) {
        if (auto k = vocab.index_of(answer)) weights.emplace_back(*k, std::min(count / 3.0, 1.0));
    }
    std::sort(weights.begin(), weights.end());
    return weights;
}

/// Target distribution proportional to each answer's VQA accuracy.
/// Out-of-vocabulary answers are dropped and the remainder renormalized.
inline SoftLabel soft_label(const AnnotationRecord& annotation, const AnswerVocab& vocab) {
    SoftLabel label;
    label.question_id = annotation.question_id;
    label.entries = soft_label_weights(annotation, vocab);
    double total = 0.0;
    for (const auto& [k, w] : label.entries) total += w;
    if (label.entries.empty() || total <= 0.0) {
        label.entries.clear();
        label.all_oov = true;
        return label;
    }
    for (auto& [k, w] : label.entries) w /= total;
    return label;
}

/// Soft-label cache, one JSON object per line:
///   {"question_id": int, "labels": [[class, prob], ...], "all_oov": bool}
/// The first line records the vocabulary: {"vocab_fingerprint": str, "n_label": int}.
inline std::string soft_labels_to_jsonl(std::span<const SoftLabel> labels, const AnswerVocab& vocab) {
    std::string out = Json{{"vocab_fingerprint", vocab.fingerprint()}, {"n_label", vocab.size()}}.dump() + "\n";
    std::vector<const SoftLabel*> sorted;
    for (const auto& l : labels) sorted.push_back(&l);
    std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->question_id < b->question_id; });
    for (const auto* l : sorted) {
        Json pairs = Json::array();
        for (const auto& [k, p] : l->entries) pairs.push_back(Json::array({k, p}));
        out += Json{{"question_id", l->question_id}, {"labels", pairs}, {"all_oov", l->all_oov}}.dump() + "\n";
    }
    return out;
}

inline std::map<QuestionId, SoftLabel> parse_soft_labels(std::string_view text, const AnswerVocab& vocab) {
    std::map<QuestionId, SoftLabel> out;
    std::size_t line_no = 0, pos = 0;
    bool header = true;
    while (pos < text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        const auto line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (line.empty()) continue;
        Json j;
        try {
            j = Json::parse(line);
        } catch (const Json::parse_error& e) {
            throw ParseError(std::string("soft-label cache: ") + e.what(), line_no);
        }
        if (header) {
            header = false;
            if (!j.contains("vocab_fingerprint") || j["vocab_fingerprint"] != vocab.fingerprint())
                throw ValidationError("soft-label cache was built for a different vocabulary");
            continue;
        }
        try {
            SoftLabel l;
            l.question_id = j.at("question_id").get<QuestionId>();
            l.all_oov = j.at("all_oov").get<bool>();
            for (const auto& pr : j.at("labels")) {
                const int k = pr.at(0).get<int>();
                if (k < 0 || static_cast<std::size_t>(k) >= vocab.size()) throw ParseError("class index out of range", line_no);
                l.entries.emplace_back(k, pr.at(1).get<double>());
            }
            if (!out.emplace(l.question_id, std::move(l)).second) throw ParseError("duplicate question_id", line_no);
        } catch (const Json::exception& e) {
            throw ParseError(std::string("soft-label cache: ") + e.what(), line_no);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Generative targets
// ---------------------------------------------------------------------------

/// Answers a generative model may be trained towards for one question.
struct TargetPool {
    QuestionId question_id = 0;
    /// Lexicographically ordered.
    std::vector<std::string> eligible;
    bool discarded = true;
};

/// Keep answers given by at least two annotators; a question with none is
/// discarded from generative training.
inline TargetPool select_generative_targets(const AnnotationRecord& annotation) {
    TargetPool pool;
    pool.question_id = annotation.question_id;
    for (const auto& [answer, count] : answer_counts(annotation))
        if (count >= 2) pool.eligible.push_back(answer);
    pool.discarded = pool.eligible.empty();
    return pool;
}

/// Training target for one question in one epoch: uniform over the eligible
/// answers and a pure function of (question_id, epoch, seed).
inline const std::string& sample_target(const TargetPool& pool, std::uint64_t epoch, std::uint64_t seed) {
    if (pool.discarded || pool.eligible.empty())
        throw PreconditionError("question " + std::to_string(pool.question_id) + " has no eligible target");
    const auto k = bounded_index(hash_keys({seed, static_cast<std::uint64_t>(pool.question_id), epoch, 0x7a59ULL}),
                                 pool.eligible.size());
    return pool.eligible[k];
}

} // namespace capvqa
