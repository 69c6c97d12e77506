// Copyright (C) 2026 The capvqa Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cctype>
#include <cstdint>
#include <span>
#include <utility>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "capvqa/error.hpp"

namespace capvqa {

enum class InputStyle {
    /// Encoder pair input: "[CLS] caption [SEP] question [SEP]".
    pair_encoding,
    /// Text-to-text prompt: "caption: {caption} question: {question}".
    prefixed_generative,
};

inline constexpr std::string_view kCaptionPrefix = "caption:";
inline constexpr std::string_view kQuestionPrefix = "question:";
inline constexpr std::string_view kClsToken = "[CLS]";
inline constexpr std::string_view kSepToken = "[SEP]";

/// Model-facing text for one (caption, question) pair. The parts are kept so
/// tokenizers can recover segment boundaries without re-parsing `text`.
struct SerializedInput {
    std::string text;
    InputStyle style = InputStyle::pair_encoding;
    std::optional<std::string> caption;
    std::string question;
};

/// Caption first, then question. With no caption (question-only ablation)
/// the caption segment and its prefix are left out entirely.
inline SerializedInput format_pair_input(const std::optional<std::string>& caption, const std::string& question,
                                         InputStyle style) {
    if (question.empty()) throw PreconditionError("question text must be non-empty");
    SerializedInput in{{}, style, caption, question};
    if (style == InputStyle::prefixed_generative) {
        if (caption) in.text = std::string(kCaptionPrefix) + " " + *caption + " ";
        in.text += std::string(kQuestionPrefix) + " " + question;
    } else {
        in.text = std::string(kClsToken) + " ";
        if (caption) in.text += *caption + " " + std::string(kSepToken) + " ";
        in.text += question + " " + std::string(kSepToken);
    }
    return in;
}

enum class SegmentKind { special, caption, question };

/// Half-open token range [begin, end).
struct TokenSpan {
    SegmentKind kind = SegmentKind::special;
    std::size_t begin = 0;
    std::size_t end = 0;
};

struct TokenizedInput {
    std::vector<int> tokens;
    /// Non-overlapping, in order, and covering every token.
    std::vector<TokenSpan> segments;

    std::size_t n_t() const noexcept { return tokens.size(); }
};

/// Hashing word-level tokenizer for the toy encoders. Words are maximal runs
/// of ASCII alphanumerics or non-ASCII bytes (lowercased); every other
/// printable byte is its own token. Ids below `kFirstWordId` are reserved for
/// markers; word ids are salted by segment so caption and question words land
/// in different buckets.
class HashTokenizer {
public:
    static constexpr int kCls = 1;
    static constexpr int kSep = 2;
    static constexpr int kCaptionMarker = 3;
    static constexpr int kQuestionMarker = 4;
    static constexpr int kFirstWordId = 8;

    explicit HashTokenizer(std::size_t n_buckets) : n_buckets_(n_buckets) {
        if (n_buckets <= static_cast<std::size_t>(kFirstWordId))
            throw ConfigError("tokenizer needs more than " + std::to_string(kFirstWordId) + " buckets");
    }

    std::size_t vocab_size() const noexcept { return n_buckets_; }

    TokenizedInput tokenize(const SerializedInput& in) const {
        TokenizedInput out;
        auto open = [&](SegmentKind k) { out.segments.push_back({k, out.tokens.size(), out.tokens.size()}); };
        auto close = [&] { out.segments.back().end = out.tokens.size(); };
        auto marker = [&](int id) {
            open(SegmentKind::special);
            out.tokens.push_back(id);
            close();
        };
        auto words = [&](SegmentKind k, const std::string& text) {
            open(k);
            append_words(text, k == SegmentKind::caption ? 0x0cU : 0x0fU, out.tokens);
            close();
            if (out.segments.back().begin == out.segments.back().end) out.segments.pop_back();
        };

        if (in.style == InputStyle::pair_encoding) {
            marker(kCls);
            if (in.caption) {
                words(SegmentKind::caption, *in.caption);
                marker(kSep);
            }
            words(SegmentKind::question, in.question);
            marker(kSep);
        } else {
            if (in.caption) {
                marker(kCaptionMarker);
                words(SegmentKind::caption, *in.caption);
            }
            marker(kQuestionMarker);
            words(SegmentKind::question, in.question);
        }
        return out;
    }

    /// "[CLS] part [SEP] part [SEP] ..." for inputs assembled from slots.
    TokenizedInput tokenize_segments(std::span<const std::pair<SegmentKind, std::string>> parts) const {
        TokenizedInput out;
        out.segments.push_back({SegmentKind::special, 0, 1});
        out.tokens.push_back(kCls);
        for (const auto& [kind, text] : parts) {
            const auto begin = out.tokens.size();
            append_words(text, kind == SegmentKind::caption ? 0x0cU : 0x0fU, out.tokens);
            if (out.tokens.size() > begin) out.segments.push_back({kind, begin, out.tokens.size()});
            out.segments.push_back({SegmentKind::special, out.tokens.size(), out.tokens.size() + 1});
            out.tokens.push_back(kSep);
        }
        return out;
    }

private:
    void append_words(const std::string& text, unsigned salt, std::vector<int>& tokens) const {
        std::string word;
        auto flush = [&] {
            if (!word.empty()) tokens.push_back(bucket(word, salt));
            word.clear();
        };
        for (char ch : text) {
            const auto c = static_cast<unsigned char>(ch);
            if (std::isalnum(c) || c >= 0x80) {
                word.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
            } else {
                flush();
                if (c > ' ' && c < 0x7f) tokens.push_back(bucket(std::string(1, ch), salt));
            }
        }
        flush();
    }

    int bucket(const std::string& word, unsigned salt) const {
        std::uint64_t h = 0xcbf29ce484222325ULL ^ salt;
        for (unsigned char c : word) h = (h ^ c) * 0x100000001b3ULL;
        const auto span = n_buckets_ - static_cast<std::size_t>(kFirstWordId);
        return kFirstWordId + static_cast<int>(h % span);
    }

    std::size_t n_buckets_;
};

} // namespace capvqa
