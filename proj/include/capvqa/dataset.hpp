// Copyright (C) 2026 The capvqa Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "capvqa/error.hpp"
#include "capvqa/json_io.hpp"
#include "capvqa/normalize.hpp"
#include "capvqa/rng.hpp"
#include "capvqa/types.hpp"

namespace capvqa {

// ---------------------------------------------------------------------------
// Document formats
//
// questions:   {"questions":   [{"question_id": int, "image_id": int, "question": str}, ...]}
// annotations: {"annotations": [{"question_id": int, "image_id": int,
//                                "answers": [str | {"answer": str, ...}] x10,
//                                "multiple_choice_answer": str (optional)}, ...]}
// captions:    {"captions":    [{"image_id": int, "caption": str,
//                                "source": "generated" | "gold", "gold_index": int}, ...]}
//
// Question and annotation documents mirror the public VQA layout, so existing
// dumps load unchanged. Extra fields are ignored.
// ---------------------------------------------------------------------------

namespace detail {

inline std::string record_where(std::string_view source, std::size_t index, const Json& entry) {
    std::string where = std::string(source) + ": record " + std::to_string(index);
    if (entry.is_object()) {
        auto it = entry.find("question_id");
        if (it != entry.end() && it->is_number_integer())
            where += " (question_id " + std::to_string(it->get<std::int64_t>()) + ")";
    }
    return where;
}

template <class Ids>
std::string join_ids(const Ids& ids, std::size_t limit = 20) {
    std::string out;
    std::size_t n = 0;
    for (const auto& id : ids) {
        if (n == limit) {
            out += ", ... (" + std::to_string(ids.size()) + " total)";
            break;
        }
        if (n++) out += ", ";
        out += std::to_string(id);
    }
    return out;
}

} // namespace detail

inline std::vector<QuestionRecord> parse_questions(std::string_view text, std::string_view source = "questions") {
    const Json doc = detail::parse_json(text, source);
    const Json& entries = detail::require_array(doc, "questions", source);

    std::vector<QuestionRecord> out;
    out.reserve(entries.size());
    std::unordered_set<QuestionId> seen;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const Json& e = entries[i];
        const auto where = detail::record_where(source, i, e);
        if (!e.is_object()) throw ParseError(where + ": expected an object");
        QuestionRecord q;
        q.question_id = detail::require_int(e, "question_id", where);
        q.image_id = detail::require_int(e, "image_id", where);
        q.text = detail::require_string(e, "question", where);
        if (q.text.empty()) throw ValidationError(where + ": empty question text");
        if (!seen.insert(q.question_id).second)
            throw ValidationError(std::string(source) + ": duplicate question_id " + std::to_string(q.question_id));
        out.push_back(std::move(q));
    }
    return out;
}

inline std::vector<QuestionRecord> load_questions(const std::filesystem::path& path) {
    return parse_questions(detail::read_file(path), path.string());
}

/// Answers are normalized on load. Every entry must carry exactly ten answers;
/// all offending question ids are reported together.
inline std::vector<AnnotationRecord> parse_annotations(std::string_view text, std::string_view source = "annotations") {
    const Json doc = detail::parse_json(text, source);
    const Json& entries = detail::require_array(doc, "annotations", source);

    std::vector<AnnotationRecord> out;
    out.reserve(entries.size());
    std::unordered_set<QuestionId> seen;
    std::vector<QuestionId> wrong_count;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const Json& e = entries[i];
        const auto where = detail::record_where(source, i, e);
        if (!e.is_object()) throw ParseError(where + ": expected an object");
        AnnotationRecord a;
        a.question_id = detail::require_int(e, "question_id", where);
        a.image_id = detail::require_int(e, "image_id", where);
        auto it = e.find("answers");
        if (it == e.end() || !it->is_array()) throw ParseError(where + ": missing array 'answers'");
        for (const Json& ans : *it) {
            if (ans.is_string()) {
                a.answers.push_back(normalize_answer(ans.get<std::string>()));
            } else if (ans.is_object()) {
                a.answers.push_back(normalize_answer(detail::require_string(ans, "answer", where)));
            } else {
                throw ParseError(where + ": answer entries must be strings or objects");
            }
        }
        if (auto mc = e.find("multiple_choice_answer"); mc != e.end() && mc->is_string())
            a.consensus_answer = normalize_answer(mc->get<std::string>());
        if (a.answers.size() != kAnswersPerQuestion) wrong_count.push_back(a.question_id);
        if (!seen.insert(a.question_id).second)
            throw ValidationError(std::string(source) + ": duplicate question_id " + std::to_string(a.question_id));
        out.push_back(std::move(a));
    }
    if (!wrong_count.empty())
        throw ValidationError(std::string(source) + ": entries without exactly " + std::to_string(kAnswersPerQuestion) +
                              " answers, question_id: " + detail::join_ids(wrong_count));
    return out;
}

inline std::vector<AnnotationRecord> load_annotations(const std::filesystem::path& path) {
    return parse_annotations(detail::read_file(path), path.string());
}

inline void validate_caption(const CaptionRecord& c, const std::string& where) {
    if (c.text.empty()) throw ValidationError(where + ": empty caption text");
    if (c.source == CaptionSource::gold) {
        if (!c.gold_index || *c.gold_index < 0 || *c.gold_index >= static_cast<int>(kGoldCaptionsPerImage))
            throw ValidationError(where + ": gold caption needs gold_index in [0,5)");
    } else if (c.gold_index) {
        throw ValidationError(where + ": gold_index is only valid for gold captions");
    }
}

inline std::vector<CaptionRecord> parse_captions(std::string_view text, std::string_view source = "captions") {
    const Json doc = detail::parse_json(text, source);
    const Json& entries = detail::require_array(doc, "captions", source);

    std::vector<CaptionRecord> out;
    out.reserve(entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const Json& e = entries[i];
        const auto where = std::string(source) + ": record " + std::to_string(i);
        if (!e.is_object()) throw ParseError(where + ": expected an object");
        CaptionRecord c;
        c.image_id = detail::require_int(e, "image_id", where);
        c.text = detail::require_string(e, "caption", where);
        const std::string src = e.contains("source") ? detail::require_string(e, "source", where) : "generated";
        if (src == "gold") c.source = CaptionSource::gold;
        else if (src == "generated") c.source = CaptionSource::generated;
        else throw ParseError(where + ": unknown caption source '" + src + "'");
        if (e.contains("gold_index")) c.gold_index = static_cast<int>(detail::require_int(e, "gold_index", where));
        validate_caption(c, where);
        out.push_back(std::move(c));
    }
    return out;
}

inline std::vector<CaptionRecord> load_captions(const std::filesystem::path& path) {
    return parse_captions(detail::read_file(path), path.string());
}

inline std::string captions_to_json(std::span<const CaptionRecord> captions) {
    Json arr = Json::array();
    for (const auto& c : captions) {
        Json e{{"image_id", c.image_id}, {"caption", c.text}, {"source", to_string(c.source)}};
        if (c.gold_index) e["gold_index"] = *c.gold_index;
        arr.push_back(std::move(e));
    }
    return Json{{"captions", arr}}.dump(1) + "\n";
}

/// COCO caption annotations ({"annotations": [{"image_id", "caption", "id"}]})
/// as gold captions. Per image the first five by annotation id are kept.
inline std::vector<CaptionRecord> parse_coco_captions(std::string_view text, std::string_view source = "coco captions") {
    const Json doc = detail::parse_json(text, source);
    const Json& entries = detail::require_array(doc, "annotations", source);
    std::map<ImageId, std::vector<std::pair<std::int64_t, std::string>>> by_image;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const Json& e = entries[i];
        const auto where = std::string(source) + ": record " + std::to_string(i);
        const auto image = detail::require_int(e, "image_id", where);
        const auto id = e.contains("id") ? detail::require_int(e, "id", where) : static_cast<std::int64_t>(i);
        by_image[image].emplace_back(id, detail::require_string(e, "caption", where));
    }
    std::vector<CaptionRecord> out;
    for (auto& [image, caps] : by_image) {
        std::sort(caps.begin(), caps.end());
        for (std::size_t k = 0; k < caps.size() && k < kGoldCaptionsPerImage; ++k)
            out.push_back({image, caps[k].second, CaptionSource::gold, static_cast<int>(k)});
    }
    return out;
}

/// Captions grouped by image: one generated caption and the ordered gold set.
struct CaptionTable {
    std::map<ImageId, CaptionRecord> generated;
    std::map<ImageId, std::vector<std::string>> gold;

    static CaptionTable from_records(std::span<const CaptionRecord> records) {
        CaptionTable t;
        std::map<ImageId, std::map<int, std::string>> gold_idx;
        for (const auto& c : records) {
            if (c.source == CaptionSource::generated) {
                if (!t.generated.emplace(c.image_id, c).second)
                    throw ValidationError("duplicate generated caption for image " + std::to_string(c.image_id));
            } else if (!gold_idx[c.image_id].emplace(*c.gold_index, c.text).second) {
                throw ValidationError("duplicate gold_index for image " + std::to_string(c.image_id));
            }
        }
        for (auto& [image, m] : gold_idx)
            for (auto& [k, text] : m) t.gold[image].push_back(std::move(text));
        return t;
    }
};

// ---------------------------------------------------------------------------
// Joining
// ---------------------------------------------------------------------------

/// Which inputs a model sees. `multimodal` is question + region features;
/// `early_fusion` adds the caption to that.
enum class InputMode { caption, question_only, multimodal, early_fusion };

inline const char* to_string(InputMode m) {
    switch (m) {
        case InputMode::caption: return "caption";
        case InputMode::question_only: return "question_only";
        case InputMode::multimodal: return "multimodal";
        case InputMode::early_fusion: return "early_fusion";
    }
    return "?";
}

inline InputMode input_mode_from_string(std::string_view s) {
    if (s == "caption") return InputMode::caption;
    if (s == "question_only") return InputMode::question_only;
    if (s == "multimodal") return InputMode::multimodal;
    if (s == "early_fusion") return InputMode::early_fusion;
    throw ConfigError("unknown input mode '" + std::string(s) + "'");
}

inline bool mode_uses_caption(InputMode m) { return m == InputMode::caption || m == InputMode::early_fusion; }
inline bool mode_uses_regions(InputMode m) { return m == InputMode::multimodal || m == InputMode::early_fusion; }

struct Example {
    QuestionRecord question;
    AnnotationRecord annotation;
    std::optional<CaptionRecord> caption;
};

struct ExampleSet {
    std::vector<Example> examples;
    SplitTag split = SplitTag::train;
    InputMode mode = InputMode::caption;

    std::size_t size() const noexcept { return examples.size(); }
    bool empty() const noexcept { return examples.empty(); }
};

/// Join questions with their annotations and (depending on mode) their
/// image's caption. Output keeps the order of `questions`.
inline ExampleSet join_examples(std::span<const QuestionRecord> questions, std::span<const AnnotationRecord> annotations,
                                const std::map<ImageId, CaptionRecord>& captions, InputMode mode,
                                SplitTag split = SplitTag::train) {
    std::unordered_map<QuestionId, const AnnotationRecord*> ann_by_id;
    for (const auto& a : annotations) ann_by_id.emplace(a.question_id, &a);

    std::vector<QuestionId> unannotated;
    std::set<ImageId> uncaptioned;
    ExampleSet set;
    set.split = split;
    set.mode = mode;
    set.examples.reserve(questions.size());
    for (const auto& q : questions) {
        auto it = ann_by_id.find(q.question_id);
        if (it == ann_by_id.end()) {
            unannotated.push_back(q.question_id);
            continue;
        }
        Example ex{q, *it->second, std::nullopt};
        if (mode_uses_caption(mode)) {
            auto c = captions.find(q.image_id);
            if (c == captions.end()) {
                uncaptioned.insert(q.image_id);
                continue;
            }
            ex.caption = c->second;
        }
        set.examples.push_back(std::move(ex));
    }
    if (!unannotated.empty())
        throw JoinError("questions without annotations, question_id: " + detail::join_ids(unannotated));
    if (!uncaptioned.empty()) throw JoinError("images without a caption, image_id: " + detail::join_ids(uncaptioned));
    return set;
}

// ---------------------------------------------------------------------------
// Decontamination, gold captions, validation split
// ---------------------------------------------------------------------------

/// Caption-training images with every reserved (evaluation) image removed.
inline std::set<ImageId> decontaminate(const std::set<ImageId>& caption_training_images,
                                       const std::set<ImageId>& reserved_images) {
    std::set<ImageId> out;
    std::set_difference(caption_training_images.begin(), caption_training_images.end(), reserved_images.begin(),
                        reserved_images.end(), std::inserter(out, out.end()));
    return out;
}

struct GoldSelectionOptions {
    /// Accept 1..4 captions instead of failing; a warning is written to `warnings`.
    bool allow_fewer = false;
    std::ostream* warnings = &std::clog;
};

/// One gold caption per (image, seed). Used for the whole run, so the same
/// image always sees the same caption under a given seed.
inline CaptionRecord select_gold_caption(std::span<const std::string> gold_captions, ImageId image_id,
                                         std::uint64_t seed, const GoldSelectionOptions& opts = {}) {
    if (gold_captions.size() != kGoldCaptionsPerImage) {
        if (gold_captions.empty() || gold_captions.size() > kGoldCaptionsPerImage || !opts.allow_fewer)
            throw ValidationError("image " + std::to_string(image_id) + " has " + std::to_string(gold_captions.size()) +
                                  " gold captions, expected " + std::to_string(kGoldCaptionsPerImage));
        if (opts.warnings)
            *opts.warnings << "warning: image " << image_id << " has only " << gold_captions.size()
                           << " gold captions\n";
    }
    const auto k = bounded_index(hash_keys({seed, static_cast<std::uint64_t>(image_id), 0x601dULL}), gold_captions.size());
    return {image_id, gold_captions[k], CaptionSource::gold, static_cast<int>(k)};
}

/// Gold-caption table for one selection seed.
inline std::map<ImageId, CaptionRecord> select_gold_captions(const CaptionTable& table, std::uint64_t seed,
                                                             const GoldSelectionOptions& opts = {}) {
    std::map<ImageId, CaptionRecord> out;
    for (const auto& [image, caps] : table.gold) out.emplace(image, select_gold_caption(caps, image, seed, opts));
    return out;
}

/// Validation size used by split_validation: floor(fraction * n).
inline std::size_t validation_size(std::size_t n, double fraction) {
    // The epsilon keeps exact products such as 0.2 * 10 from flooring to 1.
    return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
}

/// Seeded train/validation split; validation receives floor(fraction * N)
/// examples. Both halves keep the input order.
inline std::pair<ExampleSet, ExampleSet> split_validation(const ExampleSet& examples, double fraction,
                                                          std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError("validation fraction must lie in (0,1)");
    if (examples.empty()) throw PreconditionError("cannot split an empty example set");

    const std::size_t n = examples.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(hash_keys({seed, 0x5b117ULL}));
    rng.shuffle(order.begin(), order.end());

    const std::size_t n_val = validation_size(n, fraction);
    std::vector<bool> is_val(n, false);
    for (std::size_t i = 0; i < n_val; ++i) is_val[order[i]] = true;

    ExampleSet train{{}, SplitTag::train, examples.mode};
    ExampleSet val{{}, SplitTag::val, examples.mode};
    train.examples.reserve(n - n_val);
    val.examples.reserve(n_val);
    for (std::size_t i = 0; i < n; ++i) (is_val[i] ? val : train).examples.push_back(examples.examples[i]);
    return {std::move(train), std::move(val)};
}

// ---------------------------------------------------------------------------
// Split manifest: split name -> question ids. Used to audit which images are
// reserved for evaluation.
//
//   {"splits": {"train": [qid, ...], "val": [...], "test": [...]}}
// ---------------------------------------------------------------------------

struct SplitManifest {
    std::map<std::string, std::vector<QuestionId>> splits;

    static SplitManifest from_sets(std::initializer_list<const ExampleSet*> sets) {
        SplitManifest m;
        for (const auto* s : sets) {
            auto& ids = m.splits[to_string(s->split)];
            for (const auto& ex : s->examples) ids.push_back(ex.question.question_id);
            std::sort(ids.begin(), ids.end());
        }
        return m;
    }

    std::string to_json() const {
        Json splits_obj = Json::object();
        for (const auto& [name, ids] : splits) splits_obj[name] = ids;
        return Json{{"splits", splits_obj}}.dump(1) + "\n";
    }

    static SplitManifest parse(std::string_view text, std::string_view source = "manifest") {
        const Json doc = detail::parse_json(text, source);
        if (!doc.is_object() || !doc.contains("splits") || !doc["splits"].is_object())
            throw ParseError(std::string(source) + ": missing object 'splits'");
        SplitManifest m;
        for (const auto& [name, ids] : doc["splits"].items()) {
            if (!ids.is_array()) throw ParseError(std::string(source) + ": split '" + name + "' must be an array");
            auto& out = m.splits[name];
            for (const auto& id : ids) {
                if (!id.is_number_integer())
                    throw ParseError(std::string(source) + ": split '" + name + "' holds a non-integer id");
                out.push_back(id.get<QuestionId>());
            }
            std::sort(out.begin(), out.end());
        }
        return m;
    }

    static SplitManifest load(const std::filesystem::path& path) {
        return parse(detail::read_file(path), path.string());
    }
};

/// Images of the questions listed under `split` in the manifest. Every listed
/// question must be present in `questions`.
inline std::set<ImageId> reserved_images(const SplitManifest& manifest, const std::string& split,
                                         std::span<const QuestionRecord> questions) {
    auto it = manifest.splits.find(split);
    if (it == manifest.splits.end()) throw ValidationError("manifest has no split '" + split + "'");
    std::unordered_map<QuestionId, ImageId> image_of;
    for (const auto& q : questions) image_of.emplace(q.question_id, q.image_id);
    std::set<ImageId> out;
    std::vector<QuestionId> unknown;
    for (auto qid : it->second) {
        auto f = image_of.find(qid);
        if (f == image_of.end()) unknown.push_back(qid);
        else out.insert(f->second);
    }
    if (!unknown.empty())
        throw ValidationError("manifest lists unknown question_id: " + detail::join_ids(unknown));
    return out;
}

/// Image id list: one integer per line; blank lines and '#' comments skipped.
inline std::set<ImageId> parse_image_ids(std::string_view text, std::string_view source = "image ids") {
    std::set<ImageId> out;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto end = std::min(text.find('\n', pos), text.size());
        std::string line(text.substr(pos, end - pos));
        ++line_no;
        pos = end + 1;
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto last = line.find_last_not_of(" \t\r");
        const auto token = line.substr(first, last - first + 1);
        try {
            std::size_t used = 0;
            const auto id = std::stoll(token, &used);
            if (used != token.size()) throw std::invalid_argument(token);
            out.insert(id);
        } catch (const std::exception&) {
            throw ParseError(std::string(source) + ": not an image id: '" + token + "'", line_no);
        }
    }
    return out;
}

inline std::string format_image_ids(const std::set<ImageId>& ids) {
    std::string out;
    for (auto id : ids) out += std::to_string(id) + "\n";
    return out;
}

} // namespace capvqa
