// Copyright (C) 2026 The capvqa Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "capvqa/dataset.hpp"
#include "capvqa/error.hpp"
#include "capvqa/modeling/head.hpp"
#include "capvqa/modeling/input.hpp"
#include "capvqa/modeling/regions.hpp"
#include "capvqa/vocab.hpp"

namespace capvqa {

/// Everything an answer model may look at for one question. Text-only models
/// read `text`; multimodal models read `multimodal`.
struct ModelInput {
    QuestionId question_id = 0;
    ImageId image_id = 0;
    SerializedInput text;
    std::optional<MultimodalInput> multimodal;
};

/// Build the input for `mode` from a joined example. Region modes need `regions`.
inline ModelInput make_model_input(const Example& ex, InputMode mode, InputStyle style = InputStyle::pair_encoding,
                                   const RegionStore* regions = nullptr, const MultimodalOptions& mm = {}) {
    ModelInput in;
    in.question_id = ex.question.question_id;
    in.image_id = ex.question.image_id;
    std::optional<std::string> caption;
    if (mode_uses_caption(mode)) {
        if (!ex.caption)
            throw JoinError("example " + std::to_string(in.question_id) + " has no caption for mode " + to_string(mode));
        caption = ex.caption->text;
    }
    in.text = format_pair_input(mode == InputMode::caption ? caption : std::nullopt, ex.question.text, style);
    if (mode_uses_regions(mode)) {
        if (!regions) throw ConfigError(std::string("mode ") + to_string(mode) + " needs region features");
        in.multimodal = assemble_multimodal_input(ex.question.text, caption, regions->at(in.image_id), mm);
    }
    return in;
}

// ---------------------------------------------------------------------------
// Adapter interfaces. Implementations must be deterministic for fixed weights
// and safe for concurrent const calls.
// ---------------------------------------------------------------------------

class CaptionGenerator {
public:
    virtual ~CaptionGenerator() = default;
    virtual std::string name() const = 0;
    virtual CaptionRecord caption(ImageId image) const = 0;
};

class AnswerClassifier {
public:
    virtual ~AnswerClassifier() = default;
    virtual std::string name() const = 0;
    virtual PredictionDistribution classify(const ModelInput& input) const = 0;
};

class AnswerGenerator {
public:
    virtual ~AnswerGenerator() = default;
    virtual std::string name() const = 0;
    virtual std::string generate(const ModelInput& input) const = 0;
};

/// Captions served from a cache file.
class FileCaptionGenerator final : public CaptionGenerator {
public:
    explicit FileCaptionGenerator(std::map<ImageId, CaptionRecord> captions, std::string name = "caption-file")
        : captions_(std::move(captions)), name_(std::move(name)) {}

    std::string name() const override { return name_; }

    CaptionRecord caption(ImageId image) const override {
        auto it = captions_.find(image);
        if (it == captions_.end()) throw AdapterError(name_, "no cached caption for image " + std::to_string(image));
        return it->second;
    }

private:
    std::map<ImageId, CaptionRecord> captions_;
    std::string name_;
};

/// Puts all probability mass on one fixed answer.
class ConstantClassifier final : public AnswerClassifier {
public:
    ConstantClassifier(const AnswerVocab& vocab, const std::string& answer, std::string name = "constant")
        : name_(std::move(name)) {
        auto k = vocab.index_of(normalize_answer(answer));
        if (!k) throw ConfigError("constant classifier answer '" + answer + "' is not in the vocabulary");
        dist_.probs.assign(vocab.size(), 0.0);
        dist_.probs[static_cast<std::size_t>(*k)] = 1.0;
        dist_.vocab_fingerprint = vocab.fingerprint();
    }

    std::string name() const override { return name_; }
    PredictionDistribution classify(const ModelInput&) const override { return dist_; }

private:
    PredictionDistribution dist_;
    std::string name_;
};

/// Distributions loaded from a per-question dump.
class CachedClassifier final : public AnswerClassifier {
public:
    CachedClassifier(std::map<QuestionId, PredictionDistribution> cache, std::string name)
        : cache_(std::move(cache)), name_(std::move(name)) {}

    std::string name() const override { return name_; }

    PredictionDistribution classify(const ModelInput& input) const override {
        auto it = cache_.find(input.question_id);
        if (it == cache_.end())
            throw AdapterError(name_, "no cached distribution for question " + std::to_string(input.question_id));
        return it->second;
    }

private:
    std::map<QuestionId, PredictionDistribution> cache_;
    std::string name_;
};

/// Answers loaded from a prediction file.
class CachedGenerator final : public AnswerGenerator {
public:
    CachedGenerator(std::map<QuestionId, std::string> answers, std::string name)
        : answers_(std::move(answers)), name_(std::move(name)) {}

    std::string name() const override { return name_; }

    std::string generate(const ModelInput& input) const override {
        auto it = answers_.find(input.question_id);
        if (it == answers_.end())
            throw AdapterError(name_, "no cached answer for question " + std::to_string(input.question_id));
        return it->second;
    }

private:
    std::map<QuestionId, std::string> answers_;
    std::string name_;
};

/// Name -> factory lookup for one adapter interface.
template <class Interface, class Context>
class AdapterRegistry {
public:
    using Factory = std::function<std::unique_ptr<Interface>(const Context&)>;

    void add(const std::string& name, Factory factory) { factories_.insert_or_assign(name, std::move(factory)); }

    bool contains(const std::string& name) const { return factories_.count(name) != 0; }

    /// Throws AdapterError when `name` is not registered.
    std::unique_ptr<Interface> create(const std::string& name, const Context& ctx) const {
        auto it = factories_.find(name);
        if (it == factories_.end()) throw AdapterError(name, "adapter is not available in this build");
        return it->second(ctx);
    }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        for (const auto& [n, f] : factories_) out.push_back(n);
        return out;
    }

private:
    std::map<std::string, Factory> factories_;
};

} // namespace capvqa
