// Copyright (C) 2026 The capvqa Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "capvqa/dataset.hpp"
#include "capvqa/error.hpp"
#include "capvqa/modeling/adapters.hpp"
#include "capvqa/modeling/head.hpp"
#include "capvqa/vocab.hpp"

namespace capvqa {

/// Elementwise product of two class distributions. Scores are left
/// unnormalized; only the argmax is used for answering.
struct FusedPrediction {
    std::vector<double> scores;
    /// Highest score; ties go to the lowest class index.
    std::size_t argmax = 0;
    std::vector<std::string> provenance;
};

/// First index of the maximum.
inline std::size_t argmax_lowest(const std::vector<double>& v) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < v.size(); ++k)
        if (v[k] > v[best]) best = k;
    return best;
}

inline FusedPrediction late_fuse(const PredictionDistribution& p1, const PredictionDistribution& p2,
                                 std::vector<std::string> provenance = {}) {
    if (p1.size() != p2.size())
        throw FusionError("cannot fuse distributions over " + std::to_string(p1.size()) + " and " +
                          std::to_string(p2.size()) + " classes");
    if (p1.size() == 0) throw FusionError("cannot fuse empty distributions");
    if (!p1.vocab_fingerprint.empty() && !p2.vocab_fingerprint.empty() && p1.vocab_fingerprint != p2.vocab_fingerprint)
        throw FusionError("distributions index different answer vocabularies");

    FusedPrediction f;
    f.scores.resize(p1.size());
    for (std::size_t k = 0; k < p1.size(); ++k) {
        if (!(p1.probs[k] >= 0.0) || !(p2.probs[k] >= 0.0)) throw FusionError("negative or NaN probability");
        f.scores[k] = p1.probs[k] * p2.probs[k];
    }
    f.argmax = argmax_lowest(f.scores);
    f.provenance = std::move(provenance);
    return f;
}

struct FusionInputs {
    InputMode mode_a = InputMode::caption;
    InputMode mode_b = InputMode::multimodal;
    InputStyle style = InputStyle::pair_encoding;
    MultimodalOptions multimodal;
};

/// Answer from the product of two classifiers' distributions, each fed the
/// input its mode calls for (by default caption text and region features).
/// Adapter failures are rethrown naming the adapter.
inline std::string predict_fused(const AnswerClassifier& a, const AnswerClassifier& b, const Example& example,
                                 const AnswerVocab& vocab, const RegionStore* regions = nullptr,
                                 const FusionInputs& inputs = {}) {
    auto run = [&](const AnswerClassifier& c, InputMode mode) {
        try {
            auto d = c.classify(make_model_input(example, mode, inputs.style, regions, inputs.multimodal));
            if (d.size() != vocab.size())
                throw FusionError("returned " + std::to_string(d.size()) + " classes, vocabulary has " +
                                  std::to_string(vocab.size()));
            return d;
        } catch (const AdapterError&) {
            throw;
        } catch (const std::exception& e) {
            throw AdapterError(c.name(), e.what());
        }
    };
    const auto pa = run(a, inputs.mode_a);
    const auto pb = run(b, inputs.mode_b);
    return vocab.answer(late_fuse(pa, pb, {a.name(), b.name()}).argmax);
}

} // namespace capvqa
