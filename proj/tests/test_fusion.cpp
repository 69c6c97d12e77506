// Copyright (C) 2026 The capvqa Authors
// SPDX-License-Identifier: Apache-2.0

#include <random>

#include <gtest/gtest.h>

#include "capvqa/fusion.hpp"
#include "capvqa/synthetic.hpp"
#include "support.hpp"

namespace {

using namespace capvqa;
namespace oracle = capvqa::testing::oracle;

PredictionDistribution dist(std::vector<double> p, std::string fp = {}) { return {std::move(p), std::move(fp)}; }

std::vector<double> random_simplex(std::mt19937_64& gen, std::size_t n) {
    std::gamma_distribution<double> g(0.5, 1.0);
    std::vector<double> p(n);
    double s = 0.0;
    for (auto& v : p) s += (v = g(gen));
    for (auto& v : p) v /= s;
    return p;
}

TEST(LateFuse, TwoClassExample) {
    const auto f = late_fuse(dist({0.6, 0.4}), dist({0.3, 0.7}));
    EXPECT_NEAR(f.scores[0], 0.18, 1e-15);
    EXPECT_NEAR(f.scores[1], 0.28, 1e-15);
    EXPECT_EQ(f.argmax, 1u);
}

TEST(LateFuse, UniformSideDefersToTheOther) {
    std::mt19937_64 gen(1);
    for (std::size_t n : {2u, 7u, 30u}) {
        const auto p2 = random_simplex(gen, n);
        EXPECT_EQ(late_fuse(dist(std::vector<double>(n, 1.0 / n)), dist(p2)).argmax, argmax_lowest(p2));
    }
}

TEST(LateFuse, SelfFusionKeepsArgmax) {
    std::mt19937_64 gen(2);
    for (int trial = 0; trial < 100; ++trial) {
        const auto p = random_simplex(gen, 2 + trial % 15);
        EXPECT_EQ(late_fuse(dist(p), dist(p)).argmax, argmax_lowest(p));
    }
}

TEST(LateFuse, TiesGoToLowestIndex) {
    EXPECT_EQ(late_fuse(dist({0.25, 0.25, 0.5}), dist({0.5, 0.5, 0.0})).argmax, 0u);
    EXPECT_EQ(late_fuse(dist({0.0, 1.0}), dist({1.0, 0.0})).argmax, 0u);
}

TEST(LateFuse, PropertiesOnRandomPairs) {
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> scale(0.1, 10.0);
    for (std::size_t n : {2u, 10u, 100u}) {
        for (int trial = 0; trial < 100; ++trial) {
            const auto p1 = random_simplex(gen, n), p2 = random_simplex(gen, n), p3 = random_simplex(gen, n);
            const auto f = late_fuse(dist(p1), dist(p2));
            EXPECT_EQ(f.argmax, oracle::exhaustive_product_argmax(p1, p2));
            EXPECT_EQ(f.scores, late_fuse(dist(p2), dist(p1)).scores);

            auto scaled = p1;
            const double c = scale(gen);
            for (auto& v : scaled) v *= c;
            EXPECT_EQ(late_fuse(dist(scaled), dist(p2)).argmax, f.argmax);

            const auto left = late_fuse(dist(f.scores), dist(p3));
            const auto right = late_fuse(dist(p1), dist(late_fuse(dist(p2), dist(p3)).scores));
            for (std::size_t k = 0; k < n; ++k) EXPECT_NEAR(left.scores[k], right.scores[k], 1e-15);
        }
    }
}

TEST(LateFuse, Errors) {
    EXPECT_THROW(late_fuse(dist({0.5, 0.5}), dist({1.0})), FusionError);
    EXPECT_THROW(late_fuse(dist({}), dist({})), FusionError);
    EXPECT_THROW(late_fuse(dist({0.5, 0.5}, "aaaa"), dist({0.5, 0.5}, "bbbb")), FusionError);
    EXPECT_THROW(late_fuse(dist({1.5, -0.5}), dist({0.5, 0.5})), FusionError);
    EXPECT_THROW(late_fuse(dist({std::nan(""), 0.5}), dist({0.5, 0.5})), FusionError);
    EXPECT_NO_THROW(late_fuse(dist({0.5, 0.5}, "aaaa"), dist({0.5, 0.5})));
}

TEST(LateFuse, ProvenanceKept) {
    const auto f = late_fuse(dist({1.0}), dist({1.0}), {"text", "vision"});
    EXPECT_EQ(f.provenance, (std::vector<std::string>{"text", "vision"}));
}

class FixedClassifier final : public AnswerClassifier {
public:
    FixedClassifier(std::vector<double> p, std::string name) : p_(std::move(p)), name_(std::move(name)) {}
    std::string name() const override { return name_; }
    PredictionDistribution classify(const ModelInput& in) const override {
        seen.push_back(in);
        return {p_, {}};
    }
    mutable std::vector<ModelInput> seen;

private:
    std::vector<double> p_;
    std::string name_;
};

class ThrowingClassifier final : public AnswerClassifier {
public:
    std::string name() const override { return "flaky"; }
    PredictionDistribution classify(const ModelInput&) const override { throw std::runtime_error("out of memory"); }
};

struct FusionFixture {
    SyntheticCorpus corpus = make_synthetic_corpus({});
    ExampleSet set = join_examples(corpus.questions, corpus.annotations,
                                   CaptionTable::from_records(corpus.captions).generated, InputMode::early_fusion);
    AnswerVocab vocab{std::vector<std::string>{"a", "b", "c"}};
    FusionInputs inputs = [] {
        FusionInputs f;
        f.multimodal.expected_d_v = 8;
        return f;
    }();
};

TEST(PredictFused, FeedsEachModelItsModeAndFusesAnswers) {
    FusionFixture fx;
    FixedClassifier text({0.6, 0.4, 0.0}, "text"), vision({0.3, 0.7, 0.0}, "vision");
    EXPECT_EQ(predict_fused(text, vision, fx.set.examples[0], fx.vocab, &fx.corpus.regions, fx.inputs), "b");
    ASSERT_EQ(text.seen.size(), 1u);
    EXPECT_FALSE(text.seen[0].multimodal.has_value());
    EXPECT_NE(text.seen[0].text.text.find(fx.set.examples[0].caption->text), std::string::npos);
    ASSERT_TRUE(vision.seen[0].multimodal.has_value());
    EXPECT_EQ(vision.seen[0].text.text.find(fx.set.examples[0].caption->text), std::string::npos);
}

TEST(PredictFused, AdapterFailuresNameTheAdapter) {
    FusionFixture fx;
    FixedClassifier ok({0.2, 0.3, 0.5}, "text");
    ThrowingClassifier bad;
    try {
        predict_fused(ok, bad, fx.set.examples[0], fx.vocab, &fx.corpus.regions, fx.inputs);
        FAIL() << "expected AdapterError";
    } catch (const AdapterError& e) {
        EXPECT_EQ(e.adapter(), "flaky");
        EXPECT_NE(std::string(e.what()).find("out of memory"), std::string::npos);
    }
    FixedClassifier short_dist({0.5, 0.5}, "short");
    try {
        predict_fused(short_dist, ok, fx.set.examples[0], fx.vocab, &fx.corpus.regions, fx.inputs);
        FAIL() << "expected AdapterError";
    } catch (const AdapterError& e) {
        EXPECT_EQ(e.adapter(), "short");
    }
    const CachedClassifier empty({}, "cache");
    EXPECT_THROW(predict_fused(empty, ok, fx.set.examples[0], fx.vocab, &fx.corpus.regions, fx.inputs), AdapterError);
}

} // namespace
