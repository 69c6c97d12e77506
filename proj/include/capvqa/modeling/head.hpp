// Copyright (C) 2026 The capvqa Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "capvqa/error.hpp"
#include "capvqa/rng.hpp"
#include "capvqa/vocab.hpp"

namespace capvqa {

template <class Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <class Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Hidden width of the reference (BERT-base) configuration.
inline constexpr std::size_t kReferenceHiddenSize = 768;
inline constexpr double kLayerNormEps = 1e-12;
inline constexpr double kLogClamp = 1e-12;

// ---------------------------------------------------------------------------
// Elementwise pieces
// ---------------------------------------------------------------------------

/// Exact (erf) GELU.
template <class Scalar>
Scalar gelu(Scalar x) {
    return Scalar(0.5) * x * (Scalar(1) + std::erf(x / std::numbers::sqrt2_v<Scalar>));
}

template <class Scalar>
Scalar gelu_derivative(Scalar x) {
    const Scalar cdf = Scalar(0.5) * (Scalar(1) + std::erf(x / std::numbers::sqrt2_v<Scalar>));
    const Scalar pdf = std::exp(Scalar(-0.5) * x * x) / std::sqrt(Scalar(2) * std::numbers::pi_v<Scalar>);
    return cdf + x * pdf;
}

/// Max-subtracted softmax.
template <class Scalar>
Vec<Scalar> softmax(const Vec<Scalar>& logits) {
    if (logits.size() == 0) return logits;
    const Scalar m = logits.maxCoeff();
    Vec<Scalar> e = (logits.array() - m).exp().matrix();
    return e / e.sum();
}

/// Normalized activations and the inverse standard deviation, which the
/// backward pass needs.
template <class Scalar>
struct LayerNormCache {
    Vec<Scalar> normalized;
    Scalar inv_std = Scalar(1);
};

template <class Scalar>
LayerNormCache<Scalar> layer_norm_normalize(const Vec<Scalar>& x, Scalar eps = Scalar(kLayerNormEps)) {
    const auto n = static_cast<Scalar>(x.size());
    const Scalar mean = x.sum() / n;
    const Vec<Scalar> centered = x.array() - mean;
    const Scalar var = centered.squaredNorm() / n;
    LayerNormCache<Scalar> c;
    c.inv_std = Scalar(1) / std::sqrt(var + eps);
    c.normalized = centered * c.inv_std;
    return c;
}

// ---------------------------------------------------------------------------
// Classification head
//
//   h    = LayerNorm(GELU(W_h t + b_h))
//   yhat = Softmax(W_y^T h + b_y)
//
// W_h is d_h x d_h, W_y is d_h x n_label (stored as in the usual notation and
// applied transposed). LayerNorm carries a learned scale and shift.
// ---------------------------------------------------------------------------

template <class Scalar>
struct ClassifierHeadParams {
    Mat<Scalar> W_h;
    Vec<Scalar> b_h;
    Vec<Scalar> ln_gamma;
    Vec<Scalar> ln_beta;
    Mat<Scalar> W_y;
    Vec<Scalar> b_y;

    std::size_t hidden_size() const { return static_cast<std::size_t>(W_h.rows()); }
    std::size_t n_label() const { return static_cast<std::size_t>(W_y.cols()); }

    void check_shapes() const {
        const auto d = W_h.rows();
        if (W_h.cols() != d || b_h.size() != d || ln_gamma.size() != d || ln_beta.size() != d || W_y.rows() != d ||
            b_y.size() != W_y.cols())
            throw ConfigError("classifier head parameter shapes are inconsistent");
    }

    /// LayerNorm scale 1 and shift 0, biases 0, weights uniform in
    /// [-init_scale, init_scale].
    static ClassifierHeadParams initialized(std::size_t d_h, std::size_t n_label, Rng& rng, double init_scale = 0.02) {
        ClassifierHeadParams p;
        const auto d = static_cast<Eigen::Index>(d_h);
        const auto n = static_cast<Eigen::Index>(n_label);
        p.W_h = Mat<Scalar>::NullaryExpr(d, d, [&] { return static_cast<Scalar>(rng.uniform(-init_scale, init_scale)); });
        p.b_h = Vec<Scalar>::Zero(d);
        p.ln_gamma = Vec<Scalar>::Ones(d);
        p.ln_beta = Vec<Scalar>::Zero(d);
        p.W_y = Mat<Scalar>::NullaryExpr(d, n, [&] { return static_cast<Scalar>(rng.uniform(-init_scale, init_scale)); });
        p.b_y = Vec<Scalar>::Zero(n);
        return p;
    }
};

/// Intermediate values of one head forward pass.
template <class Scalar>
struct HeadActivations {
    Vec<Scalar> pre_activation;  // W_h t + b_h
    Vec<Scalar> activated;       // GELU(.)
    LayerNormCache<Scalar> norm;
    Vec<Scalar> hidden;          // h
    Vec<Scalar> logits;
    Vec<Scalar> probs;
};

template <class Scalar>
HeadActivations<Scalar> classifier_head_activations(const Vec<Scalar>& pooled, const ClassifierHeadParams<Scalar>& params) {
    if (pooled.size() != params.W_h.cols())
        throw ConfigError("pooled representation has dimension " + std::to_string(pooled.size()) + ", head expects " +
                          std::to_string(params.W_h.cols()));
    if (!pooled.allFinite()) throw NumericError("pooled representation has non-finite entries");

    HeadActivations<Scalar> a;
    a.pre_activation = params.W_h * pooled + params.b_h;
    a.activated = a.pre_activation.unaryExpr([](Scalar x) { return gelu(x); });
    a.norm = layer_norm_normalize(a.activated);
    a.hidden = params.ln_gamma.cwiseProduct(a.norm.normalized) + params.ln_beta;
    a.logits = params.W_y.transpose() * a.hidden + params.b_y;
    a.probs = softmax(a.logits);
    if (!a.probs.allFinite()) throw NumericError("classifier head produced non-finite probabilities");
    return a;
}

/// Probability vector over the answer vocabulary.
struct PredictionDistribution {
    std::vector<double> probs;
    /// Fingerprint of the vocabulary the classes index into; empty if unknown.
    std::string vocab_fingerprint;

    std::size_t size() const noexcept { return probs.size(); }

    std::size_t argmax() const {
        return static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
    }

    /// Entries non-negative and summing to 1 within `tol`.
    bool is_valid(double tol = 1e-6) const {
        double s = 0.0;
        for (double p : probs) {
            if (!(p >= 0.0) || !std::isfinite(p)) return false;
            s += p;
        }
        return !probs.empty() && std::abs(s - 1.0) <= tol;
    }

    template <class Scalar>
    static PredictionDistribution from_vector(const Vec<Scalar>& v, std::string fingerprint = {}) {
        PredictionDistribution d;
        d.probs.resize(static_cast<std::size_t>(v.size()));
        for (Eigen::Index i = 0; i < v.size(); ++i) d.probs[static_cast<std::size_t>(i)] = static_cast<double>(v[i]);
        d.vocab_fingerprint = std::move(fingerprint);
        return d;
    }
};

template <class Scalar>
PredictionDistribution classifier_head_forward(const Vec<Scalar>& pooled, const ClassifierHeadParams<Scalar>& params) {
    params.check_shapes();
    return PredictionDistribution::from_vector(classifier_head_activations(pooled, params).probs);
}

// ---------------------------------------------------------------------------
// Soft cross-entropy
// ---------------------------------------------------------------------------

struct SceLoss {
    double value = 0.0;
    /// Target had no mass (fully out-of-vocabulary question); value is 0.
    bool empty_target = false;
};

/// -sum_k y_k log(yhat_k), with yhat clamped below at 1e-12.
inline SceLoss sce_loss(std::span<const double> y_hat, std::span<const double> y) {
    if (y_hat.size() != y.size()) throw ConfigError("sce_loss: prediction and target sizes differ");
    SceLoss loss;
    double mass = 0.0;
    for (std::size_t k = 0; k < y.size(); ++k) {
        if (y[k] == 0.0) continue;
        mass += y[k];
        loss.value -= y[k] * std::log(std::max(y_hat[k], kLogClamp));
    }
    if (mass == 0.0) {
        loss.value = 0.0;
        loss.empty_target = true;
    }
    return loss;
}

inline SceLoss sce_loss(const PredictionDistribution& y_hat, const SoftLabel& y) {
    SceLoss loss;
    if (y.all_oov || y.entries.empty()) {
        loss.empty_target = true;
        return loss;
    }
    for (const auto& [k, p] : y.entries) {
        if (static_cast<std::size_t>(k) >= y_hat.size()) throw ConfigError("sce_loss: label index outside prediction");
        loss.value -= p * std::log(std::max(y_hat.probs[static_cast<std::size_t>(k)], kLogClamp));
    }
    return loss;
}

/// d/dlogits of sce_loss(softmax(logits), y) = softmax(logits) - y, exact when
/// y sums to 1.
template <class Scalar>
Vec<Scalar> sce_gradient(const Vec<Scalar>& logits, const Vec<Scalar>& y) {
    if (logits.size() != y.size()) throw ConfigError("sce_gradient: logits and target sizes differ");
    return softmax(logits) - y;
}

template <class Scalar>
Vec<Scalar> sce_gradient(const Vec<Scalar>& logits, const SoftLabel& y) {
    Vec<Scalar> dense = Vec<Scalar>::Zero(logits.size());
    for (const auto& [k, p] : y.entries) {
        if (k >= logits.size()) throw ConfigError("sce_gradient: label index outside logits");
        dense[k] = static_cast<Scalar>(p);
    }
    return sce_gradient(logits, dense);
}

} // namespace capvqa
