// Copyright (C) 2026 The capvqa Authors
// SPDX-License-Identifier: Apache-2.0

// Fixtures and independent reference computations shared by the unit tests
// and the acceptance binary. Nothing here calls into the library's numeric
// code; the references are deliberately naive.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "capvqa/types.hpp"

namespace capvqa::testing {

inline AnnotationRecord make_annotation(QuestionId qid, std::vector<std::string> answers, ImageId image = 1) {
    return {qid, image, std::move(answers), std::nullopt};
}

/// Ten answers from counts, e.g. {{"a", 5}, {"b", 3}, {"c", 2}}.
inline std::vector<std::string> answers_from_counts(const std::vector<std::pair<std::string, int>>& counts) {
    std::vector<std::string> out;
    for (const auto& [a, n] : counts)
        for (int i = 0; i < n; ++i) out.push_back(a);
    return out;
}

inline std::vector<std::string> alphabet(std::size_t n) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back("ans" + std::to_string(i));
    return out;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("capvqa-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

namespace oracle {

/// VQA accuracy by direct counting: matches over the ten answers, capped at 3.
inline double vqa_score(const std::string& answer, const std::vector<std::string>& answers) {
    int x = 0;
    for (const auto& a : answers)
        if (a == answer) x += 1;
    if (x >= 3) return 1.0;
    return x / 3.0;
}

inline double mean_in_key_order(const std::map<QuestionId, double>& scores) {
    double s = 0.0;
    for (const auto& kv : scores) s += kv.second;
    return scores.empty() ? 0.0 : s / static_cast<double>(scores.size());
}

inline std::vector<double> softmax(const std::vector<double>& z) {
    double m = z[0];
    for (double v : z) m = v > m ? v : m;
    std::vector<double> e(z.size());
    double s = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        e[i] = std::exp(z[i] - m);
        s += e[i];
    }
    for (double& v : e) v /= s;
    return e;
}

inline double cross_entropy(const std::vector<double>& y_hat, const std::vector<double>& y) {
    double l = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i)
        if (y[i] != 0.0) l -= y[i] * std::log(y_hat[i] < 1e-12 ? 1e-12 : y_hat[i]);
    return l;
}

/// Central differences of f at x, one coordinate at a time.
inline std::vector<double> central_differences(const std::function<double(const std::vector<double>&)>& f,
                                               std::vector<double> x, double h) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + h;
        const double up = f(x);
        x[i] = keep - h;
        const double down = f(x);
        x[i] = keep;
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
    double diff = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (a[i] - b[i]) * (a[i] - b[i]);
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    const double scale = std::max({std::sqrt(na), std::sqrt(nb), 1e-8});
    return std::sqrt(diff) / scale;
}

/// Row-major small dense matrix for the head reference computation.
struct Matrix {
    std::size_t rows = 0, cols = 0;
    std::vector<double> v;
    double at(std::size_t r, std::size_t c) const { return v[r * cols + c]; }
};

/// Head forward pass written out loop by loop:
///   u = W_h t + b_h; a = gelu(u); h = gamma * (a - mean) / sqrt(var + eps) + beta;
///   z_k = sum_j W_y[j][k] h_j + b_y[k]; p = softmax(z).
inline std::vector<double> head_forward(const std::vector<double>& t, const Matrix& W_h, const std::vector<double>& b_h,
                                        const std::vector<double>& gamma, const std::vector<double>& beta,
                                        const Matrix& W_y, const std::vector<double>& b_y) {
    const std::size_t d = t.size();
    std::vector<double> a(d);
    for (std::size_t i = 0; i < d; ++i) {
        double u = b_h[i];
        for (std::size_t j = 0; j < d; ++j) u += W_h.at(i, j) * t[j];
        const double phi = 0.5 * (1.0 + std::erf(u / std::sqrt(2.0)));
        a[i] = u * phi;
    }
    double mean = 0.0;
    for (double x : a) mean += x;
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (double x : a) var += (x - mean) * (x - mean);
    var /= static_cast<double>(d);
    std::vector<double> h(d);
    for (std::size_t i = 0; i < d; ++i) h[i] = gamma[i] * (a[i] - mean) / std::sqrt(var + 1e-12) + beta[i];
    std::vector<double> z(W_y.cols);
    for (std::size_t k = 0; k < W_y.cols; ++k) {
        z[k] = b_y[k];
        for (std::size_t j = 0; j < d; ++j) z[k] += W_y.at(j, k) * h[j];
    }
    return softmax(z);
}

/// Index of the largest product, scanning every class; lowest index on ties.
inline std::size_t exhaustive_product_argmax(const std::vector<double>& p1, const std::vector<double>& p2) {
    std::size_t best = 0;
    double best_score = -1.0;
    for (std::size_t k = 0; k < p1.size(); ++k) {
        const double s = p1[k] * p2[k];
        if (s > best_score) {
            best = k;
            best_score = s;
        }
    }
    return best;
}

} // namespace oracle

} // namespace capvqa::testing
