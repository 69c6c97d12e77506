// Copyright (C) 2026 The capvqa Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace capvqa {

// Stateless mixing so every randomized choice is a pure function of its keys.
// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t hash_keys(std::initializer_list<std::uint64_t> keys) noexcept {
    std::uint64_t h = 0x243f6a8885a308d3ULL;
    for (auto k : keys) h = mix64(h ^ mix64(k));
    return h;
}

/// Unbiased index in [0, n) from a 64-bit key stream (rejection on the top range).
inline std::size_t bounded_index(std::uint64_t key, std::size_t n) {
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x = mix64(key);
    while (x >= limit) x = mix64(x);
    return static_cast<std::size_t>(x % bound);
}

/// std::mt19937_64 output is fixed by the standard; the distributions are not.
/// These helpers keep sampled values identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    std::size_t index(std::size_t n) { return bounded_index(engine_(), n); }

    template <class It>
    void shuffle(It first, It last) {
        const auto n = static_cast<std::size_t>(last - first);
        for (std::size_t i = n; i > 1; --i) {
            const auto j = index(i);
            std::iter_swap(first + (i - 1), first + j);
        }
    }

private:
    std::mt19937_64 engine_;
};

} // namespace capvqa
