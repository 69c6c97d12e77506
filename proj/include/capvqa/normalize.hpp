// Copyright (C) 2026 The capvqa Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>

namespace capvqa {

/// Canonical answer form used for matching, counting and vocabulary keys.
///
/// Rules, applied in order:
///   1. ASCII letters are lowercased; other bytes (including UTF-8) are kept.
///   2. ASCII punctuation is deleted ("it's" -> "its", "t-shirt" -> "tshirt").
///   3. Any run of ASCII whitespace becomes one space; leading and trailing
///      whitespace is removed.
/// Articles and digits are left untouched. The function is idempotent.
inline std::string normalize_answer(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    bool pending_space = false;
    for (char ch : raw) {
        const auto c = static_cast<unsigned char>(ch);
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
            pending_space = !out.empty();
            continue;
        }
        if (c < 0x80 && ((c >= '!' && c <= '/') || (c >= ':' && c <= '@') || (c >= '[' && c <= '`') ||
                         (c >= '{' && c <= '~'))) {
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : ch);
    }
    return out;
}

} // namespace capvqa
