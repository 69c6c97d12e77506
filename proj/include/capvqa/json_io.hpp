// Copyright (C) 2026 The capvqa Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include <json.hpp>

#include "capvqa/error.hpp"

namespace capvqa {

using Json = nlohmann::json;

namespace detail {

inline std::size_t line_of_offset(std::string_view text, std::size_t offset) {
    offset = std::min(offset, text.size());
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view contents) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write '" + path.string() + "'");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw ValidationError("short write to '" + path.string() + "'");
}

inline Json parse_json(std::string_view text, std::string_view source) {
    try {
        return Json::parse(text.begin(), text.end());
    } catch (const Json::parse_error& e) {
        throw ParseError(std::string(source) + ": malformed JSON: " + e.what(), line_of_offset(text, e.byte ? e.byte - 1 : 0));
    }
}

inline std::int64_t require_int(const Json& obj, const char* key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_number_integer())
        throw ParseError(where + ": missing or non-integer field '" + key + "'");
    return it->get<std::int64_t>();
}

inline std::string require_string(const Json& obj, const char* key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_string())
        throw ParseError(where + ": missing or non-string field '" + key + "'");
    return it->get<std::string>();
}

inline const Json& require_array(const Json& doc, const char* key, std::string_view source) {
    if (!doc.is_object()) throw ParseError(std::string(source) + ": top level must be an object");
    auto it = doc.find(key);
    if (it == doc.end() || !it->is_array())
        throw ParseError(std::string(source) + ": missing array '" + key + "'");
    return *it;
}

} // namespace detail
} // namespace capvqa
