// Copyright (C) 2026 The capvqa Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "capvqa/dataset.hpp"
#include "capvqa/error.hpp"
#include "capvqa/json_io.hpp"
#include "capvqa/metrics.hpp"
#include "capvqa/modeling/input.hpp"
#include "capvqa/modeling/toy_model.hpp"
#include "capvqa/vocab.hpp"

namespace capvqa {

/// Relative dataset paths resolve against this directory when it is set.
inline constexpr const char* kDataRootEnv = "CAPVQA_DATA_ROOT";

/// Built-in answer models. Any other name is looked up in the adapter registry.
inline constexpr const char* kToyClassifierName = "toy-bow";
inline constexpr const char* kToyGeneratorName = "toy-generator";

struct DataPaths {
    std::string train_questions;
    std::string train_annotations;
    std::string eval_questions;
    std::string eval_annotations;
    /// Caption document (generated and/or gold captions).
    std::string captions;
    /// Directory of <image_id>.regions files.
    std::string regions_dir;
};

struct VocabSettings {
    /// Load the vocabulary from this file instead of building it.
    std::string path;
    std::optional<std::size_t> max_size = 1000;
    std::optional<std::size_t> min_count;
    VocabCountUnit unit = VocabCountUnit::annotations;
};

struct RunConfig {
    std::string name = "run";
    InputMode mode = InputMode::caption;
    /// Answer model adapter name.
    std::string model = kToyClassifierName;
    InputStyle style = InputStyle::pair_encoding;

    std::size_t steps = 2000;
    std::size_t batch_size = 16;
    double learning_rate = 1e-2;
    double weight_decay = 0.01;
    LrSchedule schedule = LrSchedule::constant;
    std::size_t warmup_steps = 0;
    std::vector<std::uint64_t> seeds{0, 1, 2};

    /// Validation split used for step selection.
    double validation_fraction = 0.2;
    std::uint64_t split_seed = 0;
    /// Evaluate every this many steps during step selection.
    std::size_t eval_interval = 100;

    CaptionSource caption_source = CaptionSource::generated;
    /// Gold-caption selections used at evaluation, one evaluation per entry.
    std::vector<std::uint64_t> eval_caption_seeds{0, 1, 2};

    DataPaths data;
    VocabSettings vocab;
    std::size_t hidden_size = 32;
    std::size_t n_buckets = 2048;
    std::size_t region_dim = kReferenceRegionDim;
    bool concat_boxes = false;
    bool skip_all_oov = true;
    MetricVariant metric = MetricVariant::literal;

    /// Start from this checkpoint; "{seed}" is replaced by the run seed.
    std::string init_checkpoint;
    /// Used when the answer model adapter is unavailable; "{seed}" expands.
    std::string cached_predictions;
    std::string output_dir = "runs";

    void validate() const {
        if (steps == 0) throw ConfigError("steps must be > 0");
        if (batch_size == 0) throw ConfigError("batch_size must be > 0");
        if (seeds.empty()) throw ConfigError("seeds must be non-empty");
        if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be >= 0");
        if (schedule == LrSchedule::constant && warmup_steps != 0)
            throw ConfigError("a constant schedule requires warmup_steps = 0");
        if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
            throw ConfigError("validation_fraction must lie in (0,1)");
        if (eval_interval == 0) throw ConfigError("eval_interval must be > 0");
        if (caption_source == CaptionSource::gold && eval_caption_seeds.empty())
            throw ConfigError("gold captions need at least one eval caption seed");
        if (vocab.path.empty() && vocab.max_size.has_value() == vocab.min_count.has_value())
            throw ConfigError("vocab needs a path or exactly one of max_size / min_count");
    }
};

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

/// Named starting points. The full-scale presets record the published
/// protocols; their adapters are external plug-ins. The desk presets run the
/// toy models in seconds.
inline RunConfig preset(const std::string& name) {
    RunConfig c;
    c.name = name;
    if (name == "bert-classify" || name == "t5-generate") {
        // Consensus answers seen at least 9 times: the usual VQA 2.0 recipe
        // for its 3,129-answer vocabulary.
        c.vocab.max_size.reset();
        c.vocab.min_count = 9;
        c.vocab.unit = VocabCountUnit::consensus;
    }
    if (name == "bert-classify") {
        c.model = "bert-base-uncased";
        c.steps = 88000;
        c.batch_size = 56;
        c.learning_rate = 5e-5;
        c.schedule = LrSchedule::cosine_warmup;
        c.warmup_steps = 2000;
    } else if (name == "t5-generate") {
        c.model = "t5-base";
        c.style = InputStyle::prefixed_generative;
        c.steps = 20000;  // replaced by select-steps output
        c.batch_size = 56;
        c.learning_rate = 5e-5;
        c.schedule = LrSchedule::constant;
        c.warmup_steps = 0;
    } else if (name == "desk-classify") {
        c.model = kToyClassifierName;
    } else if (name == "desk-generate") {
        c.model = kToyGeneratorName;
        c.style = InputStyle::prefixed_generative;
    } else {
        throw ConfigError("unknown preset '" + name + "'");
    }
    return c;
}

// ---------------------------------------------------------------------------
// JSON form. Every field is optional and overrides the preset (if any).
// ---------------------------------------------------------------------------

inline Json config_to_json(const RunConfig& c) {
    Json vocab{{"path", c.vocab.path}, {"unit", c.vocab.unit == VocabCountUnit::annotations ? "annotations" : "consensus"}};
    vocab["max_size"] = c.vocab.max_size ? Json(*c.vocab.max_size) : Json(nullptr);
    vocab["min_count"] = c.vocab.min_count ? Json(*c.vocab.min_count) : Json(nullptr);
    return Json{
        {"name", c.name},
        {"mode", to_string(c.mode)},
        {"model", c.model},
        {"style", c.style == InputStyle::prefixed_generative ? "prefixed_generative" : "pair_encoding"},
        {"steps", c.steps},
        {"batch_size", c.batch_size},
        {"learning_rate", c.learning_rate},
        {"weight_decay", c.weight_decay},
        {"schedule", to_string(c.schedule)},
        {"warmup_steps", c.warmup_steps},
        {"seeds", c.seeds},
        {"validation_fraction", c.validation_fraction},
        {"split_seed", c.split_seed},
        {"eval_interval", c.eval_interval},
        {"caption_source", to_string(c.caption_source)},
        {"eval_caption_seeds", c.eval_caption_seeds},
        {"data",
         {{"train_questions", c.data.train_questions},
          {"train_annotations", c.data.train_annotations},
          {"eval_questions", c.data.eval_questions},
          {"eval_annotations", c.data.eval_annotations},
          {"captions", c.data.captions},
          {"regions_dir", c.data.regions_dir}}},
        {"vocab", vocab},
        {"hidden_size", c.hidden_size},
        {"n_buckets", c.n_buckets},
        {"region_dim", c.region_dim},
        {"concat_boxes", c.concat_boxes},
        {"skip_all_oov", c.skip_all_oov},
        {"metric", c.metric == MetricVariant::literal ? "literal" : "official_subsets"},
        {"init_checkpoint", c.init_checkpoint},
        {"cached_predictions", c.cached_predictions},
        {"output_dir", c.output_dir},
    };
}

inline RunConfig config_from_json(const Json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    RunConfig c = j.contains("preset") ? preset(j.at("preset").get<std::string>()) : RunConfig{};
    try {
        auto get = [&](const char* key, auto& field) {
            if (auto it = j.find(key); it != j.end()) field = it->get<std::decay_t<decltype(field)>>();
        };
        get("name", c.name);
        if (j.contains("mode")) c.mode = input_mode_from_string(j.at("mode").get<std::string>());
        get("model", c.model);
        if (j.contains("style")) {
            const auto s = j.at("style").get<std::string>();
            if (s == "pair_encoding") c.style = InputStyle::pair_encoding;
            else if (s == "prefixed_generative") c.style = InputStyle::prefixed_generative;
            else throw ConfigError("unknown input style '" + s + "'");
        }
        get("steps", c.steps);
        get("batch_size", c.batch_size);
        get("learning_rate", c.learning_rate);
        get("weight_decay", c.weight_decay);
        if (j.contains("schedule")) c.schedule = lr_schedule_from_string(j.at("schedule").get<std::string>());
        get("warmup_steps", c.warmup_steps);
        get("seeds", c.seeds);
        get("validation_fraction", c.validation_fraction);
        get("split_seed", c.split_seed);
        get("eval_interval", c.eval_interval);
        if (j.contains("caption_source")) {
            const auto s = j.at("caption_source").get<std::string>();
            if (s == "generated") c.caption_source = CaptionSource::generated;
            else if (s == "gold") c.caption_source = CaptionSource::gold;
            else throw ConfigError("unknown caption_source '" + s + "'");
        }
        get("eval_caption_seeds", c.eval_caption_seeds);
        if (auto d = j.find("data"); d != j.end()) {
            auto dget = [&](const char* key, std::string& field) {
                if (auto it = d->find(key); it != d->end()) field = it->get<std::string>();
            };
            dget("train_questions", c.data.train_questions);
            dget("train_annotations", c.data.train_annotations);
            dget("eval_questions", c.data.eval_questions);
            dget("eval_annotations", c.data.eval_annotations);
            dget("captions", c.data.captions);
            dget("regions_dir", c.data.regions_dir);
        }
        if (auto v = j.find("vocab"); v != j.end()) {
            if (auto it = v->find("path"); it != v->end()) c.vocab.path = it->get<std::string>();
            // Setting either cutoff replaces the preset's cutoff.
            if (v->contains("max_size") || v->contains("min_count")) {
                c.vocab.max_size.reset();
                c.vocab.min_count.reset();
            }
            if (auto it = v->find("max_size"); it != v->end() && !it->is_null()) c.vocab.max_size = it->get<std::size_t>();
            if (auto it = v->find("min_count"); it != v->end() && !it->is_null()) c.vocab.min_count = it->get<std::size_t>();
            if (auto it = v->find("unit"); it != v->end()) {
                const auto u = it->get<std::string>();
                if (u == "annotations") c.vocab.unit = VocabCountUnit::annotations;
                else if (u == "consensus") c.vocab.unit = VocabCountUnit::consensus;
                else throw ConfigError("unknown vocab unit '" + u + "'");
            }
        }
        get("hidden_size", c.hidden_size);
        get("n_buckets", c.n_buckets);
        get("region_dim", c.region_dim);
        get("concat_boxes", c.concat_boxes);
        get("skip_all_oov", c.skip_all_oov);
        if (j.contains("metric")) {
            const auto m = j.at("metric").get<std::string>();
            if (m == "literal") c.metric = MetricVariant::literal;
            else if (m == "official_subsets") c.metric = MetricVariant::official_subsets;
            else throw ConfigError("unknown metric '" + m + "'");
        }
        get("init_checkpoint", c.init_checkpoint);
        get("cached_predictions", c.cached_predictions);
        get("output_dir", c.output_dir);
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
    std::string text;
    try {
        text = detail::read_file(path);
    } catch (const ValidationError& e) {
        throw ConfigError(e.what());
    }
    try {
        return config_from_json(detail::parse_json(text, path.string()));
    } catch (const ParseError& e) {
        throw ConfigError(e.what());
    }
}

/// Canonical text of the resolved config; replaying it reproduces the run.
inline std::string config_snapshot(const RunConfig& c) { return config_to_json(c).dump(2) + "\n"; }

/// 16 hex digits of FNV-1a over the canonical snapshot.
inline std::string config_hash(const RunConfig& c) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : config_snapshot(c)) h = (h ^ ch) * 0x100000001b3ULL;
    std::ostringstream ss;
    ss << std::hex;
    ss.width(16);
    ss.fill('0');
    ss << h;
    return ss.str();
}

inline std::filesystem::path resolve_data_path(const std::string& path) {
    std::filesystem::path p(path);
    if (p.is_absolute()) return p;
    if (const char* root = std::getenv(kDataRootEnv); root && *root) return std::filesystem::path(root) / p;
    return p;
}

inline std::string expand_seed(std::string pattern, std::uint64_t seed) {
    const std::string key = "{seed}";
    for (auto pos = pattern.find(key); pos != std::string::npos; pos = pattern.find(key, pos))
        pattern.replace(pos, key.size(), std::to_string(seed));
    return pattern;
}

inline ToyTrainSettings toy_settings(const RunConfig& c, std::uint64_t seed, std::size_t steps) {
    ToyTrainSettings s;
    s.model.hidden_size = c.hidden_size;
    s.model.n_buckets = c.n_buckets;
    s.train.steps = steps;
    s.train.batch_size = c.batch_size;
    s.train.seed = seed;
    s.train.optimizer.learning_rate = c.learning_rate;
    s.train.optimizer.weight_decay = c.weight_decay;
    s.train.optimizer.schedule = c.schedule;
    s.train.optimizer.warmup_steps = c.warmup_steps;
    s.train.optimizer.total_steps = steps;
    s.mode = c.mode;
    s.style = c.style;
    s.multimodal.expected_d_v = c.region_dim;
    s.multimodal.concat_boxes = c.concat_boxes;
    s.skip_all_oov = c.skip_all_oov;
    return s;
}

} // namespace capvqa
