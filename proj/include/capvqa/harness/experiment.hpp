// Copyright (C) 2026 The capvqa Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "capvqa/dataset.hpp"
#include "capvqa/error.hpp"
#include "capvqa/harness/config.hpp"
#include "capvqa/harness/io.hpp"
#include "capvqa/metrics.hpp"
#include "capvqa/modeling/adapters.hpp"
#include "capvqa/modeling/toy_model.hpp"
#include "capvqa/vocab.hpp"

namespace capvqa {

// ---------------------------------------------------------------------------
// Data loading
// ---------------------------------------------------------------------------

struct RunData {
    std::vector<QuestionRecord> train_questions;
    std::vector<AnnotationRecord> train_annotations;
    std::vector<QuestionRecord> eval_questions;
    std::vector<AnnotationRecord> eval_annotations;
    CaptionTable captions;
    RegionStore regions;
};

/// Checks that every configured path exists before anything is loaded, then
/// loads. Without eval paths the training data is also the evaluation data.
inline RunData load_run_data(const RunConfig& c) {
    std::vector<std::pair<const char*, std::string>> required{{"train_questions", c.data.train_questions},
                                                              {"train_annotations", c.data.train_annotations}};
    const bool separate_eval = !c.data.eval_questions.empty() || !c.data.eval_annotations.empty();
    if (separate_eval) {
        required.emplace_back("eval_questions", c.data.eval_questions);
        required.emplace_back("eval_annotations", c.data.eval_annotations);
    }
    if (mode_uses_caption(c.mode)) required.emplace_back("captions", c.data.captions);
    if (mode_uses_regions(c.mode)) required.emplace_back("regions_dir", c.data.regions_dir);
    if (!c.vocab.path.empty()) required.emplace_back("vocab.path", c.vocab.path);
    for (const auto& [key, path] : required) {
        if (path.empty()) throw ConfigError(std::string("missing dataset path '") + key + "'");
        if (!std::filesystem::exists(resolve_data_path(path)))
            throw ConfigError(std::string("dataset path '") + key + "' does not exist: " + resolve_data_path(path).string());
    }

    RunData d;
    d.train_questions = load_questions(resolve_data_path(c.data.train_questions));
    d.train_annotations = load_annotations(resolve_data_path(c.data.train_annotations));
    if (separate_eval) {
        d.eval_questions = load_questions(resolve_data_path(c.data.eval_questions));
        d.eval_annotations = load_annotations(resolve_data_path(c.data.eval_annotations));
    } else {
        d.eval_questions = d.train_questions;
        d.eval_annotations = d.train_annotations;
    }
    if (mode_uses_caption(c.mode)) {
        const auto records = load_captions(resolve_data_path(c.data.captions));
        d.captions = CaptionTable::from_records(records);
    }
    if (mode_uses_regions(c.mode)) {
        std::set<ImageId> images;
        for (const auto& q : d.train_questions) images.insert(q.image_id);
        for (const auto& q : d.eval_questions) images.insert(q.image_id);
        d.regions = RegionStore::load_directory(resolve_data_path(c.data.regions_dir), images);
    }
    return d;
}

inline AnswerVocab resolve_vocab(const RunConfig& c, const RunData& d) {
    if (!c.vocab.path.empty()) return AnswerVocab::load(resolve_data_path(c.vocab.path));
    return build_answer_vocab(d.train_annotations, {c.vocab.min_count, c.vocab.max_size, c.vocab.unit});
}

/// Caption per image for one run: the generated caption, or one gold caption
/// chosen by `selection_seed`.
inline std::map<ImageId, CaptionRecord> captions_for(const RunConfig& c, const RunData& d, std::uint64_t selection_seed) {
    if (!mode_uses_caption(c.mode)) return {};
    if (c.caption_source == CaptionSource::generated) return d.captions.generated;
    return select_gold_captions(d.captions, selection_seed);
}

// ---------------------------------------------------------------------------
// Answer models
// ---------------------------------------------------------------------------

struct AdapterContext {
    const RunConfig& config;
    std::uint64_t seed;
    const AnswerVocab& vocab;
    const ExampleSet& train;
    const RegionStore* regions;
};

/// External answer models by name (pretrained encoders, text-to-text models).
struct AdapterSet {
    AdapterRegistry<AnswerClassifier, AdapterContext> classifiers;
    AdapterRegistry<AnswerGenerator, AdapterContext> generators;
};

/// One trained (or loaded) answer model, whatever its kind.
struct AnswerModel {
    std::shared_ptr<const ToyAnswerModel> toy;
    std::unique_ptr<AnswerClassifier> classifier;
    std::unique_ptr<AnswerGenerator> generator;
    const AnswerVocab* vocab = nullptr;
    std::vector<double> losses;

    bool has_distribution() const { return classifier != nullptr; }

    std::string answer(const ModelInput& in) const {
        if (generator) return generator->generate(in);
        return vocab->answer(classifier->classify(in).argmax());
    }
};

inline AnswerModel obtain_answer_model(const RunConfig& c, std::uint64_t seed, const AnswerVocab& vocab,
                                       const ExampleSet& train, const RegionStore* regions, const AdapterSet& adapters) {
    AnswerModel m;
    m.vocab = &vocab;
    std::optional<ToyAnswerModel> init;
    if (!c.init_checkpoint.empty()) init = load_toy_model(resolve_data_path(expand_seed(c.init_checkpoint, seed)));
    const ToyAnswerModel* init_ptr = init ? &*init : nullptr;

    if (c.model == kToyClassifierName) {
        auto t = train_toy_classifier(train, vocab, toy_settings(c, seed, c.steps), regions, init_ptr);
        m.toy = std::make_shared<ToyAnswerModel>(std::move(t.model));
        m.losses = std::move(t.losses);
        m.classifier = std::make_unique<ToyClassifierAdapter>(m.toy, c.model);
    } else if (c.model == kToyGeneratorName) {
        auto t = train_toy_generator(train, toy_settings(c, seed, c.steps), regions, init_ptr);
        m.toy = std::make_shared<ToyAnswerModel>(std::move(t.model));
        m.losses = std::move(t.losses);
        m.generator = std::make_unique<ToyGeneratorAdapter>(m.toy, c.model);
    } else {
        const AdapterContext ctx{c, seed, vocab, train, regions};
        if (adapters.classifiers.contains(c.model)) {
            m.classifier = adapters.classifiers.create(c.model, ctx);
        } else if (adapters.generators.contains(c.model)) {
            m.generator = adapters.generators.create(c.model, ctx);
        } else if (!c.cached_predictions.empty()) {
            const auto path = resolve_data_path(expand_seed(c.cached_predictions, seed));
            m.generator = std::make_unique<CachedGenerator>(read_predictions(path), "cache:" + path.string());
        } else {
            throw AdapterError(c.model, "adapter is not available and no cached_predictions file is configured");
        }
    }
    return m;
}

// ---------------------------------------------------------------------------
// run_experiment
// ---------------------------------------------------------------------------

struct SeedRun {
    std::uint64_t seed = 0;
    /// Gold-caption selection used at evaluation (gold caption runs only).
    std::optional<std::uint64_t> eval_caption_seed;
    std::filesystem::path predictions_path;
    std::filesystem::path distributions_path;  // empty for generators
    std::filesystem::path report_path;
    EvalReport report;
};

struct RunArtifacts {
    std::filesystem::path run_dir;
    std::string config_snapshot;
    AnswerVocab vocab;
    std::vector<SeedRun> runs;
    /// Final training loss per seed, in seed order.
    std::map<std::uint64_t, std::vector<double>> losses;
    std::map<std::uint64_t, std::filesystem::path> checkpoints;
    RunAggregate aggregate;
};

inline std::filesystem::path run_directory(const RunConfig& c) {
    return std::filesystem::path(c.output_dir) / (c.name + "-" + config_hash(c).substr(0, 12));
}

/// Train (or load) one model per seed, evaluate it, and aggregate the seed
/// scores. With gold captions every seed is evaluated once per eval caption
/// seed. All outputs go under `run_directory(c)`.
inline RunArtifacts run_experiment(const RunConfig& c, const AdapterSet& adapters = {}) {
    c.validate();
    const RunData data = load_run_data(c);

    RunArtifacts art;
    art.run_dir = run_directory(c);
    art.config_snapshot = config_snapshot(c);
    art.vocab = resolve_vocab(c, data);
    if (art.vocab.empty()) throw ValidationError("answer vocabulary is empty");
    std::filesystem::create_directories(art.run_dir);
    detail::write_file(art.run_dir / "config.json", art.config_snapshot);
    detail::write_file(art.run_dir / "vocab.txt", art.vocab.to_text());

    const RegionStore* regions = mode_uses_regions(c.mode) ? &data.regions : nullptr;
    const MultimodalOptions mm{c.region_dim, c.concat_boxes};

    for (const auto seed : c.seeds) {
        const auto train = join_examples(data.train_questions, data.train_annotations, captions_for(c, data, seed), c.mode,
                                         SplitTag::train);
        AnswerModel model = obtain_answer_model(c, seed, art.vocab, train, regions, adapters);
        art.losses[seed] = model.losses;
        if (model.toy) {
            const auto path = art.run_dir / ("model-seed" + std::to_string(seed) + ".json");
            detail::write_file(path, toy_model_to_json(*model.toy));
            art.checkpoints[seed] = path;
        }

        std::vector<std::optional<std::uint64_t>> selections;
        if (mode_uses_caption(c.mode) && c.caption_source == CaptionSource::gold)
            for (auto e : c.eval_caption_seeds) selections.emplace_back(e);
        else
            selections.emplace_back(std::nullopt);

        for (const auto& selection : selections) {
            const auto eval = join_examples(data.eval_questions, data.eval_annotations,
                                            captions_for(c, data, selection.value_or(0)), c.mode, SplitTag::test);
            Predictions preds;
            Distributions dists;
            for (const auto& ex : eval.examples) {
                const auto in = make_model_input(ex, c.mode, c.style, regions, mm);
                if (model.has_distribution()) {
                    auto d = model.classifier->classify(in);
                    preds[ex.question.question_id] = art.vocab.answer(d.argmax());
                    dists.emplace(ex.question.question_id, std::move(d));
                } else {
                    preds[ex.question.question_id] = model.answer(in);
                }
            }
            std::string tag = "seed" + std::to_string(seed);
            if (selection) tag += "-cap" + std::to_string(*selection);

            SeedRun run;
            run.seed = seed;
            run.eval_caption_seed = selection;
            run.predictions_path = art.run_dir / ("predictions-" + tag + ".jsonl");
            write_predictions(preds, run.predictions_path);
            if (model.has_distribution()) {
                run.distributions_path = art.run_dir / ("distributions-" + tag + ".jsonl");
                detail::write_file(run.distributions_path,
                                   format_distributions(dists, art.vocab.size(), art.vocab.fingerprint()));
            }
            run.report = evaluate_predictions(preds, data.eval_annotations, c.metric);
            run.report_path = art.run_dir / ("report-" + tag + ".json");
            detail::write_file(run.report_path, report_to_json(run.report, c.metric).dump(1) + "\n");
            art.runs.push_back(std::move(run));
        }
    }

    std::vector<EvalReport> reports;
    for (const auto& r : art.runs) reports.push_back(r.report);
    art.aggregate = aggregate_runs(reports);
    Json runs = Json::array();
    for (const auto& r : art.runs) {
        Json e{{"seed", r.seed}, {"mean_score", r.report.mean_score}, {"n", r.report.n},
               {"unanswered", r.report.unanswered.size()}};
        if (r.eval_caption_seed) e["eval_caption_seed"] = *r.eval_caption_seed;
        runs.push_back(std::move(e));
    }
    Json summary = aggregate_to_json(art.aggregate);
    summary["runs"] = runs;
    detail::write_file(art.run_dir / "aggregate.json", summary.dump(1) + "\n");
    return art;
}

/// Predictions and report of a saved toy model on the configured eval data.
inline std::pair<Predictions, EvalReport> evaluate_checkpoint(const RunConfig& c, const std::filesystem::path& checkpoint,
                                                              std::uint64_t eval_caption_seed = 0) {
    const auto model = load_toy_model(checkpoint);
    RunConfig eval_cfg = c;
    eval_cfg.mode = model.mode();
    const RunData data = load_run_data(eval_cfg);
    const RegionStore* regions = mode_uses_regions(model.mode()) ? &data.regions : nullptr;
    const auto eval = join_examples(data.eval_questions, data.eval_annotations,
                                    captions_for(eval_cfg, data, eval_caption_seed), model.mode(), SplitTag::test);
    Predictions preds;
    for (const auto& ex : eval.examples) preds[ex.question.question_id] = model.answer(ex, regions);
    auto report = evaluate_predictions(preds, data.eval_annotations, c.metric);
    return {std::move(preds), std::move(report)};
}

// ---------------------------------------------------------------------------
// Step selection
// ---------------------------------------------------------------------------

/// (step, validation VQA score) pairs in increasing step order.
using ValidationCurve = std::vector<std::pair<std::size_t, double>>;

class StepwiseTrainer {
public:
    virtual ~StepwiseTrainer() = default;
    /// Train on `train` from scratch up to `max_steps`, scoring `val` every
    /// `eval_interval` steps and at `max_steps`.
    virtual ValidationCurve validation_curve(const ExampleSet& train, const ExampleSet& val, std::uint64_t seed,
                                             std::size_t max_steps, std::size_t eval_interval) const = 0;
};

/// Trains the configured toy model (classifier or generator).
class ToyStepwiseTrainer final : public StepwiseTrainer {
public:
    ToyStepwiseTrainer(const RunConfig& config, const AnswerVocab& vocab, const RegionStore* regions)
        : config_(config), vocab_(vocab), regions_(regions) {}

    ValidationCurve validation_curve(const ExampleSet& train, const ExampleSet& val, std::uint64_t seed,
                                     std::size_t max_steps, std::size_t eval_interval) const override {
        auto settings = toy_settings(config_, seed, max_steps);
        settings.train.eval_interval = eval_interval;
        const bool generator = config_.model == kToyGeneratorName;
        if (!generator && config_.model != kToyClassifierName)
            throw AdapterError(config_.model, "step selection needs a trainable built-in model");

        std::vector<AnnotationRecord> val_annotations;
        for (const auto& ex : val.examples) val_annotations.push_back(ex.annotation);
        const AnswerVocab labels = generator ? generator_targets(train) : vocab_;
        const HashTokenizer tokenizer(config_.n_buckets);
        const auto val_inputs = encode_examples(val, settings.mode, settings.style, tokenizer, regions_, settings.multimodal);

        ValidationCurve curve;
        settings.train.on_eval = [&](std::size_t step, const ToyModel& m) {
            Predictions preds;
            for (std::size_t i = 0; i < val.size(); ++i) {
                const auto f = toy_forward(m, val_inputs[i]);
                Eigen::Index k = 0;
                f.head.probs.maxCoeff(&k);
                preds[val.examples[i].question.question_id] = labels.answer(static_cast<std::size_t>(k));
            }
            curve.emplace_back(step, evaluate_predictions(preds, val_annotations, config_.metric).mean_score);
        };
        if (generator) train_toy_generator(train, settings, regions_);
        else train_toy_classifier(train, vocab_, settings, regions_);
        return curve;
    }

private:
    const RunConfig& config_;
    const AnswerVocab& vocab_;
    const RegionStore* regions_;
};

/// Step with the highest score; the earliest such step on ties.
inline std::size_t best_step(const ValidationCurve& curve) {
    if (curve.empty()) throw PreconditionError("empty validation curve");
    auto best = curve.front();
    for (const auto& p : curve)
        if (p.second > best.second) best = p;
    return best.first;
}

/// Rounded (half up) mean of the per-seed best steps, clamped to [1, max_steps].
inline std::size_t mean_step(const std::vector<std::size_t>& steps, std::size_t max_steps) {
    if (steps.empty()) throw PreconditionError("no best steps to average");
    std::size_t sum = 0;
    for (auto s : steps) sum += s;
    const std::size_t n = steps.size();
    return std::clamp<std::size_t>((sum + n / 2) / n, 1, max_steps);
}

struct StepSelection {
    std::size_t steps = 0;
    std::vector<std::size_t> best_steps;
    std::vector<ValidationCurve> curves;
};

/// Holds out a validation split once (shared across seeds), finds each
/// seed's best validation step, and averages them.
inline StepSelection select_training_steps(const ExampleSet& examples, const RunConfig& c, std::size_t max_steps,
                                           const StepwiseTrainer& trainer) {
    if (max_steps == 0) throw ConfigError("max_steps must be > 0");
    if (c.seeds.empty()) throw ConfigError("step selection needs at least one seed");
    auto [train, val] = split_validation(examples, c.validation_fraction, c.split_seed);
    if (val.empty()) throw ConfigError("validation split is empty; add data or raise validation_fraction");

    StepSelection sel;
    for (const auto seed : c.seeds) {
        auto curve = trainer.validation_curve(train, val, seed, max_steps, std::min(c.eval_interval, max_steps));
        sel.best_steps.push_back(best_step(curve));
        sel.curves.push_back(std::move(curve));
    }
    sel.steps = mean_step(sel.best_steps, max_steps);
    return sel;
}

inline StepSelection select_training_steps(const RunConfig& c, std::size_t max_steps) {
    c.validate();
    const RunData data = load_run_data(c);
    const auto vocab = resolve_vocab(c, data);
    const auto examples = join_examples(data.train_questions, data.train_annotations,
                                        captions_for(c, data, c.seeds.front()), c.mode, SplitTag::train);
    const ToyStepwiseTrainer trainer(c, vocab, mode_uses_regions(c.mode) ? &data.regions : nullptr);
    return select_training_steps(examples, c, max_steps, trainer);
}

} // namespace capvqa
