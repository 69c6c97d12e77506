// Copyright (C) 2026 The capvqa Authors
// SPDX-License-Identifier: Apache-2.0

// Small trainable stand-ins for the pretrained encoders: a bag-of-embeddings
// text encoder (optionally joined by projected region features) topped with
// the one-hidden-layer classification head, trained with soft cross-entropy
// and AdamW. Everything is single-threaded and seeded, so two runs with the
// same inputs produce bitwise-identical parameters.

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <numbers>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "capvqa/dataset.hpp"
#include "capvqa/error.hpp"
#include "capvqa/json_io.hpp"
#include "capvqa/modeling/adapters.hpp"
#include "capvqa/modeling/head.hpp"
#include "capvqa/modeling/input.hpp"
#include "capvqa/modeling/regions.hpp"
#include "capvqa/rng.hpp"
#include "capvqa/vocab.hpp"

namespace capvqa {

struct ToyModelConfig {
    std::size_t hidden_size = 32;
    std::size_t n_buckets = 2048;
    std::size_t n_label = 0;
    /// Width of each region input row; 0 for text-only models.
    std::size_t region_dim = 0;
    double init_scale = 0.02;
    double embedding_scale = 0.1;
};

struct ToyModel {
    ToyModelConfig config;
    Eigen::MatrixXd embeddings;   // d_h x n_buckets, one column per token id
    Eigen::MatrixXd region_proj;  // d_h x region_dim
    Eigen::VectorXd region_bias;  // d_h
    ClassifierHeadParams<double> head;

    static ToyModel initialized(const ToyModelConfig& cfg, std::uint64_t seed) {
        if (cfg.hidden_size == 0 || cfg.n_label == 0) throw ConfigError("toy model needs hidden_size and n_label > 0");
        Rng rng(hash_keys({seed, 0x70e1ULL}));
        ToyModel m;
        m.config = cfg;
        const auto d = static_cast<Eigen::Index>(cfg.hidden_size);
        m.embeddings = Eigen::MatrixXd::NullaryExpr(d, static_cast<Eigen::Index>(cfg.n_buckets), [&] {
            return rng.uniform(-cfg.embedding_scale, cfg.embedding_scale);
        });
        const auto r = static_cast<Eigen::Index>(cfg.region_dim);
        const double region_scale = cfg.region_dim ? 1.0 / std::sqrt(static_cast<double>(cfg.region_dim)) : 0.0;
        m.region_proj = Eigen::MatrixXd::NullaryExpr(d, r, [&] { return rng.uniform(-region_scale, region_scale); });
        m.region_bias = Eigen::VectorXd::Zero(d);
        m.head = ClassifierHeadParams<double>::initialized(cfg.hidden_size, cfg.n_label, rng, cfg.init_scale);
        return m;
    }

    ToyModel zeros_like() const {
        ToyModel z;
        z.config = config;
        z.embeddings = Eigen::MatrixXd::Zero(embeddings.rows(), embeddings.cols());
        z.region_proj = Eigen::MatrixXd::Zero(region_proj.rows(), region_proj.cols());
        z.region_bias = Eigen::VectorXd::Zero(region_bias.size());
        z.head.W_h = Eigen::MatrixXd::Zero(head.W_h.rows(), head.W_h.cols());
        z.head.b_h = Eigen::VectorXd::Zero(head.b_h.size());
        z.head.ln_gamma = Eigen::VectorXd::Zero(head.ln_gamma.size());
        z.head.ln_beta = Eigen::VectorXd::Zero(head.ln_beta.size());
        z.head.W_y = Eigen::MatrixXd::Zero(head.W_y.rows(), head.W_y.cols());
        z.head.b_y = Eigen::VectorXd::Zero(head.b_y.size());
        return z;
    }
};

/// Calls f(name, decays, tensor_of_each_model...) for every parameter tensor.
/// `decays` is false for biases and LayerNorm parameters.
template <class F, class... Models>
void visit_tensors(F&& f, Models&... m) {
    f("embeddings", true, m.embeddings...);
    f("region_proj", true, m.region_proj...);
    f("region_bias", false, m.region_bias...);
    f("head.W_h", true, m.head.W_h...);
    f("head.b_h", false, m.head.b_h...);
    f("head.ln_gamma", false, m.head.ln_gamma...);
    f("head.ln_beta", false, m.head.ln_beta...);
    f("head.W_y", true, m.head.W_y...);
    f("head.b_y", false, m.head.b_y...);
}

// ---------------------------------------------------------------------------
// Forward / backward
// ---------------------------------------------------------------------------

struct EncodedInput {
    std::vector<int> tokens;
    Eigen::MatrixXd regions;  // n_v x region_dim, empty for text-only
};

inline EncodedInput encode_input(const ModelInput& in, const HashTokenizer& tokenizer) {
    EncodedInput e;
    if (in.multimodal) {
        std::vector<std::pair<SegmentKind, std::string>> parts;
        for (const auto& s : in.multimodal->slots) {
            if (s.kind == SlotKind::question) parts.emplace_back(SegmentKind::question, s.text);
            else if (s.kind == SlotKind::caption) parts.emplace_back(SegmentKind::caption, s.text);
        }
        e.tokens = tokenizer.tokenize_segments(parts).tokens;
        e.regions = in.multimodal->region_inputs;
    } else {
        e.tokens = tokenizer.tokenize(in.text).tokens;
    }
    return e;
}

struct ToyForward {
    Eigen::VectorXd pooled;
    HeadActivations<double> head;
    std::size_t slots = 0;
};

/// pooled = mean over slots, where a slot is a token embedding or a projected
/// region (region_proj * v + region_bias).
inline ToyForward toy_forward(const ToyModel& m, const EncodedInput& in) {
    const auto d = static_cast<Eigen::Index>(m.config.hidden_size);
    ToyForward f;
    f.pooled = Eigen::VectorXd::Zero(d);
    for (int t : in.tokens) {
        if (t < 0 || t >= m.embeddings.cols()) throw ConfigError("token id outside the embedding table");
        f.pooled += m.embeddings.col(t);
    }
    f.slots = in.tokens.size();
    if (in.regions.rows() > 0) {
        if (in.regions.cols() != m.region_proj.cols())
            throw ConfigError("region rows have width " + std::to_string(in.regions.cols()) + ", model expects " +
                              std::to_string(m.region_proj.cols()));
        f.pooled += m.region_proj * in.regions.colwise().sum().transpose() +
                    m.region_bias * static_cast<double>(in.regions.rows());
        f.slots += static_cast<std::size_t>(in.regions.rows());
    }
    if (f.slots == 0) throw PreconditionError("empty model input");
    f.pooled /= static_cast<double>(f.slots);
    f.head = classifier_head_activations(f.pooled, m.head);
    return f;
}

/// Accumulates d(loss)/d(params) into `grad` given d(loss)/d(logits).
inline void toy_backward(const ToyModel& m, const EncodedInput& in, const ToyForward& f, const Eigen::VectorXd& dlogits,
                         ToyModel& grad) {
    const auto& a = f.head;
    grad.head.W_y.noalias() += a.hidden * dlogits.transpose();
    grad.head.b_y += dlogits;
    const Eigen::VectorXd dh = m.head.W_y * dlogits;

    grad.head.ln_gamma += dh.cwiseProduct(a.norm.normalized);
    grad.head.ln_beta += dh;
    const Eigen::VectorXd dxhat = dh.cwiseProduct(m.head.ln_gamma);
    const double n = static_cast<double>(dxhat.size());
    const double mean_dxhat = dxhat.sum() / n;
    const double mean_dxhat_xhat = dxhat.dot(a.norm.normalized) / n;
    const Eigen::VectorXd dact =
        a.norm.inv_std * (dxhat.array() - mean_dxhat - a.norm.normalized.array() * mean_dxhat_xhat).matrix();

    const Eigen::VectorXd du =
        dact.cwiseProduct(a.pre_activation.unaryExpr([](double x) { return gelu_derivative(x); }));
    grad.head.W_h.noalias() += du * f.pooled.transpose();
    grad.head.b_h += du;
    const Eigen::VectorXd dpooled = m.head.W_h.transpose() * du;

    const Eigen::VectorXd dslot = dpooled / static_cast<double>(f.slots);
    for (int t : in.tokens) grad.embeddings.col(t) += dslot;
    if (in.regions.rows() > 0) {
        grad.region_proj.noalias() += dslot * in.regions.colwise().sum();
        grad.region_bias += dslot * static_cast<double>(in.regions.rows());
    }
}

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

enum class LrSchedule { constant, cosine_warmup };

inline const char* to_string(LrSchedule s) { return s == LrSchedule::constant ? "constant" : "cosine_warmup"; }

inline LrSchedule lr_schedule_from_string(std::string_view s) {
    if (s == "constant") return LrSchedule::constant;
    if (s == "cosine_warmup") return LrSchedule::cosine_warmup;
    throw ConfigError("unknown learning-rate schedule '" + std::string(s) + "'");
}

struct OptimizerConfig {
    double learning_rate = 5e-5;
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    LrSchedule schedule = LrSchedule::cosine_warmup;
    std::size_t warmup_steps = 0;
    std::size_t total_steps = 0;
};

/// Rate for update number `step` (1-based): linear warmup to the peak, then
/// cosine decay to 0 at `total_steps`.
inline double learning_rate_at(const OptimizerConfig& c, std::size_t step) {
    if (c.schedule == LrSchedule::constant) return c.learning_rate;
    if (step <= c.warmup_steps && c.warmup_steps > 0)
        return c.learning_rate * static_cast<double>(step) / static_cast<double>(c.warmup_steps);
    if (c.total_steps <= c.warmup_steps) return c.learning_rate;
    const double progress = static_cast<double>(step - c.warmup_steps) / static_cast<double>(c.total_steps - c.warmup_steps);
    return c.learning_rate * 0.5 * (1.0 + std::cos(std::numbers::pi * std::min(progress, 1.0)));
}

/// Adam with decoupled weight decay. Decay applies to weight matrices only.
class AdamW {
public:
    AdamW(const ToyModel& shape, OptimizerConfig config)
        : config_(config), m_(shape.zeros_like()), v_(shape.zeros_like()) {}

    std::size_t steps_taken() const noexcept { return t_; }

    void step(ToyModel& params, ToyModel& grad) {
        ++t_;
        const double lr = learning_rate_at(config_, t_);
        const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
        const auto& c = config_;
        visit_tensors(
            [&](const char*, bool decays, auto& p, auto& g, auto& m, auto& v) {
                m = c.beta1 * m + (1.0 - c.beta1) * g;
                v = c.beta2 * v + (1.0 - c.beta2) * g.cwiseProduct(g);
                auto update = ((m.array() / bc1) / ((v.array() / bc2).sqrt() + c.epsilon)).matrix();
                if (decays) p -= lr * (update + c.weight_decay * p);
                else p -= lr * update;
            },
            params, grad, m_, v_);
    }

private:
    OptimizerConfig config_;
    ToyModel m_;
    ToyModel v_;
    std::size_t t_ = 0;
};

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

/// Supervision for example i in a given epoch. Returns false when the example
/// has no usable target (it is then left out of training).
class TrainingTargets {
public:
    virtual ~TrainingTargets() = default;
    virtual bool target(std::size_t i, std::uint64_t epoch, SoftLabel& out) const = 0;
};

/// Fixed soft labels (classifier training).
class SoftLabelTargets final : public TrainingTargets {
public:
    SoftLabelTargets(std::vector<SoftLabel> labels, bool skip_all_oov)
        : labels_(std::move(labels)), skip_all_oov_(skip_all_oov) {}

    bool target(std::size_t i, std::uint64_t, SoftLabel& out) const override {
        const auto& l = labels_.at(i);
        if (l.all_oov && skip_all_oov_) return false;
        out = l;
        return true;
    }

private:
    std::vector<SoftLabel> labels_;
    bool skip_all_oov_;
};

/// One answer drawn per epoch from each question's eligible pool, as a
/// one-hot target over `target_vocab` (generator training).
class SampledAnswerTargets final : public TrainingTargets {
public:
    SampledAnswerTargets(std::vector<TargetPool> pools, const AnswerVocab& target_vocab, std::uint64_t seed)
        : pools_(std::move(pools)), vocab_(&target_vocab), seed_(seed) {}

    bool target(std::size_t i, std::uint64_t epoch, SoftLabel& out) const override {
        const auto& pool = pools_.at(i);
        if (pool.discarded) return false;
        const auto k = vocab_->index_of(sample_target(pool, epoch, seed_));
        if (!k) return false;
        out.question_id = pool.question_id;
        out.entries.assign(1, {*k, 1.0});
        out.all_oov = false;
        return true;
    }

private:
    std::vector<TargetPool> pools_;
    const AnswerVocab* vocab_;
    std::uint64_t seed_;
};

struct TrainOptions {
    std::size_t steps = 1000;
    std::size_t batch_size = 16;
    OptimizerConfig optimizer;
    std::uint64_t seed = 0;
    /// Call `on_eval` every `eval_interval` steps (and after the last step).
    std::size_t eval_interval = 0;
    std::function<void(std::size_t step, const ToyModel&)> on_eval;
};

struct TrainResult {
    ToyModel model;
    /// Mean batch loss per step.
    std::vector<double> losses;
    std::size_t skipped_examples = 0;
};

inline TrainResult train_toy_model(ToyModel model, std::span<const EncodedInput> inputs, const TrainingTargets& targets,
                                   TrainOptions opts) {
    if (opts.steps == 0) throw ConfigError("training needs steps > 0");
    if (opts.batch_size == 0) throw ConfigError("training needs batch_size > 0");
    if (opts.optimizer.total_steps == 0) opts.optimizer.total_steps = opts.steps;

    TrainResult result;
    std::vector<std::size_t> active;
    SoftLabel probe;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (targets.target(i, 0, probe)) active.push_back(i);
        else ++result.skipped_examples;
    }
    if (active.empty()) throw PreconditionError("no trainable examples");

    AdamW optimizer(model, opts.optimizer);
    ToyModel grad = model.zeros_like();
    std::vector<std::size_t> order;
    std::size_t cursor = 0;
    std::uint64_t epoch = 0;
    auto reshuffle = [&] {
        order = active;
        Rng rng(hash_keys({opts.seed, epoch, 0xba7cULL}));
        rng.shuffle(order.begin(), order.end());
        cursor = 0;
    };
    reshuffle();

    result.losses.reserve(opts.steps);
    SoftLabel label;
    Eigen::VectorXd y(static_cast<Eigen::Index>(model.config.n_label));
    for (std::size_t step = 1; step <= opts.steps; ++step) {
        visit_tensors([](const char*, bool, auto& g) { g.setZero(); }, grad);
        double loss = 0.0;
        const std::size_t batch = opts.batch_size;
        for (std::size_t b = 0; b < batch; ++b) {
            if (cursor == order.size()) {
                ++epoch;
                reshuffle();
            }
            const std::size_t i = order[cursor++];
            targets.target(i, epoch, label);
            const auto f = toy_forward(model, inputs[i]);
            y.setZero();
            for (const auto& [k, p] : label.entries) {
                if (k < 0 || k >= y.size()) throw ConfigError("target class outside the model's label space");
                y[k] = p;
            }
            loss += sce_loss(std::span<const double>(f.head.probs.data(), static_cast<std::size_t>(f.head.probs.size())),
                             std::span<const double>(y.data(), static_cast<std::size_t>(y.size())))
                        .value;
            const Eigen::VectorXd dlogits = (f.head.probs - y) / static_cast<double>(batch);
            toy_backward(model, inputs[i], f, dlogits, grad);
        }
        optimizer.step(model, grad);
        result.losses.push_back(loss / static_cast<double>(batch));
        if (opts.on_eval && opts.eval_interval && (step % opts.eval_interval == 0 || step == opts.steps))
            opts.on_eval(step, model);
    }
    result.model = std::move(model);
    return result;
}

// ---------------------------------------------------------------------------
// Trained toy answer models
// ---------------------------------------------------------------------------

struct ToyTrainSettings {
    ToyModelConfig model;
    TrainOptions train;
    InputMode mode = InputMode::caption;
    InputStyle style = InputStyle::pair_encoding;
    MultimodalOptions multimodal;
    bool skip_all_oov = true;
};

/// A toy model bound to its label space and input pipeline.
class ToyAnswerModel {
public:
    ToyAnswerModel(ToyModel model, AnswerVocab labels, InputMode mode, InputStyle style, MultimodalOptions mm)
        : model_(std::move(model)), labels_(std::move(labels)), tokenizer_(model_.config.n_buckets), mode_(mode),
          style_(style), mm_(mm) {
        if (labels_.size() != model_.config.n_label)
            throw ConfigError("model has " + std::to_string(model_.config.n_label) + " labels, vocabulary has " +
                              std::to_string(labels_.size()));
    }

    const ToyModel& model() const noexcept { return model_; }
    const AnswerVocab& labels() const noexcept { return labels_; }
    InputMode mode() const noexcept { return mode_; }
    InputStyle style() const noexcept { return style_; }
    const MultimodalOptions& multimodal_options() const noexcept { return mm_; }
    const HashTokenizer& tokenizer() const noexcept { return tokenizer_; }

    ModelInput input_for(const Example& ex, const RegionStore* regions) const {
        return make_model_input(ex, mode_, style_, regions, mm_);
    }

    PredictionDistribution distribution(const ModelInput& in) const {
        const auto f = toy_forward(model_, encode_input(in, tokenizer_));
        return PredictionDistribution::from_vector(f.head.probs, labels_.fingerprint());
    }

    std::string answer(const ModelInput& in) const { return labels_.answer(distribution(in).argmax()); }

    std::string answer(const Example& ex, const RegionStore* regions) const { return answer(input_for(ex, regions)); }

private:
    ToyModel model_;
    AnswerVocab labels_;
    HashTokenizer tokenizer_;
    InputMode mode_;
    InputStyle style_;
    MultimodalOptions mm_;
};

inline std::size_t region_input_dim(InputMode mode, const MultimodalOptions& mm) {
    if (!mode_uses_regions(mode)) return 0;
    return mm.expected_d_v + (mm.concat_boxes ? kBoxDim : 0);
}

inline std::vector<EncodedInput> encode_examples(const ExampleSet& set, InputMode mode, InputStyle style,
                                                 const HashTokenizer& tokenizer, const RegionStore* regions,
                                                 const MultimodalOptions& mm) {
    std::vector<EncodedInput> out;
    out.reserve(set.size());
    for (const auto& ex : set.examples) out.push_back(encode_input(make_model_input(ex, mode, style, regions, mm), tokenizer));
    return out;
}

// ---------------------------------------------------------------------------
// Checkpoints: one JSON document holding the label space, the input
// pipeline and every tensor (column-major).
// ---------------------------------------------------------------------------

inline std::string toy_model_to_json(const ToyAnswerModel& model) {
    const auto& m = model.model();
    Json tensors = Json::object();
    visit_tensors(
        [&](const char* name, bool, const auto& t) {
            std::vector<double> data(t.data(), t.data() + t.size());
            tensors[name] = Json{{"rows", t.rows()}, {"cols", t.cols()}, {"data", data}};
        },
        m);
    Json cfg{{"hidden_size", m.config.hidden_size}, {"n_buckets", m.config.n_buckets}, {"n_label", m.config.n_label},
             {"region_dim", m.config.region_dim}, {"init_scale", m.config.init_scale},
             {"embedding_scale", m.config.embedding_scale}};
    Json input{{"mode", to_string(model.mode())},
               {"style", model.style() == InputStyle::prefixed_generative ? "prefixed_generative" : "pair_encoding"},
               {"expected_d_v", model.multimodal_options().expected_d_v},
               {"concat_boxes", model.multimodal_options().concat_boxes}};
    return Json{{"format", "capvqa-toy-model"}, {"version", 1},     {"config", cfg},
                {"input", input},               {"labels", model.labels().answers()}, {"tensors", tensors}}
               .dump() +
           "\n";
}

inline ToyAnswerModel toy_model_from_json(std::string_view text, std::string_view source = "checkpoint") {
    const Json doc = detail::parse_json(text, source);
    if (!doc.is_object() || doc.value("format", "") != "capvqa-toy-model")
        throw ParseError(std::string(source) + ": not a capvqa toy-model checkpoint");
    ToyModel m;
    InputMode mode{};
    InputStyle style{};
    MultimodalOptions mm;
    std::vector<std::string> labels;
    try {
        const auto& c = doc.at("config");
        m.config.hidden_size = c.at("hidden_size").get<std::size_t>();
        m.config.n_buckets = c.at("n_buckets").get<std::size_t>();
        m.config.n_label = c.at("n_label").get<std::size_t>();
        m.config.region_dim = c.at("region_dim").get<std::size_t>();
        m.config.init_scale = c.at("init_scale").get<double>();
        m.config.embedding_scale = c.at("embedding_scale").get<double>();
        const auto& in = doc.at("input");
        mode = input_mode_from_string(in.at("mode").get<std::string>());
        style = in.at("style").get<std::string>() == "prefixed_generative" ? InputStyle::prefixed_generative
                                                                           : InputStyle::pair_encoding;
        mm.expected_d_v = in.at("expected_d_v").get<std::size_t>();
        mm.concat_boxes = in.at("concat_boxes").get<bool>();
        labels = doc.at("labels").get<std::vector<std::string>>();
        const auto& tensors = doc.at("tensors");
        visit_tensors(
            [&](const char* name, bool, auto& t) {
                const auto& j = tensors.at(name);
                const auto rows = j.at("rows").get<Eigen::Index>();
                const auto cols = j.at("cols").get<Eigen::Index>();
                const auto data = j.at("data").get<std::vector<double>>();
                if (static_cast<Eigen::Index>(data.size()) != rows * cols)
                    throw ParseError(std::string(source) + ": tensor '" + name + "' has the wrong element count");
                if constexpr (std::decay_t<decltype(t)>::ColsAtCompileTime == 1) {
                    if (cols != 1) throw ParseError(std::string(source) + ": tensor '" + name + "' must be a vector");
                    t = Eigen::Map<const Eigen::VectorXd>(data.data(), rows);
                } else {
                    t = Eigen::Map<const Eigen::MatrixXd>(data.data(), rows, cols);
                }
            },
            m);
    } catch (const Json::exception& e) {
        throw ParseError(std::string(source) + ": " + e.what());
    }
    m.head.check_shapes();
    const auto d = static_cast<Eigen::Index>(m.config.hidden_size);
    if (m.head.W_h.rows() != d || m.embeddings.rows() != d ||
        m.embeddings.cols() != static_cast<Eigen::Index>(m.config.n_buckets) ||
        m.head.W_y.cols() != static_cast<Eigen::Index>(m.config.n_label) || m.region_proj.rows() != d ||
        m.region_proj.cols() != static_cast<Eigen::Index>(m.config.region_dim) || m.region_bias.size() != d)
        throw ParseError(std::string(source) + ": tensor shapes disagree with the stored config");
    return ToyAnswerModel(std::move(m), AnswerVocab(std::move(labels)), mode, style, mm);
}

inline ToyAnswerModel load_toy_model(const std::filesystem::path& path) {
    return toy_model_from_json(detail::read_file(path), path.string());
}

struct TrainedToyModel {
    ToyAnswerModel model;
    std::vector<double> losses;
    std::size_t skipped_examples = 0;
};

namespace detail {

inline ToyModel starting_model(const ToyTrainSettings& s, const ToyAnswerModel* init, const AnswerVocab& labels) {
    ToyModel fresh = ToyModel::initialized(s.model, s.train.seed);
    if (!init) return fresh;
    const auto& c = init->model().config;
    if (c.hidden_size != s.model.hidden_size || c.n_buckets != s.model.n_buckets || c.region_dim != s.model.region_dim)
        throw ConfigError("initial checkpoint does not match the model configuration");
    ToyModel m = init->model();
    // A new label space keeps the encoder and hidden layer and re-initializes
    // only the output projection.
    if (!(init->labels() == labels)) {
        m.config.n_label = s.model.n_label;
        m.head.W_y = fresh.head.W_y;
        m.head.b_y = fresh.head.b_y;
    }
    return m;
}

} // namespace detail

/// Encoder + classification head trained with soft cross-entropy on the
/// vocabulary's soft labels.
inline TrainedToyModel train_toy_classifier(const ExampleSet& examples, const AnswerVocab& vocab,
                                            ToyTrainSettings settings, const RegionStore* regions = nullptr,
                                            const ToyAnswerModel* init = nullptr) {
    if (settings.model.n_label == 0) settings.model.n_label = vocab.size();
    if (settings.model.n_label != vocab.size())
        throw ConfigError("configured n_label " + std::to_string(settings.model.n_label) +
                          " does not match the vocabulary size " + std::to_string(vocab.size()));
    settings.model.region_dim = region_input_dim(settings.mode, settings.multimodal);

    const HashTokenizer tokenizer(settings.model.n_buckets);
    const auto inputs = encode_examples(examples, settings.mode, settings.style, tokenizer, regions, settings.multimodal);
    std::vector<SoftLabel> labels;
    labels.reserve(examples.size());
    for (const auto& ex : examples.examples) labels.push_back(soft_label(ex.annotation, vocab));
    const SoftLabelTargets targets(std::move(labels), settings.skip_all_oov);

    auto r = train_toy_model(detail::starting_model(settings, init, vocab), inputs, targets, settings.train);
    return {ToyAnswerModel(std::move(r.model), vocab, settings.mode, settings.style, settings.multimodal),
            std::move(r.losses), r.skipped_examples};
}

/// Label space of the toy generator: every eligible target answer in the
/// training set, in lexicographic order.
inline AnswerVocab generator_targets(const ExampleSet& examples) {
    std::set<std::string> answers;
    for (const auto& ex : examples.examples) {
        const auto pool = select_generative_targets(ex.annotation);
        answers.insert(pool.eligible.begin(), pool.eligible.end());
    }
    return AnswerVocab(std::vector<std::string>(answers.begin(), answers.end()));
}

/// Desk-scale stand-in for a text-to-text model: the same encoder, trained
/// on one target answer re-sampled per epoch from each question's pool of
/// answers given by at least two annotators. Questions without such answers
/// are dropped. Decoding returns the most probable target string.
inline TrainedToyModel train_toy_generator(const ExampleSet& examples, ToyTrainSettings settings,
                                           const RegionStore* regions = nullptr, const ToyAnswerModel* init = nullptr) {
    AnswerVocab targets_vocab = generator_targets(examples);
    if (targets_vocab.empty()) throw PreconditionError("no question has an answer given by two or more annotators");
    settings.model.n_label = targets_vocab.size();
    settings.model.region_dim = region_input_dim(settings.mode, settings.multimodal);

    const HashTokenizer tokenizer(settings.model.n_buckets);
    const auto inputs = encode_examples(examples, settings.mode, settings.style, tokenizer, regions, settings.multimodal);
    std::vector<TargetPool> pools;
    pools.reserve(examples.size());
    for (const auto& ex : examples.examples) pools.push_back(select_generative_targets(ex.annotation));
    const SampledAnswerTargets targets(std::move(pools), targets_vocab, settings.train.seed);

    auto r = train_toy_model(detail::starting_model(settings, init, targets_vocab), inputs, targets, settings.train);
    return {ToyAnswerModel(std::move(r.model), std::move(targets_vocab), settings.mode, settings.style,
                           settings.multimodal),
            std::move(r.losses), r.skipped_examples};
}

/// Classifier adapter over a trained toy model.
class ToyClassifierAdapter final : public AnswerClassifier {
public:
    ToyClassifierAdapter(std::shared_ptr<const ToyAnswerModel> model, std::string name = "toy-bow")
        : model_(std::move(model)), name_(std::move(name)) {}

    std::string name() const override { return name_; }
    PredictionDistribution classify(const ModelInput& in) const override { return model_->distribution(in); }

private:
    std::shared_ptr<const ToyAnswerModel> model_;
    std::string name_;
};

class ToyGeneratorAdapter final : public AnswerGenerator {
public:
    ToyGeneratorAdapter(std::shared_ptr<const ToyAnswerModel> model, std::string name = "toy-generator")
        : model_(std::move(model)), name_(std::move(name)) {}

    std::string name() const override { return name_; }
    std::string generate(const ModelInput& in) const override { return model_->answer(in); }

private:
    std::shared_ptr<const ToyAnswerModel> model_;
    std::string name_;
};

} // namespace capvqa
