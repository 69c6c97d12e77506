// Copyright (C) 2026 The capvqa Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdio>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "capvqa/capvqa.hpp"

namespace {

using namespace capvqa;

std::vector<AnnotationRecord> load_all_annotations(const std::vector<std::string>& paths) {
    std::vector<AnnotationRecord> out;
    for (const auto& p : paths) {
        auto part = load_annotations(resolve_data_path(p));
        out.insert(out.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    }
    return out;
}

std::vector<QuestionRecord> load_all_questions(const std::vector<std::string>& paths) {
    std::vector<QuestionRecord> out;
    for (const auto& p : paths) {
        auto part = load_questions(resolve_data_path(p));
        out.insert(out.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    }
    return out;
}

VocabCountUnit parse_unit(const std::string& s) {
    if (s == "annotations") return VocabCountUnit::annotations;
    if (s == "consensus") return VocabCountUnit::consensus;
    throw ConfigError("unknown count unit '" + s + "'");
}

MetricVariant parse_metric(const std::string& s) {
    if (s == "literal") return MetricVariant::literal;
    if (s == "official_subsets") return MetricVariant::official_subsets;
    throw ConfigError("unknown metric '" + s + "'");
}

void print_aggregate(const RunAggregate& a) {
    std::cout << std::fixed << std::setprecision(4) << "VQA score: " << a.mean * 100.0 << " +- " << a.std * 100.0
              << " over " << a.run_scores.size() << " run(s)\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"capvqa: caption-based VQA pipeline (datasets, vocabularies, training, scoring, fusion)"};
    app.require_subcommand(1);

    // vocab build / vocab inspect
    auto* vocab = app.add_subcommand("vocab", "Answer vocabulary tools");
    vocab->require_subcommand(1);

    auto* vbuild = vocab->add_subcommand("build", "Build an answer vocabulary from annotation files");
    std::vector<std::string> vb_annotations;
    std::optional<std::size_t> vb_max_size, vb_min_count;
    std::string vb_unit = "annotations", vb_out, vb_soft;
    vbuild->add_option("--annotations", vb_annotations, "Annotation file(s)")->required();
    auto* vb_max_opt = vbuild->add_option("--max-size", vb_max_size, "Keep the N most frequent answers");
    auto* vb_min_opt = vbuild->add_option("--min-count", vb_min_count, "Keep answers seen at least N times");
    vb_max_opt->excludes(vb_min_opt);
    vbuild->add_option("--unit", vb_unit, "Frequency unit: annotations | consensus");
    vbuild->add_option("--out", vb_out, "Vocabulary file to write")->required();
    vbuild->add_option("--soft-labels", vb_soft, "Also write the soft-label cache here");

    auto* vinspect = vocab->add_subcommand("inspect", "Summarize a vocabulary file");
    std::string vi_vocab;
    std::vector<std::string> vi_annotations;
    std::size_t vi_top = 10;
    vinspect->add_option("--vocab", vi_vocab, "Vocabulary file")->required();
    vinspect->add_option("--annotations", vi_annotations, "Report coverage over these annotation files");
    vinspect->add_option("--top", vi_top, "Entries to print");

    // score
    auto* score = app.add_subcommand("score", "Score a prediction file against annotations");
    std::vector<std::string> sc_annotations, sc_questions;
    std::string sc_predictions, sc_report, sc_metric = "literal";
    score->add_option("--annotations", sc_annotations, "Annotation file(s)")->required();
    score->add_option("--questions", sc_questions, "Question file(s); checked against the annotations");
    score->add_option("--predictions", sc_predictions, "Prediction file (JSON Lines)")->required();
    score->add_option("--report", sc_report, "Write the per-question report here");
    score->add_option("--metric", sc_metric, "literal | official_subsets");

    // train
    auto* train = app.add_subcommand("train", "Train and evaluate every seed of an experiment config");
    std::string tr_config;
    train->add_option("--config", tr_config, "Experiment config (JSON)")->required();

    // eval
    auto* eval = app.add_subcommand("eval", "Evaluate a saved toy-model checkpoint");
    std::string ev_config, ev_checkpoint, ev_out, ev_report;
    std::uint64_t ev_caption_seed = 0;
    eval->add_option("--config", ev_config, "Experiment config naming the eval data")->required();
    eval->add_option("--checkpoint", ev_checkpoint, "Checkpoint written by train")->required();
    eval->add_option("--out", ev_out, "Prediction file to write")->required();
    eval->add_option("--report", ev_report, "Report file to write");
    eval->add_option("--caption-seed", ev_caption_seed, "Gold-caption selection seed");

    // fuse
    auto* fuse = app.add_subcommand("fuse", "Late-fuse two distribution dumps by per-class probability product");
    std::string fu_a, fu_b, fu_vocab, fu_out, fu_scores;
    fuse->add_option("--a", fu_a, "First distribution dump")->required();
    fuse->add_option("--b", fu_b, "Second distribution dump")->required();
    fuse->add_option("--vocab", fu_vocab, "Vocabulary both dumps index into")->required();
    fuse->add_option("--out", fu_out, "Prediction file to write")->required();
    fuse->add_option("--scores", fu_scores, "Also write the raw fused scores");

    // select-steps
    auto* steps = app.add_subcommand("select-steps", "Choose the training length on a held-out validation split");
    std::string st_config;
    std::size_t st_max = 0;
    steps->add_option("--config", st_config, "Experiment config (JSON)")->required();
    steps->add_option("--max-steps", st_max, "Train each seed up to this many steps")->required();

    // decontaminate
    auto* decon = app.add_subcommand("decontaminate", "Remove reserved evaluation images from caption-training images");
    std::string dc_caption_images, dc_reserved_images, dc_manifest, dc_split = "test", dc_out, dc_audit;
    std::vector<std::string> dc_reserved_questions, dc_manifest_questions;
    decon->add_option("--caption-images", dc_caption_images, "Caption-training image ids, one per line")->required();
    decon->add_option("--reserved-images", dc_reserved_images, "Reserved image ids, one per line");
    decon->add_option("--reserved-questions", dc_reserved_questions, "Question file(s) whose images are all reserved");
    decon->add_option("--manifest", dc_manifest, "Split manifest; reserves the images of --split");
    decon->add_option("--manifest-questions", dc_manifest_questions, "Question file(s) the manifest refers to");
    decon->add_option("--split", dc_split, "Manifest split to reserve");
    decon->add_option("--out", dc_out, "Kept image ids, one per line")->required();
    decon->add_option("--audit", dc_audit, "Write a JSON audit of kept/removed ids");

    // split
    auto* split = app.add_subcommand("split", "Write a seeded train/val split manifest");
    std::vector<std::string> sp_questions, sp_annotations;
    std::string sp_test_questions, sp_manifest;
    double sp_fraction = 0.2;
    std::uint64_t sp_seed = 0;
    split->add_option("--questions", sp_questions, "Training question file(s)")->required();
    split->add_option("--annotations", sp_annotations, "Training annotation file(s)")->required();
    split->add_option("--test-questions", sp_test_questions, "Also list this file's questions as 'test'");
    split->add_option("--fraction", sp_fraction, "Validation fraction (floor(fraction * N) examples)");
    split->add_option("--seed", sp_seed, "Split seed");
    split->add_option("--manifest", sp_manifest, "Manifest to write")->required();

    // stats
    auto* stats = app.add_subcommand("stats", "Dataset counts and generative-target statistics");
    std::vector<std::string> ss_questions, ss_annotations;
    stats->add_option("--questions", ss_questions, "Question file(s)");
    stats->add_option("--annotations", ss_annotations, "Annotation file(s)");

    // synth
    auto* synth = app.add_subcommand("synth", "Write a small synthetic dataset");
    SyntheticOptions sy;
    std::string sy_out;
    synth->add_option("--out", sy_out, "Output directory")->required();
    synth->add_option("--questions", sy.n_questions, "Number of questions");
    synth->add_option("--images", sy.n_images, "Number of images");
    synth->add_option("--answers", sy.n_answers, "Number of distinct answers");
    synth->add_option("--region-dim", sy.region_dim, "Region feature width");
    synth->add_option("--seed", sy.seed, "Generator seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (*vbuild) {
            const auto anns = load_all_annotations(vb_annotations);
            const auto v = build_answer_vocab(anns, {vb_min_count, vb_max_size, parse_unit(vb_unit)});
            detail::write_file(vb_out, v.to_text());
            if (!vb_soft.empty()) {
                std::vector<SoftLabel> labels;
                labels.reserve(anns.size());
                for (const auto& a : anns) labels.push_back(soft_label(a, v));
                detail::write_file(vb_soft, soft_labels_to_jsonl(labels, v));
            }
            std::cout << "vocabulary: " << v.size() << " answers (fingerprint " << v.fingerprint() << ") -> " << vb_out
                      << "\n";
        } else if (*vinspect) {
            const auto v = AnswerVocab::load(vi_vocab);
            std::cout << "size: " << v.size() << "\nfingerprint: " << v.fingerprint() << "\n";
            for (std::size_t i = 0; i < v.size() && i < vi_top; ++i) std::cout << "  " << i << "\t" << v.answer(i) << "\n";
            if (!vi_annotations.empty()) {
                const auto anns = load_all_annotations(vi_annotations);
                std::size_t oov = 0;
                double best_sum = 0.0;
                for (const auto& a : anns) {
                    const auto l = soft_label(a, v);
                    if (l.all_oov) ++oov;
                    double best = 0.0;
                    for (const auto& [answer, count] : answer_counts(a))
                        if (v.contains(answer)) best = std::max(best, std::min(count / 3.0, 1.0));
                    best_sum += best;
                }
                std::cout << "questions: " << anns.size() << "\nfully out-of-vocabulary: " << oov
                          << "\noracle VQA score: " << (anns.empty() ? 0.0 : best_sum / static_cast<double>(anns.size()))
                          << "\n";
            }
        } else if (*score) {
            const auto anns = load_all_annotations(sc_annotations);
            if (!sc_questions.empty()) {
                const auto qs = load_all_questions(sc_questions);
                (void)join_examples(qs, anns, {}, InputMode::question_only);
            }
            const auto preds = read_predictions(sc_predictions);
            const auto variant = parse_metric(sc_metric);
            const auto report = evaluate_predictions(preds, anns, variant);
            if (!sc_report.empty()) detail::write_file(sc_report, report_to_json(report, variant).dump(1) + "\n");
            std::cout << std::fixed << std::setprecision(4) << "questions: " << report.n
                      << "\nunanswered: " << report.unanswered.size() << "\nVQA score: " << report.mean_score * 100.0
                      << "\n";
        } else if (*train) {
            const auto cfg = load_config(tr_config);
            const auto art = run_experiment(cfg);
            for (const auto& r : art.runs) {
                std::cout << "seed " << r.seed;
                if (r.eval_caption_seed) std::cout << " caption-seed " << *r.eval_caption_seed;
                std::cout << std::fixed << std::setprecision(4) << ": " << r.report.mean_score * 100.0 << "\n";
            }
            print_aggregate(art.aggregate);
            std::cout << "artifacts: " << art.run_dir.string() << "\n";
        } else if (*eval) {
            const auto cfg = load_config(ev_config);
            const auto [preds, report] = evaluate_checkpoint(cfg, ev_checkpoint, ev_caption_seed);
            write_predictions(preds, ev_out);
            if (!ev_report.empty()) detail::write_file(ev_report, report_to_json(report, cfg.metric).dump(1) + "\n");
            std::cout << std::fixed << std::setprecision(4) << "VQA score: " << report.mean_score * 100.0 << " on "
                      << report.n << " questions\n";
        } else if (*fuse) {
            const auto v = AnswerVocab::load(fu_vocab);
            const auto a = read_distributions(fu_a);
            const auto b = read_distributions(fu_b);
            for (const auto* f : {&a, &b}) {
                if (f->n_label != v.size())
                    throw FusionError("distribution dump has " + std::to_string(f->n_label) + " classes, vocabulary has " +
                                      std::to_string(v.size()));
                if (!f->vocab_fingerprint.empty() && f->vocab_fingerprint != v.fingerprint())
                    throw FusionError("distribution dump was written for a different vocabulary");
            }
            Predictions preds;
            std::map<QuestionId, FusedPrediction> fused;
            for (const auto& [qid, pa] : a.distributions) {
                auto it = b.distributions.find(qid);
                if (it == b.distributions.end())
                    throw FusionError("question " + std::to_string(qid) + " is missing from " + fu_b);
                auto f = late_fuse(pa, it->second, {fu_a, fu_b});
                preds[qid] = v.answer(f.argmax);
                fused.emplace(qid, std::move(f));
            }
            for (const auto& [qid, pb] : b.distributions)
                if (!a.distributions.count(qid))
                    throw FusionError("question " + std::to_string(qid) + " is missing from " + fu_a);
            write_predictions(preds, fu_out);
            if (!fu_scores.empty()) detail::write_file(fu_scores, format_fused(fused));
            std::cout << "fused " << preds.size() << " questions -> " << fu_out << "\n";
        } else if (*steps) {
            const auto cfg = load_config(st_config);
            const auto sel = select_training_steps(cfg, st_max);
            for (std::size_t i = 0; i < sel.best_steps.size(); ++i)
                std::cout << "seed " << cfg.seeds[i] << ": best step " << sel.best_steps[i] << "\n";
            std::cout << "selected steps: " << sel.steps << "\n";
        } else if (*decon) {
            const auto caption_images = parse_image_ids(detail::read_file(dc_caption_images), dc_caption_images);
            std::set<ImageId> reserved;
            if (!dc_reserved_images.empty()) {
                auto ids = parse_image_ids(detail::read_file(dc_reserved_images), dc_reserved_images);
                reserved.insert(ids.begin(), ids.end());
            }
            for (const auto& q : load_all_questions(dc_reserved_questions)) reserved.insert(q.image_id);
            if (!dc_manifest.empty()) {
                const auto manifest = SplitManifest::load(dc_manifest);
                const auto qs = load_all_questions(dc_manifest_questions);
                const auto ids = reserved_images(manifest, dc_split, qs);
                reserved.insert(ids.begin(), ids.end());
            }
            if (reserved.empty())
                std::cerr << "warning: no reserved images given; output equals the input\n";
            const auto kept = decontaminate(caption_images, reserved);
            std::set<ImageId> removed;
            std::set_intersection(caption_images.begin(), caption_images.end(), reserved.begin(), reserved.end(),
                                  std::inserter(removed, removed.end()));
            detail::write_file(dc_out, format_image_ids(kept));
            if (!dc_audit.empty()) {
                Json audit{{"kept", kept}, {"removed", removed}, {"reserved_count", reserved.size()}};
                detail::write_file(dc_audit, audit.dump(1) + "\n");
            }
            std::cout << "caption-training images: " << caption_images.size() << "\nreserved images: " << reserved.size()
                      << "\nremoved: " << removed.size() << "\nkept: " << kept.size() << "\n";
        } else if (*split) {
            const auto qs = load_all_questions(sp_questions);
            const auto anns = load_all_annotations(sp_annotations);
            const auto all = join_examples(qs, anns, {}, InputMode::question_only);
            const auto [tr, va] = split_validation(all, sp_fraction, sp_seed);
            auto manifest = SplitManifest::from_sets({&tr, &va});
            if (!sp_test_questions.empty()) {
                auto& ids = manifest.splits["test"];
                for (const auto& q : load_questions(resolve_data_path(sp_test_questions))) ids.push_back(q.question_id);
                std::sort(ids.begin(), ids.end());
            }
            detail::write_file(sp_manifest, manifest.to_json());
            std::cout << "train: " << tr.size() << "\nval: " << va.size() << "\n";
        } else if (*stats) {
            const auto qs = load_all_questions(ss_questions);
            const auto anns = load_all_annotations(ss_annotations);
            std::set<ImageId> images;
            for (const auto& q : qs) images.insert(q.image_id);
            std::size_t discarded = 0;
            for (const auto& a : anns)
                if (select_generative_targets(a).discarded) ++discarded;
            std::cout << "questions: " << qs.size() << "\nimages: " << images.size() << "\nannotations: " << anns.size()
                      << "\ndiscarded generative targets: " << discarded << "\n";
        } else if (*synth) {
            const auto corpus = make_synthetic_corpus(sy);
            write_synthetic_corpus(corpus, sy_out);
            std::cout << "wrote " << corpus.questions.size() << " questions over " << sy.n_images << " images to "
                      << sy_out << "\n";
        }
    } catch (const capvqa::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code(e.category());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code(ErrorCategory::runtime);
    }
    return 0;
}
