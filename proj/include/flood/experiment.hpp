#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "flood/checkpoint.hpp"
#include "flood/config.hpp"
#include "flood/data.hpp"
#include "flood/log.hpp"
#include "flood/metrics.hpp"
#include "flood/multimodal.hpp"
#include "flood/text_model.hpp"
#include "flood/vision.hpp"

namespace flood {

// Thrown when a pipeline stage fails; carries the stage name so the harness
// can report where the run died. Partial artifacts stay on disk.
class StageError : public std::runtime_error {
public:
    StageError(const std::string& stage, const std::string& msg, int code)
        : std::runtime_error("stage " + stage + ": " + msg),
          stage_name(stage),
          exit_code(code) {}
    std::string stage_name;
    int exit_code;
};

namespace detail {

template <typename F>
auto run_stage(const std::string& name, Log& log, F&& fn) {
    log.info("stage " + name + ": start");
    try {
        auto result = fn();
        log.info("stage " + name + ": done");
        return result;
    } catch (const ConfigError& e) {
        log.error("stage " + name + ": " + e.what());
        throw StageError(name, e.what(), 2);
    } catch (const DataError& e) {
        log.error("stage " + name + ": " + e.what());
        throw StageError(name, e.what(), 3);
    } catch (const TrainError& e) {
        log.error("stage " + name + ": " + e.what());
        throw StageError(name, e.what(), 4);
    } catch (const std::exception& e) {
        log.error("stage " + name + ": " + e.what());
        throw StageError(name, e.what(), 4);
    }
}

inline const char* feature_type_of(RunId id) {
    switch (id) {
        case RunId::run1_multimodal: return "textual+visual";
        case RunId::run2_text: return "textual";
        default: return "visual";
    }
}

struct PredictionRow {
    std::string tweet_id;
    Label label = Label::not_relevant;
    double confidence = 0.0;
};

inline std::string predictions_to_jsonl(const std::vector<PredictionRow>& rows) {
    std::string out;
    for (const auto& r : rows) {
        nlohmann::ordered_json j;
        j["tweet_id"] = r.tweet_id;
        j["label"] = to_string(r.label);
        j["confidence"] = r.confidence;
        out += j.dump() + "\n";
    }
    return out;
}

}  // namespace detail

// Full pipeline for one run: preprocess, rebalance/extract as the run
// requires, train under the multi-seed protocol, evaluate the winning
// checkpoint on dev. Artifacts land in cfg.output_dir:
//   resolved.config, run.log, manifest.csv, checkpoint/, dev_predictions.jsonl,
//   report.json
inline EvaluationReport run_experiment(const RunConfig& cfg) {
    std::filesystem::create_directories(cfg.output_dir);
    Log log;
    log.attach_file(cfg.output_dir / "run.log");
    write_file_atomic(cfg.output_dir / "resolved.config", freeze_config(cfg));
    log.info("run " + to_string(cfg.run_id) + " starting");

    auto train_ds = detail::run_stage("load-train-data", log, [&] {
        return load_dataset(cfg.train_path);
    });
    auto dev_ds = detail::run_stage("load-dev-data", log, [&] {
        return load_dataset(cfg.dev_path);
    });

    detail::run_stage("preprocess", log, [&] {
        CleanOptions opt{!cfg.keep_mentions};
        for (auto* ds : {&train_ds, &dev_ds}) {
            for (auto& r : ds->records) r.clean_text = clean(r.text, opt).value;
        }
        return 0;
    });

    TrainOutcome outcome;
    std::optional<SmoteConfig> smote;
    if (cfg.smote_enabled) {
        smote = cfg.smote;
        // the rebalancer requires a strict minority; a balanced corpus is
        // simply left as-is
        if (train_ds.count(Label::relevant) == train_ds.count(Label::not_relevant)) {
            log.warn("train classes are balanced; skipping oversampling");
            smote.reset();
        }
    }

    switch (cfg.run_id) {
        case RunId::run2_text: {
            outcome = detail::run_stage("train-text", log, [&] {
                std::vector<std::string> corpus_texts;
                for (const auto& r : train_ds.records) corpus_texts.push_back(*r.clean_text);
                EncoderHandle handle = resolve_encoder(cfg.encoder_id, corpus_texts);
                TextTrainOptions opts;
                opts.protocol = cfg.protocol;
                opts.clean_options.strip_mentions = !cfg.keep_mentions;
                opts.log = &log;
                return train_text_classifier(train_ds, dev_ds, handle, opts);
            });
            break;
        }
        case RunId::run3_scene:
        case RunId::run4_fused: {
            outcome = detail::run_stage("train-image", log, [&] {
                LoadedBackbone object_bb =
                    resolve_backbone(cfg.object_backbone, PretrainCorpus::object_corpus);
                LoadedBackbone scene_bb =
                    resolve_backbone(cfg.scene_backbone, PretrainCorpus::scene_corpus);
                ImageTrainOptions opts;
                opts.mode = cfg.run_id == RunId::run3_scene ? ImageTrainMode::scene_finetune
                                                            : ImageTrainMode::fused_head;
                opts.protocol = cfg.protocol;
                opts.smote = smote;
                opts.strategy = cfg.smote_strategy;
                opts.log = &log;
                return train_image_classifier(train_ds, dev_ds, object_bb, scene_bb, opts);
            });
            break;
        }
        case RunId::run1_multimodal: {
            outcome = detail::run_stage("train-multimodal", log, [&] {
                std::vector<std::string> corpus_texts;
                for (const auto& r : train_ds.records) corpus_texts.push_back(*r.clean_text);
                EncoderHandle handle = resolve_encoder(cfg.encoder_id, corpus_texts);
                MultimodalTrainOptions opts;
                opts.protocol = cfg.protocol;
                opts.clean_options.strip_mentions = !cfg.keep_mentions;
                opts.image_mode = cfg.image_mode;
                opts.n_image_tokens = cfg.n_image_tokens;
                opts.log = &log;
                LoadedBackbone object_bb, scene_bb;
                std::unique_ptr<nn::ResidualBackbone> residual;
                if (cfg.image_mode == ImageFeatureMode::dual_vgg_features) {
                    object_bb =
                        resolve_backbone(cfg.object_backbone, PretrainCorpus::object_corpus);
                    scene_bb =
                        resolve_backbone(cfg.scene_backbone, PretrainCorpus::scene_corpus);
                    opts.object_bb = &object_bb;
                    opts.scene_bb = &scene_bb;
                } else {
                    uint64_t rseed = 303;
                    if (starts_with(cfg.residual_backbone, "tiny:")) {
                        rseed = std::stoull(cfg.residual_backbone.substr(5));
                    } else if (cfg.residual_backbone != "tiny") {
                        throw ConfigError("vision.residual_backbone supports tiny[:seed] only");
                    }
                    Rng rng(rseed);
                    residual = std::make_unique<nn::ResidualBackbone>(
                        nn::residual_tiny_layout(), rng);
                    opts.residual = residual.get();
                    opts.residual_norm.input_size = residual->layout.input_size;
                }
                return train_multimodal(train_ds, dev_ds, handle, opts);
            });
            break;
        }
    }

    const auto ckpt_dir = cfg.output_dir / "checkpoint";
    detail::run_stage("save-artifacts", log, [&] {
        save_checkpoint(ckpt_dir, outcome.model_config, outcome.checkpoint_params,
                        outcome.best_score);
        write_file_atomic(cfg.output_dir / "manifest.csv", outcome.manifest.to_csv());
        return 0;
    });
    log.info("best seed " + std::to_string(outcome.best_seed) + " epoch " +
             std::to_string(outcome.best_epoch) + " dev micro-F1 " +
             std::to_string(outcome.best_score));

    // score the winning checkpoint on dev through the same path `predict` uses
    EvaluationReport report = detail::run_stage("evaluate", log, [&] {
        Checkpoint ckpt = open_checkpoint(ckpt_dir);
        std::vector<detail::PredictionRow> rows;
        std::vector<Label> preds, golds;
        size_t skipped = 0;
        const std::string kind = ckpt.config.at("model").get<std::string>();
        if (kind == "text") {
            TextClassifierModel model = text_model_from_checkpoint(ckpt);
            for (const auto& r : dev_ds.records) {
                if (!r.label) {
                    ++skipped;
                    continue;
                }
                auto [label, conf] = model.predict_one(*r.clean_text);
                rows.push_back({r.tweet_id, label, conf});
                preds.push_back(label);
                golds.push_back(*r.label);
            }
        } else if (kind == "multimodal") {
            MultimodalModel model = multimodal_model_from_checkpoint(ckpt);
            for (const auto& r : dev_ds.records) {
                if (!r.label) {
                    ++skipped;
                    continue;
                }
                std::optional<std::filesystem::path> img;
                if (r.image_path) img = dev_ds.resolve_image(r);
                auto [label, conf] = model.predict_one(*r.clean_text, img, r.tweet_id);
                rows.push_back({r.tweet_id, label, conf});
                preds.push_back(label);
                golds.push_back(*r.label);
            }
        } else {
            ImageClassifierModel model = image_model_from_checkpoint(ckpt);
            for (const auto& r : dev_ds.records) {
                if (!r.label || !r.image_path) {
                    ++skipped;
                    continue;
                }
                nn::Tensor img = preprocess_image(dev_ds.resolve_image(r), model.scene_bb.norm);
                auto [label, conf] = model.predict_one(img);
                rows.push_back({r.tweet_id, label, conf});
                preds.push_back(label);
                golds.push_back(*r.label);
            }
        }
        write_file_atomic(cfg.output_dir / "dev_predictions.jsonl",
                          detail::predictions_to_jsonl(rows));
        EvaluationReport rep = make_report(to_string(cfg.run_id), preds, golds, skipped,
                                           detail::feature_type_of(cfg.run_id));
        write_file_atomic(cfg.output_dir / "report.json", report_to_json(rep).dump(2) + "\n");
        return rep;
    });
    log.info("report written: micro-F1 " + std::to_string(report.micro));
    return report;
}

}  // namespace flood
