#pragma once

#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "flood/checkpoint.hpp"
#include "flood/data.hpp"
#include "flood/encoder.hpp"
#include "flood/metrics.hpp"
#include "flood/nn/adam.hpp"
#include "flood/nn/convnet.hpp"
#include "flood/protocol.hpp"
#include "flood/text_clean.hpp"
#include "flood/text_model.hpp"
#include "flood/trainer_common.hpp"
#include "flood/vision.hpp"

namespace flood {

enum class ImageFeatureMode { residual_backbone, dual_vgg_features };

inline std::string to_string(ImageFeatureMode m) {
    return m == ImageFeatureMode::residual_backbone ? "resnet" : "dualvgg";
}

inline ImageFeatureMode image_feature_mode_from_string(const std::string& s) {
    if (s == "resnet" || s == "residual_backbone") return ImageFeatureMode::residual_backbone;
    if (s == "dualvgg" || s == "dual_vgg_features") return ImageFeatureMode::dual_vgg_features;
    throw ConfigError("unknown image feature mode \"" + s + "\" (expected resnet|dualvgg)");
}

// Image feature used by the joint model, selected by configuration: either
// the pooled penultimate feature of the residual network or the early-fused
// dual-backbone vector.
inline FeatureVector build_image_features_mm(const nn::Tensor& image, ImageFeatureMode mode,
                                             const nn::ResidualBackbone* residual,
                                             const LoadedBackbone* object_bb,
                                             const LoadedBackbone* scene_bb) {
    if (mode == ImageFeatureMode::residual_backbone) {
        if (!residual) throw ConfigError("residual backbone not loaded");
        nn::Tape tape(false);
        nn::Tensor feats = residual->forward_features(tape, stack_images({image}));
        FeatureVector fv;
        fv.kind = FeatureKind::object_level;
        fv.v.resize(feats->shape[1]);
        for (size_t j = 0; j < fv.v.size(); ++j) fv.v[j] = static_cast<float>(feats->v[j]);
        return fv;
    }
    if (!object_bb || !scene_bb) throw ConfigError("dual vgg backbones not loaded");
    return fuse_early(extract_features(image, *object_bb), extract_features(image, *scene_bb))
        .vector;
}

// Projects one image feature vector into n_image_tokens encoder slots.
struct ImageTokenProjection {
    size_t input_dim = 0;
    size_t n_image_tokens = 1;
    size_t output_dim = 0;
    nn::Linear proj;  // input_dim -> n_image_tokens * output_dim

    ImageTokenProjection() = default;
    ImageTokenProjection(size_t in, size_t n_tokens, size_t out, Rng& rng)
        : input_dim(in), n_image_tokens(n_tokens), output_dim(out), proj(in, n_tokens * out, rng) {
        if (n_tokens < 1) throw ConfigError("n_image_tokens must be >= 1");
    }

    // x: [1, input_dim] -> [n_image_tokens, output_dim]
    nn::Tensor forward(nn::Tape& tape, const nn::Tensor& x) const {
        return tape.reshape(proj.forward(tape, x), {n_image_tokens, output_dim});
    }

    void collect(const std::string& prefix, nn::NamedParams& out) const {
        proj.collect(prefix + ".proj", out);
    }
};

struct MultimodalBatchItem {
    std::string tweet_id;
    TokenizedText tokens;
    std::optional<FeatureVector> image_feature;  // nullopt -> learned missing embedding
    std::optional<Label> label;
};

struct MultimodalBatch {
    std::vector<MultimodalBatchItem> items;
    size_t n_image_tokens = 1;

    // Encoder input length for one item: image tokens plus every text token.
    size_t sequence_length(size_t i) const {
        return items[i].tokens.ids.size() + n_image_tokens;
    }

    // Mask over the combined sequence; image tokens are attended like text.
    std::vector<int> combined_mask(size_t i) const {
        return std::vector<int>(sequence_length(i), 1);
    }

    void validate(size_t max_positions, size_t image_feature_dim) const {
        for (size_t i = 0; i < items.size(); ++i) {
            const auto& it = items[i];
            if (it.tokens.ids.size() != it.tokens.attention_mask.size()) {
                throw DataError("multimodal batch: ids/mask length mismatch for record \"" +
                                it.tweet_id + "\"");
            }
            if (sequence_length(i) > max_positions) {
                throw TrainError("sequence overflow for record \"" + it.tweet_id + "\": " +
                                 std::to_string(sequence_length(i)) + " > max positions " +
                                 std::to_string(max_positions));
            }
            if (it.image_feature && it.image_feature->dim() != image_feature_dim) {
                throw DataError("multimodal batch: feature dim mismatch for record \"" +
                                it.tweet_id + "\"");
            }
        }
    }
};

// Joint text+image classifier: image features are projected into token slots
// inserted right after the begin token, segment ids separate the modalities,
// and the classification head reads the pooled begin-token state.
struct MultimodalClassifier {
    nn::TransformerEncoder encoder;
    ImageTokenProjection projection;
    nn::Tensor missing_image;  // [1, input_dim], learnable
    nn::Linear head;           // hidden -> 2
    double head_dropout = 0.1;

    MultimodalClassifier() = default;
    MultimodalClassifier(const nn::TransformerConfig& cfg, size_t image_dim, size_t n_tokens,
                         Rng& rng)
        : encoder(cfg, rng),
          projection(image_dim, n_tokens, cfg.hidden, rng),
          head(cfg.hidden, 2, rng) {
        missing_image = nn::make_tensor({1, image_dim}, true);
        nn::init_normal(missing_image, rng, 0.02);
    }

    // feature_row: [1, input_dim] or nullptr for the missing-image embedding.
    // Returns class scores [1, 2].
    nn::Tensor forward_record(nn::Tape& tape, const std::vector<int>& ids,
                              const nn::Tensor& feature_row, Rng& rng, bool train,
                              const std::string& record_name = "") const {
        if (ids.size() < 2) throw TrainError("multimodal forward: sequence lacks special tokens");
        const size_t k = projection.n_image_tokens;
        if (ids.size() + k > encoder.cfg.max_positions) {
            throw TrainError("sequence overflow for record \"" + record_name + "\": " +
                             std::to_string(ids.size() + k) + " > max positions " +
                             std::to_string(encoder.cfg.max_positions));
        }
        nn::Tensor img_rows =
            projection.forward(tape, feature_row ? feature_row : missing_image);
        nn::Tensor begin = encoder.token_content(tape, {ids[0]});
        nn::Tensor rest =
            encoder.token_content(tape, std::vector<int>(ids.begin() + 1, ids.end()));
        nn::Tensor content = tape.concat_rows({begin, img_rows, rest});
        std::vector<int> seg(ids.size() + k, 0);
        for (size_t i = 0; i < k; ++i) seg[1 + i] = 1;  // image segment
        nn::Tensor emb = encoder.embed_content(tape, content, seg, rng, train);
        nn::Tensor enc = encoder.encode(tape, emb, rng, train);
        nn::Tensor pooled = tape.slice_rows(enc, 0, 1);
        pooled = tape.dropout(pooled, head_dropout, rng, train);
        return head.forward(tape, pooled);
    }

    nn::NamedParams params() const {
        nn::NamedParams out;
        head.collect("head", out);
        projection.collect("projection", out);
        out.emplace_back("missing_image", missing_image);
        auto ep = encoder.params();
        out.insert(out.end(), ep.begin(), ep.end());
        return out;
    }
};

// Per-record class scores [batch, 2] for an assembled batch.
inline nn::Tensor forward_multimodal(nn::Tape& tape, const MultimodalBatch& batch,
                                     const MultimodalClassifier& model, Rng& rng, bool train) {
    if (batch.n_image_tokens != model.projection.n_image_tokens) {
        throw ConfigError("batch n_image_tokens does not match the model projection");
    }
    batch.validate(model.encoder.cfg.max_positions, model.projection.input_dim);
    std::vector<nn::Tensor> scores;
    scores.reserve(batch.items.size());
    for (const auto& item : batch.items) {
        nn::Tensor frow;
        if (item.image_feature) {
            frow = nn::make_tensor({1, item.image_feature->dim()});
            for (size_t j = 0; j < item.image_feature->dim(); ++j) {
                frow->v[j] = item.image_feature->v[j];
            }
        }
        scores.push_back(
            model.forward_record(tape, item.tokens.ids, frow, rng, train, item.tweet_id));
    }
    return scores.size() == 1 ? scores[0] : tape.concat_rows(scores);
}

struct MultimodalTrainOptions {
    TrainingProtocol protocol;
    CleanOptions clean_options;
    ImageFeatureMode image_mode = ImageFeatureMode::dual_vgg_features;
    size_t n_image_tokens = 1;
    double head_dropout = 0.1;
    // dual_vgg_features: both frozen; residual_backbone: fine-tuned
    LoadedBackbone* object_bb = nullptr;
    LoadedBackbone* scene_bb = nullptr;
    nn::ResidualBackbone* residual = nullptr;
    ImageNormalization residual_norm;
    Log* log = nullptr;
};

namespace detail {

struct MmExample {
    std::string tweet_id;
    std::vector<int> ids;
    std::optional<FeatureVector> feature;   // dualvgg mode
    nn::Tensor image;                       // residual mode, preprocessed
    int label = 0;
};

}  // namespace detail

inline TrainOutcome train_multimodal(const DatasetSplit& train, const DatasetSplit& dev,
                                     EncoderHandle& handle, const MultimodalTrainOptions& opts) {
    opts.protocol.validate();
    if (train.count(Label::relevant) == 0 || train.count(Label::not_relevant) == 0) {
        throw TrainError("training split must contain both classes");
    }
    if (dev.records.empty()) throw TrainError("dev split is empty");

    const bool residual_mode = opts.image_mode == ImageFeatureMode::residual_backbone;
    size_t image_dim = 0;
    if (residual_mode) {
        if (!opts.residual) throw ConfigError("residual backbone required for resnet mode");
        image_dim = opts.residual->layout.feature_dim();
    } else {
        if (!opts.object_bb || !opts.scene_bb) {
            throw ConfigError("object and scene backbones required for dualvgg mode");
        }
        if (opts.object_bb->norm.input_size != opts.scene_bb->norm.input_size) {
            throw ConfigError("dualvgg mode needs matching backbone input sizes");
        }
        image_dim = opts.object_bb->spec.resolved_feature_dim() +
                    opts.scene_bb->spec.resolved_feature_dim();
    }

    const size_t k = opts.n_image_tokens;
    const size_t max_len = std::min(opts.protocol.max_sequence_length,
                                    handle.config.max_positions - k);

    auto build_examples = [&](const DatasetSplit& ds) {
        std::vector<detail::MmExample> out;
        const ImageNormalization norm =
            residual_mode ? opts.residual_norm : opts.scene_bb->norm;
        for (const auto& r : ds.records) {
            if (!r.label) continue;
            detail::MmExample ex;
            ex.tweet_id = r.tweet_id;
            ex.ids = handle.tokenizer
                         .encode(detail::clean_or_cached(r, opts.clean_options), max_len)
                         .ids;
            ex.label = *r.label == Label::relevant ? 1 : 0;
            if (r.image_path) {
                nn::Tensor img = preprocess_image(ds.resolve_image(r), norm);
                if (residual_mode) {
                    ex.image = img;  // forwarded through the backbone inside the tape
                } else {
                    ex.feature = build_image_features_mm(img, opts.image_mode, nullptr,
                                                         opts.object_bb, opts.scene_bb);
                }
            }
            out.push_back(std::move(ex));
        }
        return out;
    };
    auto train_ex = build_examples(train);
    auto dev_ex = build_examples(dev);
    if (dev_ex.empty()) throw TrainError("dev split has no labeled records");

    auto pristine = snapshot_values(handle.encoder.params());
    std::vector<std::vector<double>> pristine_residual;
    if (residual_mode) pristine_residual = snapshot_values(opts.residual->params());

    // constant feature rows for dualvgg mode, built once
    auto feature_row = [&](const detail::MmExample& ex) -> nn::Tensor {
        if (!ex.feature) return nullptr;
        nn::Tensor t = nn::make_tensor({1, image_dim});
        for (size_t j = 0; j < image_dim; ++j) t->v[j] = ex.feature->v[j];
        return t;
    };

    TrainOutcome outcome;
    for (int seed : opts.protocol.seeds) {
        restore_values(handle.encoder.params(), pristine);
        if (residual_mode) restore_values(opts.residual->params(), pristine_residual);
        Rng seed_rng(Rng::derive(static_cast<uint64_t>(seed), 0x3313));

        MultimodalClassifier model;
        model.encoder = handle.encoder;  // shares the handle's live tensors
        model.projection =
            ImageTokenProjection(image_dim, k, handle.config.hidden, seed_rng);
        model.head = nn::Linear(handle.config.hidden, 2, seed_rng);
        model.head_dropout = opts.head_dropout;
        model.missing_image = nn::make_tensor({1, image_dim}, true);
        nn::init_normal(model.missing_image, seed_rng, 0.02);

        nn::NamedParams train_params = model.params();
        if (residual_mode) {
            auto rp = opts.residual->params();
            train_params.insert(train_params.end(), rp.begin(), rp.end());
        }
        nn::set_requires_grad(train_params, true);
        nn::Adam optim(opts.protocol.learning_rate);

        double seed_best = -1.0;
        size_t seed_best_epoch = 0;
        std::vector<std::vector<double>> seed_best_values;
        bool aborted = false;

        for (size_t epoch = 1; epoch <= opts.protocol.epochs && !aborted; ++epoch) {
            auto t0 = std::chrono::steady_clock::now();
            Rng shuffle_rng(Rng::derive(static_cast<uint64_t>(seed), 7000 + epoch));
            Rng drop_rng(Rng::derive(static_cast<uint64_t>(seed), 9000 + epoch));
            auto order = detail::shuffled(train_ex.size(), shuffle_rng);

            for (size_t start = 0; start < order.size(); start += opts.protocol.batch_size) {
                const size_t end = std::min(order.size(), start + opts.protocol.batch_size);
                nn::Tape tape(true);
                std::vector<nn::Tensor> scores;
                std::vector<int> labels;
                for (size_t b = start; b < end; ++b) {
                    const auto& ex = train_ex[order[b]];
                    nn::Tensor frow;
                    if (residual_mode && ex.image) {
                        frow = opts.residual->forward_features(tape, stack_images({ex.image}));
                    } else {
                        frow = feature_row(ex);
                    }
                    scores.push_back(model.forward_record(tape, ex.ids, frow, drop_rng, true,
                                                          ex.tweet_id));
                    labels.push_back(ex.label);
                }
                nn::Tensor logits =
                    scores.size() == 1 ? scores[0] : tape.concat_rows(scores);
                nn::Tensor loss = tape.cross_entropy(logits, labels);
                if (!std::isfinite(loss->v[0])) {
                    if (opts.log) {
                        opts.log->warn("seed " + std::to_string(seed) +
                                       ": non-finite loss, aborting this seed");
                    }
                    outcome.manifest.rows.push_back({seed, epoch, std::nan(""), 0.0});
                    aborted = true;
                    break;
                }
                nn::Adam::zero_grad(nn::values_of(train_params));
                tape.backward(loss);
                optim.step(nn::values_of(train_params));
            }
            if (aborted) break;

            std::vector<Label> preds, golds;
            for (const auto& ex : dev_ex) {
                nn::Tape tape(false);
                Rng eval_rng(0);
                nn::Tensor frow;
                if (residual_mode && ex.image) {
                    frow = opts.residual->forward_features(tape, stack_images({ex.image}));
                } else {
                    frow = feature_row(ex);
                }
                nn::Tensor logits =
                    model.forward_record(tape, ex.ids, frow, eval_rng, false, ex.tweet_id);
                preds.push_back(logits->v[1] > logits->v[0] ? Label::relevant
                                                            : Label::not_relevant);
                golds.push_back(ex.label ? Label::relevant : Label::not_relevant);
            }
            const double score = micro_f1(confusion(preds, golds));
            const double wall =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            outcome.manifest.rows.push_back({seed, epoch, score, wall});
            if (opts.log) {
                opts.log->info("seed " + std::to_string(seed) + " epoch " +
                               std::to_string(epoch) + " dev micro-F1 " + std::to_string(score));
            }
            if (score > seed_best) {
                seed_best = score;
                seed_best_epoch = epoch;
                seed_best_values = snapshot_values(train_params);
            }
        }

        // a seed aborted after scoring some epochs still competes with its
        // best finite epoch: selection is the max over finite manifest rows
        if (!seed_best_values.empty() &&
            improves_selection(seed_best, seed, seed_best_epoch, outcome.best_score,
                                           outcome.best_seed, outcome.best_epoch)) {
            outcome.best_score = seed_best;
            outcome.best_seed = seed;
            outcome.best_epoch = seed_best_epoch;
            outcome.best_values = std::move(seed_best_values);
        }
        nn::set_requires_grad(train_params, false);
    }
    restore_values(handle.encoder.params(), pristine);
    if (residual_mode) restore_values(opts.residual->params(), pristine_residual);

    if (outcome.best_values.empty()) {
        throw TrainError("all seeds aborted with non-finite loss");
    }

    // standalone checkpoint tensors: model params (+ residual backbone), then
    // in dualvgg mode the frozen extractors so prediction is self-contained
    {
        Rng r0(0);
        auto ck = std::make_shared<MultimodalClassifier>(handle.config, image_dim, k, r0);
        nn::NamedParams full = ck->params();
        std::shared_ptr<nn::ResidualBackbone> ck_res;
        if (residual_mode) {
            ck_res = std::make_shared<nn::ResidualBackbone>(opts.residual->layout, r0);
            auto rp = ck_res->params();
            full.insert(full.end(), rp.begin(), rp.end());
        }
        restore_values(full, outcome.best_values);
        if (!residual_mode) {
            auto op = opts.object_bb->net.params("object");
            full.insert(full.end(), op.begin(), op.end());
            auto sp = opts.scene_bb->net.params("scene");
            full.insert(full.end(), sp.begin(), sp.end());
        }
        outcome.checkpoint_params = full;
    }

    nlohmann::json cfg;
    cfg["model"] = "multimodal";
    cfg["labels"] = label_mapping_json();
    cfg["seed"] = outcome.best_seed;
    cfg["epoch"] = outcome.best_epoch;
    cfg["image_mode"] = to_string(opts.image_mode);
    cfg["n_image_tokens"] = k;
    cfg["image_feature_dim"] = image_dim;
    cfg["max_sequence_length"] = max_len;
    cfg["head_dropout"] = opts.head_dropout;
    cfg["encoder"] = {
        {"identifier", handle.identifier},
        {"vocab_size", handle.config.vocab_size},
        {"hidden", handle.config.hidden},
        {"n_layers", handle.config.n_layers},
        {"n_heads", handle.config.n_heads},
        {"ffn_dim", handle.config.ffn()},
        {"max_positions", handle.config.max_positions},
        {"n_segments", handle.config.n_segments},
        {"dropout", handle.config.dropout},
    };
    {
        std::vector<std::string> vocab_lines;
        for (const auto& line : split_string(handle.tokenizer.to_vocab_file(), '\n')) {
            if (!line.empty()) vocab_lines.push_back(line);
        }
        cfg["vocab"] = vocab_lines;
    }
    if (residual_mode) {
        cfg["residual"] = {{"input_size", opts.residual->layout.input_size},
                           {"stem_channels", opts.residual->layout.stem_channels}};
        nlohmann::json stages = nlohmann::json::array();
        for (const auto& s : opts.residual->layout.stages) {
            stages.push_back({{"blocks", s.n_convs}, {"channels", s.channels}});
        }
        cfg["residual"]["stages"] = stages;
    } else {
        cfg["object_backbone"] = {{"arch", opts.object_bb->spec.arch},
                                  {"source", opts.object_bb->source}};
        cfg["scene_backbone"] = {{"arch", opts.scene_bb->spec.arch},
                                 {"source", opts.scene_bb->source}};
    }
    outcome.model_config = cfg;
    return outcome;
}

struct MultimodalModel {
    MultimodalClassifier classifier;
    Tokenizer tokenizer;
    ImageFeatureMode image_mode = ImageFeatureMode::dual_vgg_features;
    size_t max_sequence_length = 126;
    std::shared_ptr<nn::ResidualBackbone> residual;
    ImageNormalization residual_norm;
    LoadedBackbone object_bb, scene_bb;

    std::pair<Label, double> predict_one(const std::string& clean_text,
                                         const std::optional<std::filesystem::path>& image,
                                         const std::string& record_name = "") const {
        nn::Tape tape(false);
        Rng rng(0);
        auto ids = tokenizer.encode(clean_text, max_sequence_length).ids;
        nn::Tensor frow;
        if (image) {
            const ImageNormalization norm = image_mode == ImageFeatureMode::residual_backbone
                                                ? residual_norm
                                                : scene_bb.norm;
            nn::Tensor img = preprocess_image(*image, norm);
            FeatureVector fv = build_image_features_mm(
                img, image_mode, residual.get(),
                image_mode == ImageFeatureMode::dual_vgg_features ? &object_bb : nullptr,
                image_mode == ImageFeatureMode::dual_vgg_features ? &scene_bb : nullptr);
            frow = nn::make_tensor({1, fv.dim()});
            for (size_t j = 0; j < fv.dim(); ++j) frow->v[j] = fv.v[j];
        }
        nn::Tensor logits =
            classifier.forward_record(tape, ids, frow, rng, false, record_name);
        const double m = std::max(logits->v[0], logits->v[1]);
        const double e0 = std::exp(logits->v[0] - m), e1 = std::exp(logits->v[1] - m);
        const double p1 = e1 / (e0 + e1);
        return p1 >= 0.5 ? std::make_pair(Label::relevant, p1)
                         : std::make_pair(Label::not_relevant, 1.0 - p1);
    }
};

inline MultimodalModel multimodal_model_from_checkpoint(const Checkpoint& ckpt) {
    if (ckpt.config.at("model").get<std::string>() != "multimodal") {
        throw IoError("checkpoint is not a multimodal model: " + ckpt.dir.string());
    }
    MultimodalModel model;
    nn::TransformerConfig cfg = encoder_config_from_json(ckpt.config.at("encoder"));
    model.tokenizer = tokenizer_from_checkpoint_config(ckpt.config);
    model.image_mode =
        image_feature_mode_from_string(ckpt.config.at("image_mode").get<std::string>());
    model.max_sequence_length = ckpt.config.value("max_sequence_length", size_t{126});
    const size_t image_dim = ckpt.config.at("image_feature_dim").get<size_t>();
    const size_t k = ckpt.config.at("n_image_tokens").get<size_t>();
    Rng r0(0);
    model.classifier = MultimodalClassifier(cfg, image_dim, k, r0);
    model.classifier.head_dropout = ckpt.config.value("head_dropout", 0.1);
    nn::NamedParams full = model.classifier.params();
    if (model.image_mode == ImageFeatureMode::residual_backbone) {
        nn::ResidualLayout layout;
        layout.input_size = ckpt.config.at("residual").at("input_size").get<size_t>();
        layout.stem_channels = ckpt.config.at("residual").at("stem_channels").get<size_t>();
        for (const auto& s : ckpt.config.at("residual").at("stages")) {
            layout.stages.push_back(
                {s.at("blocks").get<size_t>(), s.at("channels").get<size_t>()});
        }
        model.residual = std::make_shared<nn::ResidualBackbone>(layout, r0);
        model.residual_norm.input_size = layout.input_size;
        auto rp = model.residual->params();
        full.insert(full.end(), rp.begin(), rp.end());
    } else {
        auto make_bb = [&](const char* key, PretrainCorpus corpus) {
            LoadedBackbone bb;
            bb.spec.arch = ckpt.config.at(key).at("arch").get<std::string>();
            bb.spec.corpus = corpus;
            bb.spec.validate();
            Rng rng(0);
            bb.net = nn::VggBackbone(bb.spec.layout(), rng);
            bb.norm = bb.spec.normalization();
            bb.source = ckpt.config.at(key).value("source", "");
            return bb;
        };
        model.object_bb = make_bb("object_backbone", PretrainCorpus::object_corpus);
        model.scene_bb = make_bb("scene_backbone", PretrainCorpus::scene_corpus);
        auto op = model.object_bb.net.params("object");
        full.insert(full.end(), op.begin(), op.end());
        auto sp = model.scene_bb.net.params("scene");
        full.insert(full.end(), sp.begin(), sp.end());
    }
    nn::load_params(full, ckpt.dir / "weights.bin");
    return model;
}

}  // namespace flood
