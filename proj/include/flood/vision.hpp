#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "flood/checkpoint.hpp"
#include "flood/common.hpp"
#include "flood/data.hpp"
#include "flood/features.hpp"
#include "flood/image_io.hpp"
#include "flood/log.hpp"
#include "flood/metrics.hpp"
#include "flood/nn/adam.hpp"
#include "flood/nn/convnet.hpp"
#include "flood/protocol.hpp"
#include "flood/smote.hpp"
#include "flood/trainer_common.hpp"

namespace flood {

enum class PretrainCorpus { object_corpus, scene_corpus };

inline std::string to_string(PretrainCorpus c) {
    return c == PretrainCorpus::object_corpus ? "object" : "scene";
}

struct ImageNormalization {
    size_t input_size = 32;
    double mean[3] = {0.5, 0.5, 0.5};
    double stddev[3] = {0.5, 0.5, 0.5};
};

struct BackboneSpec {
    std::string arch = "vgg-tiny";  // "vgg16" or "vgg-tiny"
    PretrainCorpus corpus = PretrainCorpus::object_corpus;
    std::string feature_layer = "fc2";
    size_t feature_dim = 0;  // 0 -> take from the layout

    nn::VggLayout layout() const {
        if (arch == "vgg16") return nn::vgg16_layout();
        if (arch == "vgg-tiny") return nn::vgg_tiny_layout();
        throw ConfigError("unknown backbone arch \"" + arch + "\"");
    }

    ImageNormalization normalization() const {
        ImageNormalization n;
        n.input_size = layout().input_size;
        if (arch == "vgg16") {
            // channel statistics of the large pretraining corpora
            n.mean[0] = 0.485; n.mean[1] = 0.456; n.mean[2] = 0.406;
            n.stddev[0] = 0.229; n.stddev[1] = 0.224; n.stddev[2] = 0.225;
        }
        return n;
    }

    void validate() const {
        const auto l = layout();
        if (feature_dim != 0 && feature_dim != l.feature_dim()) {
            throw ConfigError("backbone feature_dim " + std::to_string(feature_dim) +
                              " does not match the " + arch + " feature layer width " +
                              std::to_string(l.feature_dim()));
        }
    }

    size_t resolved_feature_dim() const { return feature_dim ? feature_dim : layout().feature_dim(); }
};

struct LoadedBackbone {
    BackboneSpec spec;
    nn::VggBackbone net;
    ImageNormalization norm;
    std::string source;  // bundle dir or "tiny:<seed>"
};

// ---- image preprocessing ----

// Decode, bilinear-resize to the backbone's canonical square input and
// channel-normalize. Deterministic: no augmentation here.
inline nn::Tensor preprocess_image(const std::filesystem::path& path,
                                   const ImageNormalization& norm) {
    Image img = load_image(path);
    const size_t S = norm.input_size;
    nn::Tensor out = nn::make_tensor({3, S, S});
    const double sx = static_cast<double>(img.width) / static_cast<double>(S);
    const double sy = static_cast<double>(img.height) / static_cast<double>(S);
    for (size_t y = 0; y < S; ++y) {
        for (size_t x = 0; x < S; ++x) {
            const double fx = (static_cast<double>(x) + 0.5) * sx - 0.5;
            const double fy = (static_cast<double>(y) + 0.5) * sy - 0.5;
            const long x0 = static_cast<long>(std::floor(fx));
            const long y0 = static_cast<long>(std::floor(fy));
            const double ax = fx - static_cast<double>(x0);
            const double ay = fy - static_cast<double>(y0);
            auto clampi = [](long v, long hi) { return v < 0 ? 0 : (v > hi ? hi : v); };
            const long x0c = clampi(x0, img.width - 1), x1c = clampi(x0 + 1, img.width - 1);
            const long y0c = clampi(y0, img.height - 1), y1c = clampi(y0 + 1, img.height - 1);
            for (size_t c = 0; c < 3; ++c) {
                const double v00 = img.pixel(static_cast<int>(x0c), static_cast<int>(y0c))[c];
                const double v10 = img.pixel(static_cast<int>(x1c), static_cast<int>(y0c))[c];
                const double v01 = img.pixel(static_cast<int>(x0c), static_cast<int>(y1c))[c];
                const double v11 = img.pixel(static_cast<int>(x1c), static_cast<int>(y1c))[c];
                const double v = (1 - ay) * ((1 - ax) * v00 + ax * v10) +
                                 ay * ((1 - ax) * v01 + ax * v11);
                out->v[(c * S + y) * S + x] = (v / 255.0 - norm.mean[c]) / norm.stddev[c];
            }
        }
    }
    return out;
}

inline nn::Tensor stack_images(const std::vector<nn::Tensor>& images) {
    if (images.empty()) throw TrainError("stack_images: empty batch");
    const auto& s = images[0]->shape;  // [3, S, S]
    nn::Tensor out = nn::make_tensor({images.size(), s[0], s[1], s[2]});
    const size_t per = images[0]->numel();
    for (size_t i = 0; i < images.size(); ++i) {
        if (images[i]->shape != s) throw TrainError("stack_images: shape mismatch");
        std::copy(images[i]->v.begin(), images[i]->v.end(), out->v.begin() + i * per);
    }
    return out;
}

// ---- backbone loading ----

inline void save_backbone_bundle(const LoadedBackbone& bb, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    nlohmann::json j;
    j["arch"] = bb.spec.arch;
    j["corpus"] = to_string(bb.spec.corpus);
    j["feature_layer"] = bb.spec.feature_layer;
    j["feature_dim"] = bb.spec.resolved_feature_dim();
    write_file_atomic(dir / "config.json", j.dump(2) + "\n");
    nn::save_params(bb.net.params(), dir / "weights.bin");
}

inline LoadedBackbone load_backbone_bundle(const std::filesystem::path& dir,
                                           PretrainCorpus corpus) {
    auto j = nlohmann::json::parse(read_file(dir / "config.json"));
    LoadedBackbone bb;
    bb.spec.arch = j.at("arch").get<std::string>();
    bb.spec.corpus = corpus;
    bb.spec.feature_layer = j.value("feature_layer", "fc2");
    bb.spec.feature_dim = j.value("feature_dim", size_t{0});
    bb.spec.validate();
    Rng rng(0);
    bb.net = nn::VggBackbone(bb.spec.layout(), rng);
    nn::load_params(bb.net.params(), dir / "weights.bin");
    bb.norm = bb.spec.normalization();
    bb.source = dir.string();
    return bb;
}

// "tiny" / "tiny:<seed>" builds a deterministic random-weight desk-scale
// backbone; anything else must be a bundle directory. Each corpus tag gets
// its own default seed so object and scene weights differ.
inline LoadedBackbone resolve_backbone(const std::string& source, PretrainCorpus corpus) {
    if (source == "tiny" || starts_with(source, "tiny:")) {
        uint64_t seed = corpus == PretrainCorpus::object_corpus ? 101 : 202;
        if (starts_with(source, "tiny:")) seed = std::stoull(source.substr(5));
        LoadedBackbone bb;
        bb.spec.arch = "vgg-tiny";
        bb.spec.corpus = corpus;
        bb.spec.validate();
        Rng rng(seed);
        bb.net = nn::VggBackbone(bb.spec.layout(), rng);
        bb.norm = bb.spec.normalization();
        bb.source = "tiny:" + std::to_string(seed);
        return bb;
    }
    if (std::filesystem::is_directory(source)) {
        return load_backbone_bundle(source, corpus);
    }
    throw ConfigError("backbone \"" + source +
                      "\" is not available. Pass a bundle directory or \"tiny[:seed]\".");
}

// ---- feature extraction and fusion ----

inline FeatureVector extract_features(const nn::Tensor& image, const LoadedBackbone& bb) {
    if (image->shape.size() != 3) throw TrainError("extract_features: expected a [3,S,S] tensor");
    nn::Tape tape(false);
    Rng rng(0);
    nn::Tensor batch = stack_images({image});
    nn::Tensor feats = bb.net.forward_features(tape, batch, rng, false);
    FeatureVector fv;
    fv.kind = bb.spec.corpus == PretrainCorpus::object_corpus ? FeatureKind::object_level
                                                              : FeatureKind::scene_level;
    fv.v.resize(feats->shape[1]);
    for (size_t j = 0; j < fv.v.size(); ++j) {
        double x = feats->v[j];
        if (!std::isfinite(x)) throw TrainError("extract_features: non-finite output");
        fv.v[j] = static_cast<float>(x);
    }
    return fv;
}

struct FusedFeature {
    FeatureVector vector;                      // kind = fused
    std::pair<size_t, size_t> object_span;     // [begin, end)
    std::pair<size_t, size_t> scene_span;
};

inline FusedFeature fuse_early(const FeatureVector& obj, const FeatureVector& scene) {
    for (const auto* part : {&obj, &scene}) {
        for (float x : part->v) {
            if (!std::isfinite(x)) throw DataError("fuse_early: non-finite feature entry");
        }
    }
    FusedFeature out;
    out.vector.kind = FeatureKind::fused;
    out.vector.v.reserve(obj.dim() + scene.dim());
    out.vector.v.insert(out.vector.v.end(), obj.v.begin(), obj.v.end());
    out.vector.v.insert(out.vector.v.end(), scene.v.begin(), scene.v.end());
    out.object_span = {0, obj.dim()};
    out.scene_span = {obj.dim(), obj.dim() + scene.dim()};
    return out;
}

// ---- training ----

enum class ImageTrainMode { scene_finetune, fused_head };
enum class RebalanceStrategy { automatic, smote_features, resample_duplicates };

struct ImageTrainOptions {
    ImageTrainMode mode = ImageTrainMode::scene_finetune;
    TrainingProtocol protocol;
    std::optional<SmoteConfig> smote;
    RebalanceStrategy strategy = RebalanceStrategy::automatic;
    double head_dropout = 0.5;
    // which backbone scene_finetune trains end-to-end; object_corpus gives
    // the object-level ablation of the same pipeline
    PretrainCorpus finetune_corpus = PretrainCorpus::scene_corpus;
    Log* log = nullptr;
};

namespace detail {

struct ImageExample {
    nn::Tensor image;  // preprocessed [3,S,S]
    int label = 0;     // 1 = relevant
};

inline void log_effective_counts(Log* log, size_t minority, size_t majority) {
    if (!log) return;
    log->info("effective class counts after rebalancing: " + std::to_string(minority) + "/" +
              std::to_string(majority) + " (minority/majority)");
}

// Horizontal flip plus small pixel jitter; the duplicate-with-augmentation
// rebalancing path for end-to-end fine-tuning.
inline nn::Tensor augment_image(const nn::Tensor& img, Rng& rng, bool flip) {
    const size_t C = img->shape[0], H = img->shape[1], W = img->shape[2];
    nn::Tensor out = nn::make_tensor({C, H, W});
    for (size_t c = 0; c < C; ++c) {
        for (size_t y = 0; y < H; ++y) {
            for (size_t x = 0; x < W; ++x) {
                const size_t sx = flip ? W - 1 - x : x;
                out->v[(c * H + y) * W + x] =
                    img->v[(c * H + y) * W + sx] + 0.02 * rng.next_gaussian();
            }
        }
    }
    return out;
}

inline std::vector<size_t> shuffled_indices(size_t n, Rng& rng) {
    std::vector<size_t> idx(n);
    for (size_t i = 0; i < n; ++i) idx[i] = i;
    for (size_t i = n; i > 1; --i) {
        size_t j = rng.next_below(i);
        std::swap(idx[i - 1], idx[j]);
    }
    return idx;
}

inline void require_two_classes(const DatasetSplit& train) {
    if (train.count(Label::relevant) == 0 || train.count(Label::not_relevant) == 0) {
        throw TrainError("training split must contain both classes");
    }
}

}  // namespace detail

// Records without images are dropped (never imputed); the dropped count goes
// to the log. Returns preprocessed tensors plus labels.
inline std::vector<detail::ImageExample> load_image_examples(const DatasetSplit& ds,
                                                             const ImageNormalization& norm,
                                                             Log* log, const char* what) {
    std::vector<detail::ImageExample> out;
    size_t dropped = 0;
    for (const auto& r : ds.records) {
        if (!r.image_path || !r.label) {
            ++dropped;
            continue;
        }
        detail::ImageExample ex;
        ex.image = preprocess_image(ds.resolve_image(r), norm);
        ex.label = *r.label == Label::relevant ? 1 : 0;
        out.push_back(std::move(ex));
    }
    if (dropped && log) {
        log->info(std::string(what) + ": excluded " + std::to_string(dropped) +
                  " records without image or label");
    }
    return out;
}

inline TrainOutcome train_image_classifier(const DatasetSplit& train, const DatasetSplit& dev,
                                           LoadedBackbone& object_bb, LoadedBackbone& scene_bb,
                                           const ImageTrainOptions& opts) {
    opts.protocol.validate();
    detail::require_two_classes(train);
    if (dev.records.empty()) throw TrainError("dev split is empty");

    LoadedBackbone& finetune_bb =
        opts.finetune_corpus == PretrainCorpus::scene_corpus ? scene_bb : object_bb;
    const ImageNormalization norm = finetune_bb.norm;

    auto train_ex = load_image_examples(train, norm, opts.log, "train");
    auto dev_ex = load_image_examples(dev, norm, opts.log, "dev");
    if (dev_ex.empty()) throw TrainError("dev split has no usable image records");
    {
        size_t pos = 0;
        for (const auto& e : train_ex) pos += e.label;
        if (pos == 0 || pos == train_ex.size()) {
            throw TrainError("training split must contain both classes");
        }
    }

    const bool fused = opts.mode == ImageTrainMode::fused_head;
    RebalanceStrategy strategy = opts.strategy;
    if (strategy == RebalanceStrategy::automatic) {
        strategy = fused ? RebalanceStrategy::smote_features
                         : RebalanceStrategy::resample_duplicates;
    }

    // fused mode: both backbones stay frozen, so features are a one-time cost
    std::vector<FeatureVector> train_feats, dev_feats;
    size_t feature_dim = 0;
    if (fused && object_bb.norm.input_size != scene_bb.norm.input_size) {
        throw ConfigError("fused mode needs matching backbone input sizes, got " +
                          std::to_string(object_bb.norm.input_size) + " and " +
                          std::to_string(scene_bb.norm.input_size));
    }
    if (fused) {
        auto extract_fused = [&](const detail::ImageExample& ex) {
            return fuse_early(extract_features(ex.image, object_bb),
                              extract_features(ex.image, scene_bb))
                .vector;
        };
        for (const auto& ex : train_ex) train_feats.push_back(extract_fused(ex));
        for (const auto& ex : dev_ex) dev_feats.push_back(extract_fused(ex));
        feature_dim = train_feats[0].dim();
    } else {
        feature_dim = finetune_bb.spec.resolved_feature_dim();
    }

    if (fused && strategy == RebalanceStrategy::resample_duplicates) {
        throw ConfigError("resample_duplicates applies to end-to-end fine-tuning only");
    }
    if (!fused && strategy == RebalanceStrategy::smote_features) {
        throw ConfigError(
            "smote_features applies to the frozen-feature head; end-to-end fine-tuning "
            "rebalances by duplicate-with-augmentation");
    }

    // assemble the effective training set (rebalanced when requested)
    LabeledFeatureSet head_train;    // fused mode
    std::vector<detail::ImageExample> scene_train;  // scene mode, owns augmented copies
    if (fused) {
        for (size_t i = 0; i < train_feats.size(); ++i) {
            head_train.vectors.push_back(train_feats[i]);
            head_train.labels.push_back(train_ex[i].label ? Label::relevant
                                                          : Label::not_relevant);
        }
        if (opts.smote && strategy == RebalanceStrategy::smote_features) {
            const Label minority = head_train.count(Label::relevant) <
                                           head_train.count(Label::not_relevant)
                                       ? Label::relevant
                                       : Label::not_relevant;
            const Label majority =
                minority == Label::relevant ? Label::not_relevant : Label::relevant;
            head_train = oversample(head_train, *opts.smote, opts.log);
            detail::log_effective_counts(opts.log, head_train.count(minority),
                                         head_train.count(majority));
        }
    } else {
        scene_train = train_ex;
        if (opts.smote && strategy == RebalanceStrategy::resample_duplicates) {
            size_t pos = 0;
            for (const auto& e : train_ex) pos += e.label;
            const size_t neg = train_ex.size() - pos;
            const int minority_label = pos < neg ? 1 : 0;
            if (pos == neg) throw DataError("rebalance: classes are equal in size");
            size_t dup_id = 0;
            for (size_t i = 0; i < train_ex.size(); ++i) {
                if (train_ex[i].label != minority_label) continue;
                for (size_t d = 1; d < opts.smote->inflation_factor; ++d, ++dup_id) {
                    Rng aug_rng(Rng::derive(opts.smote->rng_seed, dup_id));
                    detail::ImageExample ex;
                    ex.image = detail::augment_image(train_ex[i].image, aug_rng, d % 2 == 1);
                    ex.label = train_ex[i].label;
                    scene_train.push_back(std::move(ex));
                }
            }
            size_t minority = std::min(pos, neg) * opts.smote->inflation_factor;
            detail::log_effective_counts(opts.log, minority, std::max(pos, neg));
        }
    }

    // pristine copy of the pretrained weights restored before every seed
    auto pristine_scene = snapshot_values(finetune_bb.net.params());

    TrainOutcome outcome;
    const size_t d_head = feature_dim;

    for (int seed : opts.protocol.seeds) {
        Rng seed_rng(Rng::derive(static_cast<uint64_t>(seed), 0xF00D));
        nn::Linear head(d_head, 2, seed_rng);
        if (!fused) restore_values(finetune_bb.net.params(), pristine_scene);

        nn::NamedParams train_params;
        head.collect("head", train_params);
        if (!fused) {
            auto bp = finetune_bb.net.params();
            train_params.insert(train_params.end(), bp.begin(), bp.end());
        }
        nn::set_requires_grad(train_params, true);
        nn::Adam optim(opts.protocol.learning_rate);

        double seed_best = -1.0;
        size_t seed_best_epoch = 0;
        std::vector<std::vector<double>> seed_best_values;
        bool aborted = false;

        const size_t n_train = fused ? head_train.size() : scene_train.size();
        for (size_t epoch = 1; epoch <= opts.protocol.epochs && !aborted; ++epoch) {
            auto t0 = std::chrono::steady_clock::now();
            Rng shuffle_rng(Rng::derive(static_cast<uint64_t>(seed), 7000 + epoch));
            auto order = detail::shuffled_indices(n_train, shuffle_rng);
            Rng drop_rng(Rng::derive(static_cast<uint64_t>(seed), 9000 + epoch));

            for (size_t start = 0; start < order.size();
                 start += opts.protocol.batch_size) {
                const size_t end = std::min(order.size(), start + opts.protocol.batch_size);
                nn::Tape tape(true);
                nn::Tensor logits;
                std::vector<int> labels;
                if (fused) {
                    nn::Tensor x = nn::make_tensor({end - start, d_head});
                    for (size_t b = start; b < end; ++b) {
                        const auto& fv = head_train.vectors[order[b]];
                        for (size_t j = 0; j < d_head; ++j) {
                            x->v[(b - start) * d_head + j] = fv.v[j];
                        }
                        labels.push_back(head_train.labels[order[b]] == Label::relevant ? 1 : 0);
                    }
                    logits = head.forward(
                        tape, tape.dropout(x, opts.head_dropout, drop_rng, true));
                } else {
                    std::vector<nn::Tensor> imgs;
                    for (size_t b = start; b < end; ++b) {
                        imgs.push_back(scene_train[order[b]].image);
                        labels.push_back(scene_train[order[b]].label);
                    }
                    nn::Tensor feats = finetune_bb.net.forward_features(
                        tape, stack_images(imgs), drop_rng, true);
                    logits = head.forward(
                        tape, tape.dropout(feats, opts.head_dropout, drop_rng, true));
                }
                nn::Tensor loss = tape.cross_entropy(logits, labels);
                if (!std::isfinite(loss->v[0])) {
                    if (opts.log) {
                        opts.log->warn("seed " + std::to_string(seed) +
                                       ": non-finite loss, aborting this seed");
                    }
                    outcome.manifest.rows.push_back(
                        {seed, epoch, std::nan(""), 0.0});
                    aborted = true;
                    break;
                }
                nn::Adam::zero_grad(nn::values_of(train_params));
                tape.backward(loss);
                optim.step(nn::values_of(train_params));
            }
            if (aborted) break;

            // dev evaluation
            std::vector<Label> preds, golds;
            for (size_t i = 0; i < dev_ex.size(); ++i) {
                nn::Tape tape(false);
                Rng eval_rng(0);
                nn::Tensor feats;
                if (fused) {
                    nn::Tensor x = nn::make_tensor({1, d_head});
                    for (size_t j = 0; j < d_head; ++j) x->v[j] = dev_feats[i].v[j];
                    feats = x;
                } else {
                    feats = finetune_bb.net.forward_features(tape, stack_images({dev_ex[i].image}),
                                                             eval_rng, false);
                }
                nn::Tensor logits = head.forward(tape, feats);
                preds.push_back(logits->v[1] > logits->v[0] ? Label::relevant
                                                            : Label::not_relevant);
                golds.push_back(dev_ex[i].label ? Label::relevant : Label::not_relevant);
            }
            const double score = micro_f1(confusion(preds, golds));
            const double wall =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            outcome.manifest.rows.push_back({seed, epoch, score, wall});

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

    if (outcome.best_values.empty()) {
        throw TrainError("all seeds aborted with non-finite loss");
    }
    if (!fused) restore_values(finetune_bb.net.params(), pristine_scene);

    // rebuild the winning model as standalone tensors, laid out the way the
    // checkpoint loader expects them
    {
        Rng r0(0);
        nn::Linear ck_head(d_head, 2, r0);
        if (fused) {
            nn::NamedParams head_only;
            ck_head.collect("head", head_only);
            restore_values(head_only, outcome.best_values);
            outcome.checkpoint_params = head_only;
            auto op = object_bb.net.params("object");
            outcome.checkpoint_params.insert(outcome.checkpoint_params.end(), op.begin(),
                                             op.end());
            auto sp = scene_bb.net.params("scene");
            outcome.checkpoint_params.insert(outcome.checkpoint_params.end(), sp.begin(),
                                             sp.end());
        } else {
            auto ck_net = std::make_shared<nn::VggBackbone>(finetune_bb.spec.layout(), r0);
            nn::NamedParams full;
            ck_head.collect("head", full);
            auto bp = ck_net->params();
            full.insert(full.end(), bp.begin(), bp.end());
            restore_values(full, outcome.best_values);
            outcome.checkpoint_params = full;
        }
    }

    nlohmann::json cfg;
    cfg["model"] = fused ? "image_fused" : "image_scene";
    cfg["labels"] = label_mapping_json();
    cfg["seed"] = outcome.best_seed;
    cfg["epoch"] = outcome.best_epoch;
    cfg["feature_dim"] = d_head;
    cfg["head_dropout"] = opts.head_dropout;
    cfg["object_backbone"] = {{"arch", object_bb.spec.arch}, {"source", object_bb.source}};
    cfg["scene_backbone"] = {{"arch", scene_bb.spec.arch}, {"source", scene_bb.source}};
    if (!fused) {
        cfg["finetune_backbone"] = {{"arch", finetune_bb.spec.arch},
                                    {"source", finetune_bb.source},
                                    {"corpus", to_string(opts.finetune_corpus)}};
    }
    outcome.model_config = cfg;
    return outcome;
}

// ---- prediction from a checkpoint ----

struct ImageClassifierModel {
    ImageTrainMode mode;
    LoadedBackbone object_bb;  // fused mode only
    LoadedBackbone scene_bb;
    nn::Linear head;

    static nn::NamedParams checkpoint_params(ImageTrainMode mode, LoadedBackbone& object_bb,
                                             LoadedBackbone& scene_bb, nn::Linear& head) {
        nn::NamedParams params;
        head.collect("head", params);
        if (mode == ImageTrainMode::fused_head) {
            auto op = object_bb.net.params("object");
            params.insert(params.end(), op.begin(), op.end());
            auto sp = scene_bb.net.params("scene");
            params.insert(params.end(), sp.begin(), sp.end());
        } else {
            auto bp = scene_bb.net.params();
            params.insert(params.end(), bp.begin(), bp.end());
        }
        return params;
    }

    std::pair<Label, double> predict_one(const nn::Tensor& image) const {
        nn::Tape tape(false);
        Rng rng(0);
        nn::Tensor logits;
        if (mode == ImageTrainMode::fused_head) {
            auto fv = fuse_early(extract_features(image, object_bb),
                                 extract_features(image, scene_bb))
                          .vector;
            nn::Tensor x = nn::make_tensor({1, fv.dim()});
            for (size_t j = 0; j < fv.dim(); ++j) x->v[j] = fv.v[j];
            logits = head.forward(tape, x);
        } else {
            nn::Tensor feats =
                scene_bb.net.forward_features(tape, stack_images({image}), rng, false);
            logits = head.forward(tape, feats);
        }
        const double m = std::max(logits->v[0], logits->v[1]);
        const double e0 = std::exp(logits->v[0] - m), e1 = std::exp(logits->v[1] - m);
        const double p1 = e1 / (e0 + e1);
        return p1 >= 0.5 ? std::make_pair(Label::relevant, p1)
                         : std::make_pair(Label::not_relevant, 1.0 - p1);
    }
};

inline ImageClassifierModel image_model_from_checkpoint(const Checkpoint& ckpt) {
    ImageClassifierModel model;
    const std::string kind = ckpt.config.at("model").get<std::string>();
    model.mode = kind == "image_fused" ? ImageTrainMode::fused_head
                                       : ImageTrainMode::scene_finetune;
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
    if (model.mode == ImageTrainMode::fused_head) {
        model.scene_bb = make_bb("scene_backbone", PretrainCorpus::scene_corpus);
        model.object_bb = make_bb("object_backbone", PretrainCorpus::object_corpus);
    } else {
        // the fine-tuned net (scene by default, object for the ablation)
        const char* key =
            ckpt.config.contains("finetune_backbone") ? "finetune_backbone" : "scene_backbone";
        model.scene_bb = make_bb(
            key, ckpt.config.at(key).value("corpus", "scene") == "object"
                     ? PretrainCorpus::object_corpus
                     : PretrainCorpus::scene_corpus);
    }
    Rng rng(0);
    model.head = nn::Linear(ckpt.config.at("feature_dim").get<size_t>(), 2, rng);
    auto params = ImageClassifierModel::checkpoint_params(model.mode, model.object_bb,
                                                          model.scene_bb, model.head);
    nn::load_params(params, ckpt.dir / "weights.bin");
    return model;
}

}  // namespace flood
