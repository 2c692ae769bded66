// Command-line entry point for the flood-tweet classification toolkit.
// Subcommands cover the whole pipeline: corpus generation, preprocessing,
// feature extraction, oversampling, the four trainers, prediction,
// evaluation and full experiment runs.
//
// Exit codes: 0 success, 2 config error, 3 data error, 4 training failure.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "flood/config.hpp"
#include "flood/data.hpp"
#include "flood/encoder.hpp"
#include "flood/experiment.hpp"
#include "flood/features.hpp"
#include "flood/metrics.hpp"
#include "flood/multimodal.hpp"
#include "flood/smote.hpp"
#include "flood/synth.hpp"
#include "flood/text_clean.hpp"
#include "flood/text_model.hpp"
#include "flood/vision.hpp"

namespace fs = std::filesystem;
using namespace flood;

namespace {

std::vector<int> seed_range(int n) {
    std::vector<int> seeds;
    for (int i = 1; i <= n; ++i) seeds.push_back(i);
    return seeds;
}

struct ProtocolFlags {
    double lr = 1e-5;
    int epochs = 10;
    int seeds = 10;
    int batch_size = 32;
    int max_len = 128;

    TrainingProtocol to_protocol() const {
        TrainingProtocol p;
        p.learning_rate = lr;
        p.epochs = static_cast<size_t>(epochs);
        p.seeds = seed_range(seeds);
        p.batch_size = static_cast<size_t>(batch_size);
        p.max_sequence_length = static_cast<size_t>(max_len);
        p.validate();
        return p;
    }
};

void add_protocol_flags(CLI::App* cmd, ProtocolFlags& flags, double default_lr) {
    flags.lr = default_lr;
    cmd->add_option("--lr", flags.lr, "learning rate");
    cmd->add_option("--epochs", flags.epochs, "training epochs per seed");
    cmd->add_option("--seeds", flags.seeds, "number of seeds (runs 1..N)");
    cmd->add_option("--batch-size", flags.batch_size, "minibatch size");
    cmd->add_option("--max-len", flags.max_len, "maximum token sequence length");
}

void write_training_artifacts(const fs::path& out_dir, const TrainOutcome& outcome) {
    fs::create_directories(out_dir);
    save_checkpoint(out_dir / "checkpoint", outcome.model_config, outcome.checkpoint_params,
                    outcome.best_score);
    write_file_atomic(out_dir / "manifest.csv", outcome.manifest.to_csv());
    std::cout << "best seed " << outcome.best_seed << " epoch " << outcome.best_epoch
              << " dev micro-F1 " << outcome.best_score << "\n"
              << "checkpoint: " << (out_dir / "checkpoint").string() << "\n";
}

Checkpoint open_model_dir(const fs::path& dir) {
    if (fs::exists(dir / "config.json")) return open_checkpoint(dir);
    if (fs::exists(dir / "checkpoint" / "config.json")) {
        return open_checkpoint(dir / "checkpoint");
    }
    throw IoError("no checkpoint found under: " + dir.string());
}

std::optional<SmoteConfig> smote_or_skip(const DatasetSplit& train, bool enabled,
                                         const SmoteConfig& cfg, Log& log) {
    if (!enabled) return std::nullopt;
    if (train.count(Label::relevant) == train.count(Label::not_relevant)) {
        log.warn("train classes are balanced; skipping oversampling");
        return std::nullopt;
    }
    return cfg;
}

std::vector<std::string> clean_corpus_texts(const DatasetSplit& ds, const CleanOptions& opt) {
    std::vector<std::string> texts;
    texts.reserve(ds.records.size());
    for (const auto& r : ds.records) {
        texts.push_back(r.clean_text ? *r.clean_text : clean(r.text, opt).value);
    }
    return texts;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"flood: multimodal flood-tweet classification toolkit"};
    app.require_subcommand(1);
    int exit_code = 0;

    // ---- gen-synthetic ----
    auto* gen = app.add_subcommand("gen-synthetic", "generate a synthetic desk-scale corpus");
    struct {
        std::string out;
        size_t n_relevant = 32, n_irrelevant = 32;
        double text_sep = 1.0, image_sep = 1.0;
        uint64_t seed = 0;
        double train_frac = 2.0 / 3.0, dev_frac = 1.0 / 3.0;
        int image_size = 32;
    } g;
    gen->add_option("--out", g.out, "output directory")->required();
    gen->add_option("--n-relevant", g.n_relevant, "relevant record count");
    gen->add_option("--n-irrelevant", g.n_irrelevant, "not_relevant record count");
    gen->add_option("--text-sep", g.text_sep, "text vocabulary separability in [0,1]");
    gen->add_option("--image-sep", g.image_sep, "image blob separability in [0,1]");
    gen->add_option("--seed", g.seed, "generator seed");
    gen->add_option("--train-frac", g.train_frac, "fraction assigned to train");
    gen->add_option("--dev-frac", g.dev_frac, "fraction assigned to dev");
    gen->add_option("--image-size", g.image_size, "square image side in pixels");
    gen->callback([&] {
        SyntheticCorpusSpec spec;
        spec.n_relevant = g.n_relevant;
        spec.n_irrelevant = g.n_irrelevant;
        spec.text_vocab_separability = g.text_sep;
        spec.image_blob_separability = g.image_sep;
        spec.rng_seed = g.seed;
        spec.train_frac = g.train_frac;
        spec.dev_frac = g.dev_frac;
        spec.image_size = g.image_size;
        DatasetSplit ds = generate_synthetic_corpus(spec, g.out);
        std::cout << "wrote " << ds.records.size() << " records to " << g.out << "\n";
    });

    // ---- preprocess ----
    auto* pre = app.add_subcommand("preprocess", "clean tweet texts into a clean_text field");
    struct {
        std::string in, out;
        bool keep_mentions = false;
    } p;
    pre->add_option("--in", p.in, "input jsonl")->required();
    pre->add_option("--out", p.out, "output jsonl")->required();
    pre->add_flag("--keep-mentions", p.keep_mentions, "keep @-mentions instead of removing");
    pre->callback([&] {
        CleanOptions opt{!p.keep_mentions};
        DatasetSplit ds = load_dataset(p.in, DataFormat::jsonl, false);
        for (auto& r : ds.records) r.clean_text = clean(r.text, opt).value;
        save_dataset(ds, p.out);
        std::cout << "cleaned " << ds.records.size() << " records -> " << p.out << "\n";
    });

    // ---- extract-features ----
    auto* ext = app.add_subcommand("extract-features",
                                   "extract backbone features for records with images");
    struct {
        std::string corpus, in, out, backbone = "tiny";
    } x;
    ext->add_option("--corpus", x.corpus, "object|scene")->required();
    ext->add_option("--in", x.in, "input jsonl")->required();
    ext->add_option("--out", x.out, "output feature file (.csv for text form)")->required();
    ext->add_option("--backbone", x.backbone, "backbone bundle dir or tiny[:seed]");
    ext->callback([&] {
        if (x.corpus != "object" && x.corpus != "scene") {
            throw ConfigError("--corpus must be object or scene");
        }
        PretrainCorpus pc = x.corpus == "object" ? PretrainCorpus::object_corpus
                                                 : PretrainCorpus::scene_corpus;
        LoadedBackbone bb = resolve_backbone(x.backbone, pc);
        DatasetSplit ds = load_dataset(x.in);
        LabeledFeatureSet set;
        size_t skipped = 0;
        for (const auto& r : ds.records) {
            if (!r.image_path || !r.label) {
                ++skipped;
                continue;
            }
            set.vectors.push_back(
                extract_features(preprocess_image(ds.resolve_image(r), bb.norm), bb));
            set.labels.push_back(*r.label);
        }
        if (set.vectors.empty()) throw DataError("no records with both image and label");
        save_features(set, x.out);
        std::cout << "extracted " << set.size() << " " << x.corpus << "-level vectors (dim "
                  << set.dim() << ", skipped " << skipped << ") -> " << x.out << "\n";
    });

    // ---- oversample ----
    auto* ovs = app.add_subcommand("oversample", "SMOTE-oversample a feature file");
    struct {
        std::string features, out;
        size_t factor = 3, k = 5;
        uint64_t seed = 0;
    } o;
    ovs->add_option("--features", o.features, "input feature file")->required();
    ovs->add_option("--factor", o.factor, "minority inflation factor");
    ovs->add_option("--k", o.k, "nearest-neighbour count");
    ovs->add_option("--seed", o.seed, "generator seed");
    ovs->add_option("--out", o.out, "output feature file")->required();
    ovs->callback([&] {
        SmoteConfig cfg;
        cfg.inflation_factor = o.factor;
        cfg.k_neighbors = o.k;
        cfg.rng_seed = o.seed;
        LabeledFeatureSet set = load_features(o.features);
        Log log;
        LabeledFeatureSet out_set = oversample(set, cfg, &log);
        save_features(out_set, o.out);
        std::cout << "oversampled " << set.size() << " -> " << out_set.size()
                  << " vectors -> " << o.out << "\n";
    });

    // ---- train-text ----
    auto* ttx = app.add_subcommand("train-text", "fine-tune the text classifier (run 2)");
    struct {
        std::string train, dev, encoder = kDefaultEncoderId, out;
        bool keep_mentions = false;
    } tt;
    ProtocolFlags tt_flags;
    ttx->add_option("--train", tt.train, "train jsonl")->required();
    ttx->add_option("--dev", tt.dev, "dev jsonl")->required();
    ttx->add_option("--encoder", tt.encoder, "encoder bundle dir, tiny[:opts], or model id");
    ttx->add_option("--out", tt.out, "output directory")->required();
    ttx->add_flag("--keep-mentions", tt.keep_mentions, "keep @-mentions when cleaning");
    add_protocol_flags(ttx, tt_flags, 1e-5);
    ttx->callback([&] {
        DatasetSplit train = load_dataset(tt.train);
        DatasetSplit dev = load_dataset(tt.dev);
        Log log;
        TextTrainOptions opts;
        opts.protocol = tt_flags.to_protocol();
        opts.clean_options.strip_mentions = !tt.keep_mentions;
        opts.log = &log;
        EncoderHandle handle =
            resolve_encoder(tt.encoder, clean_corpus_texts(train, opts.clean_options));
        TrainOutcome outcome = train_text_classifier(train, dev, handle, opts);
        write_training_artifacts(tt.out, outcome);
    });

    // ---- train-image ----
    auto* tim = app.add_subcommand("train-image", "train an image classifier (runs 3/4)");
    struct {
        std::string mode, train, dev, out;
        std::string object_backbone = "tiny", scene_backbone = "tiny";
        std::string finetune_corpus = "scene";
        size_t smote_factor = 3, smote_k = 5;
        uint64_t smote_seed = 0;
        bool no_smote = false;
    } ti;
    ProtocolFlags ti_flags;
    tim->add_option("--mode", ti.mode, "scene (fine-tune) | fused (frozen dual features)")
        ->required();
    tim->add_option("--train", ti.train, "train jsonl")->required();
    tim->add_option("--dev", ti.dev, "dev jsonl")->required();
    tim->add_option("--out", ti.out, "output directory")->required();
    tim->add_option("--object-backbone", ti.object_backbone, "bundle dir or tiny[:seed]");
    tim->add_option("--scene-backbone", ti.scene_backbone, "bundle dir or tiny[:seed]");
    tim->add_option("--finetune-corpus", ti.finetune_corpus,
                    "backbone that scene mode fine-tunes: scene | object (ablation)");
    tim->add_option("--smote-factor", ti.smote_factor, "minority inflation factor");
    tim->add_option("--smote-k", ti.smote_k, "SMOTE neighbour count");
    tim->add_option("--smote-seed", ti.smote_seed, "SMOTE seed");
    tim->add_flag("--no-smote", ti.no_smote, "disable minority oversampling");
    add_protocol_flags(tim, ti_flags, 1e-5);
    tim->callback([&] {
        if (ti.mode != "scene" && ti.mode != "fused") {
            throw ConfigError("--mode must be scene or fused");
        }
        DatasetSplit train = load_dataset(ti.train);
        DatasetSplit dev = load_dataset(ti.dev);
        Log log;
        LoadedBackbone object_bb =
            resolve_backbone(ti.object_backbone, PretrainCorpus::object_corpus);
        LoadedBackbone scene_bb =
            resolve_backbone(ti.scene_backbone, PretrainCorpus::scene_corpus);
        ImageTrainOptions opts;
        opts.mode = ti.mode == "scene" ? ImageTrainMode::scene_finetune
                                       : ImageTrainMode::fused_head;
        if (ti.finetune_corpus == "object") {
            opts.finetune_corpus = PretrainCorpus::object_corpus;
        } else if (ti.finetune_corpus != "scene") {
            throw ConfigError("--finetune-corpus must be scene or object");
        }
        opts.protocol = ti_flags.to_protocol();
        SmoteConfig scfg;
        scfg.inflation_factor = ti.smote_factor;
        scfg.k_neighbors = ti.smote_k;
        scfg.rng_seed = ti.smote_seed;
        opts.smote = smote_or_skip(train, !ti.no_smote, scfg, log);
        opts.log = &log;
        TrainOutcome outcome = train_image_classifier(train, dev, object_bb, scene_bb, opts);
        write_training_artifacts(ti.out, outcome);
    });

    // ---- train-mm ----
    auto* tmm = app.add_subcommand("train-mm", "train the multimodal classifier (run 1)");
    struct {
        std::string train, dev, out;
        std::string image_mode = "dualvgg";
        std::string encoder = kDefaultEncoderId;
        std::string object_backbone = "tiny", scene_backbone = "tiny",
                    residual_backbone = "tiny";
        size_t n_image_tokens = 1;
        bool keep_mentions = false;
    } tm;
    ProtocolFlags tm_flags;
    tmm->add_option("--train", tm.train, "train jsonl")->required();
    tmm->add_option("--dev", tm.dev, "dev jsonl")->required();
    tmm->add_option("--out", tm.out, "output directory")->required();
    tmm->add_option("--image-mode", tm.image_mode, "resnet | dualvgg");
    tmm->add_option("--encoder", tm.encoder, "encoder bundle dir, tiny[:opts], or model id");
    tmm->add_option("--object-backbone", tm.object_backbone, "bundle dir or tiny[:seed]");
    tmm->add_option("--scene-backbone", tm.scene_backbone, "bundle dir or tiny[:seed]");
    tmm->add_option("--residual-backbone", tm.residual_backbone, "tiny[:seed]");
    tmm->add_option("--n-image-tokens", tm.n_image_tokens, "image token slots");
    tmm->add_flag("--keep-mentions", tm.keep_mentions, "keep @-mentions when cleaning");
    add_protocol_flags(tmm, tm_flags, 1e-5);
    tmm->callback([&] {
        DatasetSplit train = load_dataset(tm.train);
        DatasetSplit dev = load_dataset(tm.dev);
        Log log;
        MultimodalTrainOptions opts;
        opts.protocol = tm_flags.to_protocol();
        opts.clean_options.strip_mentions = !tm.keep_mentions;
        opts.image_mode = image_feature_mode_from_string(tm.image_mode);
        opts.n_image_tokens = tm.n_image_tokens;
        opts.log = &log;
        EncoderHandle handle =
            resolve_encoder(tm.encoder, clean_corpus_texts(train, opts.clean_options));
        LoadedBackbone object_bb, scene_bb;
        std::unique_ptr<nn::ResidualBackbone> residual;
        if (opts.image_mode == ImageFeatureMode::dual_vgg_features) {
            object_bb = resolve_backbone(tm.object_backbone, PretrainCorpus::object_corpus);
            scene_bb = resolve_backbone(tm.scene_backbone, PretrainCorpus::scene_corpus);
            opts.object_bb = &object_bb;
            opts.scene_bb = &scene_bb;
        } else {
            uint64_t rseed = 303;
            if (starts_with(tm.residual_backbone, "tiny:")) {
                rseed = std::stoull(tm.residual_backbone.substr(5));
            } else if (tm.residual_backbone != "tiny") {
                throw ConfigError("--residual-backbone supports tiny[:seed] only");
            }
            Rng rng(rseed);
            residual = std::make_unique<nn::ResidualBackbone>(nn::residual_tiny_layout(), rng);
            opts.residual = residual.get();
            opts.residual_norm.input_size = residual->layout.input_size;
        }
        TrainOutcome outcome = train_multimodal(train, dev, handle, opts);
        write_training_artifacts(tm.out, outcome);
    });

    // ---- predict ----
    auto* prd = app.add_subcommand("predict", "label records with a trained checkpoint");
    struct {
        std::string model, in, out;
        bool keep_mentions = false;
    } pr;
    prd->add_option("--model", pr.model, "checkpoint dir (or training output dir)")->required();
    prd->add_option("--in", pr.in, "input jsonl")->required();
    prd->add_option("--out", pr.out, "output jsonl of {tweet_id, label, confidence}")
        ->required();
    prd->add_flag("--keep-mentions", pr.keep_mentions, "keep @-mentions when cleaning");
    prd->callback([&] {
        Checkpoint ckpt = open_model_dir(pr.model);
        DatasetSplit ds = load_dataset(pr.in);
        CleanOptions copt{!pr.keep_mentions};
        const std::string kind = ckpt.config.at("model").get<std::string>();
        std::string out;
        size_t skipped = 0;
        auto emit = [&](const std::string& id, Label label, double conf) {
            nlohmann::ordered_json j;
            j["tweet_id"] = id;
            j["label"] = to_string(label);
            j["confidence"] = conf;
            out += j.dump() + "\n";
        };
        if (kind == "text") {
            TextClassifierModel model = text_model_from_checkpoint(ckpt);
            for (const auto& r : ds.records) {
                std::string text = r.clean_text ? *r.clean_text : clean(r.text, copt).value;
                auto [label, conf] = model.predict_one(text);
                emit(r.tweet_id, label, conf);
            }
        } else if (kind == "multimodal") {
            MultimodalModel model = multimodal_model_from_checkpoint(ckpt);
            for (const auto& r : ds.records) {
                std::string text = r.clean_text ? *r.clean_text : clean(r.text, copt).value;
                std::optional<fs::path> img;
                if (r.image_path) img = ds.resolve_image(r);
                auto [label, conf] = model.predict_one(text, img, r.tweet_id);
                emit(r.tweet_id, label, conf);
            }
        } else {
            ImageClassifierModel model = image_model_from_checkpoint(ckpt);
            for (const auto& r : ds.records) {
                if (!r.image_path) {
                    ++skipped;
                    continue;
                }
                auto [label, conf] = model.predict_one(
                    preprocess_image(ds.resolve_image(r), model.scene_bb.norm));
                emit(r.tweet_id, label, conf);
            }
        }
        write_file_atomic(pr.out, out);
        std::cout << "predicted " << ds.records.size() - skipped << " records";
        if (skipped) std::cout << " (skipped " << skipped << " without images)";
        std::cout << " -> " << pr.out << "\n";
    });

    // ---- evaluate ----
    auto* ev = app.add_subcommand("evaluate",
                                  "score predictions against gold labels, or compare reports");
    struct {
        std::string pred, gold, run_id = "run", out;
        std::vector<std::string> compare;
    } e;
    ev->add_option("--pred", e.pred, "predictions jsonl from `predict`");
    ev->add_option("--gold", e.gold, "gold dataset jsonl");
    ev->add_option("--run-id", e.run_id, "run identifier for the report");
    ev->add_option("--out", e.out, "report.json path (or table prefix with --compare)");
    ev->add_option("--compare", e.compare, "report.json files to tabulate")->expected(-1);
    ev->callback([&] {
        if (!e.compare.empty()) {
            std::vector<EvaluationReport> reports;
            for (const auto& path : e.compare) {
                reports.push_back(report_from_json(nlohmann::json::parse(read_file(path))));
            }
            RunComparison cmp = compare_runs(reports);
            std::cout << cmp.text_table;
            if (!e.out.empty()) {
                write_file_atomic(e.out + ".txt", cmp.text_table);
                write_file_atomic(e.out + ".csv", cmp.csv);
            }
            return;
        }
        if (e.pred.empty() || e.gold.empty()) {
            throw ConfigError("evaluate requires --pred and --gold (or --compare)");
        }
        std::map<std::string, Label> preds;
        for (const auto& line : split_string(read_file(e.pred), '\n')) {
            if (trim(line).empty()) continue;
            auto j = nlohmann::json::parse(line);
            preds[j.at("tweet_id").get<std::string>()] =
                label_from_string(j.at("label").get<std::string>());
        }
        DatasetSplit gold = load_dataset(e.gold, DataFormat::jsonl, false);
        std::vector<Label> pv, gv;
        size_t skipped = 0;
        for (const auto& r : gold.records) {
            auto it = preds.find(r.tweet_id);
            if (!r.label || it == preds.end()) {
                ++skipped;
                continue;
            }
            pv.push_back(it->second);
            gv.push_back(*r.label);
        }
        if (pv.empty()) throw DataError("no overlapping labeled records to evaluate");
        EvaluationReport rep = make_report(e.run_id, pv, gv, skipped);
        if (!e.out.empty()) {
            write_file_atomic(e.out, report_to_json(rep).dump(2) + "\n");
        }
        std::cout << "run " << rep.run_id << " micro-F1 "
                  << report_to_json(rep)["micro_f1"].dump() << " (evaluated "
                  << rep.n_evaluated << ", skipped " << rep.n_skipped << ")\n";
    });

    // ---- run ----
    auto* run = app.add_subcommand("run", "execute a full experiment from a config file");
    struct {
        std::string config;
    } rn;
    run->add_option("--config", rn.config, "flat key=value or JSON config file")->required();
    run->callback([&] {
        RunConfig cfg = validate_config(rn.config);
        EvaluationReport rep = run_experiment(cfg);
        std::cout << "run " << rep.run_id << " dev micro-F1 "
                  << report_to_json(rep)["micro_f1"].dump() << "\n";
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& help) {
        return app.exit(help);
    } catch (const CLI::ParseError& pe) {
        app.exit(pe);
        return 2;
    } catch (const StageError& se) {
        std::cerr << "error: " << se.what() << "\n";
        return se.exit_code;
    } catch (const ConfigError& ce) {
        std::cerr << "error: " << ce.what() << "\n";
        return 2;
    } catch (const DataError& de) {
        std::cerr << "error: " << de.what() << "\n";
        return 3;
    } catch (const IoError& ie) {
        std::cerr << "error: " << ie.what() << "\n";
        return 3;
    } catch (const TrainError& te) {
        std::cerr << "error: " << te.what() << "\n";
        return 4;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }
    return exit_code;
}
