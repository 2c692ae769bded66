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
#include "flood/log.hpp"
#include "flood/metrics.hpp"
#include "flood/nn/adam.hpp"
#include "flood/protocol.hpp"
#include "flood/text_clean.hpp"
#include "flood/trainer_common.hpp"

namespace flood {

namespace detail {

struct TextExample {
    std::vector<int> ids;
    int label = 0;
};

inline std::vector<size_t> shuffled(size_t n, Rng& rng) {
    std::vector<size_t> idx(n);
    for (size_t i = 0; i < n; ++i) idx[i] = i;
    for (size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.next_below(i)]);
    return idx;
}

inline std::string clean_or_cached(const TweetRecord& r, const CleanOptions& opt) {
    return r.clean_text ? *r.clean_text : clean(r.text, opt).value;
}

}  // namespace detail

struct TextTrainOptions {
    TrainingProtocol protocol;
    CleanOptions clean_options;
    double head_dropout = 0.1;
    Log* log = nullptr;
};

// Fine-tunes encoder plus a fresh 2-way head for every seed, scoring the dev
// split after each epoch; the returned checkpoint is the best (seed, epoch)
// pair under the lowest-seed / earliest-epoch tie-break.
inline TrainOutcome train_text_classifier(const DatasetSplit& train, const DatasetSplit& dev,
                                          EncoderHandle& handle, const TextTrainOptions& opts) {
    opts.protocol.validate();
    if (train.count(Label::relevant) == 0 || train.count(Label::not_relevant) == 0) {
        throw TrainError("training split must contain both classes");
    }
    if (dev.records.empty()) throw TrainError("dev split is empty");

    const size_t max_len =
        std::min(opts.protocol.max_sequence_length, handle.config.max_positions);
    auto encode_split = [&](const DatasetSplit& ds) {
        std::vector<detail::TextExample> out;
        for (const auto& r : ds.records) {
            if (!r.label) continue;
            detail::TextExample ex;
            ex.ids = handle.tokenizer.encode(detail::clean_or_cached(r, opts.clean_options),
                                             max_len)
                         .ids;
            ex.label = *r.label == Label::relevant ? 1 : 0;
            out.push_back(std::move(ex));
        }
        return out;
    };
    auto train_ex = encode_split(train);
    auto dev_ex = encode_split(dev);
    if (dev_ex.empty()) throw TrainError("dev split has no labeled records");

    auto pristine = snapshot_values(handle.encoder.params());
    const size_t hidden = handle.config.hidden;

    TrainOutcome outcome;
    for (int seed : opts.protocol.seeds) {
        restore_values(handle.encoder.params(), pristine);
        Rng seed_rng(Rng::derive(static_cast<uint64_t>(seed), 0x7E87));
        nn::Linear head(hidden, 2, seed_rng);

        nn::NamedParams train_params;
        head.collect("head", train_params);
        auto ep = handle.encoder.params();
        train_params.insert(train_params.end(), ep.begin(), ep.end());
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
                std::vector<nn::Tensor> pooled;
                std::vector<int> labels;
                for (size_t b = start; b < end; ++b) {
                    const auto& ex = train_ex[order[b]];
                    pooled.push_back(handle.encoder.encode_pooled(tape, ex.ids, drop_rng, true));
                    labels.push_back(ex.label);
                }
                nn::Tensor batch =
                    pooled.size() == 1 ? pooled[0] : tape.concat_rows(pooled);
                batch = tape.dropout(batch, opts.head_dropout, drop_rng, true);
                nn::Tensor loss = tape.cross_entropy(head.forward(tape, batch), labels);
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
                nn::Tensor pooled = handle.encoder.encode_pooled(tape, ex.ids, eval_rng, false);
                nn::Tensor logits = head.forward(tape, pooled);
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
                               std::to_string(epoch) + " dev micro-F1 " +
                               std::to_string(score));
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

    if (outcome.best_values.empty()) {
        throw TrainError("all seeds aborted with non-finite loss");
    }

    // standalone checkpoint tensors in the same layout as train_params
    {
        Rng r0(0);
        nn::Linear ck_head(hidden, 2, r0);
        auto ck_encoder = std::make_shared<nn::TransformerEncoder>(handle.config, r0);
        nn::NamedParams full;
        ck_head.collect("head", full);
        auto ep = ck_encoder->params();
        full.insert(full.end(), ep.begin(), ep.end());
        restore_values(full, outcome.best_values);
        outcome.checkpoint_params = full;
    }

    nlohmann::json cfg;
    cfg["model"] = "text";
    cfg["labels"] = label_mapping_json();
    cfg["seed"] = outcome.best_seed;
    cfg["epoch"] = outcome.best_epoch;
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
    cfg["max_sequence_length"] = max_len;
    cfg["head_dropout"] = opts.head_dropout;
    {
        std::vector<std::string> vocab_lines;
        for (const auto& line : split_string(handle.tokenizer.to_vocab_file(), '\n')) {
            if (!line.empty()) vocab_lines.push_back(line);
        }
        cfg["vocab"] = vocab_lines;
    }
    outcome.model_config = cfg;
    return outcome;
}

struct TextClassifierModel {
    Tokenizer tokenizer;
    nn::TransformerConfig config;
    nn::TransformerEncoder encoder;
    nn::Linear head;
    size_t max_sequence_length = 128;

    std::pair<Label, double> predict_one(const std::string& clean_text) const {
        nn::Tape tape(false);
        Rng rng(0);
        auto ids = tokenizer.encode(clean_text, max_sequence_length).ids;
        nn::Tensor pooled = encoder.encode_pooled(tape, ids, rng, false);
        nn::Tensor logits = head.forward(tape, pooled);
        const double m = std::max(logits->v[0], logits->v[1]);
        const double e0 = std::exp(logits->v[0] - m), e1 = std::exp(logits->v[1] - m);
        const double p1 = e1 / (e0 + e1);
        return p1 >= 0.5 ? std::make_pair(Label::relevant, p1)
                         : std::make_pair(Label::not_relevant, 1.0 - p1);
    }
};

inline nn::TransformerConfig encoder_config_from_json(const nlohmann::json& e) {
    nn::TransformerConfig cfg;
    cfg.vocab_size = e.at("vocab_size").get<size_t>();
    cfg.hidden = e.at("hidden").get<size_t>();
    cfg.n_layers = e.at("n_layers").get<size_t>();
    cfg.n_heads = e.at("n_heads").get<size_t>();
    cfg.ffn_dim = e.value("ffn_dim", size_t{0});
    cfg.max_positions = e.at("max_positions").get<size_t>();
    cfg.n_segments = e.value("n_segments", size_t{2});
    cfg.dropout = e.value("dropout", 0.1);
    return cfg;
}

inline Tokenizer tokenizer_from_checkpoint_config(const nlohmann::json& cfg) {
    std::string vocab;
    for (const auto& line : cfg.at("vocab")) {
        vocab += line.get<std::string>() + "\n";
    }
    return Tokenizer::from_vocab_file(vocab);
}

inline TextClassifierModel text_model_from_checkpoint(const Checkpoint& ckpt) {
    if (ckpt.config.at("model").get<std::string>() != "text") {
        throw IoError("checkpoint is not a text model: " + ckpt.dir.string());
    }
    TextClassifierModel model;
    model.config = encoder_config_from_json(ckpt.config.at("encoder"));
    model.tokenizer = tokenizer_from_checkpoint_config(ckpt.config);
    if (model.tokenizer.vocab_size() != model.config.vocab_size) {
        throw IoError("checkpoint vocab does not match encoder config");
    }
    model.max_sequence_length = ckpt.config.value("max_sequence_length", size_t{128});
    Rng r0(0);
    model.encoder = nn::TransformerEncoder(model.config, r0);
    model.head = nn::Linear(model.config.hidden, 2, r0);
    nn::NamedParams full;
    model.head.collect("head", full);
    auto ep = model.encoder.params();
    full.insert(full.end(), ep.begin(), ep.end());
    nn::load_params(full, ckpt.dir / "weights.bin");
    return model;
}

// Order-preserving batch prediction over already-cleaned texts.
inline std::vector<std::pair<Label, double>> predict_text(
    const std::vector<std::string>& clean_texts, const TextClassifierModel& model) {
    std::vector<std::pair<Label, double>> out;
    out.reserve(clean_texts.size());
    for (const auto& t : clean_texts) out.push_back(model.predict_one(t));
    return out;
}

}  // namespace flood
