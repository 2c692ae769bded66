#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "flood/nn/layers.hpp"
#include "flood/nn/tensor.hpp"

namespace flood::nn {

struct TransformerConfig {
    size_t vocab_size = 0;
    size_t hidden = 0;
    size_t n_layers = 2;
    size_t n_heads = 2;
    size_t ffn_dim = 0;  // 0 -> 4 * hidden
    size_t max_positions = 128;
    size_t n_segments = 2;
    double dropout = 0.1;
    double ln_eps = 1e-12;

    void validate() const {
        if (vocab_size == 0 || hidden == 0 || n_layers == 0 || n_heads == 0) {
            throw ConfigError("transformer: vocab/hidden/layers/heads must be positive");
        }
        if (hidden % n_heads != 0) {
            throw ConfigError("transformer: hidden must be divisible by n_heads");
        }
    }

    size_t ffn() const { return ffn_dim ? ffn_dim : 4 * hidden; }
};

struct EncoderLayer {
    Linear wq, wk, wv, wo;
    LayerNorm ln_attn;
    Linear ffn1, ffn2;
    LayerNorm ln_ffn;

    EncoderLayer() = default;
    EncoderLayer(const TransformerConfig& cfg, Rng& rng)
        : wq(cfg.hidden, cfg.hidden, rng),
          wk(cfg.hidden, cfg.hidden, rng),
          wv(cfg.hidden, cfg.hidden, rng),
          wo(cfg.hidden, cfg.hidden, rng),
          ln_attn(cfg.hidden),
          ffn1(cfg.hidden, cfg.ffn(), rng),
          ffn2(cfg.ffn(), cfg.hidden, rng),
          ln_ffn(cfg.hidden) {
        ln_attn.eps = cfg.ln_eps;
        ln_ffn.eps = cfg.ln_eps;
    }

    // Post-norm residual block over one sequence [T, hidden].
    Tensor forward(Tape& tape, const Tensor& x, const TransformerConfig& cfg, Rng& rng,
                   bool train) const {
        const size_t heads = cfg.n_heads;
        const size_t dk = cfg.hidden / heads;
        Tensor q = wq.forward(tape, x);
        Tensor k = wk.forward(tape, x);
        Tensor v = wv.forward(tape, x);
        std::vector<Tensor> per_head;
        per_head.reserve(heads);
        const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
        for (size_t h = 0; h < heads; ++h) {
            Tensor qh = tape.slice_cols(q, h * dk, (h + 1) * dk);
            Tensor kh = tape.slice_cols(k, h * dk, (h + 1) * dk);
            Tensor vh = tape.slice_cols(v, h * dk, (h + 1) * dk);
            Tensor scores = tape.scale(tape.matmul(qh, tape.transpose(kh)), scale);
            Tensor attn = tape.softmax_rows(scores);
            per_head.push_back(tape.matmul(attn, vh));
        }
        Tensor ctx = heads == 1 ? per_head[0] : tape.concat_cols(per_head);
        Tensor attn_out = tape.dropout(wo.forward(tape, ctx), cfg.dropout, rng, train);
        Tensor x1 = ln_attn.forward(tape, tape.add(x, attn_out));
        Tensor f = ffn2.forward(tape, tape.gelu(ffn1.forward(tape, x1)));
        f = tape.dropout(f, cfg.dropout, rng, train);
        return ln_ffn.forward(tape, tape.add(x1, f));
    }

    void collect(const std::string& prefix, NamedParams& out) const {
        wq.collect(prefix + ".wq", out);
        wk.collect(prefix + ".wk", out);
        wv.collect(prefix + ".wv", out);
        wo.collect(prefix + ".wo", out);
        ln_attn.collect(prefix + ".ln_attn", out);
        ffn1.collect(prefix + ".ffn1", out);
        ffn2.collect(prefix + ".ffn2", out);
        ln_ffn.collect(prefix + ".ln_ffn", out);
    }
};

// Bidirectional transformer encoder processing one sequence at a time. Batch
// handling (and therefore padding policy) belongs to the callers: they run
// per-record sequences at their exact length and concatenate pooled rows.
struct TransformerEncoder {
    TransformerConfig cfg;
    Embedding tok_emb, pos_emb, seg_emb;
    LayerNorm embed_ln;
    std::vector<EncoderLayer> layers;

    TransformerEncoder() = default;
    TransformerEncoder(const TransformerConfig& config, Rng& rng) : cfg(config) {
        cfg.validate();
        tok_emb = Embedding(cfg.vocab_size, cfg.hidden, rng);
        pos_emb = Embedding(cfg.max_positions, cfg.hidden, rng);
        seg_emb = Embedding(cfg.n_segments, cfg.hidden, rng);
        embed_ln = LayerNorm(cfg.hidden);
        embed_ln.eps = cfg.ln_eps;
        layers.reserve(cfg.n_layers);
        for (size_t l = 0; l < cfg.n_layers; ++l) layers.emplace_back(cfg, rng);
    }

    // Raw token-table rows for a sequence, before position/segment addition.
    Tensor token_content(Tape& tape, const std::vector<int>& ids) const {
        return tok_emb.forward(tape, ids);
    }

    // content[T, hidden] may come from the token table, from an image
    // projection, or a mix; positions are sequential from zero.
    Tensor embed_content(Tape& tape, const Tensor& content, const std::vector<int>& seg_ids,
                         Rng& rng, bool train) const {
        const size_t t_len = content->shape[0];
        if (t_len > cfg.max_positions) {
            throw TrainError("sequence length " + std::to_string(t_len) +
                             " exceeds max positions " + std::to_string(cfg.max_positions));
        }
        if (seg_ids.size() != t_len) throw TrainError("segment id count mismatch");
        std::vector<int> pos_ids(t_len);
        for (size_t i = 0; i < t_len; ++i) pos_ids[i] = static_cast<int>(i);
        Tensor sum = tape.add(tape.add(content, pos_emb.forward(tape, pos_ids)),
                              seg_emb.forward(tape, seg_ids));
        return tape.dropout(embed_ln.forward(tape, sum), cfg.dropout, rng, train);
    }

    Tensor encode(Tape& tape, Tensor x, Rng& rng, bool train) const {
        for (const auto& layer : layers) x = layer.forward(tape, x, cfg, rng, train);
        return x;
    }

    // Pooled begin-token state of one tokenized sequence: [1, hidden].
    Tensor encode_pooled(Tape& tape, const std::vector<int>& ids, Rng& rng, bool train) const {
        std::vector<int> seg(ids.size(), 0);
        Tensor emb = embed_content(tape, token_content(tape, ids), seg, rng, train);
        Tensor enc = encode(tape, emb, rng, train);
        return tape.slice_rows(enc, 0, 1);
    }

    NamedParams params() const {
        NamedParams out;
        tok_emb.collect("encoder.tok_emb", out);
        pos_emb.collect("encoder.pos_emb", out);
        seg_emb.collect("encoder.seg_emb", out);
        embed_ln.collect("encoder.embed_ln", out);
        for (size_t l = 0; l < layers.size(); ++l) {
            layers[l].collect("encoder.layer" + std::to_string(l), out);
        }
        return out;
    }
};

}  // namespace flood::nn
