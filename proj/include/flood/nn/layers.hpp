#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "flood/nn/tensor.hpp"
#include "flood/rng.hpp"

namespace flood::nn {

using NamedParams = std::vector<std::pair<std::string, Tensor>>;

inline void init_normal(const Tensor& t, Rng& rng, double stddev) {
    for (auto& x : t->v) x = rng.next_gaussian() * stddev;
}

inline void init_xavier(const Tensor& t, Rng& rng, size_t fan_in, size_t fan_out) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (auto& x : t->v) x = (2.0 * rng.next_double() - 1.0) * limit;
}

struct Linear {
    Tensor w;  // [in, out]
    Tensor b;  // [out]

    Linear() = default;
    Linear(size_t in, size_t out, Rng& rng) {
        w = make_tensor({in, out}, true);
        b = make_tensor({out}, true);
        init_xavier(w, rng, in, out);
    }

    Tensor forward(Tape& tape, const Tensor& x) const {
        return tape.add_bias(tape.matmul(x, w), b);
    }

    void collect(const std::string& prefix, NamedParams& out) const {
        out.emplace_back(prefix + ".w", w);
        out.emplace_back(prefix + ".b", b);
    }
};

struct LayerNorm {
    Tensor gain;
    Tensor bias;
    double eps = 1e-12;

    LayerNorm() = default;
    explicit LayerNorm(size_t width) {
        gain = make_tensor({width}, true);
        bias = make_tensor({width}, true);
        for (auto& x : gain->v) x = 1.0;
    }

    Tensor forward(Tape& tape, const Tensor& x) const {
        return tape.layer_norm_rows(x, gain, bias, eps);
    }

    void collect(const std::string& prefix, NamedParams& out) const {
        out.emplace_back(prefix + ".gain", gain);
        out.emplace_back(prefix + ".bias", bias);
    }
};

struct Embedding {
    Tensor table;  // [vocab, dim]

    Embedding() = default;
    Embedding(size_t vocab, size_t dim, Rng& rng, double stddev = 0.02) {
        table = make_tensor({vocab, dim}, true);
        init_normal(table, rng, stddev);
    }

    Tensor forward(Tape& tape, const std::vector<int>& ids) const {
        return tape.embedding(table, ids);
    }

    void collect(const std::string& prefix, NamedParams& out) const {
        out.emplace_back(prefix + ".table", table);
    }
};

inline std::vector<Tensor> values_of(const NamedParams& named) {
    std::vector<Tensor> out;
    out.reserve(named.size());
    for (const auto& [name, t] : named) out.push_back(t);
    return out;
}

inline void set_requires_grad(const NamedParams& named, bool value) {
    for (const auto& [name, t] : named) {
        t->requires_grad = value;
        if (value) ensure_grad(t);
    }
}

}  // namespace flood::nn
