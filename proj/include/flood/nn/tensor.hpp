#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "flood/common.hpp"
#include "flood/rng.hpp"

namespace flood::nn {

// Reverse-mode autodiff over dense row-major tensors. Double precision keeps
// finite-difference gradient checks tight; file formats downcast to float32.
struct TensorData {
    std::vector<size_t> shape;
    std::vector<double> v;
    std::vector<double> g;
    bool requires_grad = false;

    size_t numel() const {
        size_t n = 1;
        for (size_t d : shape) n *= d;
        return n;
    }
    size_t rows() const { return shape.empty() ? 0 : shape[0]; }
    size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }
};

using Tensor = std::shared_ptr<TensorData>;

inline Tensor make_tensor(std::vector<size_t> shape, bool requires_grad = false) {
    auto t = std::make_shared<TensorData>();
    t->shape = std::move(shape);
    t->v.assign(t->numel(), 0.0);
    t->requires_grad = requires_grad;
    if (requires_grad) t->g.assign(t->numel(), 0.0);
    return t;
}

inline Tensor tensor_from(std::vector<size_t> shape, std::vector<double> values) {
    auto t = make_tensor(std::move(shape));
    if (values.size() != t->numel()) throw TrainError("tensor_from: size mismatch");
    t->v = std::move(values);
    return t;
}

inline void ensure_grad(const Tensor& t) {
    if (t->g.size() != t->v.size()) t->g.assign(t->v.size(), 0.0);
}

// Records backward closures for one forward pass. A tape constructed with
// recording=false runs the same math without building a graph (eval mode).
class Tape {
public:
    explicit Tape(bool recording = true) : recording_(recording) {}

    bool recording() const { return recording_; }

    void backward(const Tensor& loss) {
        if (!recording_) throw TrainError("backward on a non-recording tape");
        if (loss->numel() != 1) throw TrainError("backward expects a scalar loss");
        ensure_grad(loss);
        loss->g[0] = 1.0;
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
        nodes_.clear();
    }

    // ---- op builders ----

    Tensor matmul(const Tensor& a, const Tensor& b) {
        check2d(a, "matmul lhs");
        check2d(b, "matmul rhs");
        const size_t m = a->shape[0], k = a->shape[1], k2 = b->shape[0], n = b->shape[1];
        if (k != k2) throw TrainError("matmul: inner dims differ");
        Tensor out = fresh({m, n}, a, b);
        for (size_t i = 0; i < m; ++i) {
            for (size_t p = 0; p < k; ++p) {
                const double av = a->v[i * k + p];
                if (av == 0.0) continue;
                const double* brow = &b->v[p * n];
                double* orow = &out->v[i * n];
                for (size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
            }
        }
        record(out, [a, b, out, m, k, n]() {
            if (a->requires_grad) {
                ensure_grad(a);
                for (size_t i = 0; i < m; ++i) {
                    for (size_t j = 0; j < n; ++j) {
                        const double go = out->g[i * n + j];
                        if (go == 0.0) continue;
                        for (size_t p = 0; p < k; ++p) {
                            a->g[i * k + p] += go * b->v[p * n + j];
                        }
                    }
                }
            }
            if (b->requires_grad) {
                ensure_grad(b);
                for (size_t i = 0; i < m; ++i) {
                    for (size_t p = 0; p < k; ++p) {
                        const double av = a->v[i * k + p];
                        if (av == 0.0) continue;
                        for (size_t j = 0; j < n; ++j) {
                            b->g[p * n + j] += av * out->g[i * n + j];
                        }
                    }
                }
            }
        });
        return out;
    }

    Tensor add(const Tensor& a, const Tensor& b) {
        if (a->shape != b->shape) throw TrainError("add: shape mismatch");
        Tensor out = fresh(a->shape, a, b);
        for (size_t i = 0; i < out->v.size(); ++i) out->v[i] = a->v[i] + b->v[i];
        record(out, [a, b, out]() {
            if (a->requires_grad) {
                ensure_grad(a);
                for (size_t i = 0; i < out->g.size(); ++i) a->g[i] += out->g[i];
            }
            if (b->requires_grad) {
                ensure_grad(b);
                for (size_t i = 0; i < out->g.size(); ++i) b->g[i] += out->g[i];
            }
        });
        return out;
    }

    // y = x + row-broadcast bias
    Tensor add_bias(const Tensor& x, const Tensor& bias) {
        check2d(x, "add_bias input");
        if (bias->numel() != x->cols()) throw TrainError("add_bias: width mismatch");
        const size_t m = x->shape[0], n = x->shape[1];
        Tensor out = fresh({m, n}, x, bias);
        for (size_t i = 0; i < m; ++i) {
            for (size_t j = 0; j < n; ++j) out->v[i * n + j] = x->v[i * n + j] + bias->v[j];
        }
        record(out, [x, bias, out, m, n]() {
            if (x->requires_grad) {
                ensure_grad(x);
                for (size_t i = 0; i < m * n; ++i) x->g[i] += out->g[i];
            }
            if (bias->requires_grad) {
                ensure_grad(bias);
                for (size_t i = 0; i < m; ++i) {
                    for (size_t j = 0; j < n; ++j) bias->g[j] += out->g[i * n + j];
                }
            }
        });
        return out;
    }

    Tensor scale(const Tensor& x, double c) {
        Tensor out = fresh(x->shape, x);
        for (size_t i = 0; i < x->v.size(); ++i) out->v[i] = c * x->v[i];
        record(out, [x, out, c]() {
            if (!x->requires_grad) return;
            ensure_grad(x);
            for (size_t i = 0; i < out->g.size(); ++i) x->g[i] += c * out->g[i];
        });
        return out;
    }

    Tensor mul(const Tensor& a, const Tensor& b) {
        if (a->shape != b->shape) throw TrainError("mul: shape mismatch");
        Tensor out = fresh(a->shape, a, b);
        for (size_t i = 0; i < out->v.size(); ++i) out->v[i] = a->v[i] * b->v[i];
        record(out, [a, b, out]() {
            if (a->requires_grad) {
                ensure_grad(a);
                for (size_t i = 0; i < out->g.size(); ++i) a->g[i] += out->g[i] * b->v[i];
            }
            if (b->requires_grad) {
                ensure_grad(b);
                for (size_t i = 0; i < out->g.size(); ++i) b->g[i] += out->g[i] * a->v[i];
            }
        });
        return out;
    }

    Tensor relu(const Tensor& x) {
        Tensor out = fresh(x->shape, x);
        for (size_t i = 0; i < x->v.size(); ++i) out->v[i] = x->v[i] > 0.0 ? x->v[i] : 0.0;
        record(out, [x, out]() {
            if (!x->requires_grad) return;
            ensure_grad(x);
            for (size_t i = 0; i < out->g.size(); ++i) {
                if (x->v[i] > 0.0) x->g[i] += out->g[i];
            }
        });
        return out;
    }

    Tensor gelu(const Tensor& x) {
        constexpr double kC = 0.7978845608028654;  // sqrt(2/pi)
        constexpr double kA = 0.044715;
        Tensor out = fresh(x->shape, x);
        for (size_t i = 0; i < x->v.size(); ++i) {
            const double xv = x->v[i];
            const double u = kC * (xv + kA * xv * xv * xv);
            out->v[i] = 0.5 * xv * (1.0 + std::tanh(u));
        }
        record(out, [x, out]() {
            if (!x->requires_grad) return;
            ensure_grad(x);
            for (size_t i = 0; i < out->g.size(); ++i) {
                const double xv = x->v[i];
                const double u = kC * (xv + kA * xv * xv * xv);
                const double t = std::tanh(u);
                const double du = kC * (1.0 + 3.0 * kA * xv * xv);
                const double grad = 0.5 * (1.0 + t) + 0.5 * xv * (1.0 - t * t) * du;
                x->g[i] += out->g[i] * grad;
            }
        });
        return out;
    }

    Tensor softmax_rows(const Tensor& x) {
        check2d(x, "softmax input");
        const size_t m = x->shape[0], n = x->shape[1];
        Tensor out = fresh({m, n}, x);
        for (size_t i = 0; i < m; ++i) {
            double mx = x->v[i * n];
            for (size_t j = 1; j < n; ++j) mx = std::max(mx, x->v[i * n + j]);
            double sum = 0.0;
            for (size_t j = 0; j < n; ++j) {
                out->v[i * n + j] = std::exp(x->v[i * n + j] - mx);
                sum += out->v[i * n + j];
            }
            for (size_t j = 0; j < n; ++j) out->v[i * n + j] /= sum;
        }
        record(out, [x, out, m, n]() {
            if (!x->requires_grad) return;
            ensure_grad(x);
            for (size_t i = 0; i < m; ++i) {
                double dot = 0.0;
                for (size_t j = 0; j < n; ++j) dot += out->g[i * n + j] * out->v[i * n + j];
                for (size_t j = 0; j < n; ++j) {
                    x->g[i * n + j] += out->v[i * n + j] * (out->g[i * n + j] - dot);
                }
            }
        });
        return out;
    }

    // Mean negative log-likelihood over rows of logits.
    Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
        check2d(logits, "cross_entropy logits");
        const size_t m = logits->shape[0], n = logits->shape[1];
        if (labels.size() != m) throw TrainError("cross_entropy: label count mismatch");
        auto probs = std::make_shared<std::vector<double>>(m * n);
        double loss = 0.0;
        for (size_t i = 0; i < m; ++i) {
            double mx = logits->v[i * n];
            for (size_t j = 1; j < n; ++j) mx = std::max(mx, logits->v[i * n + j]);
            double sum = 0.0;
            for (size_t j = 0; j < n; ++j) sum += std::exp(logits->v[i * n + j] - mx);
            const double logsum = std::log(sum) + mx;
            const int y = labels[i];
            if (y < 0 || static_cast<size_t>(y) >= n) throw TrainError("cross_entropy: bad label");
            loss += logsum - logits->v[i * n + y];
            for (size_t j = 0; j < n; ++j) {
                (*probs)[i * n + j] = std::exp(logits->v[i * n + j] - logsum);
            }
        }
        Tensor out = fresh({1}, logits);
        out->v[0] = loss / static_cast<double>(m);
        record(out, [logits, out, probs, labels, m, n]() {
            if (!logits->requires_grad) return;
            ensure_grad(logits);
            const double go = out->g[0] / static_cast<double>(m);
            for (size_t i = 0; i < m; ++i) {
                for (size_t j = 0; j < n; ++j) {
                    double delta = (*probs)[i * n + j];
                    if (static_cast<size_t>(labels[i]) == j) delta -= 1.0;
                    logits->g[i * n + j] += go * delta;
                }
            }
        });
        return out;
    }

    Tensor layer_norm_rows(const Tensor& x, const Tensor& gain, const Tensor& bias,
                           double eps = 1e-12) {
        check2d(x, "layer_norm input");
        const size_t m = x->shape[0], n = x->shape[1];
        if (gain->numel() != n || bias->numel() != n) {
            throw TrainError("layer_norm: gain/bias width mismatch");
        }
        Tensor out = fresh({m, n}, x, gain, bias);
        auto xhat = std::make_shared<std::vector<double>>(m * n);
        auto inv_std = std::make_shared<std::vector<double>>(m);
        for (size_t i = 0; i < m; ++i) {
            double mean = 0.0;
            for (size_t j = 0; j < n; ++j) mean += x->v[i * n + j];
            mean /= static_cast<double>(n);
            double var = 0.0;
            for (size_t j = 0; j < n; ++j) {
                const double d = x->v[i * n + j] - mean;
                var += d * d;
            }
            var /= static_cast<double>(n);
            const double istd = 1.0 / std::sqrt(var + eps);
            (*inv_std)[i] = istd;
            for (size_t j = 0; j < n; ++j) {
                const double xh = (x->v[i * n + j] - mean) * istd;
                (*xhat)[i * n + j] = xh;
                out->v[i * n + j] = gain->v[j] * xh + bias->v[j];
            }
        }
        record(out, [x, gain, bias, out, xhat, inv_std, m, n]() {
            if (gain->requires_grad) {
                ensure_grad(gain);
                for (size_t i = 0; i < m; ++i) {
                    for (size_t j = 0; j < n; ++j) {
                        gain->g[j] += out->g[i * n + j] * (*xhat)[i * n + j];
                    }
                }
            }
            if (bias->requires_grad) {
                ensure_grad(bias);
                for (size_t i = 0; i < m; ++i) {
                    for (size_t j = 0; j < n; ++j) bias->g[j] += out->g[i * n + j];
                }
            }
            if (x->requires_grad) {
                ensure_grad(x);
                for (size_t i = 0; i < m; ++i) {
                    double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
                    for (size_t j = 0; j < n; ++j) {
                        const double dxh = out->g[i * n + j] * gain->v[j];
                        mean_dxhat += dxh;
                        mean_dxhat_xhat += dxh * (*xhat)[i * n + j];
                    }
                    mean_dxhat /= static_cast<double>(n);
                    mean_dxhat_xhat /= static_cast<double>(n);
                    for (size_t j = 0; j < n; ++j) {
                        const double dxh = out->g[i * n + j] * gain->v[j];
                        x->g[i * n + j] += (*inv_std)[i] *
                                           (dxh - mean_dxhat - (*xhat)[i * n + j] * mean_dxhat_xhat);
                    }
                }
            }
        });
        return out;
    }

    // Gather rows of an embedding table.
    Tensor embedding(const Tensor& table, const std::vector<int>& ids) {
        check2d(table, "embedding table");
        const size_t v = table->shape[0], d = table->shape[1];
        Tensor out = fresh({ids.size(), d}, table);
        for (size_t i = 0; i < ids.size(); ++i) {
            if (ids[i] < 0 || static_cast<size_t>(ids[i]) >= v) {
                throw TrainError("embedding: id out of range");
            }
            for (size_t j = 0; j < d; ++j) out->v[i * d + j] = table->v[ids[i] * d + j];
        }
        record(out, [table, out, ids, d]() {
            if (!table->requires_grad) return;
            ensure_grad(table);
            for (size_t i = 0; i < ids.size(); ++i) {
                for (size_t j = 0; j < d; ++j) {
                    table->g[ids[i] * d + j] += out->g[i * d + j];
                }
            }
        });
        return out;
    }

    Tensor slice_cols(const Tensor& x, size_t c0, size_t c1) {
        check2d(x, "slice_cols input");
        const size_t m = x->shape[0], n = x->shape[1];
        if (c0 >= c1 || c1 > n) throw TrainError("slice_cols: bad range");
        const size_t w = c1 - c0;
        Tensor out = fresh({m, w}, x);
        for (size_t i = 0; i < m; ++i) {
            for (size_t j = 0; j < w; ++j) out->v[i * w + j] = x->v[i * n + c0 + j];
        }
        record(out, [x, out, c0, m, n, w]() {
            if (!x->requires_grad) return;
            ensure_grad(x);
            for (size_t i = 0; i < m; ++i) {
                for (size_t j = 0; j < w; ++j) x->g[i * n + c0 + j] += out->g[i * w + j];
            }
        });
        return out;
    }

    Tensor concat_cols(const std::vector<Tensor>& parts) {
        if (parts.empty()) throw TrainError("concat_cols: empty input");
        const size_t m = parts[0]->shape[0];
        size_t total = 0;
        for (const auto& p : parts) {
            check2d(p, "concat_cols part");
            if (p->shape[0] != m) throw TrainError("concat_cols: row mismatch");
            total += p->shape[1];
        }
        Tensor out = fresh_multi({m, total}, parts);
        size_t off = 0;
        for (const auto& p : parts) {
            const size_t w = p->shape[1];
            for (size_t i = 0; i < m; ++i) {
                for (size_t j = 0; j < w; ++j) out->v[i * total + off + j] = p->v[i * w + j];
            }
            off += w;
        }
        record(out, [parts, out, m, total]() {
            size_t off2 = 0;
            for (const auto& p : parts) {
                const size_t w = p->shape[1];
                if (p->requires_grad) {
                    ensure_grad(p);
                    for (size_t i = 0; i < m; ++i) {
                        for (size_t j = 0; j < w; ++j) {
                            p->g[i * w + j] += out->g[i * total + off2 + j];
                        }
                    }
                }
                off2 += w;
            }
        });
        return out;
    }

    Tensor slice_rows(const Tensor& x, size_t r0, size_t r1) {
        check2d(x, "slice_rows input");
        const size_t m = x->shape[0], n = x->shape[1];
        if (r0 >= r1 || r1 > m) throw TrainError("slice_rows: bad range");
        const size_t h = r1 - r0;
        Tensor out = fresh({h, n}, x);
        for (size_t i = 0; i < h; ++i) {
            for (size_t j = 0; j < n; ++j) out->v[i * n + j] = x->v[(r0 + i) * n + j];
        }
        record(out, [x, out, r0, h, n]() {
            if (!x->requires_grad) return;
            ensure_grad(x);
            for (size_t i = 0; i < h; ++i) {
                for (size_t j = 0; j < n; ++j) x->g[(r0 + i) * n + j] += out->g[i * n + j];
            }
        });
        return out;
    }

    Tensor concat_rows(const std::vector<Tensor>& parts) {
        if (parts.empty()) throw TrainError("concat_rows: empty input");
        const size_t n = parts[0]->cols();
        size_t total = 0;
        for (const auto& p : parts) {
            check2d(p, "concat_rows part");
            if (p->shape[1] != n) throw TrainError("concat_rows: column mismatch");
            total += p->shape[0];
        }
        Tensor out = fresh_multi({total, n}, parts);
        size_t off = 0;
        for (const auto& p : parts) {
            for (size_t i = 0; i < p->shape[0]; ++i) {
                for (size_t j = 0; j < n; ++j) out->v[(off + i) * n + j] = p->v[i * n + j];
            }
            off += p->shape[0];
        }
        record(out, [parts, out, n]() {
            size_t off2 = 0;
            for (const auto& p : parts) {
                if (p->requires_grad) {
                    ensure_grad(p);
                    for (size_t i = 0; i < p->shape[0]; ++i) {
                        for (size_t j = 0; j < n; ++j) {
                            p->g[i * n + j] += out->g[(off2 + i) * n + j];
                        }
                    }
                }
                off2 += p->shape[0];
            }
        });
        return out;
    }

    Tensor transpose(const Tensor& x) {
        check2d(x, "transpose input");
        const size_t m = x->shape[0], n = x->shape[1];
        Tensor out = fresh({n, m}, x);
        for (size_t i = 0; i < m; ++i) {
            for (size_t j = 0; j < n; ++j) out->v[j * m + i] = x->v[i * n + j];
        }
        record(out, [x, out, m, n]() {
            if (!x->requires_grad) return;
            ensure_grad(x);
            for (size_t i = 0; i < m; ++i) {
                for (size_t j = 0; j < n; ++j) x->g[i * n + j] += out->g[j * m + i];
            }
        });
        return out;
    }

    Tensor reshape(const Tensor& x, std::vector<size_t> shape) {
        size_t n = 1;
        for (size_t d : shape) n *= d;
        if (n != x->numel()) throw TrainError("reshape: element count mismatch");
        Tensor out = fresh(std::move(shape), x);
        out->v = x->v;
        record(out, [x, out]() {
            if (!x->requires_grad) return;
            ensure_grad(x);
            for (size_t i = 0; i < out->g.size(); ++i) x->g[i] += out->g[i];
        });
        return out;
    }

    // Inverted dropout: identity when train is false.
    Tensor dropout(const Tensor& x, double p, Rng& rng, bool train) {
        if (!train || p <= 0.0) return x;
        auto mask = std::make_shared<std::vector<double>>(x->numel());
        const double keep = 1.0 - p;
        for (auto& m : *mask) m = rng.next_double() < p ? 0.0 : 1.0 / keep;
        Tensor out = fresh(x->shape, x);
        for (size_t i = 0; i < x->v.size(); ++i) out->v[i] = x->v[i] * (*mask)[i];
        record(out, [x, out, mask]() {
            if (!x->requires_grad) return;
            ensure_grad(x);
            for (size_t i = 0; i < out->g.size(); ++i) x->g[i] += out->g[i] * (*mask)[i];
        });
        return out;
    }

    Tensor mean_all(const Tensor& x) {
        Tensor out = fresh({1}, x);
        double s = 0.0;
        for (double xv : x->v) s += xv;
        const size_t n = x->numel();
        out->v[0] = s / static_cast<double>(n);
        record(out, [x, out, n]() {
            if (!x->requires_grad) return;
            ensure_grad(x);
            const double go = out->g[0] / static_cast<double>(n);
            for (size_t i = 0; i < n; ++i) x->g[i] += go;
        });
        return out;
    }

    // Extension points for ops defined outside this header (convolutions).
    Tensor make_op_output(std::vector<size_t> shape, const std::vector<Tensor>& inputs) {
        return fresh_multi(std::move(shape), inputs);
    }
    void record_op(const Tensor& out, std::function<void()> fn) {
        record(out, std::move(fn));
    }

protected:
    static void check2d(const Tensor& t, const char* what) {
        if (t->shape.size() != 2) throw TrainError(std::string(what) + ": expected rank 2");
    }

    Tensor fresh(std::vector<size_t> shape, const Tensor& a, const Tensor& b = nullptr,
                 const Tensor& c = nullptr) {
        bool rg = recording_ && (a->requires_grad || (b && b->requires_grad) ||
                                 (c && c->requires_grad));
        return make_tensor(std::move(shape), rg);
    }

    Tensor fresh_multi(std::vector<size_t> shape, const std::vector<Tensor>& parts) {
        bool rg = false;
        for (const auto& p : parts) rg |= p->requires_grad;
        return make_tensor(std::move(shape), recording_ && rg);
    }

    // A node with a no-grad output can never receive upstream gradient, so
    // recording it would only read unallocated buffers.
    void record(const Tensor& out, std::function<void()> fn) {
        if (recording_ && out->requires_grad) nodes_.push_back(std::move(fn));
    }

private:
    bool recording_;
    std::vector<std::function<void()>> nodes_;
};

}  // namespace flood::nn
