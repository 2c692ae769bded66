#pragma once

#include <vector>

#include "flood/nn/tensor.hpp"

namespace flood::nn {

// Convolutional ops over NCHW tensors. Direct loops: desk-scale nets only.

inline void check4d(const Tensor& t, const char* what) {
    if (t->shape.size() != 4) throw TrainError(std::string(what) + ": expected rank 4");
}

// x: [N, Cin, H, W], w: [Cout, Cin, kh, kw], b: [Cout]. Same-style padding.
inline Tensor conv2d(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& b,
                     size_t stride = 1, size_t pad = 1) {
    check4d(x, "conv2d input");
    check4d(w, "conv2d weights");
    const size_t N = x->shape[0], Cin = x->shape[1], H = x->shape[2], W = x->shape[3];
    const size_t Cout = w->shape[0], kh = w->shape[2], kw = w->shape[3];
    if (w->shape[1] != Cin) throw TrainError("conv2d: channel mismatch");
    if (b->numel() != Cout) throw TrainError("conv2d: bias size mismatch");
    const size_t Ho = (H + 2 * pad - kh) / stride + 1;
    const size_t Wo = (W + 2 * pad - kw) / stride + 1;
    Tensor out = tape.make_op_output({N, Cout, Ho, Wo}, {x, w, b});

    auto x_at = [&](size_t n, size_t c, long i, long j) -> double {
        if (i < 0 || j < 0 || i >= static_cast<long>(H) || j >= static_cast<long>(W)) return 0.0;
        return x->v[((n * Cin + c) * H + i) * W + j];
    };
    for (size_t n = 0; n < N; ++n) {
        for (size_t co = 0; co < Cout; ++co) {
            for (size_t oi = 0; oi < Ho; ++oi) {
                for (size_t oj = 0; oj < Wo; ++oj) {
                    double acc = b->v[co];
                    for (size_t ci = 0; ci < Cin; ++ci) {
                        for (size_t u = 0; u < kh; ++u) {
                            for (size_t t = 0; t < kw; ++t) {
                                const long i = static_cast<long>(oi * stride + u) -
                                               static_cast<long>(pad);
                                const long j = static_cast<long>(oj * stride + t) -
                                               static_cast<long>(pad);
                                acc += x_at(n, ci, i, j) * w->v[((co * Cin + ci) * kh + u) * kw + t];
                            }
                        }
                    }
                    out->v[((n * Cout + co) * Ho + oi) * Wo + oj] = acc;
                }
            }
        }
    }
    tape.record_op(out, [x, w, b, out, N, Cin, Cout, H, W, Ho, Wo, kh, kw, stride, pad]() {
        const bool gx = x->requires_grad, gw = w->requires_grad, gb = b->requires_grad;
        if (gx) ensure_grad(x);
        if (gw) ensure_grad(w);
        if (gb) ensure_grad(b);
        for (size_t n = 0; n < N; ++n) {
            for (size_t co = 0; co < Cout; ++co) {
                for (size_t oi = 0; oi < Ho; ++oi) {
                    for (size_t oj = 0; oj < Wo; ++oj) {
                        const double go = out->g[((n * Cout + co) * Ho + oi) * Wo + oj];
                        if (go == 0.0) continue;
                        if (gb) b->g[co] += go;
                        for (size_t ci = 0; ci < Cin; ++ci) {
                            for (size_t u = 0; u < kh; ++u) {
                                for (size_t t = 0; t < kw; ++t) {
                                    const long i = static_cast<long>(oi * stride + u) -
                                                   static_cast<long>(pad);
                                    const long j = static_cast<long>(oj * stride + t) -
                                                   static_cast<long>(pad);
                                    if (i < 0 || j < 0 || i >= static_cast<long>(H) ||
                                        j >= static_cast<long>(W))
                                        continue;
                                    const size_t xi = ((n * Cin + ci) * H + i) * W + j;
                                    const size_t wi = ((co * Cin + ci) * kh + u) * kw + t;
                                    if (gw) w->g[wi] += go * x->v[xi];
                                    if (gx) x->g[xi] += go * w->v[wi];
                                }
                            }
                        }
                    }
                }
            }
        }
    });
    return out;
}

inline Tensor maxpool2d(Tape& tape, const Tensor& x, size_t k = 2) {
    check4d(x, "maxpool input");
    const size_t N = x->shape[0], C = x->shape[1], H = x->shape[2], W = x->shape[3];
    const size_t Ho = H / k, Wo = W / k;
    if (Ho == 0 || Wo == 0) throw TrainError("maxpool: input smaller than window");
    Tensor out = tape.make_op_output({N, C, Ho, Wo}, {x});
    auto argmax = std::make_shared<std::vector<size_t>>(out->numel());
    for (size_t n = 0; n < N; ++n) {
        for (size_t c = 0; c < C; ++c) {
            for (size_t oi = 0; oi < Ho; ++oi) {
                for (size_t oj = 0; oj < Wo; ++oj) {
                    size_t best = ((n * C + c) * H + oi * k) * W + oj * k;
                    double bv = x->v[best];
                    for (size_t u = 0; u < k; ++u) {
                        for (size_t t = 0; t < k; ++t) {
                            const size_t idx = ((n * C + c) * H + oi * k + u) * W + oj * k + t;
                            if (x->v[idx] > bv) {
                                bv = x->v[idx];
                                best = idx;
                            }
                        }
                    }
                    const size_t oidx = ((n * C + c) * Ho + oi) * Wo + oj;
                    out->v[oidx] = bv;
                    (*argmax)[oidx] = best;
                }
            }
        }
    }
    tape.record_op(out, [x, out, argmax]() {
        if (!x->requires_grad) return;
        ensure_grad(x);
        for (size_t i = 0; i < out->g.size(); ++i) x->g[(*argmax)[i]] += out->g[i];
    });
    return out;
}

inline Tensor global_avg_pool(Tape& tape, const Tensor& x) {
    check4d(x, "global_avg_pool input");
    const size_t N = x->shape[0], C = x->shape[1], H = x->shape[2], W = x->shape[3];
    const size_t hw = H * W;
    Tensor out = tape.make_op_output({N, C}, {x});
    for (size_t n = 0; n < N; ++n) {
        for (size_t c = 0; c < C; ++c) {
            double s = 0.0;
            for (size_t i = 0; i < hw; ++i) s += x->v[(n * C + c) * hw + i];
            out->v[n * C + c] = s / static_cast<double>(hw);
        }
    }
    tape.record_op(out, [x, out, N, C, hw]() {
        if (!x->requires_grad) return;
        ensure_grad(x);
        for (size_t n = 0; n < N; ++n) {
            for (size_t c = 0; c < C; ++c) {
                const double go = out->g[n * C + c] / static_cast<double>(hw);
                for (size_t i = 0; i < hw; ++i) x->g[(n * C + c) * hw + i] += go;
            }
        }
    });
    return out;
}

inline Tensor flatten(Tape& tape, const Tensor& x) {
    check4d(x, "flatten input");
    return tape.reshape(x, {x->shape[0], x->shape[1] * x->shape[2] * x->shape[3]});
}

}  // namespace flood::nn
