#pragma once

#include <cmath>
#include <map>
#include <vector>

#include "flood/nn/tensor.hpp"

namespace flood::nn {

class Adam {
public:
    explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    double learning_rate() const { return lr_; }

    void step(const std::vector<Tensor>& params) {
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, t_);
        const double bc2 = 1.0 - std::pow(beta2_, t_);
        for (const auto& p : params) {
            if (!p->requires_grad) continue;
            ensure_grad(p);
            auto& slot = slots_[p.get()];
            if (slot.m.size() != p->v.size()) {
                slot.m.assign(p->v.size(), 0.0);
                slot.v.assign(p->v.size(), 0.0);
            }
            for (size_t i = 0; i < p->v.size(); ++i) {
                const double g = p->g[i];
                slot.m[i] = beta1_ * slot.m[i] + (1.0 - beta1_) * g;
                slot.v[i] = beta2_ * slot.v[i] + (1.0 - beta2_) * g * g;
                const double mhat = slot.m[i] / bc1;
                const double vhat = slot.v[i] / bc2;
                p->v[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
            }
        }
    }

    static void zero_grad(const std::vector<Tensor>& params) {
        for (const auto& p : params) {
            if (p->requires_grad) p->g.assign(p->v.size(), 0.0);
        }
    }

private:
    struct Slot {
        std::vector<double> m;
        std::vector<double> v;
    };

    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
    std::map<TensorData*, Slot> slots_;
};

}  // namespace flood::nn
