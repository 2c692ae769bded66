#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "flood/common.hpp"
#include "flood/features.hpp"
#include "flood/log.hpp"
#include "flood/rng.hpp"

namespace flood {

// Synthetic Minority Oversampling: each synthetic point is an interpolation
//   x_new = x_i + lambda * (x_nn - x_i),  lambda ~ U[0,1]
// between a minority point and one of its k nearest minority neighbours.

struct SmoteConfig {
    size_t k_neighbors = 5;
    size_t inflation_factor = 3;  // minority count multiplier, originals included
    uint64_t rng_seed = 0;
    // distance: euclidean (the only supported metric)

    void validate() const {
        if (k_neighbors < 1) throw ConfigError("smote: k_neighbors must be >= 1");
        if (inflation_factor < 1) throw ConfigError("smote: inflation_factor must be >= 1");
    }
};

namespace detail {

inline double sq_distance(const FeatureVector& a, const FeatureVector& b) {
    double acc = 0.0;
    for (size_t j = 0; j < a.v.size(); ++j) {
        double diff = static_cast<double>(a.v[j]) - static_cast<double>(b.v[j]);
        acc += diff * diff;
    }
    return acc;
}

inline std::pair<Label, Label> minority_majority(const LabeledFeatureSet& set) {
    size_t n_rel = set.count(Label::relevant);
    size_t n_irr = set.count(Label::not_relevant);
    if (n_rel == 0 || n_irr == 0) {
        throw DataError("smote: exactly two classes required, one is empty");
    }
    if (n_rel == n_irr) {
        throw DataError("smote: classes are equal in size, no minority to oversample");
    }
    return n_rel < n_irr ? std::make_pair(Label::relevant, Label::not_relevant)
                         : std::make_pair(Label::not_relevant, Label::relevant);
}

}  // namespace detail

// k nearest minority neighbours of every minority point, euclidean distance,
// ties broken toward the lower index; a point is never its own neighbour.
// Indices are positions within the minority subsequence (order of appearance).
inline std::map<size_t, std::vector<size_t>> knn_minority(const LabeledFeatureSet& set,
                                                          size_t k) {
    set.validate();
    if (set.dim() < 1) throw DataError("smote: feature dimension must be >= 1");
    auto [minority, majority] = detail::minority_majority(set);
    (void)majority;
    std::vector<size_t> min_idx;
    for (size_t i = 0; i < set.size(); ++i) {
        if (set.labels[i] == minority) min_idx.push_back(i);
    }
    const size_t m = min_idx.size();
    if (m <= k) {
        throw DataError("smote: minority class has " + std::to_string(m) +
                        " members, need more than k=" + std::to_string(k) +
                        "; lower k_neighbors");
    }
    std::map<size_t, std::vector<size_t>> result;
    for (size_t a = 0; a < m; ++a) {
        std::vector<std::pair<double, size_t>> dist;
        dist.reserve(m - 1);
        for (size_t b = 0; b < m; ++b) {
            if (b == a) continue;
            dist.emplace_back(detail::sq_distance(set.vectors[min_idx[a]], set.vectors[min_idx[b]]),
                              b);
        }
        std::sort(dist.begin(), dist.end());  // pair ordering = tie-break by lower index
        std::vector<size_t> nn;
        nn.reserve(k);
        for (size_t t = 0; t < k; ++t) nn.push_back(dist[t].second);
        result[a] = std::move(nn);
    }
    return result;
}

inline FeatureVector synthesize(const FeatureVector& x_i, const FeatureVector& x_nn,
                                double lambda) {
    if (x_i.dim() != x_nn.dim()) {
        throw DataError("smote: dimension mismatch " + std::to_string(x_i.dim()) + " vs " +
                        std::to_string(x_nn.dim()));
    }
    if (lambda < 0.0 || lambda > 1.0) {
        throw ConfigError("smote: lambda must lie in [0, 1]");
    }
    FeatureVector out;
    out.kind = x_i.kind;
    out.v.resize(x_i.dim());
    for (size_t j = 0; j < x_i.dim(); ++j) {
        double a = x_i.v[j];
        double b = x_nn.v[j];
        out.v[j] = static_cast<float>(a + lambda * (b - a));
    }
    return out;
}

// Originals retained, synthetics appended with the minority label. Synthetic
// count is (factor-1) * |minority|: base points round-robin, neighbour chosen
// uniformly among the k nearest, lambda ~ U[0,1).
inline LabeledFeatureSet oversample(const LabeledFeatureSet& set, const SmoteConfig& cfg,
                                    Log* log = nullptr) {
    cfg.validate();
    set.validate();
    auto [minority, majority] = detail::minority_majority(set);
    std::vector<size_t> min_idx;
    for (size_t i = 0; i < set.size(); ++i) {
        if (set.labels[i] == minority) min_idx.push_back(i);
    }
    const size_t m = min_idx.size();
    const size_t n_majority = set.size() - m;

    LabeledFeatureSet out = set;
    if (cfg.inflation_factor == 1) return out;

    auto neighbours = knn_minority(set, cfg.k_neighbors);
    const size_t n_synthetic = (cfg.inflation_factor - 1) * m;
    if (m * cfg.inflation_factor > n_majority && log) {
        log->warn("smote: inflation makes minority (" +
                  std::to_string(m * cfg.inflation_factor) + ") exceed majority (" +
                  std::to_string(n_majority) + ")");
    }

    Rng rng(cfg.rng_seed);
    for (size_t s = 0; s < n_synthetic; ++s) {
        size_t base = s % m;
        const auto& nn = neighbours.at(base);
        size_t pick = nn[rng.next_below(nn.size())];
        double lambda = rng.next_double();
        out.vectors.push_back(
            synthesize(set.vectors[min_idx[base]], set.vectors[min_idx[pick]], lambda));
        out.labels.push_back(minority);
    }
    return out;
}

}  // namespace flood
