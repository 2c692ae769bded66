#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "flood/nn/layers.hpp"
#include "flood/protocol.hpp"

namespace flood {

// Result of a multi-seed training run: the manifest of every (seed, epoch)
// dev score plus a deep copy of the best checkpoint's parameter values.
struct TrainOutcome {
    RunManifest manifest;
    double best_score = -1.0;
    int best_seed = 0;
    size_t best_epoch = 0;
    std::vector<std::vector<double>> best_values;  // parallel to param order
    nn::NamedParams checkpoint_params;             // winning model, checkpoint layout
    nlohmann::json model_config;
};

inline std::vector<std::vector<double>> snapshot_values(const nn::NamedParams& params) {
    std::vector<std::vector<double>> out;
    out.reserve(params.size());
    for (const auto& [name, t] : params) out.push_back(t->v);
    return out;
}

inline void restore_values(const nn::NamedParams& params,
                           const std::vector<std::vector<double>>& values) {
    if (params.size() != values.size()) {
        throw TrainError("parameter snapshot does not match model shape");
    }
    for (size_t i = 0; i < params.size(); ++i) {
        if (params[i].second->v.size() != values[i].size()) {
            throw TrainError("parameter snapshot size mismatch at " + params[i].first);
        }
        params[i].second->v = values[i];
    }
}

// Strictly-better comparison implementing the selection tie-breaks:
// higher score, then lower seed, then earlier epoch.
inline bool improves_selection(double score, int seed, size_t epoch, double best_score,
                               int best_seed, size_t best_epoch) {
    if (score != best_score) return score > best_score;
    if (seed != best_seed) return seed < best_seed;
    return epoch < best_epoch;
}

}  // namespace flood
