#pragma once

#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "flood/common.hpp"

namespace flood {

enum class Optimizer { adam };

struct TrainingProtocol {
    double learning_rate = 1e-5;
    size_t epochs = 10;
    std::vector<int> seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    size_t batch_size = 32;
    Optimizer optimizer = Optimizer::adam;
    size_t max_sequence_length = 128;

    void validate() const {
        if (learning_rate <= 0.0) throw ConfigError("protocol: learning_rate must be > 0");
        if (epochs < 1) throw ConfigError("protocol: epochs must be >= 1");
        if (seeds.empty()) throw ConfigError("protocol: seed list must be non-empty");
        if (batch_size < 1) throw ConfigError("protocol: batch_size must be >= 1");
        if (max_sequence_length < 2) {
            throw ConfigError("protocol: max_sequence_length must fit the special tokens");
        }
    }
};

// One row per (seed, epoch); dev_micro_f1 is NaN when that seed aborted on a
// non-finite loss.
struct ManifestRow {
    int seed = 0;
    size_t epoch = 0;  // 1-based
    double dev_micro_f1 = 0.0;
    double wall_seconds = 0.0;
};

struct RunManifest {
    std::vector<ManifestRow> rows;

    std::string to_csv() const {
        std::string out = "seed,epoch,dev_micro_f1,wall_seconds\n";
        char buf[128];
        for (const auto& r : rows) {
            std::snprintf(buf, sizeof(buf), "%d,%zu,%.6f,%.3f\n", r.seed, r.epoch,
                          r.dev_micro_f1, r.wall_seconds);
            out += buf;
        }
        return out;
    }

    static RunManifest from_csv(const std::string& csv) {
        RunManifest m;
        auto lines = split_string(csv, '\n');
        for (size_t i = 1; i < lines.size(); ++i) {
            if (trim(lines[i]).empty()) continue;
            auto cells = split_string(lines[i], ',');
            if (cells.size() != 4) {
                throw DataError("manifest row " + std::to_string(i) + ": expected 4 cells");
            }
            ManifestRow r;
            r.seed = std::stoi(cells[0]);
            r.epoch = static_cast<size_t>(std::stoul(cells[1]));
            r.dev_micro_f1 = std::stod(cells[2]);
            r.wall_seconds = std::stod(cells[3]);
            m.rows.push_back(r);
        }
        return m;
    }

    // Highest dev score wins; ties resolve to the lowest seed, then the
    // earliest epoch. Non-finite rows (aborted seeds) never win.
    std::optional<ManifestRow> best() const {
        std::optional<ManifestRow> best_row;
        for (const auto& r : rows) {
            if (!std::isfinite(r.dev_micro_f1)) continue;
            if (!best_row) {
                best_row = r;
                continue;
            }
            if (r.dev_micro_f1 > best_row->dev_micro_f1 ||
                (r.dev_micro_f1 == best_row->dev_micro_f1 &&
                 (r.seed < best_row->seed ||
                  (r.seed == best_row->seed && r.epoch < best_row->epoch)))) {
                best_row = r;
            }
        }
        return best_row;
    }

    double best_for_seed(int seed) const {
        double best_score = -1.0;
        for (const auto& r : rows) {
            if (r.seed == seed && std::isfinite(r.dev_micro_f1)) {
                best_score = std::max(best_score, r.dev_micro_f1);
            }
        }
        return best_score;
    }
};

}  // namespace flood
