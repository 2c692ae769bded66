#pragma once

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "flood/common.hpp"
#include "flood/data.hpp"

namespace flood {

struct ClassCounts {
    size_t tp = 0;
    size_t fp = 0;
    size_t fn = 0;
    size_t tn = 0;
};

struct ConfusionCounts {
    std::map<Label, ClassCounts> per_class;
    size_t n_total = 0;
};

inline ConfusionCounts confusion(const std::vector<Label>& preds,
                                 const std::vector<Label>& golds) {
    if (preds.size() != golds.size()) {
        throw DataError("confusion: " + std::to_string(preds.size()) + " predictions vs " +
                        std::to_string(golds.size()) + " gold labels");
    }
    ConfusionCounts counts;
    counts.n_total = preds.size();
    for (Label c : {Label::not_relevant, Label::relevant}) {
        counts.per_class[c] = ClassCounts{};
    }
    for (size_t i = 0; i < preds.size(); ++i) {
        for (Label c : {Label::not_relevant, Label::relevant}) {
            auto& cc = counts.per_class[c];
            bool pred_c = preds[i] == c;
            bool gold_c = golds[i] == c;
            if (pred_c && gold_c) ++cc.tp;
            else if (pred_c && !gold_c) ++cc.fp;
            else if (!pred_c && gold_c) ++cc.fn;
            else ++cc.tn;
        }
    }
    return counts;
}

// Micro-averaged F1 over both classes: precision and recall are computed from
// globally pooled TP/FP/FN, then combined as 2PR/(P+R). For single-label
// data this equals accuracy; the identity is pinned down in tests.
inline double micro_f1(const ConfusionCounts& counts, bool* zero_denominator = nullptr) {
    if (counts.n_total < 1) throw DataError("micro_f1: n_total must be >= 1");
    size_t tp = 0, fp = 0, fn = 0;
    for (const auto& [label, cc] : counts.per_class) {
        tp += cc.tp;
        fp += cc.fp;
        fn += cc.fn;
    }
    if (zero_denominator) *zero_denominator = false;
    if (tp + fp == 0 || tp + fn == 0) {
        if (zero_denominator) *zero_denominator = true;
        return 0.0;
    }
    double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    if (precision + recall == 0.0) {
        if (zero_denominator) *zero_denominator = true;
        return 0.0;
    }
    return 2.0 * precision * recall / (precision + recall);
}

struct PerClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

inline PerClassMetrics per_class_metrics(const ClassCounts& cc) {
    PerClassMetrics m;
    m.precision = (cc.tp + cc.fp) ? static_cast<double>(cc.tp) / (cc.tp + cc.fp) : 0.0;
    m.recall = (cc.tp + cc.fn) ? static_cast<double>(cc.tp) / (cc.tp + cc.fn) : 0.0;
    m.f1 = (m.precision + m.recall > 0.0)
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    return m;
}

struct EvaluationReport {
    std::string run_id;
    std::string feature_type;  // e.g. "textual", "visual", "textual+visual"
    double micro = 0.0;
    bool zero_denominator_warning = false;
    std::map<Label, PerClassMetrics> per_class;
    ConfusionCounts counts;
    size_t n_evaluated = 0;
    size_t n_skipped = 0;
};

inline EvaluationReport make_report(const std::string& run_id,
                                    const std::vector<Label>& preds,
                                    const std::vector<Label>& golds, size_t n_skipped = 0,
                                    const std::string& feature_type = "") {
    EvaluationReport rep;
    rep.run_id = run_id;
    rep.feature_type = feature_type;
    rep.counts = confusion(preds, golds);
    rep.micro = micro_f1(rep.counts, &rep.zero_denominator_warning);
    for (const auto& [label, cc] : rep.counts.per_class) {
        rep.per_class[label] = per_class_metrics(cc);
    }
    rep.n_evaluated = preds.size();
    rep.n_skipped = n_skipped;
    return rep;
}

inline nlohmann::ordered_json report_to_json(const EvaluationReport& rep) {
    nlohmann::ordered_json j;
    j["run_id"] = rep.run_id;
    j["feature_type"] = rep.feature_type;
    j["micro_f1"] = rep.micro;
    j["zero_denominator_warning"] = rep.zero_denominator_warning;
    nlohmann::ordered_json pc;
    for (const auto& [label, m] : rep.per_class) {
        nlohmann::ordered_json e;
        e["precision"] = m.precision;
        e["recall"] = m.recall;
        e["f1"] = m.f1;
        pc[to_string(label)] = e;
    }
    j["per_class"] = pc;
    nlohmann::ordered_json cj;
    for (const auto& [label, cc] : rep.counts.per_class) {
        nlohmann::ordered_json e;
        e["tp"] = cc.tp;
        e["fp"] = cc.fp;
        e["fn"] = cc.fn;
        e["tn"] = cc.tn;
        cj[to_string(label)] = e;
    }
    j["counts"] = cj;
    j["n_total"] = rep.counts.n_total;
    j["n_evaluated"] = rep.n_evaluated;
    j["n_skipped"] = rep.n_skipped;
    return j;
}

inline EvaluationReport report_from_json(const nlohmann::json& j) {
    EvaluationReport rep;
    rep.run_id = j.at("run_id").get<std::string>();
    rep.feature_type = j.value("feature_type", "");
    rep.micro = j.at("micro_f1").get<double>();
    rep.zero_denominator_warning = j.value("zero_denominator_warning", false);
    rep.counts.n_total = j.at("n_total").get<size_t>();
    for (Label c : {Label::not_relevant, Label::relevant}) {
        const auto& e = j.at("counts").at(to_string(c));
        ClassCounts cc;
        cc.tp = e.at("tp").get<size_t>();
        cc.fp = e.at("fp").get<size_t>();
        cc.fn = e.at("fn").get<size_t>();
        cc.tn = e.at("tn").get<size_t>();
        rep.counts.per_class[c] = cc;
        const auto& pm = j.at("per_class").at(to_string(c));
        PerClassMetrics m;
        m.precision = pm.at("precision").get<double>();
        m.recall = pm.at("recall").get<double>();
        m.f1 = pm.at("f1").get<double>();
        rep.per_class[c] = m;
    }
    rep.n_evaluated = j.at("n_evaluated").get<size_t>();
    rep.n_skipped = j.at("n_skipped").get<size_t>();
    return rep;
}

struct RunComparison {
    std::string text_table;
    std::string csv;
};

// Comparison table across runs: one row per report, sorted by run_id,
// micro-F1 rendered to three decimals.
inline RunComparison compare_runs(std::vector<EvaluationReport> reports) {
    if (reports.empty()) throw DataError("compare_runs: at least one report required");
    std::set<std::string> ids;
    for (const auto& r : reports) {
        if (!ids.insert(r.run_id).second) {
            throw DataError("compare_runs: duplicate run_id \"" + r.run_id + "\"");
        }
    }
    std::sort(reports.begin(), reports.end(),
              [](const EvaluationReport& a, const EvaluationReport& b) {
                  return a.run_id < b.run_id;
              });
    size_t id_w = 3, ft_w = 15;
    for (const auto& r : reports) {
        id_w = std::max(id_w, r.run_id.size());
        ft_w = std::max(ft_w, r.feature_type.size());
    }
    auto pad = [](const std::string& s, size_t w) {
        return s + std::string(w > s.size() ? w - s.size() : 0, ' ');
    };
    auto fmt3 = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.3f", v);
        return std::string(buf);
    };
    RunComparison out;
    out.text_table = pad("run", id_w) + "  " + pad("type of features", ft_w) +
                     "  micro-f1\n";
    out.csv = "run,feature_type,micro_f1\n";
    for (const auto& r : reports) {
        out.text_table += pad(r.run_id, id_w) + "  " + pad(r.feature_type, ft_w) + "  " +
                          fmt3(r.micro) + "\n";
        out.csv += r.run_id + "," + r.feature_type + "," + fmt3(r.micro) + "\n";
    }
    return out;
}

// Reference dev-set micro-F1 of the four run configurations plus the
// object-backbone ablation, as obtained on the original tweet corpus. Kept as
// constants for the comparison fixture; not reproducible here because that
// corpus is not distributed with the toolkit.
struct ReferenceRun {
    const char* run_id;
    const char* feature_type;
    double dev_micro_f1;
};

inline const std::vector<ReferenceRun>& reference_runs() {
    static const std::vector<ReferenceRun> runs = {
        {"run1_multimodal", "textual+visual", 0.859},
        {"run2_text", "textual", 0.853},
        {"run3_scene", "visual", 0.816},
        {"run4_fused", "visual", 0.805},
        {"ablation_object_backbone", "visual", 0.804},
    };
    return runs;
}

}  // namespace flood
