#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "flood/metrics.hpp"
#include "flood/rng.hpp"

using namespace flood;

namespace {

std::vector<Label> random_labels(Rng& rng, size_t n) {
    std::vector<Label> out(n);
    for (auto& l : out) l = rng.next_below(2) ? Label::relevant : Label::not_relevant;
    return out;
}

// Naive per-pair counting oracle, independent of the confusion() loops.
size_t count_agreements(const std::vector<Label>& a, const std::vector<Label>& b) {
    size_t n = 0;
    for (size_t i = 0; i < a.size(); ++i) n += a[i] == b[i];
    return n;
}

// The full micro formula spelled out by hand from pooled counts.
double micro_by_hand(const ConfusionCounts& c) {
    double tp = 0, fp = 0, fn = 0;
    for (const auto& [label, cc] : c.per_class) {
        tp += cc.tp;
        fp += cc.fp;
        fn += cc.fn;
    }
    double p = tp / (tp + fp);
    double r = tp / (tp + fn);
    return 2 * p * r / (p + r);
}

}  // namespace

TEST_CASE("perfect and inverted predictions hit the extremes") {
    std::vector<Label> gold(10);
    for (size_t i = 0; i < 10; ++i) gold[i] = i < 5 ? Label::relevant : Label::not_relevant;
    auto c_same = confusion(gold, gold);
    size_t tp_sum = 0, fp_sum = 0, fn_sum = 0;
    for (const auto& [label, cc] : c_same.per_class) {
        tp_sum += cc.tp;
        fp_sum += cc.fp;
        fn_sum += cc.fn;
    }
    CHECK(tp_sum == 10);
    CHECK(fp_sum == 0);
    CHECK(fn_sum == 0);
    CHECK(micro_f1(c_same) == 1.0);

    std::vector<Label> flipped(gold);
    for (auto& l : flipped) {
        l = l == Label::relevant ? Label::not_relevant : Label::relevant;
    }
    auto c_flip = confusion(flipped, gold);
    for (const auto& [label, cc] : c_flip.per_class) CHECK(cc.tp == 0);
    CHECK(micro_f1(c_flip) == 0.0);
}

TEST_CASE("confusion rejects mismatched lengths") {
    CHECK_THROWS_AS(confusion({Label::relevant}, {}), DataError);
}

TEST_CASE("7 of 10 correct scores 0.7 via both the identity and the formula") {
    std::vector<Label> gold(10, Label::relevant);
    for (size_t i = 0; i < 4; ++i) gold[i] = Label::not_relevant;
    std::vector<Label> pred = gold;
    pred[0] = Label::relevant;      // miss
    pred[4] = Label::not_relevant;  // miss
    pred[5] = Label::not_relevant;  // miss
    auto c = confusion(pred, gold);
    CHECK(micro_f1(c) == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(micro_f1(c) == doctest::Approx(micro_by_hand(c)).epsilon(1e-12));
}

TEST_CASE("micro-F1 equals accuracy on random single-label data") {
    Rng rng(31337);
    for (int trial = 0; trial < 300; ++trial) {
        size_t n = 1 + rng.next_below(200);
        auto gold = random_labels(rng, n);
        auto pred = random_labels(rng, n);
        auto c = confusion(pred, gold);
        double acc =
            static_cast<double>(count_agreements(pred, gold)) / static_cast<double>(n);
        CHECK(std::abs(micro_f1(c) - acc) < 1e-12);
        if (count_agreements(pred, gold) > 0) {
            CHECK(std::abs(micro_f1(c) - micro_by_hand(c)) < 1e-12);
        }
    }
}

TEST_CASE("joint permutation of predictions and golds changes nothing") {
    Rng rng(55);
    auto gold = random_labels(rng, 64);
    auto pred = random_labels(rng, 64);
    auto rep_a = make_report("r", pred, gold);
    std::vector<size_t> idx(64);
    for (size_t i = 0; i < 64; ++i) idx[i] = i;
    for (size_t i = 64; i > 1; --i) std::swap(idx[i - 1], idx[rng.next_below(i)]);
    std::vector<Label> gold_p(64), pred_p(64);
    for (size_t i = 0; i < 64; ++i) {
        gold_p[i] = gold[idx[i]];
        pred_p[i] = pred[idx[i]];
    }
    auto rep_b = make_report("r", pred_p, gold_p);
    CHECK(rep_a.micro == rep_b.micro);
    for (Label c : {Label::relevant, Label::not_relevant}) {
        CHECK(rep_a.per_class.at(c).precision == rep_b.per_class.at(c).precision);
        CHECK(rep_a.per_class.at(c).recall == rep_b.per_class.at(c).recall);
        CHECK(rep_a.per_class.at(c).f1 == rep_b.per_class.at(c).f1);
    }
}

TEST_CASE("zero denominators return 0.0 with the warning flag") {
    ConfusionCounts c;
    c.n_total = 5;
    c.per_class[Label::relevant] = {};
    c.per_class[Label::not_relevant] = {};
    bool warn = false;
    CHECK(micro_f1(c, &warn) == 0.0);
    CHECK(warn);
    CHECK_THROWS_AS(micro_f1(ConfusionCounts{}), DataError);  // n_total = 0
}

TEST_CASE("all reported metrics stay within [0,1]") {
    Rng rng(77);
    for (int trial = 0; trial < 50; ++trial) {
        size_t n = 1 + rng.next_below(100);
        auto rep = make_report("r", random_labels(rng, n), random_labels(rng, n));
        CHECK(rep.micro >= 0.0);
        CHECK(rep.micro <= 1.0);
        for (const auto& [label, m] : rep.per_class) {
            for (double v : {m.precision, m.recall, m.f1}) {
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
            }
        }
    }
}

TEST_CASE("report json round trip") {
    Rng rng(19);
    auto rep = make_report("run2_text", random_labels(rng, 40), random_labels(rng, 40), 3,
                           "textual");
    auto back = report_from_json(report_to_json(rep));
    CHECK(back.run_id == rep.run_id);
    CHECK(back.micro == rep.micro);
    CHECK(back.n_evaluated == rep.n_evaluated);
    CHECK(back.n_skipped == rep.n_skipped);
    CHECK(back.counts.per_class.at(Label::relevant).tp ==
          rep.counts.per_class.at(Label::relevant).tp);
}

TEST_CASE("compare_runs renders sorted three-decimal rows") {
    EvaluationReport a;
    a.run_id = "run2_text";
    a.feature_type = "textual";
    a.micro = 0.8591;
    EvaluationReport b;
    b.run_id = "run1_multimodal";
    b.feature_type = "textual+visual";
    b.micro = 0.5;
    auto cmp = compare_runs({a, b});
    // sorted by run_id: run1 before run2, and 0.8591 renders as 0.859
    CHECK(cmp.csv == "run,feature_type,micro_f1\n"
                     "run1_multimodal,textual+visual,0.500\n"
                     "run2_text,textual,0.859\n");
    CHECK(cmp.text_table.find("0.859") != std::string::npos);
    CHECK(cmp.text_table.find("run1_multimodal") < cmp.text_table.find("run2_text"));
}

TEST_CASE("compare_runs rejects duplicates and empty input, accepts one row") {
    EvaluationReport a;
    a.run_id = "solo";
    a.micro = 0.25;
    auto cmp = compare_runs({a});
    CHECK(cmp.csv == "run,feature_type,micro_f1\nsolo,,0.250\n");
    CHECK_THROWS_AS(compare_runs({}), DataError);
    CHECK_THROWS_WITH_AS(compare_runs({a, a}), doctest::Contains("duplicate"), DataError);
}

TEST_CASE("the reference fixture renders the four standard runs") {
    std::vector<EvaluationReport> reports;
    for (const auto& ref : reference_runs()) {
        if (std::string(ref.run_id).rfind("run", 0) != 0) continue;  // ablation row excluded
        EvaluationReport r;
        r.run_id = ref.run_id;
        r.feature_type = ref.feature_type;
        r.micro = ref.dev_micro_f1;
        reports.push_back(r);
    }
    auto cmp = compare_runs(reports);
    CHECK(cmp.csv ==
          "run,feature_type,micro_f1\n"
          "run1_multimodal,textual+visual,0.859\n"
          "run2_text,textual,0.853\n"
          "run3_scene,visual,0.816\n"
          "run4_fused,visual,0.805\n");
    // the object-backbone ablation is tracked alongside the standard runs
    bool found = false;
    for (const auto& ref : reference_runs()) {
        if (std::string(ref.run_id) == "ablation_object_backbone") {
            CHECK(ref.dev_micro_f1 == 0.804);
            found = true;
        }
    }
    CHECK(found);
}
