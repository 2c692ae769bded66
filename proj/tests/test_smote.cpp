#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <vector>

#include "flood/features.hpp"
#include "flood/log.hpp"
#include "flood/rng.hpp"
#include "flood/smote.hpp"

using namespace flood;

namespace {

FeatureVector fv(std::vector<float> v) {
    FeatureVector f;
    f.v = std::move(v);
    return f;
}

LabeledFeatureSet make_set(const std::vector<std::vector<float>>& minority,
                           const std::vector<std::vector<float>>& majority) {
    LabeledFeatureSet set;
    for (const auto& v : minority) {
        set.vectors.push_back(fv(v));
        set.labels.push_back(Label::relevant);
    }
    for (const auto& v : majority) {
        set.vectors.push_back(fv(v));
        set.labels.push_back(Label::not_relevant);
    }
    return set;
}

// Independent O(n^2) neighbour oracle used to validate knn_minority.
std::vector<size_t> brute_knn(const std::vector<std::vector<float>>& pts, size_t a, size_t k) {
    std::vector<std::pair<double, size_t>> dist;
    for (size_t b = 0; b < pts.size(); ++b) {
        if (b == a) continue;
        double acc = 0.0;
        for (size_t j = 0; j < pts[a].size(); ++j) {
            double d = static_cast<double>(pts[a][j]) - pts[b][j];
            acc += d * d;
        }
        dist.emplace_back(acc, b);
    }
    std::sort(dist.begin(), dist.end());
    std::vector<size_t> out;
    for (size_t t = 0; t < k; ++t) out.push_back(dist[t].second);
    return out;
}

LabeledFeatureSet random_set(Rng& rng, size_t d, size_t n_min, size_t n_maj) {
    std::vector<std::vector<float>> minority, majority;
    for (size_t i = 0; i < n_min; ++i) {
        std::vector<float> v(d);
        for (auto& x : v) x = static_cast<float>(rng.next_double() * 4.0 - 2.0);
        minority.push_back(std::move(v));
    }
    for (size_t i = 0; i < n_maj; ++i) {
        std::vector<float> v(d);
        for (auto& x : v) x = static_cast<float>(rng.next_double() * 4.0 + 5.0);
        majority.push_back(std::move(v));
    }
    return make_set(minority, majority);
}

}  // namespace

TEST_CASE("knn on collinear points matches hand-computed neighbours") {
    // minority at x = 0, 1, 5: nearest of 0 is 1, of 1 is 0, of 5 is 1
    auto set = make_set({{0.f}, {1.f}, {5.f}}, {{100.f}, {101.f}, {102.f}, {103.f}});
    auto nn = knn_minority(set, 1);
    CHECK(nn.at(0) == std::vector<size_t>{1});
    CHECK(nn.at(1) == std::vector<size_t>{0});
    CHECK(nn.at(2) == std::vector<size_t>{1});
}

TEST_CASE("k = minority-1 returns all other minority points") {
    auto set = make_set({{0.f, 0.f}, {1.f, 0.f}, {0.f, 1.f}, {2.f, 2.f}},
                        {{9.f, 9.f}, {8.f, 8.f}, {7.f, 7.f}, {6.f, 6.f}, {5.f, 5.f}});
    auto nn = knn_minority(set, 3);
    for (size_t a = 0; a < 4; ++a) {
        std::set<size_t> got(nn.at(a).begin(), nn.at(a).end());
        CHECK(got.size() == 3);
        CHECK(got.count(a) == 0);
    }
}

TEST_CASE("duplicate points break ties toward the lower index") {
    auto set = make_set({{1.f}, {1.f}, {1.f}}, {{50.f}, {51.f}, {52.f}, {53.f}});
    auto nn = knn_minority(set, 1);
    CHECK(nn.at(0) == std::vector<size_t>{1});  // 1 before 2 at equal distance
    CHECK(nn.at(1) == std::vector<size_t>{0});
    CHECK(nn.at(2) == std::vector<size_t>{0});
}

TEST_CASE("knn agrees with the brute-force oracle on random sets") {
    Rng rng(404);
    for (int trial = 0; trial < 25; ++trial) {
        size_t d = 1 + rng.next_below(8);
        size_t n_min = 6 + rng.next_below(20);
        auto set = random_set(rng, d, n_min, n_min + 5 + rng.next_below(10));
        size_t k = 1 + rng.next_below(std::min<size_t>(5, n_min - 1));
        auto nn = knn_minority(set, k);
        std::vector<std::vector<float>> pts;
        for (size_t i = 0; i < set.size(); ++i) {
            if (set.labels[i] == Label::relevant) pts.push_back(set.vectors[i].v);
        }
        for (size_t a = 0; a < pts.size(); ++a) {
            CHECK(nn.at(a) == brute_knn(pts, a, k));
        }
    }
}

TEST_CASE("knn refuses an oversized k with advice") {
    auto set = make_set({{0.f}, {1.f}}, {{5.f}, {6.f}, {7.f}});
    CHECK_THROWS_WITH_AS(knn_minority(set, 2), doctest::Contains("lower k"), DataError);
}

TEST_CASE("synthesize interpolates exactly at the endpoints and midpoint") {
    auto a = fv({0.f, 0.f});
    auto b = fv({2.f, 4.f});
    CHECK(synthesize(a, b, 0.0).v == std::vector<float>{0.f, 0.f});
    CHECK(synthesize(a, b, 1.0).v == std::vector<float>{2.f, 4.f});
    CHECK(synthesize(a, b, 0.5).v == std::vector<float>{1.f, 2.f});
}

TEST_CASE("synthesize stays inside the per-coordinate interval") {
    Rng rng(77);
    for (int trial = 0; trial < 200; ++trial) {
        size_t d = 1 + rng.next_below(6);
        std::vector<float> va(d), vb(d);
        for (size_t j = 0; j < d; ++j) {
            va[j] = static_cast<float>(rng.next_double() * 10 - 5);
            vb[j] = static_cast<float>(rng.next_double() * 10 - 5);
        }
        double lambda = rng.next_double();
        auto out = synthesize(fv(va), fv(vb), lambda);
        for (size_t j = 0; j < d; ++j) {
            CHECK(out.v[j] >= std::min(va[j], vb[j]));
            CHECK(out.v[j] <= std::max(va[j], vb[j]));
        }
    }
}

TEST_CASE("synthesize rejects dimension mismatch") {
    CHECK_THROWS_AS(synthesize(fv({1.f}), fv({1.f, 2.f}), 0.5), DataError);
}

TEST_CASE("oversample inflates the minority by the configured factor") {
    Rng rng(5);
    auto set = random_set(rng, 4, 10, 50);
    SmoteConfig cfg;
    cfg.inflation_factor = 3;
    cfg.k_neighbors = 5;
    cfg.rng_seed = 9;
    auto out = oversample(set, cfg);
    CHECK(out.count(Label::relevant) == 30);
    CHECK(out.count(Label::not_relevant) == 50);
    // originals retained in place, synthetics appended with the minority label
    for (size_t i = 0; i < set.size(); ++i) {
        CHECK(out.vectors[i].v == set.vectors[i].v);
        CHECK(out.labels[i] == set.labels[i]);
    }
    for (size_t i = set.size(); i < out.size(); ++i) {
        CHECK(out.labels[i] == Label::relevant);
    }
}

TEST_CASE("factor one is the identity") {
    Rng rng(6);
    auto set = random_set(rng, 3, 8, 20);
    SmoteConfig cfg;
    cfg.inflation_factor = 1;
    auto out = oversample(set, cfg);
    CHECK(out.size() == set.size());
    for (size_t i = 0; i < set.size(); ++i) {
        CHECK(out.vectors[i].v == set.vectors[i].v);
    }
}

TEST_CASE("synthetics stay inside the minority bounding box") {
    Rng rng(7);
    auto set = random_set(rng, 5, 12, 30);
    SmoteConfig cfg;
    cfg.inflation_factor = 4;
    cfg.rng_seed = 21;
    auto out = oversample(set, cfg);
    // brute-force bounding box of the original minority points
    std::vector<float> lo(5, 1e30f), hi(5, -1e30f);
    for (size_t i = 0; i < set.size(); ++i) {
        if (set.labels[i] != Label::relevant) continue;
        for (size_t j = 0; j < 5; ++j) {
            lo[j] = std::min(lo[j], set.vectors[i].v[j]);
            hi[j] = std::max(hi[j], set.vectors[i].v[j]);
        }
    }
    for (size_t i = set.size(); i < out.size(); ++i) {
        for (size_t j = 0; j < 5; ++j) {
            CHECK(out.vectors[i].v[j] >= lo[j]);
            CHECK(out.vectors[i].v[j] <= hi[j]);
        }
    }
}

TEST_CASE("oversampling is deterministic including element order") {
    Rng rng(8);
    auto set = random_set(rng, 6, 9, 25);
    SmoteConfig cfg;
    cfg.inflation_factor = 3;
    cfg.rng_seed = 1234;
    auto a = oversample(set, cfg);
    auto b = oversample(set, cfg);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a.vectors[i].v == b.vectors[i].v);
        CHECK(a.labels[i] == b.labels[i]);
    }
}

TEST_CASE("oversample validates preconditions") {
    SmoteConfig cfg;
    // single class
    LabeledFeatureSet single;
    single.vectors = {fv({1.f}), fv({2.f})};
    single.labels = {Label::relevant, Label::relevant};
    CHECK_THROWS_AS(oversample(single, cfg), DataError);
    // balanced classes have no strict minority
    auto balanced = make_set({{0.f}}, {{1.f}});
    CHECK_THROWS_AS(oversample(balanced, cfg), DataError);
    // zero factor
    SmoteConfig bad;
    bad.inflation_factor = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("overshooting the majority logs a warning, not an error") {
    Rng rng(9);
    auto set = random_set(rng, 3, 10, 12);
    SmoteConfig cfg;
    cfg.inflation_factor = 3;  // 30 > 12
    namespace fs = std::filesystem;
    fs::path logfile = fs::temp_directory_path() / "flood_smote_warn.log";
    fs::remove(logfile);
    Log log;
    log.attach_file(logfile);
    auto out = oversample(set, cfg, &log);
    CHECK(out.count(Label::relevant) == 30);
    std::string contents = read_file(logfile);
    CHECK(contents.find("WARN") != std::string::npos);
    CHECK(contents.find("exceed") != std::string::npos);
}

TEST_CASE("feature file round trip preserves vectors and labels") {
    Rng rng(15);
    auto set = random_set(rng, 7, 6, 9);
    namespace fs = std::filesystem;
    for (const char* name : {"flood_feats.bin", "flood_feats.csv"}) {
        fs::path file = fs::temp_directory_path() / name;
        save_features(set, file);
        auto back = load_features(file);
        REQUIRE(back.size() == set.size());
        for (size_t i = 0; i < set.size(); ++i) {
            CHECK(back.vectors[i].v == set.vectors[i].v);
            CHECK(back.labels[i] == set.labels[i]);
        }
    }
}

TEST_CASE("truncated or foreign binary feature files are rejected") {
    namespace fs = std::filesystem;
    fs::path file = fs::temp_directory_path() / "flood_feats_bad.bin";
    write_file(file, "FLFVgarbage");
    CHECK_THROWS_AS(load_features(file), DataError);
    write_file(file, "nope");
    CHECK_THROWS_AS(load_features(file), DataError);
}
