#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "flood/config.hpp"

using namespace flood;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / ("flood_cfg_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

fs::path write_minimal(const fs::path& dir, const std::string& extra = "",
                       const std::string& run_id = "run2_text") {
    std::ofstream(dir / "train.jsonl").close();
    std::ofstream(dir / "dev.jsonl").close();
    fs::path cfg = dir / "run.cfg";
    std::ofstream out(cfg);
    out << "run_id = " << run_id << "\n";
    out << "data.train = " << (dir / "train.jsonl").string() << "\n";
    out << "data.dev = " << (dir / "dev.jsonl").string() << "\n";
    out << "output_dir = " << (dir / "out").string() << "\n";
    out << extra;
    return cfg;
}

}  // namespace

TEST_CASE("minimal config resolves to the standard protocol defaults") {
    auto dir = temp_dir("minimal");
    RunConfig cfg = validate_config(write_minimal(dir));
    CHECK(cfg.run_id == RunId::run2_text);
    CHECK(cfg.protocol.learning_rate == 1e-5);
    CHECK(cfg.protocol.epochs == 10);
    CHECK(cfg.protocol.seeds == std::vector<int>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10});
    CHECK(cfg.protocol.batch_size == 32);
    CHECK(cfg.protocol.optimizer == Optimizer::adam);
    CHECK(cfg.smote_enabled == false);  // text run
    CHECK(cfg.smote.inflation_factor == 3);
    CHECK(cfg.smote.k_neighbors == 5);
}

TEST_CASE("image runs enable oversampling by default; run4 uses the head rate") {
    auto dir = temp_dir("image_defaults");
    RunConfig r3 = validate_config(write_minimal(dir, "", "run3_scene"));
    CHECK(r3.smote_enabled);
    CHECK(r3.protocol.learning_rate == 1e-5);  // end-to-end fine-tune
    RunConfig r4 = validate_config(write_minimal(dir, "", "run4_fused"));
    CHECK(r4.smote_enabled);
    CHECK(r4.protocol.learning_rate == 1e-4);  // head training
}

TEST_CASE("unknown keys are rejected by name") {
    auto dir = temp_dir("unknown");
    auto cfg = write_minimal(dir, "learnig_rate = 1e-5\n");
    CHECK_THROWS_WITH_AS(validate_config(cfg), doctest::Contains("learnig_rate"), ConfigError);
}

TEST_CASE("range errors name the key and the expectation") {
    auto dir = temp_dir("ranges");
    CHECK_THROWS_WITH_AS(validate_config(write_minimal(dir, "smote.factor = 0\n", "run3_scene")),
                         doctest::Contains("smote.factor"), ConfigError);
    CHECK_THROWS_WITH_AS(validate_config(write_minimal(dir, "protocol.epochs = 0\n")),
                         doctest::Contains("protocol.epochs"), ConfigError);
    CHECK_THROWS_WITH_AS(validate_config(write_minimal(dir, "protocol.learning_rate = -1\n")),
                         doctest::Contains("learning_rate"), ConfigError);
    CHECK_THROWS_WITH_AS(validate_config(write_minimal(dir, "protocol.epochs = abc\n")),
                         doctest::Contains("integer"), ConfigError);
}

TEST_CASE("smote cannot be enabled for text or multimodal runs") {
    auto dir = temp_dir("smote_scope");
    CHECK_THROWS_WITH_AS(validate_config(write_minimal(dir, "smote.enabled = true\n")),
                         doctest::Contains("runs 3/4"), ConfigError);
}

TEST_CASE("nonexistent data paths fail validation before any training") {
    auto dir = temp_dir("paths");
    auto cfg = write_minimal(dir);
    fs::remove(dir / "dev.jsonl");
    CHECK_THROWS_WITH_AS(validate_config(cfg), doctest::Contains("data.dev"), ConfigError);
}

TEST_CASE("seed count and explicit seed list are both accepted") {
    auto dir = temp_dir("seeds");
    RunConfig count = validate_config(write_minimal(dir, "protocol.seeds = 3\n"));
    CHECK(count.protocol.seeds == std::vector<int>{1, 2, 3});
    RunConfig list = validate_config(write_minimal(dir, "protocol.seed_list = 5, 9, 2\n"));
    CHECK(list.protocol.seeds == std::vector<int>{5, 9, 2});
}

TEST_CASE("json configs with nesting map onto dotted keys") {
    auto dir = temp_dir("json");
    std::ofstream(dir / "train.jsonl").close();
    std::ofstream(dir / "dev.jsonl").close();
    fs::path cfg = dir / "run.json";
    std::ofstream out(cfg);
    out << R"({
      "run_id": "run1_multimodal",
      "data": {"train": ")" << (dir / "train.jsonl").string() << R"(",
               "dev": ")" << (dir / "dev.jsonl").string() << R"("},
      "output_dir": ")" << (dir / "out").string() << R"(",
      "protocol": {"epochs": 2, "learning_rate": 0.001},
      "image": {"mode": "resnet", "n_tokens": 2}
    })";
    out.close();
    RunConfig c = validate_config(cfg);
    CHECK(c.run_id == RunId::run1_multimodal);
    CHECK(c.protocol.epochs == 2);
    CHECK(c.protocol.learning_rate == 0.001);
    CHECK(c.image_mode == ImageFeatureMode::residual_backbone);
    CHECK(c.n_image_tokens == 2);
}

TEST_CASE("duplicate keys in flat configs are rejected") {
    auto dir = temp_dir("dupkey");
    auto cfg = write_minimal(dir, "seed = 1\nseed = 2\n");
    CHECK_THROWS_WITH_AS(validate_config(cfg), doctest::Contains("twice"), ConfigError);
}

TEST_CASE("missing required keys are named") {
    auto dir = temp_dir("required");
    std::ofstream(dir / "train.jsonl").close();
    fs::path cfg = dir / "r.cfg";
    std::ofstream(cfg) << "run_id = run2_text\n";
    CHECK_THROWS_WITH_AS(validate_config(cfg), doctest::Contains("data.train"), ConfigError);
}

TEST_CASE("the frozen copy records every effective value") {
    auto dir = temp_dir("frozen");
    RunConfig cfg = validate_config(write_minimal(dir));
    std::string frozen = freeze_config(cfg);
    // defaults the user never wrote must appear
    CHECK(frozen.find("protocol.learning_rate = 1e-05") != std::string::npos);
    CHECK(frozen.find("protocol.epochs = 10") != std::string::npos);
    CHECK(frozen.find("protocol.seed_list = 1,2,3,4,5,6,7,8,9,10") != std::string::npos);
    CHECK(frozen.find("smote.enabled = false") != std::string::npos);
    CHECK(frozen.find("vision.scene_backbone = tiny") != std::string::npos);
    // and the frozen text itself parses back to the same configuration
    fs::path refrozen = dir / "frozen.cfg";
    write_file(refrozen, frozen);
    RunConfig back = validate_config(refrozen);
    CHECK(freeze_config(back) == frozen);
}

TEST_CASE("bad run_id is rejected with the allowed values") {
    auto dir = temp_dir("runid");
    auto cfg = write_minimal(dir, "", "run9_fancy");
    CHECK_THROWS_WITH_AS(validate_config(cfg), doctest::Contains("run1_multimodal"),
                         ConfigError);
}
