#include <fstream>

#include "doctest.h"
#include "helpers.hpp"
#include "pavad/config.hpp"

using namespace pavad;

TEST_CASE("key-value parsing") {
    const auto kv = parse_key_values("# comment\nseed = 7\n\n  p_s=0.3  # trailing\n", "test");
    CHECK(kv.at("seed") == "7");
    CHECK(kv.at("p_s") == "0.3");
    CHECK_THROWS_AS(parse_key_values("no equals sign\n", "test"), Error);
}

TEST_CASE("settings and overrides") {
    RunConfig c;
    apply_setting(c, "seed", "9");
    CHECK(c.seed == 9);
    CHECK(c.train.seed == 9);
    apply_override(c, "profile=avenue");
    CHECK(c.weights == weight_profile("avenue"));
    apply_override(c, "eta3=0.05");
    CHECK(c.profile == "custom");
    apply_override(c, "ae_width_divisor=4");
    CHECK(c.train.ae_width_divisor == 4);
    apply_override(c, "shared_mask=false");
    CHECK_FALSE(c.train.shared_mask);
    c.validate();

    auto config_error = [&](const std::string& kv) {
        try {
            apply_override(c, kv);
        } catch (const Error& e) {
            return e.kind() == ErrorKind::Config;
        }
        return false;
    };
    CHECK(config_error("nonsense=1"));
    CHECK(config_error("ae_epochs=ten"));
    CHECK(config_error("inpainter=magic"));
    CHECK(config_error("features=none"));
    CHECK(config_error("missing_equals"));
}

TEST_CASE("validation and file loading") {
    testutil::TempDir dir("config");
    std::ofstream(dir / "run.cfg") << "frame_height = 64\nframe_width = 64\neta1 = 0.9\n";
    RunConfig c;
    for (const auto& [k, v] : read_config_file(dir / "run.cfg")) apply_setting(c, k, v);
    CHECK(c.frame_height == 64);
    CHECK_THROWS_AS(c.validate(), Error);  // weights no longer sum to one
    apply_setting(c, "eta2", "0.1");
    apply_setting(c, "eta3", "0");
    c.validate();

    RunConfig d;
    d.frame_height = 50;
    CHECK_THROWS_AS(d.validate(), Error);
    RunConfig e;
    e.inpainter = "external-diffusion";
    CHECK_THROWS_AS(e.validate(), Error);
    CHECK_THROWS_AS(read_config_file(dir / "missing.cfg"), Error);

    RunConfig f;
    f.dataset_root = "/data/x";
    CHECK(f.resolved_features_dir() == std::filesystem::path("/data/x/features"));
    const auto j = to_json(f);
    CHECK(j.contains("seed"));
    CHECK(config_keys().size() > 20);
}
