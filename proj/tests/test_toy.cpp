#include <fstream>
#include <iterator>

#include "doctest.h"
#include "helpers.hpp"
#include "pavad/toy.hpp"

using namespace pavad;

namespace {

ToySpec small_spec() {
    ToySpec s;
    s.n_train_videos = 2;
    s.n_test_videos = 3;
    s.frames_per_video = 20;
    s.test_frames_per_video = 40;
    s.recipes = {AnomalyRecipe::SpeedJump, AnomalyRecipe::ForeignTexture, AnomalyRecipe::ShapeSwap};
    return s;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("same seed gives bit-identical frame files") {
    testutil::TempDir a("toy_a"), b("toy_b");
    make_toy_dataset(small_spec(), a.path());
    make_toy_dataset(small_spec(), b.path());
    std::size_t files = 0;
    for (const auto& e : std::filesystem::recursive_directory_iterator(a.path())) {
        if (!e.is_regular_file()) continue;
        const auto rel = std::filesystem::relative(e.path(), a.path());
        REQUIRE(std::filesystem::exists(b.path() / rel));
        CHECK(slurp(e.path()) == slurp(b.path() / rel));
        ++files;
    }
    CHECK(files == 2 * 20 + 3 * 40 + 3);
}

TEST_CASE("different seeds differ") {
    ToySpec s = small_spec();
    const auto x = generate_toy(s);
    s.seed = 8;
    const auto y = generate_toy(s);
    CHECK_FALSE(x.train[0].clip.frames() == y.train[0].clip.frames());
}

TEST_CASE("fixed speed-jump span is labelled exactly") {
    ToySpec s = small_spec();
    s.recipes = {AnomalyRecipe::SpeedJump};
    s.fixed_span = std::make_pair(20, 30);
    const auto ds = generate_toy(s);
    for (const auto& v : ds.test) {
        for (int t = 0; t < 40; ++t) CHECK(v.labels.labels[t] == (t >= 20 && t <= 30 ? 1 : 0));
    }
}

TEST_CASE("labels match the injected spans") {
    const auto ds = generate_toy(small_spec());
    for (const auto& v : ds.train) {
        CHECK(v.labels.labels.size() == static_cast<std::size_t>(v.clip.length()));
        for (int y : v.labels.labels) CHECK(y == 0);
        CHECK_FALSE(v.recipe.has_value());
    }
    for (const auto& v : ds.test) {
        REQUIRE(v.recipe.has_value());
        CHECK(v.labels.labels.size() == static_cast<std::size_t>(v.clip.length()));
        for (int t = 0; t < v.clip.length(); ++t)
            CHECK(v.labels.labels[t] == (t >= v.span_begin && t <= v.span_end ? 1 : 0));
    }
}

TEST_CASE("clean test video has all-zero labels") {
    ToySpec s = small_spec();
    s.anomaly_free_test_videos = 1;
    const auto ds = generate_toy(s);
    for (int y : ds.test.back().labels.labels) CHECK(y == 0);
    CHECK_FALSE(ds.test.back().recipe.has_value());
}

TEST_CASE("spec errors") {
    ToySpec s = small_spec();
    s.height = 60;
    try {
        generate_toy(s);
        FAIL("expected a spec error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Spec);
    }
}

TEST_CASE("frames stay in range and objects stay in view") {
    const auto ds = generate_toy(small_spec());
    for (const auto& v : ds.train) {
        for (float x : v.clip.frames().values()) REQUIRE((x >= -1.0f && x <= 1.0f));
        // Background pixels are dark; every frame shows at least one object.
        for (int t = 0; t < v.clip.length(); ++t) {
            const Tensorf f = v.clip.frame(t);
            int bright = 0;
            for (float x : f.values()) bright += x > -0.3f;
            CHECK(bright > 0);
        }
    }
}
