#include "doctest.h"
#include "helpers.hpp"
#include "pavad/features.hpp"
#include "pavad/io.hpp"

using namespace pavad;

TEST_CASE("builtin features: one 512-d row per frame, deterministic") {
    BuiltinFeatureAdapter a;
    const VideoClip v = testutil::random_clip(20, 32, 32, 1, "v");
    const Tensorf f = a.extract(v);
    CHECK(f.shape() == std::vector<int>{20, 512});
    CHECK(BuiltinFeatureAdapter().extract(v) == f);
    for (float x : f.values()) REQUIRE(std::isfinite(x));
    CHECK(a.describe(v, 0, 1).size() == BuiltinFeatureAdapter::kRawDim);
}

TEST_CASE("builtin features tell appearance apart") {
    BuiltinFeatureAdapter a;
    const VideoClip dark(Tensorf({16, 3, 32, 32}, -0.8f), "d");
    const VideoClip bright(Tensorf({16, 3, 32, 32}, 0.8f), "b");
    const Tensorf fd = a.extract(dark), fb = a.extract(bright);
    double diff = 0.0;
    for (std::size_t i = 0; i < 512; ++i) diff += std::abs(fd[i] - fb[i]);
    CHECK(diff > 1.0);
}

TEST_CASE("file features") {
    testutil::TempDir dir("features");
    FileFeatureAdapter a(dir.path());
    const VideoClip v = testutil::random_clip(4, 16, 16, 2, "v");
    try {
        a.extract(v);
        FAIL("expected a config error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Config);
    }
    const Tensorf f = testutil::random_tensor({4, 512}, 3);
    write_array(a.file_for("v"), f);
    CHECK(a.has("v"));
    CHECK(a.extract(v) == f);
    write_array(a.file_for("v"), Tensorf({3, 512}));
    CHECK_THROWS_AS(a.extract(v), Error);
    write_array(a.file_for("v"), Tensorf({4, 511}));
    CHECK_THROWS_AS(a.extract(v), Error);
}
