#include <algorithm>

#include "checks.hpp"
#include "doctest.h"
#include "helpers.hpp"
#include "pavad/pa_temporal.hpp"

using namespace pavad;

namespace {

FlowField random_flow(int maps, int h, int w, std::uint64_t seed) {
    return {testutil::random_tensor({maps, 2, h, w}, seed, -6.0f, 6.0f), "f"};
}

bool inside(const PatchSpec& p, int y, int x) {
    return y >= p.top && y < p.top + p.height && x >= p.left && x < p.left + p.width;
}

}  // namespace

TEST_CASE("mixup endpoints") {
    const FlowField f = random_flow(3, 32, 32, 1);
    const PatchSpec src{2, 3, 8, 9}, rnd{20, 18, 8, 9};
    CHECK(mixup_patch(f, src, rnd, 1.0).values == f.values);

    const FlowField g = mixup_patch(f, src, rnd, 0.0);
    for (int t = 0; t < 3; ++t)
        for (int c = 0; c < 2; ++c)
            for (int y = 0; y < 8; ++y)
                for (int x = 0; x < 9; ++x)
                    CHECK(g.values.at(t, c, src.top + y, src.left + x) == f.values.at(t, c, rnd.top + y, rnd.left + x));
}

TEST_CASE("mixup is convex inside the patch and leaves the rest alone") {
    const FlowField f = random_flow(2, 32, 32, 2);
    const PatchSpec src{10, 12, 6, 5}, rnd{12, 14, 6, 5};  // overlapping
    for (double lambda : {0.13, 0.5, 0.87}) {
        const FlowField g = mixup_patch(f, src, rnd, lambda);
        for (int t = 0; t < 2; ++t)
            for (int c = 0; c < 2; ++c)
                for (int y = 0; y < 32; ++y)
                    for (int x = 0; x < 32; ++x) {
                        const float v = g.values.at(t, c, y, x);
                        if (!inside(src, y, x)) {
                            REQUIRE(v == f.values.at(t, c, y, x));
                            continue;
                        }
                        const float a = f.values.at(t, c, y, x);
                        const float b = f.values.at(t, c, rnd.top + y - src.top, rnd.left + x - src.left);
                        REQUIRE(v >= std::min(a, b));
                        REQUIRE(v <= std::max(a, b));
                        REQUIRE(v == doctest::Approx(lambda * a + (1 - lambda) * b).epsilon(1e-5));
                    }
    }
}

TEST_CASE("mixup input validation") {
    const FlowField f = random_flow(1, 16, 16, 3);
    CHECK_THROWS_AS(mixup_patch(f, {0, 0, 4, 4}, {0, 0, 4, 5}, 0.5), Error);
    CHECK_THROWS_AS(mixup_patch(f, {14, 0, 4, 4}, {0, 0, 4, 4}, 0.5), Error);
    CHECK_THROWS_AS(mixup_patch(f, {0, 0, 4, 4}, {0, 0, 4, 4}, 1.5), Error);
}

TEST_CASE("lambda follows Beta(0.4, 0.4)") {
    const int n = 20000;
    double sum = 0.0, sq = 0.0;
    int extreme = 0;
    for (int i = 0; i < n; ++i) {
        const double l = sample_lambda(static_cast<std::uint64_t>(i));
        REQUIRE(l >= 0.0);
        REQUIRE(l <= 1.0);
        sum += l;
        sq += l * l;
        extreme += l < 0.1 || l > 0.9;
    }
    const double mean = sum / n, var = sq / n - mean * mean;
    CHECK(mean == doctest::Approx(0.5).epsilon(0.02));
    CHECK(var == doctest::Approx(1.0 / 7.2).epsilon(0.05));
    // Beta(0.4, 0.4) puts about 45% of its mass outside [0.1, 0.9].
    CHECK(extreme / static_cast<double>(n) == doctest::Approx(0.45).epsilon(0.08));
    CHECK(sample_lambda(7) == sample_lambda(7));
}

TEST_CASE("temporal PA uses the mask bounding box and is deterministic") {
    const FlowField f = random_flow(4, 32, 32, 4);
    BinaryMask m(32, 32);
    m.punch(5, 6, 7, 8);
    const TemporalPA a = make_temporal_pa(f, m, 11);
    CHECK(a.src_patch == PatchSpec{5, 6, 7, 8});
    CHECK(a.rnd_patch.height == 7);
    CHECK(a.rnd_patch.width == 8);
    CHECK(a.flow.values == make_temporal_pa(f, m, 11).flow.values);
    CHECK(a.flow.values == mixup_patch(f, a.src_patch, a.rnd_patch, a.lambda).values);

    const TemporalPA r = make_temporal_pa(f, std::nullopt, 12);
    CHECK(r.src_patch.height >= 4);
    CHECK(r.src_patch.height <= 16);
    CHECK(r.src_patch.width >= 4);
    CHECK(r.src_patch.width <= 16);

    TemporalPAOptions per_map;
    per_map.per_map_resampling = true;
    const TemporalPA p = make_temporal_pa(f, std::nullopt, 13, per_map);
    CHECK(p.flow.maps() == 4);
}

TEST_CASE("mixup properties over random triples") {
    const auto o = checks::mixup_properties(200);
    INFO(o.detail);
    CHECK(o.pass);
}
