#include <fstream>

#include "checks.hpp"
#include "doctest.h"
#include "helpers.hpp"
#include "pavad/pa_spatial.hpp"

using namespace pavad;

namespace {

// Returns a canned frame of the wrong shape.
class WrongShape : public Inpainter {
public:
    InpainterKind kind() const override { return InpainterKind::ExternalDiffusion; }
    Tensorf fill(const Tensorf&, const Tensorf&, const Tensorf&, std::uint64_t) override { return Tensorf({3, 8, 8}); }
};

// Fills with a constant; records what it was asked.
class Constant : public Inpainter {
public:
    explicit Constant(float v) : v_(v) {}
    InpainterKind kind() const override { return InpainterKind::ExternalDiffusion; }
    Tensorf fill(const Tensorf& frame, const Tensorf& masked, const Tensorf& mask, std::uint64_t) override {
        last_masked = masked;
        last_mask = mask;
        return Tensorf(frame.shape(), v_);
    }
    Tensorf last_masked, last_mask;

private:
    float v_;
};

class FixedBox : public Segmenter {
public:
    std::vector<BinaryMask> segment(const Tensorf& frame) override {
        if (empty) return {};
        BinaryMask box(frame.dim(1), frame.dim(2), 1);
        box.punch(4, 6, 5, 7);
        BinaryMask region(frame.dim(1), frame.dim(2), 0);
        for (int y = 0; y < region.height(); ++y)
            for (int x = 0; x < region.width(); ++x) region.at(y, x) = box.at(y, x) ? 0 : 1;
        return {region};
    }
    bool empty = false;
};

}  // namespace

TEST_CASE("forced single rectangle has the exact area ratio") {
    MaskParams p;
    p.min_strokes = p.max_strokes = 0;
    p.min_rects = p.max_rects = 1;
    p.min_rect_frac = p.max_rect_frac = 10.0 / 64.0;
    p.min_ratio = 0.01;
    p.max_ratio = 0.5;
    const BinaryMask m = gen_random_mask(64, 64, 11, p);
    CHECK(m.hole_pixels() == 100);
    CHECK(m.area_ratio() == doctest::Approx(100.0 / 4096.0).epsilon(1e-12));
}

TEST_CASE("random masks are deterministic and within the area bounds") {
    CHECK(gen_random_mask(64, 64, 5) == gen_random_mask(64, 64, 5));
    CHECK_FALSE(gen_random_mask(64, 64, 5) == gen_random_mask(64, 64, 6));
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        const BinaryMask m = gen_random_mask(64, 64, seed);
        REQUIRE(m.area_ratio() >= 0.05);
        REQUIRE(m.area_ratio() <= 0.35);
        REQUIRE(m.has_both_values());
    }
}

TEST_CASE("mask errors") {
    MaskParams p;
    p.min_ratio = 0.5;
    p.max_ratio = 0.2;
    CHECK_THROWS_AS(gen_random_mask(64, 64, 1, p), Error);
    CHECK_THROWS_AS(gen_random_mask(8, 64, 1), Error);
}

TEST_CASE("object masks") {
    FixedBox seg;
    const Tensorf frame({3, 32, 32});
    const auto m = gen_object_mask(frame, seg);
    REQUIRE(m.has_value());
    const auto box = hole_bounding_box(*m);
    REQUIRE(box.has_value());
    CHECK(*box == Box{4, 6, 5, 7});
    CHECK(m->hole_pixels() == 35);

    seg.empty = true;
    CHECK_FALSE(gen_object_mask(frame, seg).has_value());
}

TEST_CASE("threshold segmenter finds a bright square") {
    Tensorf frame({3, 64, 64}, -1.0f);
    for (int c = 0; c < 3; ++c)
        for (int y = 20; y < 32; ++y)
            for (int x = 10; x < 22; ++x) frame[(static_cast<std::size_t>(c) * 64 + y) * 64 + x] = 1.0f;
    ThresholdSegmenter seg;
    const auto m = gen_object_mask(frame, seg);
    REQUIRE(m.has_value());
    int covered = 0;
    for (int y = 20; y < 32; ++y)
        for (int x = 10; x < 22; ++x) covered += m->at(y, x) == 0;
    CHECK(covered >= 0.9 * 144);
}

TEST_CASE("segmentation falls back to a random mask when nothing is found") {
    FixedBox seg;
    seg.empty = true;
    BuiltinDistorter d;
    SpatialPAOptions o;
    o.mask_source = MaskSource::Segmentation;
    o.segmenter = &seg;
    const VideoClip clip = testutil::random_clip(4, 32, 32, 1);
    const SpatialPA pa = make_spatial_pa(clip, 3, d, o);
    for (const auto& m : pa.masks) CHECK(m.has_both_values());
}

TEST_CASE("identity mask leaves the frame unchanged") {
    BuiltinDistorter d;
    const Tensorf f = testutil::random_tensor({3, 16, 16}, 2);
    CHECK(inpaint_frame(f, BinaryMask::identity(16, 16), d, 1) == f);
}

TEST_CASE("builtin fill changes holes only") {
    BuiltinDistorter d;
    const Tensorf f = testutil::random_tensor({3, 32, 32}, 3);
    BinaryMask m(32, 32);
    m.punch(8, 8, 10, 10);
    const Tensorf out = inpaint_frame(f, m, d, 9);
    double inside = 0.0;
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 32; ++x) {
                const std::size_t i = (static_cast<std::size_t>(c) * 32 + y) * 32 + x;
                if (m.at(y, x)) REQUIRE(out[i] == f[i]);
                else inside += std::abs(out[i] - f[i]);
            }
    CHECK(inside / 300.0 > 0.0);
    CHECK(inpaint_frame(f, m, d, 9) == out);
}

TEST_CASE("backend sees the masked frame and mask; output is composited and clamped") {
    Constant c(5.0f);
    const Tensorf f = testutil::random_tensor({3, 16, 16}, 4);
    BinaryMask m(16, 16);
    m.punch(2, 3, 4, 4);
    const Tensorf out = inpaint_frame(f, m, c, 0);
    CHECK(c.last_mask.shape() == std::vector<int>{1, 16, 16});
    CHECK(c.last_masked[2 * 16 + 3] == 0.0f);
    CHECK(c.last_mask[2 * 16 + 3] == 0.0f);
    CHECK(c.last_mask[0] == 1.0f);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) {
            const float v = out[static_cast<std::size_t>(y) * 16 + x];
            if (m.at(y, x)) CHECK(v == f[static_cast<std::size_t>(y) * 16 + x]);
            else CHECK(v == 1.0f);
        }
}

TEST_CASE("backend with the wrong shape is a contract error") {
    WrongShape w;
    BinaryMask m(16, 16);
    m.punch(0, 0, 4, 4);
    try {
        inpaint_frame(Tensorf({3, 16, 16}), m, w, 0);
        FAIL("expected an inpainter contract error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::InpainterContract);
    }
}

TEST_CASE("spatial PA contracts") {
    BuiltinDistorter d;
    const VideoClip clip = testutil::random_clip(6, 32, 32, 7, "v");
    const Tensorf before = clip.frames();

    const SpatialPA a = make_spatial_pa(clip, 42, d);
    const SpatialPA b = make_spatial_pa(clip, 42, d);
    CHECK(a.clip.frames() == b.clip.frames());
    CHECK(clip.frames() == before);
    CHECK(a.source_video_id == "v");
    CHECK(a.backend == InpainterKind::BuiltinDistorter);
    REQUIRE(a.masks.size() == 6);
    for (std::size_t t = 1; t < 6; ++t) CHECK(a.masks[t] == a.masks[0]);

    const std::size_t plane = 32 * 32;
    for (int t = 0; t < 6; ++t) {
        double mse = 0.0;
        for (int c = 0; c < 3; ++c)
            for (std::size_t i = 0; i < plane; ++i) {
                const std::size_t k = (static_cast<std::size_t>(t) * 3 + c) * plane + i;
                const float d0 = a.clip.frames()[k] - clip.frames()[k];
                if (a.masks[t].values()[i]) REQUIRE(d0 == 0.0f);
                else mse += d0 * d0;
            }
        CHECK(mse > 0.0);
    }

    SpatialPAOptions per_frame;
    per_frame.shared_mask = false;
    const SpatialPA p = make_spatial_pa(clip, 42, d, per_frame);
    CHECK_FALSE(p.masks[0] == p.masks[1]);

    std::vector<BinaryMask> ids(6, BinaryMask::identity(32, 32));
    CHECK(make_spatial_pa(clip, ids, 1, d).clip.frames() == clip.frames());
}

TEST_CASE("compositing over seeded pairs") {
    const auto o = checks::spatial_compositing(50);
    INFO(o.detail);
    CHECK(o.pass);
}

TEST_CASE("subprocess inpainter") {
    testutil::TempDir dir("subprocess");
    const auto script = [&](const std::string& name, const std::string& body) {
        const auto p = dir / name;
        std::ofstream(p) << "#!/bin/sh\n" << body << "\n";
        std::filesystem::permissions(p, std::filesystem::perms::owner_all);
        return p;
    };
    const Tensorf f = testutil::random_tensor({3, 16, 16}, 6);
    BinaryMask m(16, 16);
    m.punch(4, 4, 6, 6);

    SubprocessInpainter echo(script("echo.sh", "cp \"$1/masked.bin\" \"$1/out.bin\""), 50, 30);
    CHECK(echo.kind() == InpainterKind::ExternalDiffusion);
    CHECK_FALSE(echo.concurrent_safe());
    const Tensorf out = inpaint_frame(f, m, echo, 1);
    CHECK(out[5 * 16 + 5] == 0.0f);
    CHECK(out[0] == f[0]);

    SubprocessInpainter broken(script("broken.sh", "exit 3"), 50, 30);
    try {
        inpaint_frame(f, m, broken, 1);
        FAIL("expected an inpainter contract error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::InpainterContract);
    }
    CHECK_THROWS_AS(SubprocessInpainter(dir / "missing.sh"), Error);
}
