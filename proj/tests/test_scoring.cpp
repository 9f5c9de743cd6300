#include "checks.hpp"
#include "doctest.h"
#include "helpers.hpp"
#include "pavad/scoring.hpp"

using namespace pavad;

TEST_CASE("equation suite") {
    const auto o = checks::equations();
    INFO(o.detail);
    CHECK(o.pass);
}

TEST_CASE("psnr details") {
    CHECK(psnr_from_mse(0.0, 1.0) == doctest::Approx(100.0));
    CHECK(psnr_from_mse(0.01, 1.0) == doctest::Approx(20.0));
    CHECK_THROWS_AS(psnr(Tensorf({3, 16, 16}), Tensorf({3, 16, 32})), Error);
    CHECK(parse_psnr_peak(to_string(PsnrPeak::Unit)) == PsnrPeak::Unit);
    CHECK_THROWS_AS(parse_psnr_peak("max"), Error);
    CHECK(min_max_normalize(std::vector<double>{3, 3, 3}) == std::vector<double>{0, 0, 0});
}

TEST_CASE("window bookkeeping") {
    const auto o = checks::window_bookkeeping();
    INFO(o.detail);
    CHECK(o.pass);
    CHECK_THROWS_AS(assign_windows(15), Error);
    CHECK(assign_windows(20).source_frame(0) == 8);
    CHECK(assign_windows(20).source_frame(19) == 12);
}

TEST_CASE("flow error normaliser covers both components") {
    // R' = 2 * H * W per scored map; for 64 x 64 that is 8192.
    Autoencoder<float> ae(AutoencoderConfig::scaled(16), 1);
    FlowField f{Tensorf({19, 2, 64, 64}), "z"};
    const ComponentSeries s = score_flow(f, ae, FlowCodec{});
    REQUIRE(s.raw.size() == 20);

    // Recompute the first window's error by hand over the two real channels.
    const FlowCodec codec;
    const Tensorf padded = pad_flow_to_frames(f);
    const Tensorf coded = codec.encode(padded);
    Tensorf window({16, 3, 64, 64});
    std::copy(coded.storage().begin(), coded.storage().begin() + static_cast<std::ptrdiff_t>(window.size()), window.data());
    const Tensorf recon = from_network(ae.infer(to_network<float>(window)));
    const Tensorf px = codec.decode(recon);
    double sum = 0.0;
    for (std::size_t i = 0; i < 8192; ++i) {
        const double d = px[8 * 8192 + i];
        sum += d * d;
    }
    CHECK(s.raw[0] == doctest::Approx(sum / 8192.0).epsilon(1e-6));
}

TEST_CASE("component series are per frame and normalised") {
    Autoencoder<float> ae(AutoencoderConfig::scaled(16), 2);
    const VideoClip v = testutil::random_clip(20, 16, 16, 3);
    const ComponentSeries r = score_recon(v, ae);
    REQUIRE(r.raw.size() == 20);
    REQUIRE(r.normalized.size() == 20);
    for (int t = 0; t < 8; ++t) CHECK(r.normalized[t] == r.normalized[8]);
    for (int t = 13; t < 20; ++t) CHECK(r.normalized[t] == r.normalized[12]);
    double lo = 1.0, hi = 0.0;
    for (double x : r.normalized) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    CHECK(lo == 0.0);
    CHECK(hi == 1.0);

    ScoreOptions one;
    one.batch = 1;
    CHECK(score_recon(v, ae, one).raw == r.raw);
    CHECK_THROWS_AS(score_recon(testutil::random_clip(10, 16, 16, 3), ae), Error);
}

TEST_CASE("semantic score is the discriminator probability") {
    const auto d = Discriminator<float>::zeros();
    const auto s = score_semantic(Tensorf({5, 512}), d);
    CHECK(s == std::vector<double>(5, 0.5));
    CHECK_THROWS_AS(score_semantic(Tensorf({5, 100}), d), Error);
}

TEST_CASE("aggregation weights") {
    CHECK(weight_profile("ped2") == AggWeights{0.65, 0.25, 0.1});
    CHECK(weight_profile("avenue") == AggWeights{0.45, 0.5, 0.05});
    CHECK(weight_profile("shanghai") == AggWeights{0.85, 0.13, 0.02});
    CHECK(weight_profile("ubnormal") == AggWeights{0.4, 0.5, 0.1});
    CHECK_THROWS_AS(weight_profile("nope"), Error);

    const std::vector<double> a = {1.0}, b = {0.2}, c = {0.4};
    CHECK(aggregate(a, b, c, weight_profile("avenue"))[0] == doctest::Approx(0.45 + 0.1 + 0.02));

    try {
        aggregate(a, b, c, AggWeights{0.5, 0.5, 0.5});
        FAIL("expected a weight error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Weight);
    }
    CHECK_THROWS_AS(AggWeights({-0.1, 1.0, 0.1}).validate(), Error);
    const AggWeights w = weight_profile("ped2").without_discriminator();
    CHECK(w.eta1 + w.eta2 == doctest::Approx(1.0));
    CHECK_FALSE(w.uses_discriminator());
}

TEST_CASE("aggregate is monotone in every component") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0, 1);
    for (const auto& name : weight_profile_names()) {
        const AggWeights w = weight_profile(name);
        for (int k = 0; k < 100; ++k) {
            std::vector<double> x = {u(rng)}, y = {u(rng)}, z = {u(rng)};
            const double base = aggregate(x, y, z, w)[0];
            std::vector<double> x2 = {x[0] + 0.1}, y2 = {y[0] + 0.1}, z2 = {z[0] + 0.1};
            CHECK(aggregate(x2, y, z, w)[0] >= base);
            CHECK(aggregate(x, y2, z, w)[0] >= base);
            CHECK(aggregate(x, y, z2, w)[0] >= base);
        }
    }
}

TEST_CASE("score export round trip") {
    testutil::TempDir dir("scores");
    ScoreSeries s;
    s.video_id = "a";
    s.w1 = {0.1, 0.2};
    s.w2 = {0.3, 0.4};
    s.w3 = {0.5, 0.6};
    s.agg = aggregate(s.w1, s.w2, s.w3, AggWeights{});
    s.psnr_db = {30, 31};
    s.flow_mse = {0.01, 0.02};
    const auto index = export_scores(dir.path(), {s}, AggWeights{}, {{"k", 1}});
    CHECK(std::filesystem::exists(index));
    CHECK(std::filesystem::exists(dir / "scores/a.json"));
    const ScoreSeries back = score_series_from_json(to_json(s, AggWeights{}));
    CHECK(back.w2 == s.w2);
    CHECK(back.agg == s.agg);
}
