#include <set>

#include "checks.hpp"
#include "doctest.h"
#include "helpers.hpp"
#include "pavad/training.hpp"

using namespace pavad;

namespace {

TrainConfig tiny_config() {
    TrainConfig c;
    c.ae_width_divisor = 16;
    c.ae_batch = 4;
    c.ae_epochs = 2;
    c.ae_lr = 1e-3;
    c.clip_length = 16;
    c.clip_stride = 2;
    c.seed = 3;
    return c;
}

std::vector<VideoClip> tiny_videos() {
    // Smooth moving gradient so a small network can learn it quickly.
    std::vector<VideoClip> out;
    for (int v = 0; v < 2; ++v) {
        Tensorf f({22, kChannels, 16, 16});
        for (int t = 0; t < 22; ++t)
            for (int c = 0; c < kChannels; ++c)
                for (int y = 0; y < 16; ++y)
                    for (int x = 0; x < 16; ++x)
                        f[((static_cast<std::size_t>(t) * kChannels + c) * 16 + y) * 16 + x] =
                            0.5f * std::sin(0.3f * (x + t + v) + c) * std::cos(0.2f * y);
        out.emplace_back(std::move(f), "v" + std::to_string(v));
    }
    return out;
}

Tensorf sample_slice(const Tensorf& batch, std::size_t k) {
    const std::size_t per = batch.size() / static_cast<std::size_t>(batch.dim(0));
    std::vector<int> shape(batch.shape().begin() + 1, batch.shape().end());
    shape.insert(shape.begin(), 1);
    return Tensorf(shape, std::vector<float>(batch.storage().begin() + k * per, batch.storage().begin() + (k + 1) * per));
}

}  // namespace

TEST_CASE("batch plans") {
    for (const auto& b : plan_batches(50, 0.0, 1, 2, 8)) CHECK(b.pa_count() == 0);
    for (const auto& b : plan_batches(50, 1.0, 1, 2, 8)) CHECK(b.pa_count() == static_cast<int>(b.samples.size()));

    const auto plans = plan_epoch(50, 0.4, 1, 0, 8);
    CHECK(plans.size() == 7);
    std::set<std::size_t> seen;
    for (const auto& b : plans)
        for (const auto& s : b.samples) seen.insert(s.source);
    CHECK(seen.size() == 50);

    const auto again = plan_epoch(50, 0.4, 1, 0, 8);
    CHECK(again[3].samples[2].source == plans[3].samples[2].source);
    CHECK(again[3].samples[2].seed == plans[3].samples[2].seed);
    CHECK(plan_epoch(50, 0.4, 1, 1, 8)[0].samples[0].seed != plans[0].samples[0].seed);

    const auto o = checks::sampling_statistics();
    INFO(o.detail);
    CHECK(o.pass);
}

TEST_CASE("config validation") {
    TrainConfig c;
    c.p_s = 1.5;
    CHECK_THROWS_AS(c.validate(), Error);
    TrainConfig d;
    d.ae_batch = 0;
    CHECK_THROWS_AS(d.validate(), Error);
    const TrainConfig e = train_config_from_json(to_json(tiny_config()));
    CHECK(e.ae_width_divisor == 16);
    CHECK(e.seed == 3);
}

TEST_CASE("window indexing") {
    CHECK_THROWS_AS(index_windows({20, 10}, 16, 2), Error);
    const auto w = index_windows({20, 16}, 16, 2);
    REQUIRE(w.size() == 4);
    CHECK(w[2].video == 0);
    CHECK(w[2].start == 4);
    CHECK(w[3].video == 1);
}

TEST_CASE("every loss target is the normal clip") {
    BuiltinDistorter d;
    TrainConfig c = tiny_config();
    c.p_s = 0.5;
    c.ae_epochs = 1;
    SpatialSampleSource source(tiny_videos(), c, d);
    int pa_seen = 0;
    TrainHooks hooks;
    hooks.on_loss_inputs = [&](const BatchPlan& plan, const Tensorf& x, const Tensorf& target) {
        for (std::size_t k = 0; k < plan.samples.size(); ++k) {
            const auto& s = plan.samples[k];
            const Tensorf expected = to_network<float>(source.normal(s.source).target);
            REQUIRE(sample_slice(target, k) == expected);
            if (s.flag == SampleFlag::PseudoAnomaly) {
                ++pa_seen;
                CHECK_FALSE(sample_slice(x, k) == expected);
            } else {
                CHECK(sample_slice(x, k) == expected);
            }
        }
    };
    train_spatial_ae(c, source, hooks);
    CHECK(pa_seen > 0);
}

TEST_CASE("normal loss goes down and the run is reproducible") {
    BuiltinDistorter d;
    TrainConfig c = tiny_config();
    c.p_s = 0.0;
    c.ae_epochs = 3;
    SpatialSampleSource source(tiny_videos(), c, d);
    std::vector<double> epoch_loss;
    std::vector<double> steps;
    TrainHooks hooks;
    hooks.on_epoch = [&](const EpochSummary& s) { epoch_loss.push_back(s.mean_loss); };
    hooks.on_step = [&](const StepRecord& r) {
        steps.push_back(r.loss);
        CHECK(r.n_pa == 0);
    };
    const Checkpoint ck = train_spatial_ae(c, source, hooks);
    REQUIRE(epoch_loss.size() == 3);
    CHECK(epoch_loss.back() < epoch_loss.front());
    CHECK(ck.epoch == 3);
    CHECK(ck.kind == "spatial-ae");

    std::vector<double> again;
    TrainHooks h2;
    h2.on_step = [&](const StepRecord& r) { again.push_back(r.loss); };
    train_spatial_ae(c, source, h2);
    CHECK(again == steps);
}

TEST_CASE("resuming reproduces the uninterrupted loss trajectory") {
    BuiltinDistorter d;
    TrainConfig c = tiny_config();
    c.p_s = 0.4;
    SpatialSampleSource source(tiny_videos(), c, d);

    std::vector<double> full;
    TrainHooks h;
    h.on_step = [&](const StepRecord& r) { full.push_back(r.loss); };
    const Checkpoint end = train_spatial_ae(c, source, h);

    testutil::TempDir dir("resume");
    TrainConfig first = c;
    first.ae_epochs = 1;
    std::vector<double> part;
    TrainHooks h1;
    h1.on_step = [&](const StepRecord& r) { part.push_back(r.loss); };
    h1.checkpoint_dir = dir.path();
    train_spatial_ae(first, source, h1);
    const Checkpoint mid = load_checkpoint(dir / "epoch_001.ckpt");
    CHECK(mid.epoch == 1);
    train_spatial_ae(c, source, h1, &mid);
    CHECK(part == full);
    for (const auto& [name, t] : end.arrays)
        if (name.rfind("param/", 0) == 0) CHECK(t == load_checkpoint(dir / "epoch_002.ckpt").get(name));
}

TEST_CASE("temporal autoencoder learns static flow") {
    TrainConfig c = tiny_config();
    c.ae_epochs = 10;
    c.p_t = 0.0;
    c.clip_stride = 1;
    TemporalSampleSource source({FlowField{Tensorf({40, 2, 16, 16}), "still"}}, c);
    CHECK(source.channels() == 3);
    CHECK(source.size() == 26);
    std::vector<double> loss;
    TrainHooks h;
    h.on_epoch = [&](const EpochSummary& s) { loss.push_back(s.mean_loss); };
    train_temporal_ae(c, source, h);
    CHECK(loss.back() < 0.25 * loss.front());
    CHECK(loss.back() < 5e-3);

    FlowField moving{testutil::random_tensor({19, 2, 16, 16}, 5, -3, 3), "m"};
    TemporalSampleSource s2({moving}, c);
    const TemporalPA pa = s2.make_pa(0, 9);
    const AeSample sample = s2.pseudo_anomaly(0, 9);
    CHECK(sample.target == c.codec().encode(s2.window_flow(0).values));
    CHECK(sample.input == c.codec().encode(pa.flow.values));
}

TEST_CASE("discriminator separates blobs and fails on indistinguishable data") {
    TrainConfig c;
    c.disc_epochs = 20;
    std::mt19937_64 rng(1);
    std::normal_distribution<float> g(0.0f, 1.0f);
    auto blob = [&](float centre, int n) {
        Tensorf t({n, 512});
        for (auto& v : t.values()) v = centre + 0.3f * g(rng);
        return t;
    };
    const DiscTrainResult sep = train_discriminator(c, blob(-1.0f, 64), blob(1.0f, 64));
    CHECK(sep.train_accuracy == 1.0);
    CHECK(sep.checkpoint.kind == "discriminator");
    const auto disc = import_discriminator(sep.checkpoint);
    std::vector<float> probe(512, 1.0f);
    CHECK(disc_forward(disc, probe).probability > 0.9);

    const DiscTrainResult same = train_discriminator(c, blob(0.0f, 400), blob(0.0f, 400));
    const auto chance = import_discriminator(same.checkpoint);
    const Tensorf held_normal = blob(0.0f, 1000), held_pa = blob(0.0f, 1000);
    int correct = 0;
    for (int i = 0; i < 1000; ++i) {
        correct += disc_forward(chance, {held_normal.data() + i * 512, 512}).probability < 0.5;
        correct += disc_forward(chance, {held_pa.data() + i * 512, 512}).probability >= 0.5;
    }
    CHECK(correct / 2000.0 == doctest::Approx(0.5).epsilon(0.1));

    const Tensorf f = blob(0.0f, 3);
    CHECK_THROWS_AS(train_discriminator(c, f, std::vector<int>{0, 2, 1}), Error);
    CHECK_THROWS_AS(train_discriminator(c, Tensorf({0, 512}), std::vector<int>{}), Error);
}

TEST_CASE("model export round trip") {
    Autoencoder<float> ae(AutoencoderConfig::scaled(16, 2), 4);
    const Checkpoint ck = export_autoencoder(ae, "temporal-ae");
    Autoencoder<float> back = import_autoencoder(ck);
    CHECK(back.config() == ae.config());
    const Tensorf x = testutil::random_tensor({1, 2, 2, 16, 16}, 1);
    CHECK(back.infer(x) == ae.infer(x));
}
