// pavad: pseudo-anomaly video anomaly detection pipeline.
//
//   pavad make-toy-data --out DIR
//   pavad generate-pa   --config FILE --kind spatial|temporal
//   pavad train         --config FILE --target spatial-ae|temporal-ae|discriminator
//   pavad score-eval    --config FILE --spatial CKPT --temporal CKPT [--disc CKPT]
//   pavad toy-bench     [--seed N] [--skip-train]
//
// Exit codes: 0 success, 1 configuration/validation error, 2 runtime error.

#include <cstdlib>
#include <iostream>

#include "CLI11.hpp"

#include "pavad/pipeline.hpp"

namespace {

using namespace pavad;

struct Globals {
    std::string config_file;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string data;
    std::string profile;
    std::vector<std::string> overrides;
};

RunConfig resolve(const Globals& g) {
    RunConfig c;
    if (!g.config_file.empty())
        for (const auto& [k, v] : read_config_file(g.config_file)) apply_setting(c, k, v);
    if (!g.profile.empty()) apply_setting(c, "profile", g.profile);
    if (g.seed) apply_setting(c, "seed", std::to_string(*g.seed));
    if (!g.data.empty()) c.dataset_root = g.data;
    if (!g.out.empty()) c.out_root = g.out;
    for (const auto& o : g.overrides) apply_override(c, o);
    c.validate();
    return c;
}

int exit_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Config:
        case ErrorKind::Spec:
        case ErrorKind::Weight: return 1;
        default: return 2;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Pseudo-anomaly video anomaly detection"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config_file, "key = value config file");
    app.add_option("--seed", g.seed, "global seed");
    app.add_option("--out", g.out, "output root");
    app.add_option("--data", g.data, "dataset root");
    app.add_option("--profile", g.profile, "weight profile: ped2, avenue, shanghai, ubnormal");
    app.add_option("--override", g.overrides, "key=value, repeatable")->take_all();

    std::string stage;

    auto* toy = app.add_subcommand("make-toy-data", "write a synthetic dataset");
    int toy_train = 8, toy_test = 6, toy_frames = 32;
    toy->add_option("--train-videos", toy_train, "training videos");
    toy->add_option("--test-videos", toy_test, "test videos");
    toy->add_option("--frames", toy_frames, "frames per video");

    auto* gen = app.add_subcommand("generate-pa", "precompute the pseudo-anomaly cache");
    std::string kind;
    gen->add_option("--kind", kind, "spatial or temporal")->required();

    auto* train = app.add_subcommand("train", "train one model");
    std::string target, resume;
    train->add_option("--target", target, "spatial-ae, temporal-ae or discriminator")->required();
    train->add_option("--resume", resume, "checkpoint to continue from");

    auto* score = app.add_subcommand("score-eval", "score the test split and evaluate");
    std::string spatial, temporal, disc;
    score->add_option("--spatial", spatial, "spatial-ae checkpoint");
    score->add_option("--temporal", temporal, "temporal-ae checkpoint");
    score->add_option("--disc", disc, "discriminator checkpoint; omit for the without-discriminator mode");

    auto* bench = app.add_subcommand("toy-bench", "synthetic end-to-end benchmark");
    bool skip_train = false;
    ToyBenchOptions bench_opts;
    bench->add_flag("--skip-train", skip_train, "reuse checkpoints under --out");
    bench->add_option("--epochs", bench_opts.epochs, "autoencoder epochs");
    bench->add_option("--width-divisor", bench_opts.width_divisor, "divide every hidden width by this");
    bench->add_option("--clip-stride", bench_opts.clip_stride, "stride between training windows");
    bench->add_option("--lr", bench_opts.lr, "autoencoder learning rate");
    bench->add_option("--train-videos", bench_opts.spec.n_train_videos, "synthetic training videos");
    bench->add_option("--test-videos", bench_opts.spec.n_test_videos, "synthetic test videos");
    bench->add_option("--train-frames", bench_opts.spec.frames_per_video, "frames per training video");
    bench->add_option("--test-frames", bench_opts.spec.test_frames_per_video, "frames per test video");

    CLI11_PARSE(app, argc, argv);

    try {
        stage = "config";
        if (*bench && !g.seed) g.seed = 0;
        RunConfig cfg = resolve(g);
        if (*toy) {
            stage = "make-toy-data";
            ToySpec spec;
            spec.n_train_videos = toy_train;
            spec.n_test_videos = toy_test;
            spec.frames_per_video = spec.test_frames_per_video = toy_frames;
            spec.seed = cfg.seed;
            const auto root = g.out.empty() ? std::filesystem::path("toy_data") : cfg.out_root;
            const ToyIndex idx = make_toy_dataset(spec, root);
            std::cout << "wrote " << idx.train.entries.size() << " train and " << idx.test.entries.size()
                      << " test videos to " << root.string() << '\n';
        } else if (*gen) {
            stage = "generate-pa";
            const PaCacheSummary s = generate_pa_cache(cfg, parse_pa_kind(kind));
            std::cout << s.count << " pseudo-anomalies, manifest " << s.manifest.string() << '\n';
        } else if (*train) {
            stage = "train";
            const TrainTarget t = parse_train_target(target);
            const TrainOutcome o =
                run_train(cfg, t, resume.empty() ? std::nullopt : std::optional<std::filesystem::path>(resume));
            std::cout << "checkpoint " << o.checkpoint.string() << ", " << o.steps << " logged steps in "
                      << o.log.string() << '\n';
        } else if (*score) {
            stage = "score-eval";
            const auto ck = cfg.out_root / "checkpoints";
            ScoreEvalInputs in;
            in.spatial_checkpoint = spatial.empty() ? ck / "spatial-ae.ckpt" : std::filesystem::path(spatial);
            in.temporal_checkpoint = temporal.empty() ? ck / "temporal-ae.ckpt" : std::filesystem::path(temporal);
            if (!disc.empty()) in.disc_checkpoint = disc;
            const RunEvaluation run = run_score_eval(cfg, in);
            std::cout << "micro-AUC " << run.result.micro_auc << " over " << run.result.n_frames << " frames ("
                      << (run.weights.uses_discriminator() ? "with" : "without") << " discriminator)\n";
        } else if (*bench) {
            stage = "toy-bench";
            bench_opts.skip_train = skip_train;
            if (g.out.empty()) cfg.out_root = "runs/toy-bench";
            const auto report = run_toy_bench(cfg, bench_opts);
            std::cout << report.dump(2) << '\n';
            return report.at("pass").get<bool>() ? 0 : 2;
        }
    } catch (const pavad::Error& e) {
        std::cerr << "error [" << stage << ", " << to_string(e.kind()) << "]: " << e.what() << '\n';
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error [" << stage << "]: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
