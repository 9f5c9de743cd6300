#include "pavad/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>

#include "pavad/io.hpp"

namespace pavad {

namespace fs = std::filesystem;

Backends make_backends(const RunConfig& config) {
    Backends b;
    if (config.inpainter == "external-diffusion") {
        const fs::path exe = config.resolved_inpainter();
        require(fs::exists(exe), ErrorKind::Config, "inpainter executable not found: " + exe.string());
        b.inpainter = std::make_unique<SubprocessInpainter>(exe, config.inpainter_steps, config.inpainter_timeout_s);
    } else {
        b.inpainter = std::make_unique<BuiltinDistorter>();
    }
    b.flow = std::make_unique<TvL1Flow>();
    if (config.features == "builtin")
        b.features = std::make_unique<BuiltinFeatureAdapter>();
    else
        b.features = std::make_unique<FileFeatureAdapter>(config.resolved_features_dir());
    b.segmenter = std::make_unique<ThresholdSegmenter>();
    return b;
}

namespace {

DatasetIndex index_split(const RunConfig& config, Split split) {
    require(!config.dataset_root.empty() && fs::is_directory(config.dataset_root), ErrorKind::Config,
            "dataset root not found: '" + config.dataset_root.string() + "'");
    require(fs::is_directory(config.dataset_root / to_string(split)), ErrorKind::Config,
            std::string("dataset has no ") + to_string(split) + " split under " + config.dataset_root.string());
    const DatasetIndex index = scan_dataset(config.dataset_root, split);
    require(!index.entries.empty(), ErrorKind::Config,
            std::string("empty ") + to_string(split) + " split under " + config.dataset_root.string());
    return index;
}

}  // namespace

std::vector<VideoClip> load_split(const RunConfig& config, Split split) {
    const DatasetIndex index = index_split(config, split);
    std::vector<VideoClip> videos;
    for (const auto& e : index.entries)
        videos.push_back(load_clip(e.frame_directory, config.frame_height, config.frame_width, e.video_id));
    return videos;
}

FlowField cached_flow(const RunConfig& config, const VideoClip& video, const FlowBackend& backend) {
    const fs::path file = config.dataset_root / "flow" / (video.video_id() + ".bin");
    if (fs::exists(file)) {
        FlowField f = load_flow(file, video.video_id());
        if (f.maps() == video.length() - 1 && f.height() == video.height() && f.width() == video.width()) return f;
    }
    FlowField f = compute_flow(video, backend);
    save_flow(file, f);
    return f;
}

std::string pa_id(const std::string& video_id, int window_start, std::uint64_t seed) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "_w%04d_%016llx", window_start, static_cast<unsigned long long>(seed));
    return video_id + buf;
}

PaKind parse_pa_kind(const std::string& name) {
    if (name == "spatial") return PaKind::Spatial;
    if (name == "temporal") return PaKind::Temporal;
    fail(ErrorKind::Config, "unknown PA kind '" + name + "' (spatial, temporal)");
}

TrainTarget parse_train_target(const std::string& name) {
    if (name == "spatial-ae") return TrainTarget::SpatialAe;
    if (name == "temporal-ae") return TrainTarget::TemporalAe;
    if (name == "discriminator") return TrainTarget::Discriminator;
    fail(ErrorKind::Config, "unknown train target '" + name + "' (spatial-ae, temporal-ae, discriminator)");
}

const char* to_string(TrainTarget target) {
    switch (target) {
        case TrainTarget::SpatialAe: return "spatial-ae";
        case TrainTarget::TemporalAe: return "temporal-ae";
        case TrainTarget::Discriminator: return "discriminator";
    }
    return "?";
}

namespace {

SpatialPAOptions spatial_options(const RunConfig& config, Backends& b) {
    SpatialPAOptions o;
    o.mask_source = config.mask_source;
    o.shared_mask = config.train.shared_mask;
    o.segmenter = b.segmenter.get();
    return o;
}

void attach_pa_cache(const RunConfig& config, SpatialSampleSource& source) {
    if (!config.use_pa_cache) return;
    const fs::path dir = config.dataset_root / "pa_spatial";
    source.set_cache([dir, &source, config](const WindowRef& w, std::uint64_t seed) -> std::optional<VideoClip> {
        const std::string id = pa_id(source.video(w.video).video_id(), w.start, seed);
        if (!fs::is_directory(dir / id)) return std::nullopt;
        return load_clip(dir / id, config.frame_height, config.frame_width, id);
    });
}

std::vector<FlowField> train_flows(const RunConfig& config, const std::vector<VideoClip>& videos,
                                   const FlowBackend& backend) {
    std::vector<FlowField> flows;
    for (const auto& v : videos) flows.push_back(cached_flow(config, v, backend));
    return flows;
}

void write_manifest(const fs::path& file, const nlohmann::json& manifest) {
    std::ofstream(file) << manifest.dump(2) << '\n';
}

nlohmann::json read_json(const fs::path& file, ErrorKind kind) {
    std::ifstream in(file);
    require(in.good(), kind, "cannot open " + file.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        fail(kind, "malformed " + file.string() + ": " + e.what());
    }
}

void append_rows(std::vector<float>& rows, const Tensorf& f, const std::string& what) {
    require(f.rank() == 2 && f.dim(1) == kFeatureDim, ErrorKind::Shape,
            what + " features must be N x 512, got " + shape_string(f.shape()));
    rows.insert(rows.end(), f.storage().begin(), f.storage().end());
}

Tensorf rows_tensor(std::vector<float> rows) {
    const int n = static_cast<int>(rows.size() / kFeatureDim);
    return Tensorf({n, kFeatureDim}, std::move(rows));
}

// Normal features of every training frame and features of spatial (and
// optionally temporal) PAs.
std::pair<Tensorf, Tensorf> discriminator_features(const RunConfig& config, Backends& b) {
    const auto videos = load_split(config, Split::Train);
    const bool from_files = config.features == "file";
    const fs::path fdir = config.resolved_features_dir();
    std::vector<float> normal, pa;

    if (from_files) {
        std::string missing;
        for (const auto& v : videos)
            if (!fs::exists(fdir / (v.video_id() + ".bin"))) missing += " " + v.video_id();
        require(missing.empty(), ErrorKind::Config,
                "discriminator needs feature files under " + fdir.string() + "; missing:" + missing);
    }
    for (const auto& v : videos) append_rows(normal, b.features->extract(v), v.video_id());

    const int L = config.train.clip_length;
    auto pa_from_manifest = [&](const char* kind) {
        const fs::path manifest = config.dataset_root / (std::string("pa_") + kind) / "manifest.json";
        require(fs::exists(manifest), ErrorKind::Config,
                std::string("file features need the ") + kind + " PA cache; run generate-pa --kind " + kind);
        const auto j = read_json(manifest, ErrorKind::Config);
        for (const auto& e : j.at("entries")) {
            const fs::path f = fdir / (std::string("pa_") + kind) / (e.at("id").get<std::string>() + ".bin");
            require(fs::exists(f), ErrorKind::Config, "missing PA feature file " + f.string());
            append_rows(pa, read_array(f), f.string());
        }
    };

    if (from_files) {
        pa_from_manifest("spatial");
    } else {
        const SpatialPAOptions opts = spatial_options(config, b);
        for (std::size_t v = 0; v < videos.size(); ++v) {
            if (videos[v].length() < L) continue;
            for (int start = 0; start + L <= videos[v].length(); start += L) {
                const auto seed = derive_seed(config.seed, 0xfea7, v, start);
                const SpatialPA p = make_spatial_pa(videos[v].slice(start, L), seed, *b.inpainter, opts);
                append_rows(pa, b.features->extract(p.clip), p.clip.video_id());
            }
        }
    }
    if (config.train.disc_include_temporal) {
        if (from_files) {
            pa_from_manifest("temporal");
        } else {
            require(config.train.flow_pad_to_three, ErrorKind::Config,
                    "temporal PA features need 3-channel flow encoding");
            const FlowCodec codec = config.train.codec();
            const auto flows = train_flows(config, videos, *b.flow);
            for (std::size_t v = 0; v < flows.size(); ++v) {
                const Tensorf padded = pad_flow_to_frames(flows[v]);
                const std::size_t per = padded.size() / static_cast<std::size_t>(padded.dim(0));
                for (int start = 0; start + L <= padded.dim(0); start += L) {
                    const auto first = padded.storage().begin() + static_cast<std::ptrdiff_t>(start * per);
                    FlowField w{Tensorf({L, 2, padded.dim(2), padded.dim(3)},
                                        std::vector<float>(first, first + static_cast<std::ptrdiff_t>(L * per))),
                                flows[v].source_video_id};
                    const TemporalPA p = make_temporal_pa(w, std::nullopt, derive_seed(config.seed, 0xfea8, v, start));
                    const VideoClip coded(codec.encode(p.flow.values), pa_id(w.source_video_id, start, p.seed));
                    append_rows(pa, b.features->extract(coded), coded.video_id());
                }
            }
        }
    }
    return {rows_tensor(std::move(normal)), rows_tensor(std::move(pa))};
}

}  // namespace

PaCacheSummary generate_pa_cache(const RunConfig& config, PaKind kind) {
    config.validate();
    const auto videos = load_split(config, Split::Train);
    Backends b = make_backends(config);
    const TrainConfig& tc = config.train;
    const fs::path dir = config.dataset_root / (kind == PaKind::Spatial ? "pa_spatial" : "pa_temporal");

    nlohmann::json manifest;
    manifest["kind"] = kind == PaKind::Spatial ? "spatial" : "temporal";
    manifest["config"] = to_json(config);
    manifest["entries"] = nlohmann::json::array();

    if (kind == PaKind::Spatial) {
        const SpatialPAOptions opts = spatial_options(config, b);
        SpatialSampleSource source(videos, tc, *b.inpainter, opts);
        const auto plans = plan_batches(source.size(), tc.p_s, tc.seed, tc.ae_epochs, tc.ae_batch);
        fs::remove_all(dir);
        fs::create_directories(dir);
        manifest["backend"] = to_string(b.inpainter->kind());
        manifest["mask_source"] = to_string(config.mask_source);
        for (const auto& plan : plans)
            for (const auto& s : plan.samples) {
                if (s.flag != SampleFlag::PseudoAnomaly) continue;
                const WindowRef& w = source.window(s.source);
                const VideoClip& video = source.video(w.video);
                const SpatialPA p = make_spatial_pa(video.slice(w.start, tc.clip_length), s.seed, *b.inpainter, opts);
                const std::string id = pa_id(video.video_id(), w.start, s.seed);
                write_frames(dir / id, p.clip);
                manifest["entries"].push_back({{"id", id},
                                               {"video_id", video.video_id()},
                                               {"window_start", w.start},
                                               {"seed", s.seed},
                                               {"epoch", plan.epoch},
                                               {"step", plan.step},
                                               {"backend", to_string(p.backend)},
                                               {"mask_source", to_string(p.mask_source)}});
            }
    } else {
        const auto flows = train_flows(config, videos, *b.flow);
        TemporalSampleSource source(flows, tc);
        const auto plans = plan_batches(source.size(), tc.p_t, tc.seed, tc.ae_epochs, tc.ae_batch);
        fs::remove_all(dir);
        fs::create_directories(dir);
        manifest["backend"] = b.flow->name();
        for (const auto& plan : plans)
            for (const auto& s : plan.samples) {
                if (s.flag != SampleFlag::PseudoAnomaly) continue;
                const WindowRef& w = source.window(s.source);
                const TemporalPA p = source.make_pa(s.source, s.seed);
                const std::string id = pa_id(p.flow.source_video_id, w.start, s.seed);
                save_flow(dir / (id + ".bin"), p.flow);
                auto patch = [](const PatchSpec& q) { return nlohmann::json{q.top, q.left, q.height, q.width}; };
                manifest["entries"].push_back({{"id", id},
                                               {"video_id", p.flow.source_video_id},
                                               {"window_start", w.start},
                                               {"seed", s.seed},
                                               {"epoch", plan.epoch},
                                               {"step", plan.step},
                                               {"lambda", p.lambda},
                                               {"src_patch", patch(p.src_patch)},
                                               {"rnd_patch", patch(p.rnd_patch)}});
            }
    }
    manifest["count"] = manifest["entries"].size();
    write_manifest(dir / "manifest.json", manifest);
    return {dir / "manifest.json", manifest["entries"].size()};
}

TrainOutcome run_train(const RunConfig& config, TrainTarget target, const std::optional<fs::path>& resume,
                       std::string name) {
    config.validate();
    if (name.empty()) name = to_string(target);
    const fs::path ckdir = config.out_root / "checkpoints" / name;
    TrainOutcome outcome;
    outcome.checkpoint = config.out_root / "checkpoints" / (name + ".ckpt");
    outcome.log = config.out_root / "logs" / (name + ".jsonl");

    index_split(config, Split::Train);  // fail before creating any output
    std::optional<Checkpoint> resumed;
    if (resume) {
        require(fs::exists(*resume), ErrorKind::Config, "resume checkpoint not found: " + resume->string());
        resumed = load_checkpoint(*resume);
    }
    fs::create_directories(outcome.log.parent_path());
    std::ofstream log(outcome.log, resume ? std::ios::app : std::ios::trunc);
    require(log.good(), ErrorKind::Config, "cannot write training log " + outcome.log.string());

    TrainHooks hooks;
    hooks.checkpoint_dir = ckdir;
    hooks.on_step = [&](const StepRecord& r) {
        nlohmann::json j = to_json(r);
        j["target"] = name;
        log << j.dump() << '\n';
        ++outcome.steps;
    };
    if (target != TrainTarget::Discriminator) fs::create_directories(ckdir);

    Backends b = make_backends(config);
    Checkpoint ckpt;
    switch (target) {
        case TrainTarget::SpatialAe: {
            SpatialSampleSource source(load_split(config, Split::Train), config.train, *b.inpainter,
                                       spatial_options(config, b));
            attach_pa_cache(config, source);
            ckpt = train_spatial_ae(config.train, source, hooks, resumed ? &*resumed : nullptr);
            break;
        }
        case TrainTarget::TemporalAe: {
            const auto videos = load_split(config, Split::Train);
            TemporalSampleSource source(train_flows(config, videos, *b.flow), config.train);
            ckpt = train_temporal_ae(config.train, source, hooks, resumed ? &*resumed : nullptr);
            break;
        }
        case TrainTarget::Discriminator: {
            const auto [normal, pa] = discriminator_features(config, b);
            hooks.checkpoint_dir.reset();
            ckpt = train_discriminator(config.train, normal, pa, hooks).checkpoint;
            break;
        }
    }
    ckpt.meta["run_config"] = to_json(config);
    save_checkpoint(outcome.checkpoint, ckpt);
    return outcome;
}

RunEvaluation run_score_eval(const RunConfig& config, const ScoreEvalInputs& inputs) {
    config.validate();
    auto load = [](const fs::path& p, const char* what) {
        require(fs::exists(p), ErrorKind::Config, std::string("missing ") + what + " checkpoint: " + p.string());
        return load_checkpoint(p);
    };
    const Checkpoint sck = load(inputs.spatial_checkpoint, "spatial-ae");
    const Checkpoint tck = load(inputs.temporal_checkpoint, "temporal-ae");
    require(sck.kind == "spatial-ae", ErrorKind::Config, inputs.spatial_checkpoint.string() + " is a " + sck.kind);
    require(tck.kind == "temporal-ae", ErrorKind::Config, inputs.temporal_checkpoint.string() + " is a " + tck.kind);
    const Autoencoder<float> spatial = import_autoencoder(sck);
    const Autoencoder<float> temporal = import_autoencoder(tck);

    AggWeights weights = config.weights;
    std::optional<Discriminator<float>> disc;
    if (inputs.disc_checkpoint) {
        const Checkpoint dck = load(*inputs.disc_checkpoint, "discriminator");
        disc = import_discriminator(dck);
    } else {
        weights = weights.without_discriminator();
    }
    weights.validate();

    FlowCodec codec = config.train.codec();
    codec.max_px = tck.meta.value("flow_max_px", codec.max_px);
    codec.pad_to_three = tck.meta.value("flow_pad_to_three", codec.pad_to_three);

    Backends b = make_backends(config);
    const auto videos = load_split(config, Split::Test);
    ScoreOptions opts;
    opts.peak = config.psnr_peak;
    opts.batch = config.score_batch;

    std::vector<ScoreSeries> series;
    for (const auto& v : videos) {
        ScoreSeries s;
        s.video_id = v.video_id();
        const ComponentSeries recon = score_recon(v, spatial, opts);
        const ComponentSeries motion = score_flow(cached_flow(config, v, *b.flow), temporal, codec, opts);
        s.w1 = recon.normalized;
        s.psnr_db = recon.raw;
        s.w2 = motion.normalized;
        s.flow_mse = motion.raw;
        s.w3 = disc ? score_semantic(v, *b.features, *disc) : std::vector<double>(s.w1.size(), 0.0);
        s.agg = aggregate(s.w1, s.w2, s.w3, weights);
        series.push_back(std::move(s));
    }

    nlohmann::json echo = to_json(config);
    echo["mode"] = disc ? "with-discriminator" : "without-discriminator";
    echo["eta1"] = weights.eta1;
    echo["eta2"] = weights.eta2;
    echo["eta3"] = weights.eta3;
    echo["spatial_checkpoint"] = inputs.spatial_checkpoint.string();
    echo["temporal_checkpoint"] = inputs.temporal_checkpoint.string();
    echo["disc_checkpoint"] = inputs.disc_checkpoint ? inputs.disc_checkpoint->string() : "";

    const fs::path index = export_scores(config.out_root, series, weights, echo);
    const fs::path labels = config.dataset_root / "labels";
    RunEvaluation run = evaluate_run(index, labels, weights);
    write_eval_report(config.out_root, run, echo);
    for (const auto& s : series)
        write_score_plot(config.out_root / "plots" / (s.video_id + ".png"), s,
                         load_labels(labels / (s.video_id + ".json"), s.video_id).labels);
    return run;
}

nlohmann::json run_toy_bench(const RunConfig& base, const ToyBenchOptions& options) {
    const auto t0 = std::chrono::steady_clock::now();
    const fs::path out = base.out_root;
    const fs::path data = out / "toy_data";

    ToySpec spec = options.spec;
    spec.seed = base.seed;
    spec.validate();
    if (!options.skip_train || !fs::exists(data / "train")) make_toy_dataset(spec, data);

    RunConfig cfg = base;
    cfg.dataset_root = data;
    cfg.frame_height = spec.height;
    cfg.frame_width = spec.width;
    cfg.features = "builtin";
    cfg.inpainter = "builtin-distorter";
    cfg.use_pa_cache = false;
    cfg.train.seed = base.seed;
    cfg.train.ae_epochs = options.epochs;
    cfg.train.ae_batch = options.batch;
    cfg.train.ae_width_divisor = options.width_divisor;
    cfg.train.ae_lr = options.lr;
    cfg.train.clip_stride = options.clip_stride;
    cfg.validate();

    RunConfig baseline = cfg;
    baseline.train.p_s = 0.0;
    baseline.train.p_t = 0.0;

    const fs::path ck = out / "checkpoints";
    const std::vector<std::pair<const RunConfig*, std::pair<TrainTarget, std::string>>> jobs = {
        {&cfg, {TrainTarget::SpatialAe, "spatial-ae"}},
        {&cfg, {TrainTarget::TemporalAe, "temporal-ae"}},
        {&baseline, {TrainTarget::SpatialAe, "spatial-ae-baseline"}},
        {&baseline, {TrainTarget::TemporalAe, "temporal-ae-baseline"}},
    };
    if (options.skip_train) {
        for (const auto& [c, job] : jobs)
            require(fs::exists(ck / (job.second + ".ckpt")), ErrorKind::Config,
                    "--skip-train needs cached checkpoint " + (ck / (job.second + ".ckpt")).string());
    } else {
        for (const auto& [c, job] : jobs) {
            RunConfig run = *c;
            run.out_root = out;
            run_train(run, job.first, std::nullopt, job.second);
        }
    }

    auto evaluate = [&](RunConfig c, const std::string& suffix, const fs::path& sub) {
        c.out_root = out / sub;
        return run_score_eval(c, {ck / ("spatial-ae" + suffix + ".ckpt"), ck / ("temporal-ae" + suffix + ".ckpt"),
                                  std::nullopt});
    };
    const RunEvaluation with_pa = evaluate(cfg, "", "with_pa");
    const RunEvaluation without_pa = evaluate(baseline, "-baseline", "without_pa");
    const double runtime =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const double a = with_pa.result.micro_auc, b = without_pa.result.micro_auc;
    nlohmann::json report;
    report["auc_with_pa"] = a;
    report["auc_without_pa"] = b;
    report["runtime_s"] = runtime;
    report["min_auc"] = options.min_auc;
    report["pass_min_auc"] = a >= options.min_auc;
    report["pass_vs_baseline"] = a >= b;
    report["pass"] = a >= options.min_auc && a >= b;
    report["seed"] = base.seed;
    report["weights"] = {with_pa.weights.eta1, with_pa.weights.eta2, with_pa.weights.eta3};
    report["settings"] = {{"epochs", options.epochs},
                          {"batch", options.batch},
                          {"width_divisor", options.width_divisor},
                          {"clip_stride", options.clip_stride},
                          {"lr", options.lr},
                          {"train_videos", spec.n_train_videos},
                          {"test_videos", spec.n_test_videos},
                          {"train_frames", spec.frames_per_video},
                          {"test_frames", spec.test_frames_per_video},
                          {"height", spec.height},
                          {"width", spec.width}};
    report["config"] = to_json(cfg);
    fs::create_directories(out);
    std::ofstream(out / "toy_bench_report.json") << report.dump(2) << '\n';
    return report;
}

}  // namespace pavad
