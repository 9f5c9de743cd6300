#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "pavad/config.hpp"
#include "pavad/evaluation.hpp"
#include "pavad/features.hpp"
#include "pavad/toy.hpp"

namespace pavad {

struct Backends {
    std::unique_ptr<Inpainter> inpainter;
    std::unique_ptr<FlowBackend> flow;
    std::unique_ptr<FeatureAdapter> features;
    std::unique_ptr<Segmenter> segmenter;
};

Backends make_backends(const RunConfig& config);

std::vector<VideoClip> load_split(const RunConfig& config, Split split);

// Flow of one video through the <dataset>/flow/<video_id>.bin cache.
FlowField cached_flow(const RunConfig& config, const VideoClip& video, const FlowBackend& backend);

std::string pa_id(const std::string& video_id, int window_start, std::uint64_t seed);

enum class PaKind { Spatial, Temporal };
PaKind parse_pa_kind(const std::string& name);

struct PaCacheSummary {
    std::filesystem::path manifest;
    std::size_t count = 0;
};

// One PA per PA-flagged sample of the training plan, written under
// <dataset>/pa_spatial or <dataset>/pa_temporal with a manifest.json.
PaCacheSummary generate_pa_cache(const RunConfig& config, PaKind kind);

enum class TrainTarget { SpatialAe, TemporalAe, Discriminator };
TrainTarget parse_train_target(const std::string& name);
const char* to_string(TrainTarget target);

struct TrainOutcome {
    std::filesystem::path checkpoint;  // <out>/checkpoints/<name>.ckpt
    std::filesystem::path log;         // <out>/logs/<name>.jsonl
    std::size_t steps = 0;
};

// `name` defaults to the target name; per-epoch checkpoints go to
// <out>/checkpoints/<name>/epoch_NNN.ckpt.
TrainOutcome run_train(const RunConfig& config, TrainTarget target, const std::optional<std::filesystem::path>& resume = {},
                       std::string name = {});

struct ScoreEvalInputs {
    std::filesystem::path spatial_checkpoint;
    std::filesystem::path temporal_checkpoint;
    std::optional<std::filesystem::path> disc_checkpoint;  // absent: without-discriminator mode
};

// Scores every test video, exports score files and plots, evaluates the run
// against <dataset>/labels and writes the report into config.out_root.
RunEvaluation run_score_eval(const RunConfig& config, const ScoreEvalInputs& inputs);

struct ToyBenchOptions {
    ToySpec spec = default_spec();
    int epochs = 5;
    int batch = 4;
    int width_divisor = 4;
    int clip_stride = 2;
    double lr = 1e-3;
    double min_auc = 0.80;
    bool skip_train = false;

    static ToySpec default_spec() {
        ToySpec s;
        s.test_frames_per_video = 64;
        return s;
    }
};

// Synthetic end-to-end run: PA-trained and p = 0 autoencoders, scored
// without the discriminator. Writes <out>/toy_bench_report.json.
nlohmann::json run_toy_bench(const RunConfig& base, const ToyBenchOptions& options);

}  // namespace pavad
