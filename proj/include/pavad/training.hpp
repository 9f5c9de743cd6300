#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "pavad/checkpoint.hpp"
#include "pavad/flow.hpp"
#include "pavad/models.hpp"
#include "pavad/pa_spatial.hpp"
#include "pavad/pa_temporal.hpp"

namespace pavad {

struct TrainConfig {
    double p_s = 0.4;
    double p_t = 0.5;

    double ae_lr = 1e-4;
    int ae_epochs = 25;
    int ae_batch = 24;
    int ae_width_divisor = 1;

    double disc_lr = 0.02;
    double disc_momentum = 0.9;
    double disc_weight_decay = 1e-3;
    int disc_epochs = 20;
    int disc_batch = 16;
    bool disc_include_temporal = false;

    int clip_length = 16;
    int clip_stride = 1;  // stride between training windows
    bool shared_mask = true;
    bool temporal_pa_per_map = false;
    float flow_max_px = 8.0f;
    bool flow_pad_to_three = true;
    std::uint64_t seed = 0;

    void validate() const;
    AutoencoderConfig ae_config(int in_channels) const { return AutoencoderConfig::scaled(ae_width_divisor, in_channels); }
    FlowCodec codec() const { return {flow_max_px, flow_pad_to_three}; }
};

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

enum class SampleFlag { Normal, PseudoAnomaly };

struct PlannedSample {
    std::size_t source = 0;  // index into the sample source
    SampleFlag flag = SampleFlag::Normal;
    std::uint64_t seed = 0;
};

struct BatchPlan {
    int epoch = 0;
    int step = 0;  // within the epoch
    std::vector<PlannedSample> samples;

    int pa_count() const;
};

// Per epoch: a seeded shuffle of [0, n_samples) cut into batches, with an
// independent Bernoulli(p) pseudo-anomaly flag and a derived seed per sample.
std::vector<BatchPlan> plan_batches(std::size_t n_samples, double p, std::uint64_t seed, int epochs, int batch);
std::vector<BatchPlan> plan_epoch(std::size_t n_samples, double p, std::uint64_t seed, int epoch, int batch);

// A training sample is an (input, target) pair of T x C x H x W tensors; the
// target is always the normal data.
struct AeSample {
    Tensorf input;
    Tensorf target;
};

class AeSampleSource {
public:
    virtual ~AeSampleSource() = default;
    virtual std::size_t size() const = 0;
    virtual int channels() const = 0;
    virtual AeSample normal(std::size_t i) const = 0;
    virtual AeSample pseudo_anomaly(std::size_t i, std::uint64_t seed) const = 0;
};

struct WindowRef {
    std::size_t video = 0;
    int start = 0;
};

std::vector<WindowRef> index_windows(const std::vector<int>& lengths, int length, int stride);

// Frame windows; PA inputs come from make_spatial_pa or a PA cache lookup.
class SpatialSampleSource : public AeSampleSource {
public:
    using CacheLookup = std::function<std::optional<VideoClip>(const WindowRef&, std::uint64_t seed)>;

    SpatialSampleSource(std::vector<VideoClip> videos, const TrainConfig& config, Inpainter& inpainter,
                        SpatialPAOptions options = {});
    std::size_t size() const override { return windows_.size(); }
    int channels() const override { return kChannels; }
    AeSample normal(std::size_t i) const override;
    AeSample pseudo_anomaly(std::size_t i, std::uint64_t seed) const override;

    const WindowRef& window(std::size_t i) const { return windows_.at(i); }
    const VideoClip& video(std::size_t v) const { return videos_.at(v); }
    void set_cache(CacheLookup lookup) { cache_ = std::move(lookup); }

private:
    std::vector<VideoClip> videos_;
    std::vector<WindowRef> windows_;
    int length_;
    Inpainter* inpainter_;
    SpatialPAOptions options_;
    CacheLookup cache_;
};

// Flow windows over frame-padded flow fields, encoded for the autoencoder.
class TemporalSampleSource : public AeSampleSource {
public:
    TemporalSampleSource(std::vector<FlowField> flows, const TrainConfig& config);
    std::size_t size() const override { return windows_.size(); }
    int channels() const override { return codec_.channels(); }
    AeSample normal(std::size_t i) const override;
    AeSample pseudo_anomaly(std::size_t i, std::uint64_t seed) const override;

    const WindowRef& window(std::size_t i) const { return windows_.at(i); }
    FlowField window_flow(std::size_t i) const;
    TemporalPA make_pa(std::size_t i, std::uint64_t seed) const;

private:
    std::vector<Tensorf> padded_;  // per video, N x 2 x H x W
    std::vector<std::string> ids_;
    std::vector<WindowRef> windows_;
    int length_;
    FlowCodec codec_;
    TemporalPAOptions pa_options_;
};

struct StepRecord {
    int epoch = 0;
    int step = 0;
    int n_normal = 0;
    int n_pa = 0;
    double loss = 0.0;
    std::optional<double> normal_loss;  // mean over normal-flagged samples of the batch
};

nlohmann::json to_json(const StepRecord& r);

struct EpochSummary {
    int epoch = 0;
    double mean_loss = 0.0;
    std::optional<double> mean_normal_loss;
    int pa_samples = 0;
    int samples = 0;
};

struct TrainHooks {
    std::function<void(const StepRecord&)> on_step;
    std::function<void(const EpochSummary&)> on_epoch;
    // Sees every batch exactly as the loss does: flags, network input, loss target.
    std::function<void(const BatchPlan&, const Tensorf& input, const Tensorf& target)> on_loss_inputs;
    std::optional<std::filesystem::path> checkpoint_dir;  // epoch_NNN.ckpt written per epoch
};

struct AeTrainOptions {
    std::string kind = "spatial-ae";
    double p = 0.4;
    int epochs = 25;
    const Checkpoint* resume = nullptr;
    nlohmann::json meta = nlohmann::json::object();  // echoed into every checkpoint
};

Checkpoint train_autoencoder(const TrainConfig& config, const AeSampleSource& source, const AeTrainOptions& options,
                             const TrainHooks& hooks = {});

Checkpoint train_spatial_ae(const TrainConfig& config, const SpatialSampleSource& source, const TrainHooks& hooks = {},
                            const Checkpoint* resume = nullptr);
Checkpoint train_temporal_ae(const TrainConfig& config, const TemporalSampleSource& source,
                             const TrainHooks& hooks = {}, const Checkpoint* resume = nullptr);

struct DiscTrainResult {
    Checkpoint checkpoint;
    double train_accuracy = 0.0;
    std::vector<double> epoch_losses;
};

// Normal features get label 0, PA features label 1. Both are N x 512.
DiscTrainResult train_discriminator(const TrainConfig& config, const Tensorf& normal_features,
                                    const Tensorf& pa_features, const TrainHooks& hooks = {});
DiscTrainResult train_discriminator(const TrainConfig& config, const Tensorf& features, const std::vector<int>& labels,
                                    const TrainHooks& hooks = {});

// Checkpoint <-> model state.
Checkpoint export_autoencoder(Autoencoder<float>& model, const std::string& kind);
Autoencoder<float> import_autoencoder(const Checkpoint& ckpt);
Checkpoint export_discriminator(Discriminator<float>& model);
Discriminator<float> import_discriminator(const Checkpoint& ckpt);

}  // namespace pavad
