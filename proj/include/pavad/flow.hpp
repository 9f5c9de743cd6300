#pragma once

#include <memory>
#include <string>

#include "pavad/video.hpp"

namespace pavad {

// (T-1) x 2 x H x W displacement field in px/frame; channel 0 horizontal,
// channel 1 vertical. Map t estimates motion from frame t to frame t + 1.
struct FlowField {
    Tensorf values;
    std::string source_video_id;

    int maps() const { return values.dim(0); }
    int height() const { return values.dim(2); }
    int width() const { return values.dim(3); }
};

class FlowBackend {
public:
    virtual ~FlowBackend() = default;
    virtual std::string name() const = 0;
    // Dense flow between two 3 x H x W frames, returned as 2 x H x W.
    virtual Tensorf estimate(const Tensorf& from, const Tensorf& to) const = 0;
};

struct TvL1Params {
    double tau = 0.25;
    double lambda = 0.15;
    double theta = 0.3;
    int scales = 0;  // 0 = as many as keep the coarsest side >= 16 px
    double zoom = 0.5;
    int warps = 5;
    double epsilon = 0.01;
    int max_iterations = 50;
    double presmooth_sigma = 0.8;
};

// Duality-based TV-L1 flow: coarse-to-fine pyramid, image warping and an
// alternating point-wise thresholding / dual projection scheme.
class TvL1Flow : public FlowBackend {
public:
    explicit TvL1Flow(TvL1Params params = {}) : p_(params) {}
    std::string name() const override { return "tvl1"; }
    Tensorf estimate(const Tensorf& from, const Tensorf& to) const override;

private:
    TvL1Params p_;
};

FlowField compute_flow(const VideoClip& clip, const FlowBackend& backend);

// Flow series padded to one map per frame by repeating the last map, so
// frame windows and flow windows share indices.
Tensorf pad_flow_to_frames(const FlowField& flow);

// Fixed affine codec between px/frame and the autoencoder's [-1, 1] range.
struct FlowCodec {
    float max_px = 8.0f;
    bool pad_to_three = true;  // else feed 2 channels

    int channels() const { return pad_to_three ? 3 : 2; }
    // (T, 2, H, W) px -> (T, channels, H, W) in [-1, 1]
    Tensorf encode(const Tensorf& flow) const;
    // (T, channels, H, W) -> (T, 2, H, W) px
    Tensorf decode(const Tensorf& coded) const;
};

// Flow cache: little-endian uint32 header (T-1, H, W) then float32 values.
void save_flow(const fs::path& file, const FlowField& flow);
FlowField load_flow(const fs::path& file, std::string video_id = {});

}  // namespace pavad
